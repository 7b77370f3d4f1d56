"""Deterministic SVG line plots for scenario CSVs.

No plotting library and no external process: the same CSV always renders
to the same bytes. Fixed 800x500 canvas, fixed palette, one polyline per
series (a lone point renders as a circle marker).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import SchemaMismatch

WIDTH, HEIGHT = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class PlotSpec:
    x: str
    y: str
    series: tuple[str, ...]
    logy: bool


PLOT_SPECS: dict[str, PlotSpec] = {
    "convergence": PlotSpec("t", "dist_u", ("cell",), logy=True),
    "similarity_sweep": PlotSpec("beta", "xi_realized", ("seed",), logy=False),
    "sample_sweep": PlotSpec("N", "final_dist_u", ("seed",), logy=True),
    "grip_sweep": PlotSpec("kN", "delta_hat", ("seed",), logy=True),
    "fed_compare": PlotSpec("round", "holdout_mse", ("protocol", "seed", "client"), logy=True),
    "init_quality": PlotSpec("N", "dist_u0", ("seed",), logy=True),
}


def read_scenario_csv(path) -> tuple[dict, list[dict]]:
    """Read a scenario CSV: leading '#' metadata line plus data rows."""
    text = Path(path).read_text()
    meta = {}
    lines = text.splitlines()
    data_lines = []
    for line in lines:
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, _, val = token.partition("=")
                    meta[key] = val
        else:
            data_lines.append(line)
    reader = csv.DictReader(io.StringIO("\n".join(data_lines)))
    return meta, list(reader)


def _require_columns(rows: list[dict], needed: list[str], scenario: str) -> None:
    have = set(rows[0].keys()) if rows else set()
    missing = [col for col in needed if col not in have]
    if missing:
        raise SchemaMismatch(
            f"CSV does not match scenario {scenario!r}: missing columns {missing}"
        )


def _spec_for(scenario: str, rows: list[dict]) -> PlotSpec:
    if scenario not in PLOT_SPECS:
        raise SchemaMismatch(f"no plot layout for scenario {scenario!r}")
    spec = PLOT_SPECS[scenario]
    if scenario == "similarity_sweep" and rows and "beta" not in rows[0]:
        spec = PlotSpec("xi", spec.y, spec.series, spec.logy)
    return spec


def _ticks_linear(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + i * (hi - lo) / (count - 1) for i in range(count)]


def _ticks_log(lo: float, hi: float, max_count: int = 6) -> list[float]:
    lo_e, hi_e = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    exps = list(range(lo_e, hi_e + 1))
    if len(exps) > max_count:
        step = math.ceil(len(exps) / max_count)
        exps = exps[::step]
    return [10.0 ** e for e in exps]


def render_plots(csv_path, scenario: str) -> list[Path]:
    """Render the scenario's default plot next to ``csv_path``.

    Validates the CSV schema first; missing columns raise SchemaMismatch.
    Returns the written SVG paths.
    """
    csv_path = Path(csv_path)
    _, rows = read_scenario_csv(csv_path)
    if not rows:
        raise SchemaMismatch("CSV has no data rows")
    spec = _spec_for(scenario, rows)
    _require_columns(rows, [spec.x, spec.y, *spec.series], scenario)

    series: dict[tuple, list[tuple[float, float]]] = {}
    for row in rows:
        key = tuple(row[c] for c in spec.series)
        series.setdefault(key, []).append((float(row[spec.x]), float(row[spec.y])))
    for pts in series.values():
        pts.sort(key=lambda p: p[0])

    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    if spec.logy:
        positive = [y for y in ys if y > 0]
        y_lo = min(positive) if positive else 1e-16
        y_hi = max(positive) if positive else 1.0
        if y_hi <= y_lo:
            y_hi = y_lo * 10
    else:
        y_lo, y_hi = min(ys), max(ys)
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        if x_hi == x_lo:
            return MARGIN_L + plot_w / 2
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        if spec.logy:
            y = max(y, y_lo)
            frac = (math.log10(y) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo) or 1.0)
        else:
            frac = (y - y_lo) / (y_hi - y_lo)
        return MARGIN_T + plot_h * (1.0 - frac)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333333" stroke-width="1"/>',
        f'<text x="{MARGIN_L}" y="{MARGIN_T - 10}" font-family="monospace" font-size="13">'
        f"{scenario}: {spec.y} vs {spec.x}</text>",
    ]

    for tick in _ticks_linear(x_lo, x_hi):
        tx = px(tick)
        parts.append(f'<line x1="{tx:.2f}" y1="{MARGIN_T + plot_h}" x2="{tx:.2f}" '
                     f'y2="{MARGIN_T + plot_h + 5}" stroke="#333333"/>')
        parts.append(f'<text x="{tx:.2f}" y="{MARGIN_T + plot_h + 20}" text-anchor="middle" '
                     f'font-family="monospace" font-size="11">{tick:.3g}</text>')
    yticks = _ticks_log(y_lo, y_hi) if spec.logy else _ticks_linear(y_lo, y_hi)
    for tick in yticks:
        ty = py(tick)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{ty:.2f}" x2="{MARGIN_L}" '
                     f'y2="{ty:.2f}" stroke="#333333"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{ty + 4:.2f}" text-anchor="end" '
                     f'font-family="monospace" font-size="11">{tick:.3g}</text>')

    for idx, key in enumerate(sorted(series)):
        color = PALETTE[idx % len(PALETTE)]
        pts = series[key]
        if len(pts) == 1:
            x, y = pts[0]
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        else:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                         'stroke-width="1.5"/>')
    parts.append("</svg>")

    out = csv_path.with_suffix(".svg")
    out.write_text("\n".join(parts) + "\n")
    return [out]
