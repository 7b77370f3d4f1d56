"""Experiment spec files: a flat key-value grammar and grid expansion.

Grammar: one ``key = value`` pair per line, ``#``-prefixed comments and
blank lines ignored. Repeating a key turns it into a list (a grid axis).
Values are parsed as int, then float, then bool (``true``/``false``),
falling back to bare strings. The cross product of all list-valued axes,
in the documented axis order, defines the experiment cells.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

# Keys that enumerate grid axes, in cross-product order. Everything else is
# a scalar setting; ``seed`` is deliberately last so seeds vary fastest.
AXIS_ORDER = ("d", "r", "k", "beta", "xi", "N", "n", "T", "protocol", "seed")

_SCALAR_KEYS = {
    "scenario", "output_dir", "plot", "kappa", "sigma_min", "ridge",
    "trials", "rounds", "local_steps", "learning_rate", "init_scale",
    "holdout",
}

_DEFAULTS = {
    "kappa": 1.0,
    "sigma_min": 1.0,
    "ridge": 0.0,
    "trials": 256,
    "init_scale": 1.0,
    "holdout": 500,
}


class SpecError(ValueError):
    """Invalid experiment spec; maps to exit code 2 in the CLI."""


@dataclass
class ExperimentSpec:
    scenario: str
    grid: dict[str, list] = field(default_factory=dict)
    output_dir: Path = Path("out")
    plot: bool = False


def _parse_value(raw: str):
    text = raw.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_config(text: str) -> ExperimentSpec:
    grid: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SpecError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if not key:
            raise SpecError(f"line {lineno}: empty key")
        grid.setdefault(key, []).append(_parse_value(raw))

    scenario = grid.pop("scenario", [None])[0]
    if scenario is None:
        raise SpecError("missing required key 'scenario'")
    output_dir = Path(str(grid.pop("output_dir", ["out"])[0]))
    plot = grid.pop("plot", [False])[0]
    if not isinstance(plot, bool):
        raise SpecError(f"plot must be true or false, got {plot!r}")
    return ExperimentSpec(scenario=str(scenario), grid=grid, output_dir=output_dir, plot=plot)


def load_spec(path) -> ExperimentSpec:
    return parse_config(Path(path).read_text())


# scenario name -> (required keys, allowed-but-optional keys)
SCENARIO_KEYS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "convergence": (
        ("d", "r", "k", "N", "n", "T", "beta", "seed"),
        ("kappa", "sigma_min", "ridge"),
    ),
    "similarity_sweep": (
        ("d", "r", "k", "seed"),
        ("beta", "xi", "kappa", "sigma_min"),
    ),
    "sample_sweep": (
        ("d", "r", "k", "N", "n", "T", "beta", "seed"),
        ("kappa", "sigma_min", "ridge"),
    ),
    "grip_sweep": (
        ("d", "r", "k", "N", "seed"),
        ("trials",),
    ),
    "fed_compare": (
        ("d", "r", "k", "N", "protocol", "rounds", "local_steps",
         "learning_rate", "seed"),
        ("beta", "kappa", "sigma_min", "init_scale", "holdout"),
    ),
    "init_quality": (
        ("d", "r", "k", "N", "beta", "seed"),
        ("kappa", "sigma_min", "n", "T"),
    ),
}


def validate_spec(spec: ExperimentSpec) -> None:
    """Check scenario, axis presence and non-emptiness before any work runs."""
    if spec.scenario not in SCENARIO_KEYS:
        raise SpecError(
            f"unknown scenario {spec.scenario!r}; expected one of {sorted(SCENARIO_KEYS)}"
        )
    required, optional = SCENARIO_KEYS[spec.scenario]
    if spec.scenario == "similarity_sweep":
        if ("beta" in spec.grid) == ("xi" in spec.grid):
            raise SpecError("similarity_sweep needs exactly one of 'beta' or 'xi'")
    for key in required:
        if key not in spec.grid or not spec.grid[key]:
            raise SpecError(f"scenario {spec.scenario!r} requires non-empty key {key!r}")
    if not spec.grid.get("seed"):
        raise SpecError("at least one seed is required")
    allowed = set(required) | set(optional) | _SCALAR_KEYS | set(AXIS_ORDER)
    for key in spec.grid:
        if key not in allowed:
            raise SpecError(f"key {key!r} is not understood by scenario {spec.scenario!r}")


def expand_grid(spec: ExperimentSpec) -> list[dict]:
    """Cross product of all axis keys, deterministic cell order.

    Each cell is a flat dict of scalars, including single-valued settings
    and defaults, plus its ``cell`` index.
    """
    axes = [(key, spec.grid[key]) for key in AXIS_ORDER if key in spec.grid]
    scalars = {}
    for key, values in spec.grid.items():
        if key in AXIS_ORDER:
            continue
        if len(values) != 1:
            raise SpecError(f"key {key!r} cannot be a grid axis")
        scalars[key] = values[0]
    for key, default in _DEFAULTS.items():
        scalars.setdefault(key, default)

    cells = []
    names = [name for name, _ in axes]
    for idx, combo in enumerate(itertools.product(*(vals for _, vals in axes))):
        cell = dict(scalars)
        cell.update(zip(names, combo))
        cell["cell"] = idx
        cells.append(cell)
    return cells
