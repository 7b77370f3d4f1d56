"""Config-driven experiment runner, CSV emission, and static SVG plots."""

from .config import ExperimentSpec, expand_grid, load_spec, parse_config, validate_spec
from .scenarios import SCENARIOS, run_experiment
from .svgplot import read_scenario_csv, render_plots

__all__ = [
    "ExperimentSpec", "parse_config", "load_spec", "validate_spec", "expand_grid",
    "SCENARIOS", "run_experiment", "read_scenario_csv", "render_plots",
]
