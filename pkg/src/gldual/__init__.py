"""Primal and dual variational checks for a discrete Ginzburg-Landau energy."""

from .config import Scenario, load_config, parse_config
from .grid import Grid, GridSpec, build_grid
from .harness import run_scenario
from .model import ModelParams, energy_J, grad_J, hess_J
from .report import Report

__version__ = "0.1.0"

__all__ = [
    "Grid", "GridSpec", "build_grid", "ModelParams", "energy_J", "grad_J", "hess_J",
    "Scenario", "parse_config", "load_config", "run_scenario", "Report", "__version__",
]
