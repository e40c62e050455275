"""ergotile: time-frequency tiles, bilinear operators and ergodic averages at desk scale."""

from __future__ import annotations

__version__ = "0.1.0"

from ergotile.config import ExperimentConfig, load_config, parse_config
from ergotile.exceptions import ErgotileError, InvariantViolation
from ergotile.experiments import ExperimentRegistry, ExperimentResult, run_experiment

__all__ = [
    "__version__",
    "ErgotileError",
    "ExperimentConfig",
    "ExperimentRegistry",
    "ExperimentResult",
    "InvariantViolation",
    "load_config",
    "parse_config",
    "run_experiment",
]
