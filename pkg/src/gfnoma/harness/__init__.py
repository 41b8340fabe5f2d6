"""Experiment orchestration: Monte Carlo, calibration, sweeps, files."""
from .calibrate import calibrate_constants
from .montecarlo import run_point
from .sweep import ExperimentSpec, run_sweep, sweep

__all__ = ["calibrate_constants", "run_point", "ExperimentSpec", "run_sweep", "sweep"]
