"""Figure generation for solver CSV outputs (training curves, solutions, sweeps)."""

from .plots import plot_dim_sweep, plot_solution, plot_training

__version__ = "0.1.0"
