"""Experiment drivers that turn optimizer runs into tables."""

from .escape import NOT_ESCAPED, EscapeResult, escape_experiment, escape_time
from .results import SweepResult, emit_csv, read_csv
from .stability import CoupledTrace, StabilityResult, coupled_run, generalization_gap, stability_experiment
from .sweeps import ConvergenceResult, SparsityResult, convergence_sweep, loglog_slope, sparsity_sweep
from .theory import StableRankReport, TheoryConstants, escape_prescription, estimate_constants, stable_rank

__all__ = [
    "NOT_ESCAPED",
    "EscapeResult",
    "escape_experiment",
    "escape_time",
    "SweepResult",
    "emit_csv",
    "read_csv",
    "CoupledTrace",
    "StabilityResult",
    "coupled_run",
    "generalization_gap",
    "stability_experiment",
    "ConvergenceResult",
    "SparsityResult",
    "convergence_sweep",
    "loglog_slope",
    "sparsity_sweep",
    "StableRankReport",
    "TheoryConstants",
    "escape_prescription",
    "estimate_constants",
    "stable_rank",
]
