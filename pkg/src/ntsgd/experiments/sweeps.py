"""Convergence-rate and sparsity/accuracy sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..numerics import RngState
from ..optim import OptimizerConfig, StepSchedule, run
from .results import SweepResult

__all__ = [
    "ConvergenceResult",
    "convergence_sweep",
    "loglog_slope",
    "SparsityResult",
    "sparsity_sweep",
]


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``; NaN with fewer than two points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if np.count_nonzero(keep) < 2:
        return math.nan
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


@dataclass
class ConvergenceResult:
    runs: SweepResult
    summary: SweepResult
    slope_sampled: float
    slope_min: float

    @property
    def slope_defined(self) -> bool:
        return not math.isnan(self.slope_min)


def convergence_sweep(objective, cfg: OptimizerConfig, horizons, seeds, *, w0=None,
                      n_records: int = 100) -> ConvergenceResult:
    """Squared gradient norms against the horizon ``T`` with ``eta = c / sqrt(T)``.

    ``c`` is taken from ``cfg.schedule``.  Per horizon the runs are
    summarised by the mean over seeds of ``||grad L_S(w_J)||^2`` (``w_J`` the
    uniformly sampled iterate) and of ``min_t ||grad L_S(w_t)||^2`` over the
    ``n_records`` evenly spaced recorded steps.  Diverged runs are left out
    of the means and counted in the summary.
    """
    horizons = [int(T) for T in horizons]
    seeds = [int(s) for s in seeds]
    if not horizons or not seeds:
        raise ValueError("horizons and seeds must be non-empty")
    w0 = np.zeros(objective.dim) if w0 is None else np.asarray(w0, dtype=np.float64)
    schedule = StepSchedule.inv_sqrt_t(cfg.schedule.c)
    provenance = {"seeds": seeds, "version": __version__, "config": cfg.as_dict()}
    runs = SweepResult(("T", "seed", "eta", "grad_sq_sampled", "grad_sq_min", "final_loss", "status"),
                       provenance=provenance)
    summary = SweepResult(("T", "n_ok", "n_diverged", "mean_grad_sq_sampled", "mean_grad_sq_min"),
                          provenance=provenance)

    means_sampled, means_min = [], []
    for T in horizons:
        c = cfg.replace(schedule=schedule, horizon=T, record_every=max(1, T // n_records))
        sampled_vals, min_vals = [], []
        for seed in seeds:
            rec = run(objective, w0, c.replace(seed=seed))
            if rec.diverged:
                runs.add(T, seed, schedule(1, T), math.nan, math.nan, math.nan, rec.status)
                continue
            gs = float(np.sum(objective.grad(rec.sampled) ** 2))
            gm = float(np.min(rec.grad_norm) ** 2)
            sampled_vals.append(gs)
            min_vals.append(gm)
            runs.add(T, seed, schedule(1, T), gs, gm, float(rec.loss[-1]), rec.status)
        ms = float(np.mean(sampled_vals)) if sampled_vals else math.nan
        mm = float(np.mean(min_vals)) if min_vals else math.nan
        means_sampled.append(ms)
        means_min.append(mm)
        summary.add(T, len(min_vals), len(seeds) - len(min_vals), ms, mm)

    return ConvergenceResult(runs, summary, loglog_slope(horizons, means_sampled),
                             loglog_slope(horizons, means_min))


@dataclass
class SparsityResult:
    runs: SweepResult
    summary: SweepResult

    def mean(self, column: str, cut_rate: float, sigma: float) -> float:
        rows = self.summary.where(cut_rate=cut_rate, sigma=sigma)
        if not rows:
            raise KeyError((cut_rate, sigma))
        return rows[0][self.summary.columns.index(column)]


def sparsity_sweep(objective, test_data, cut_rates, sigmas, seeds, cfg: OptimizerConfig, *,
                   extra_cells=(), init=None) -> SparsityResult:
    """Train over the grid ``cut_rates x sigmas`` (plus ``extra_cells``
    ``(cut_rate, sigma)`` pairs) for every seed.

    Each cell reports the mean truncation sparsity over all steps, the final
    training loss and, when the objective can classify, train and held-out
    accuracy.  The initial point for a seed is ``init(objective, rng)`` (by
    default ``objective.init_params``) with ``rng`` derived from the seed
    alone, so every cell of a seed starts from the same parameters.
    """
    cut_rates = [float(e) for e in cut_rates]
    sigmas = [float(s) for s in sigmas]
    seeds = [int(s) for s in seeds]
    if not cut_rates or not sigmas or not seeds:
        raise ValueError("grids and seeds must be non-empty")
    cells = [(e, s) for s in sigmas for e in cut_rates]
    cells += [(float(e), float(s)) for e, s in extra_cells if (float(e), float(s)) not in cells]
    init = init or (lambda obj, rng: obj.init_params(rng))
    can_classify = hasattr(objective, "accuracy")

    provenance = {"seeds": seeds, "version": __version__, "config": cfg.as_dict()}
    runs = SweepResult(("cut_rate", "sigma", "seed", "mean_sparsity", "final_loss",
                        "train_accuracy", "test_accuracy", "status"), provenance=provenance)
    summary = SweepResult(("cut_rate", "sigma", "n_ok", "mean_sparsity", "final_loss",
                           "train_accuracy", "test_accuracy"), provenance=provenance)

    for e, s in cells:
        acc = {k: [] for k in ("sp", "loss", "tr", "te")}
        for seed in seeds:
            w0 = init(objective, RngState(seed).split("init"))
            rec = run(objective, w0, cfg.replace(cut_rate=e, sigma=s, seed=seed))
            if rec.diverged:
                runs.add(e, s, seed, rec.mean_sparsity, math.nan, math.nan, math.nan, rec.status)
                continue
            tr = objective.accuracy(rec.final) if can_classify else math.nan
            te = objective.accuracy(rec.final, test_data) if can_classify and test_data is not None else math.nan
            runs.add(e, s, seed, rec.mean_sparsity, float(rec.loss[-1]), tr, te, rec.status)
            acc["sp"].append(rec.mean_sparsity)
            acc["loss"].append(float(rec.loss[-1]))
            acc["tr"].append(tr)
            acc["te"].append(te)
        means = [float(np.mean(acc[k])) if acc[k] else math.nan for k in ("sp", "loss", "tr", "te")]
        summary.add(e, s, len(acc["sp"]), *means)
    return SparsityResult(runs, summary)
