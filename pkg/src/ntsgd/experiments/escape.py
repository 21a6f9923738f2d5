"""Escape from a strict saddle under injected noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..numerics import RngState
from ..objectives import SaddleObjective, SaddleSpec
from ..optim import OptimizerConfig, ntsgd_step
from .results import SweepResult

__all__ = ["EscapeResult", "escape_time", "escape_experiment", "NOT_ESCAPED"]

NOT_ESCAPED = -1


@dataclass
class EscapeResult:
    runs: SweepResult
    summary: SweepResult

    def times(self, sigma: float) -> list:
        i = self.runs.columns.index("escape_time")
        return [r[i] for r in self.runs.where(sigma=sigma)]

    def median(self, sigma: float) -> float:
        return self.summary.where(sigma=sigma)[0][self.summary.columns.index("median_time")]

    def rate(self, sigma: float) -> float:
        return self.summary.where(sigma=sigma)[0][self.summary.columns.index("escape_rate")]


def escape_time(spec: SaddleSpec, cfg: OptimizerConfig, *, loss_drop: float = 0.1,
                tau_max: int = 100_000, w0=None) -> tuple[int, str]:
    """First update count ``t`` with ``f(w_t) <= f(w_0) - loss_drop``.

    Starts at the saddle (the origin) unless ``w0`` is given and uses full
    gradients.  Returns ``(t, reason)``; ``t == NOT_ESCAPED`` with reason
    ``"fixed_point"`` when a noiseless step leaves the iterate bitwise
    unchanged (it can then never move), or ``"budget"`` after ``tau_max``
    updates.
    """
    obj = SaddleObjective(spec)
    w = np.zeros(spec.dim) if w0 is None else np.array(w0, dtype=np.float64)
    target = obj.loss(w) - loss_drop
    noise_rng = RngState(cfg.seed).split("noise")
    deterministic = cfg.sigma == 0
    for t in range(1, tau_max + 1):
        eta = cfg.schedule(t, tau_max)
        w_next, _ = ntsgd_step(w, obj.grad(w), eta, cfg, noise_rng)
        if not np.all(np.isfinite(w_next)):
            return NOT_ESCAPED, "diverged"
        if deterministic and cfg.schedule.kind != "inv_t" and np.array_equal(w_next, w):
            return NOT_ESCAPED, "fixed_point"
        w = w_next
        if obj.loss(w) <= target:
            return t, "escaped"
    return NOT_ESCAPED, "budget"


def escape_experiment(spec: SaddleSpec, sigmas, cfg: OptimizerConfig, seeds, *, loss_drop: float = 0.1,
                      tau_max: int = 100_000, w0=None) -> EscapeResult:
    """Escape times for every noise level and seed, with per-level summaries.

    The summary's median is taken over all seeds, counting a run that did
    not escape as later than any that did; it is NaN when fewer than half
    of the runs escaped.
    """
    sigmas = [float(s) for s in sigmas]
    seeds = [int(s) for s in seeds]
    provenance = {"seeds": seeds, "version": __version__, "config": cfg.as_dict(),
                  "loss_drop": loss_drop, "tau_max": tau_max}
    runs = SweepResult(("sigma", "seed", "escape_time", "outcome"), provenance=provenance)
    summary = SweepResult(("sigma", "n_runs", "n_escaped", "escape_rate", "median_time"), provenance=provenance)
    for s in sigmas:
        times = []
        for seed in seeds:
            t, why = escape_time(spec, cfg.replace(sigma=s, seed=seed), loss_drop=loss_drop,
                                 tau_max=tau_max, w0=w0)
            runs.add(s, seed, t, why)
            times.append(t if t != NOT_ESCAPED else math.inf)
        escaped = sum(math.isfinite(t) for t in times)
        med = float(np.median(times)) if times else math.nan
        summary.add(s, len(seeds), escaped, escaped / len(seeds), med if math.isfinite(med) else math.nan)
    return EscapeResult(runs, summary)
