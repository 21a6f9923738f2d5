"""Coupled runs on neighbouring datasets and the generalization gap."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..datasets import NeighborPair
from ..numerics import RngState
from ..optim import OptimizerConfig, ntsgd_step, run
from .results import SweepResult

__all__ = ["CoupledTrace", "coupled_run", "StabilityResult", "stability_experiment", "generalization_gap"]


@dataclass
class CoupledTrace:
    divergence: np.ndarray
    """``||w_t - w'_t||`` for ``t = 0 .. T``."""
    first_hit: int | None
    """0-based update at which the differing index was first drawn."""
    final: np.ndarray
    final_prime: np.ndarray

    @property
    def zero_before_hit(self) -> bool:
        """Divergence is exactly zero through the first update that draws the differing index."""
        stop = self.divergence.size if self.first_hit is None else self.first_hit + 1
        return bool(np.all(self.divergence[:stop] == 0.0))


def coupled_run(objective, objective_prime, w0, cfg: OptimizerConfig, index: int | None = None) -> CoupledTrace:
    """Step two optimizers in lockstep with shared minibatch indices and noise.

    Each trajectory is identical to ``run(objective, w0, cfg)`` (respectively
    ``objective_prime``) with the same seed; stepping them together only
    avoids storing iterates.
    """
    if objective.dim != objective_prime.dim or objective.n_samples != objective_prime.n_samples:
        raise ValueError("coupled objectives must have matching dimension and sample count")
    w = np.array(w0, dtype=np.float64)
    if w.shape != (objective.dim,):
        raise ValueError(f"initial point has shape {w.shape}, objective expects ({objective.dim},)")
    v = w.copy()
    T, n, m = cfg.horizon, objective.n_samples, cfg.batch_size
    root = RngState(cfg.seed)
    batch_rng, noise_rng = root.split("batch"), root.split("noise")
    div = np.zeros(T + 1)
    first_hit = None
    for t in range(T):
        idx = batch_rng.integers(n, m)
        if first_hit is None and index is not None and np.any(idx == index):
            first_hit = t
        eta = cfg.schedule(t + 1, T)
        noise = noise_rng.standard_normal(w.size) * cfg.sigma if cfg.sigma > 0 else None
        w, _ = ntsgd_step(w, objective.grad(w, idx), eta, cfg, noise=noise)
        v, _ = ntsgd_step(v, objective_prime.grad(v, idx), eta, cfg, noise=noise)
        div[t + 1] = np.linalg.norm(w - v)
    return CoupledTrace(div, first_hit, w, v)


def generalization_gap(objective, test_objective, w0, cfg: OptimizerConfig) -> tuple[float, str]:
    """Held-out loss minus training loss of the final iterate of one run."""
    rec = run(objective, w0, cfg)
    if rec.diverged:
        return math.nan, rec.status
    return test_objective.loss(rec.final) - objective.loss(rec.final), rec.status


@dataclass
class StabilityResult:
    divergence: SweepResult
    coupling: SweepResult
    gap: SweepResult
    gap_summary: SweepResult
    gap_non_increasing: bool

    def mean_divergence_at(self, t: int) -> float:
        return self.divergence.where(t=t)[0][self.divergence.columns.index("mean_divergence")]


def stability_experiment(factory, pair: NeighborPair, cfg: OptimizerConfig, seeds, *, test_data=None,
                         gap_sigmas=(), record_every: int | None = None, w0=None) -> StabilityResult:
    """Parameter divergence of coupled runs on ``pair`` plus generalization gaps.

    ``factory(dataset)`` builds the objective for a dataset.  For every seed
    the two runs share minibatch indices and noise, so their divergence is
    driven only by the replaced sample.  The divergence table holds the mean
    over seeds at every ``record_every``-th update (and the last).

    For each ``sigma`` in ``gap_sigmas`` the held-out minus training loss of
    independent runs on ``pair.base`` is averaged over the seeds (the
    configured seeds are reused at every noise level).  A gap that grows
    with ``sigma`` raises a warning, not an error.
    """
    seeds = [int(s) for s in seeds]
    obj, obj_prime = factory(pair.base), factory(pair.variant)
    if obj.dim != obj_prime.dim:
        raise ValueError("neighbouring objectives have different dimensions")
    w0 = np.zeros(obj.dim) if w0 is None else np.asarray(w0, dtype=np.float64)
    T = cfg.horizon
    every = record_every or max(1, T // 100)
    steps = sorted(set(range(0, T + 1, every)) | {T})

    provenance = {"seeds": seeds, "version": __version__, "config": cfg.as_dict(), "index": pair.index}
    coupling = SweepResult(("seed", "first_hit", "zero_before_hit", "final_divergence"), provenance=provenance)
    traces = []
    for seed in seeds:
        tr = coupled_run(obj, obj_prime, w0, cfg.replace(seed=seed), pair.index)
        traces.append(tr.divergence[steps])
        coupling.add(seed, -1 if tr.first_hit is None else tr.first_hit, tr.zero_before_hit,
                     float(tr.divergence[-1]))
    traces = np.array(traces)
    divergence = SweepResult(("t", "mean_divergence", "max_divergence"), provenance=provenance)
    for k, t in enumerate(steps):
        divergence.add(t, float(traces[:, k].mean()), float(traces[:, k].max()))

    gap = SweepResult(("sigma", "seed", "gap", "status"), provenance=provenance)
    gap_summary = SweepResult(("sigma", "n_ok", "mean_gap"), provenance=provenance)
    means = []
    if gap_sigmas:
        if test_data is None:
            raise ValueError("gap_sigmas needs test_data")
        test_obj = factory(test_data)
        for s in gap_sigmas:
            vals = []
            for seed in seeds:
                g, status = generalization_gap(obj, test_obj, w0, cfg.replace(sigma=float(s), seed=seed))
                gap.add(float(s), seed, g, status)
                if math.isfinite(g):
                    vals.append(g)
            means.append(float(np.mean(vals)) if vals else math.nan)
            gap_summary.add(float(s), len(vals), means[-1])
    ok = all(b <= a for a, b in zip(means, means[1:]))
    if not ok:
        warnings.warn(f"generalization gap is not non-increasing in sigma: {means}", RuntimeWarning, stacklevel=2)
    return StabilityResult(divergence, coupling, gap, gap_summary, ok)
