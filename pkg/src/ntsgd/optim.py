"""Vanilla, truncated and noisy-truncated SGD.

One update of the general method is::

    w' = w - eta * truncate(g) + eta ** (1/2 + beta) * b,    b ~ N(0, sigma^2 I)

With ``sigma == 0`` this is truncated SGD, and with ``cut_rate == 0`` as
well it is plain SGD.  :func:`run` performs exactly ``horizon`` updates,
producing ``w_1 ... w_T`` from ``w_0``.

Random streams for a run are children of ``RngState(cfg.seed)``:
``"batch"`` (minibatch indices), ``"noise"`` (injected Gaussian noise) and
``"sample"`` (the index ``J`` of the returned uniformly-sampled iterate).
Two runs with the same seed therefore see identical minibatch indices and
identical noise, whatever their datasets.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .numerics import RngState, sample_gaussian
from .truncation import TruncationResult, gradient_truncate, threshold_truncate

__all__ = [
    "StepSchedule",
    "OptimizerConfig",
    "RunRecord",
    "truncate",
    "sgd_step",
    "tsgd_step",
    "ntsgd_step",
    "run",
]


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule indexed by the 1-based update number ``t``.

    ``constant``: ``c``; ``inv_sqrt_t``: ``c / sqrt(T)`` for the run horizon
    ``T``; ``inv_t``: ``c / t``.
    """

    kind: str = "constant"
    c: float = 0.1

    KINDS = ("constant", "inv_sqrt_t", "inv_t")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}; expected one of {self.KINDS}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"schedule constant must be positive, got {self.c}")

    @classmethod
    def constant(cls, eta: float) -> "StepSchedule":
        return cls("constant", eta)

    @classmethod
    def inv_sqrt_t(cls, c: float) -> "StepSchedule":
        return cls("inv_sqrt_t", c)

    @classmethod
    def inv_t(cls, c: float) -> "StepSchedule":
        return cls("inv_t", c)

    def __call__(self, t: int, horizon: int | None = None) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "inv_sqrt_t":
            if not horizon:
                raise ValueError("inv_sqrt_t needs a positive horizon")
            return self.c / math.sqrt(horizon)
        if t < 1:
            raise ValueError("inv_t is defined for t >= 1")
        return self.c / t


@dataclass(frozen=True)
class OptimizerConfig:
    cut_rate: float = 0.1
    sigma: float = 1e-3
    beta: float = 0.0
    schedule: StepSchedule = field(default_factory=lambda: StepSchedule.constant(0.1))
    batch_size: int = 100
    horizon: int = 1000
    seed: int = 0
    record_every: int = 100
    fixed_threshold: float | None = None
    """When set, keep ``|g_i| >= fixed_threshold`` instead of energy truncation."""

    def __post_init__(self):
        if not 0.0 <= self.cut_rate <= 1.0:
            raise ValueError(f"cut_rate must lie in [0, 1], got {self.cut_rate}")
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError(f"beta must lie in [0, 1/2], got {self.beta}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.fixed_threshold is not None and not self.fixed_threshold >= 0:
            raise ValueError("fixed_threshold must be non-negative")

    def replace(self, **changes) -> "OptimizerConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        sched = d.pop("schedule")
        d["schedule"] = sched["kind"]
        d["lr"] = sched["c"]
        return d


@dataclass(frozen=True)
class RunRecord:
    """Trajectory summary of one optimizer run.

    Per-recorded-step series are aligned arrays.  ``sparsity`` and ``kappa``
    describe the minibatch gradient truncated at that step; both are NaN on
    the final row (no step is taken from ``w_T``) and ``kappa`` is NaN when
    truncation kept nothing.
    """

    iterations: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    sparsity: np.ndarray
    kappa: np.ndarray
    w_norm: np.ndarray
    final: np.ndarray
    sampled: np.ndarray
    sample_index: int
    config: OptimizerConfig
    status: str = "ok"
    mean_sparsity: float = float("nan")
    wall_time: float = 0.0
    iterates: np.ndarray | None = None
    batch_indices: np.ndarray | None = None

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    COLUMNS = ("t", "loss", "grad_norm", "sparsity", "kappa", "w_norm")

    def rows(self):
        for i in range(self.iterations.size):
            yield (int(self.iterations[i]), self.loss[i], self.grad_norm[i],
                   self.sparsity[i], self.kappa[i], self.w_norm[i])


def truncate(g, cfg: OptimizerConfig) -> TruncationResult:
    if cfg.fixed_threshold is not None:
        return threshold_truncate(g, cfg.fixed_threshold)
    return gradient_truncate(g, cfg.cut_rate)


def sgd_step(w, g, eta: float) -> np.ndarray:
    """Reference update ``w - eta * g``."""
    return w - eta * g


def ntsgd_step(w, g, eta: float, cfg: OptimizerConfig, rng: RngState | None = None, *, noise=None):
    """One noisy truncated step; returns ``(w', truncation)``.

    ``noise`` overrides the Gaussian draw with a given vector ``b`` (already
    scaled, so ``sigma`` is ignored).  With ``sigma == 0`` and no override
    the noise term is skipped entirely and ``rng`` is untouched.
    """
    w = np.asarray(w, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if w.shape != g.shape or w.ndim != 1:
        raise ValueError(f"dimension mismatch: w {w.shape} vs g {g.shape}")
    if not eta > 0:
        raise ValueError(f"step size must be positive, got {eta}")
    res = truncate(g, cfg)
    w_new = w - eta * res.truncated
    if noise is None and cfg.sigma > 0:
        if rng is None:
            raise ValueError("sigma > 0 needs an RngState")
        noise = sample_gaussian(rng, w.size, cfg.sigma)
    if noise is not None:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != w.shape:
            raise ValueError(f"dimension mismatch: noise {noise.shape} vs w {w.shape}")
        w_new = w_new + eta ** (0.5 + cfg.beta) * noise
    return w_new, res


def tsgd_step(w, g, eta: float, cut_rate: float):
    """Truncated step without noise."""
    return ntsgd_step(w, g, eta, OptimizerConfig(cut_rate=cut_rate, sigma=0.0))


def run(objective, w0, cfg: OptimizerConfig, *, keep_iterates: bool = False, trace_indices: bool = False) -> RunRecord:
    """Run ``cfg.horizon`` updates of noisy truncated SGD on ``objective``.

    Minibatches of ``cfg.batch_size`` indices are drawn uniformly with
    replacement; objectives without data use their full gradient.  Full-data
    loss and gradient norm are evaluated every ``record_every`` updates and
    at the end.  A non-finite iterate stops the run with status
    ``"diverged"``.

    ``keep_iterates`` stores the iterate at each recorded step;
    ``trace_indices`` stores every minibatch (shape ``T x m``).
    """
    start = time.perf_counter()
    w = np.array(w0, dtype=np.float64)
    if w.shape != (objective.dim,):
        raise ValueError(f"initial point has shape {w.shape}, objective expects ({objective.dim},)")
    T = cfg.horizon
    n = objective.n_samples
    m = cfg.batch_size
    root = RngState(cfg.seed)
    batch_rng = root.split("batch")
    noise_rng = root.split("noise")
    J = int(root.split("sample").integers(T, 1)[0]) + 1 if T > 0 else 0

    rec = {k: [] for k in ("t", "loss", "grad_norm", "sparsity", "kappa", "w_norm")}
    iterates = [] if keep_iterates else None
    indices = np.empty((T, m), dtype=np.int64) if trace_indices and n else None
    sampled = w.copy()
    status = "ok"
    sparsity_sum = 0.0
    steps_done = 0

    def record(t, wt, res):
        loss = objective.loss(wt)
        rec["t"].append(t)
        rec["loss"].append(loss)
        rec["grad_norm"].append(float(np.linalg.norm(objective.grad(wt))))
        rec["sparsity"].append(res.sparsity if res is not None else math.nan)
        kappa = res.threshold if res is not None else None
        rec["kappa"].append(math.nan if kappa is None else kappa)
        rec["w_norm"].append(float(np.linalg.norm(wt)))
        if iterates is not None:
            iterates.append(wt.copy())
        return loss

    # overflow on the way to a non-finite iterate is reported as status, not warned
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            if n:
                idx = batch_rng.integers(n, m)
                if indices is not None:
                    indices[t] = idx
                g = objective.grad(w, idx)
            else:
                g = objective.grad(w)
            eta = cfg.schedule(t + 1, T)
            w_next, res = ntsgd_step(w, g, eta, cfg, noise_rng)
            sparsity_sum += res.sparsity
            steps_done += 1
            if t % cfg.record_every == 0:
                if not math.isfinite(record(t, w, res)):
                    status = "diverged"
                    break
            w = w_next
            if not math.isfinite(w @ w):
                status = "diverged"
                break
            if t + 1 == J:
                sampled = w.copy()

        if status == "ok" and T > 0:
            if not math.isfinite(record(T, w, None)):
                status = "diverged"

    arr = {k: np.asarray(v, dtype=np.int64 if k == "t" else np.float64) for k, v in rec.items()}
    return RunRecord(
        iterations=arr["t"],
        loss=arr["loss"],
        grad_norm=arr["grad_norm"],
        sparsity=arr["sparsity"],
        kappa=arr["kappa"],
        w_norm=arr["w_norm"],
        final=w,
        sampled=sampled if T > 0 else w.copy(),
        sample_index=J,
        config=cfg,
        status=status,
        mean_sparsity=sparsity_sum / steps_done if steps_done else math.nan,
        wall_time=time.perf_counter() - start,
        iterates=np.array(iterates) if iterates is not None else None,
        batch_indices=indices,
    )
