"""Curvature and constant estimates: stable rank, empirical smoothness and
gradient bounds, and the parameter prescriptions of the escape guarantee."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numerics import RngState, SymmetricMatrix, sym_eigvals

__all__ = [
    "StableRankReport",
    "stable_rank",
    "TheoryConstants",
    "estimate_constants",
    "escape_prescription",
]


@dataclass(frozen=True)
class StableRankReport:
    eigenvalues: np.ndarray
    eta: float
    tau: float
    value: float

    COLUMNS = ("eta", "tau", "dim", "lambda_min", "lambda_max", "stable_rank")

    def rows(self):
        yield (self.eta, self.tau, self.eigenvalues.size,
               float(self.eigenvalues[0]), float(self.eigenvalues[-1]), self.value)


def stable_rank(H, eta: float, tau: float) -> StableRankReport:
    """Trace over spectral norm of ``(I - eta H)^(2 tau)``.

    Evaluated from the eigenvalues as ``sum_i (a_i / a_max)^(2 tau)`` with
    ``a_i = |1 - eta lambda_i|``, which never overflows.  When every factor is
    zero the matrix power is the zero matrix and the ratio is taken as its
    limit, the dimension.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not tau >= 0:
        raise ValueError("tau must be non-negative")
    H = H if isinstance(H, SymmetricMatrix) else SymmetricMatrix(H)
    lam = sym_eigvals(H)
    p = lam.size
    a = np.abs(1.0 - eta * lam)
    amax = a.max()
    if tau == 0 or amax == 0.0:
        value = float(p)
    else:
        value = float(np.sum((a / amax) ** (2.0 * tau)))
    return StableRankReport(lam, eta, tau, value)


@dataclass(frozen=True)
class TheoryConstants:
    """Empirical stand-ins for the constants in the convergence, escape and
    stability bounds.  ``G_hat`` and ``L_hat`` are measured; ``rho``,
    ``gamma``, ``F`` and ``C`` are configured; ``R = p * sigma^2``."""

    G_hat: float
    L_hat: float
    rho: float = 1.0
    gamma: float = 1.0
    F: float = 0.1
    R: float = 0.0
    C: float = 1.0

    COLUMNS = ("G_hat", "L_hat", "rho", "gamma", "F", "R", "C")

    def rows(self):
        yield (self.G_hat, self.L_hat, self.rho, self.gamma, self.F, self.R, self.C)


def estimate_constants(objective, trajectory, *, rng: RngState | None = None, n_probes: int = 100,
                       sigma: float = 0.0, rho: float = 1.0, gamma: float = 1.0, F: float = 0.1,
                       C: float = 1.0) -> TheoryConstants:
    """Measure ``G_hat`` and ``L_hat`` along a trajectory.

    ``G_hat`` is the largest per-sample gradient norm at any trajectory point.
    ``L_hat`` is the largest ``||grad(w) - grad(w')|| / ||w - w'||`` over
    ``n_probes`` random pairs drawn uniformly from the smallest ball around
    the trajectory mean that contains the trajectory (radius 1 if the
    trajectory is a single point).
    """
    traj = np.atleast_2d(np.asarray(trajectory, dtype=np.float64))
    if not np.all(np.isfinite(traj)):
        raise ValueError("trajectory has non-finite entries")
    rng = RngState(0) if rng is None else rng
    G_hat = max(float(np.max(objective.sample_grad_norms(w))) for w in traj)

    center = traj.mean(axis=0)
    radius = float(np.max(np.linalg.norm(traj - center, axis=1)))
    radius = radius if radius > 0 else 1.0
    p = traj.shape[1]

    def draw():
        d = rng.standard_normal(p)
        d /= np.linalg.norm(d)
        return center + radius * rng.uniform(1)[0] ** (1.0 / p) * d

    L_hat = 0.0
    for _ in range(n_probes):
        w1, w2 = draw(), draw()
        gap = np.linalg.norm(w1 - w2)
        if gap > 0:
            L_hat = max(L_hat, float(np.linalg.norm(objective.grad(w1) - objective.grad(w2)) / gap))
    return TheoryConstants(G_hat, L_hat, rho, gamma, F, p * sigma**2, C)


def escape_prescription(constants: TheoryConstants, H, eta: float, tau: float) -> dict:
    """Step size, noise level and horizon suggested by the escape guarantee
    for the given constants and saddle Hessian ``H``.

    Returns the stable rank at ``(eta, tau)``, the largest admissible step
    size, the smallest admissible noise variance, the minimum number of
    iterations, and the expected loss decrease the guarantee promises.
    """
    G, L, rho, gamma = constants.G_hat, constants.L_hat, constants.rho, constants.gamma
    H = H if isinstance(H, SymmetricMatrix) else SymmetricMatrix(H)
    p = H.dim
    lam = stable_rank(H, eta, tau).value
    G_safe = max(G, np.finfo(float).tiny)
    spread = max(1.0, 10.0 * G / gamma)
    eta_max = min(
        1.0 / L if L > 0 else math.inf,
        math.sqrt(gamma) * lam / (144.0 * math.sqrt(rho) * p * G_safe),
        gamma * lam / (576.0 * p * G_safe * L) if L > 0 else math.inf,
    )
    sigma2_min = 576.0 * G**2 / lam * spread
    if G > 0:
        inner = (math.sqrt(gamma) / (2.0 * math.sqrt(rho) * eta + G)) / (G * spread) + 4.0 * p
        tau_min = (24.0 + 4.0 * math.log(inner)) / (eta**2 * rho * gamma)
    else:
        tau_min = math.inf
    return {
        "stable_rank": lam,
        "eta_max": eta_max,
        "eta_ok": eta <= eta_max,
        "sigma2_min": sigma2_min,
        "tau_min": tau_min,
        "tau_ok": tau >= tau_min,
        "loss_decrease": 1.5 * math.sqrt(gamma) * G / math.sqrt(rho),
        "saddle_is_sharp": float(sym_eigvals(H)[0]) <= -math.sqrt(rho * gamma),
    }
