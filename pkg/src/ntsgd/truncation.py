"""Energy-based gradient truncation.

Coordinates are ranked by magnitude (descending, ties by ascending index)
and the shortest prefix of that ranking is kept whose squared norm is at
least ``(1 - cut_rate) * ||g||^2``.  Everything else goes to the residual,
so ``g == truncated + residual`` holds coordinate by coordinate.

The energy condition is evaluated on the *dropped* side,
``sum(dropped squares) <= cut_rate * ||g||^2``, with the dropped sums
accumulated from the smallest magnitude upward and ``||g||^2`` taken as the
last partial sum.  That makes the two endpoints exact in floating point:
``cut_rate == 0`` drops only exact zeros and ``cut_rate == 1`` keeps nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TruncationResult", "gradient_truncate", "threshold_truncate"]


@dataclass(frozen=True)
class TruncationResult:
    truncated: np.ndarray
    residual: np.ndarray
    kept_mask: np.ndarray
    threshold: float | None
    """Smallest kept magnitude; ``None`` when nothing is kept."""

    @property
    def n_kept(self) -> int:
        return int(np.count_nonzero(self.kept_mask))

    @property
    def sparsity(self) -> float:
        """Fraction of coordinates zeroed by truncation."""
        return 1.0 - self.n_kept / self.kept_mask.size

    @property
    def kept_energy_ratio(self) -> float:
        total = float(np.dot(self.truncated, self.truncated) + np.dot(self.residual, self.residual))
        if total == 0.0:
            return 1.0
        return float(np.dot(self.truncated, self.truncated)) / total


def _check_gradient(g) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise ValueError(f"gradient must be a non-empty vector, got shape {g.shape}")
    return g


def _split(g: np.ndarray, mask: np.ndarray, threshold) -> TruncationResult:
    truncated = g * mask
    # one side of each coordinate is zero, so the subtraction is exact
    return TruncationResult(truncated, g - truncated, mask, threshold)


def gradient_truncate(g, cut_rate: float) -> TruncationResult:
    """Keep the minimal set of largest-magnitude coordinates of ``g`` that
    carries at least ``1 - cut_rate`` of its squared norm.

    >>> r = gradient_truncate([3.0, 1.0, 2.0, 0.5], 0.2)
    >>> r.truncated.tolist(), r.threshold, r.sparsity
    ([3.0, 0.0, 2.0, 0.0], 2.0, 0.5)
    """
    if not 0.0 <= cut_rate <= 1.0:
        raise ValueError(f"cut_rate must lie in [0, 1], got {cut_rate}")
    g = _check_gradient(g)
    if not np.isfinite(g).all():
        raise ValueError("gradient has NaN components" if np.isnan(g).any() else "gradient has infinite components")

    mag = np.abs(g)
    order = np.argsort(-mag, kind="stable")
    sq = mag[order]
    if sq[0] > 0:
        # power-of-two rescale: exact, and keeps huge entries from overflowing
        sq = np.ldexp(sq, -np.frexp(sq[0])[1])
    sq *= sq
    # tail[j - 1] = energy of the j smallest coordinates
    tail = np.cumsum(sq[::-1])
    if cut_rate == 0.0:
        # squares of tiny entries can underflow; only exact zeros may go
        n_drop = int(np.count_nonzero(mag == 0.0))
    else:
        n_drop = int(np.searchsorted(tail, cut_rate * tail[-1], side="right"))
    n_keep = g.size - n_drop

    mask = np.zeros(g.size, dtype=bool)
    mask[order[:n_keep]] = True
    threshold = float(mag[order[n_keep - 1]]) if n_keep else None
    return _split(g, mask, threshold)


def threshold_truncate(g, threshold: float) -> TruncationResult:
    """Fixed-cutoff variant: keep coordinates with ``|g_i| >= threshold``."""
    if not threshold >= 0.0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    g = _check_gradient(g)
    if np.isnan(g).any():
        raise ValueError("gradient has NaN components")
    mask = np.abs(g) >= threshold
    if not mask.any():
        return _split(g, mask, None)
    return _split(g, mask, float(np.abs(g[mask]).min()))
