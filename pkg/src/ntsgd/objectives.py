"""Differentiable training objectives.

Each objective is an empirical risk ``L_S(w) = mean_i loss(w, z_i)`` over
the dataset it is bound to.  ``loss(w, idx)`` and ``grad(w, idx)`` average
over the samples in ``idx`` (all samples when ``idx is None``), which is
exactly what the minibatch optimizer needs.  Objectives without data (the
strict-saddle test function, quadratics) report ``n_samples == 0`` and
ignore ``idx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .numerics import SymmetricMatrix, as_vector, sym_eigvals

__all__ = [
    "Objective",
    "SaddleSpec",
    "SaddleObjective",
    "saddle_loss",
    "saddle_grad",
    "saddle_hessian",
    "QuadraticObjective",
    "logistic_loss",
    "logistic_grad",
    "LogisticObjective",
    "MLPLayout",
    "mlp_loss",
    "mlp_grad",
    "MLPObjective",
]


class Objective:
    """Base class.  Subclasses implement ``loss`` and ``grad``."""

    dim: int
    n_samples: int = 0
    has_hessian: bool = False
    is_convex: bool = False

    def loss(self, w, idx=None) -> float:
        raise NotImplementedError

    def grad(self, w, idx=None) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, w) -> SymmetricMatrix:
        raise NotImplementedError(f"{type(self).__name__} has no analytic Hessian")

    def sample_grad_norms(self, w) -> np.ndarray:
        """Per-sample gradient norms (a single full-gradient norm without data)."""
        if self.n_samples == 0:
            return np.array([np.linalg.norm(self.grad(w))])
        return np.array([np.linalg.norm(self.grad(w, [i])) for i in range(self.n_samples)])

    def init_params(self, rng) -> np.ndarray:
        return np.zeros(self.dim)


# --- strict saddle -----------------------------------------------------------


@dataclass(frozen=True)
class SaddleSpec:
    """``f(w) = 1/2 sum_i lam_i w_i^2 + quartic/4 ||w||^4``.

    The origin is a stationary point with Hessian ``diag(lam)``; requiring a
    negative ``lam_i`` makes it a strict saddle and ``quartic > 0`` keeps the
    function bounded below.
    """

    eigenvalues: tuple
    quartic: float = 1.0

    def __post_init__(self):
        lam = tuple(float(x) for x in np.atleast_1d(self.eigenvalues))
        object.__setattr__(self, "eigenvalues", lam)
        if not lam or min(lam) >= 0:
            raise ValueError("at least one eigenvalue must be negative")
        if not np.all(np.isfinite(lam)):
            raise ValueError("eigenvalues must be finite")
        if not self.quartic > 0:
            raise ValueError("quartic coefficient must be positive")

    @classmethod
    def standard(cls, dim: int, negative: float = -1.0, positive: float = 1.0, quartic: float = 1.0):
        """One negative direction (first coordinate), the rest ``positive``."""
        return cls((negative,) + (positive,) * (dim - 1), quartic)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def lower_bound(self) -> float:
        """``-lam_min^2 / (4 quartic)``, the minimum of ``lam_min r^2/2 + quartic r^4/4``."""
        return -min(self.eigenvalues) ** 2 / (4.0 * self.quartic)


def saddle_loss(spec: SaddleSpec, w) -> float:
    w = np.asarray(w, dtype=np.float64)
    r2 = float(w @ w)
    return 0.5 * float(np.dot(spec.eigenvalues, w * w)) + 0.25 * spec.quartic * r2 * r2


def saddle_grad(spec: SaddleSpec, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return np.asarray(spec.eigenvalues) * w + spec.quartic * float(w @ w) * w


def saddle_hessian(spec: SaddleSpec, w) -> SymmetricMatrix:
    w = np.asarray(w, dtype=np.float64)
    h = np.diag(spec.eigenvalues) + spec.quartic * (float(w @ w) * np.eye(w.size) + 2.0 * np.outer(w, w))
    return SymmetricMatrix(h)


class SaddleObjective(Objective):
    has_hessian = True

    def __init__(self, spec: SaddleSpec):
        self.spec = spec
        self.dim = spec.dim

    def loss(self, w, idx=None):
        return saddle_loss(self.spec, w)

    def grad(self, w, idx=None):
        return saddle_grad(self.spec, w)

    def hessian(self, w):
        return saddle_hessian(self.spec, w)


class QuadraticObjective(Objective):
    """``1/2 w^T A w - b^T w`` with constant Hessian ``A``."""

    has_hessian = True

    def __init__(self, A, b=None):
        self.A = SymmetricMatrix(A)
        self.dim = self.A.dim
        self.b = np.zeros(self.dim) if b is None else as_vector(b, name="b")
        self.is_convex = bool(sym_eigvals(self.A)[0] >= 0)

    def loss(self, w, idx=None):
        w = np.asarray(w, dtype=np.float64)
        return 0.5 * float(w @ self.A.array @ w) - float(self.b @ w)

    def grad(self, w, idx=None):
        return self.A.array @ np.asarray(w, dtype=np.float64) - self.b

    def hessian(self, w):
        return self.A


# --- logistic regression -----------------------------------------------------


def _log1pexp(z):
    # log(1 + e^z) without overflow
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def logistic_loss(w, x, y) -> float:
    """``log(1 + exp(-y w.x))`` for a single sample with ``y`` in {-1, +1}."""
    return float(_log1pexp(-y * np.dot(w, x)))


def logistic_grad(w, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return -y * x * float(_sigmoid(np.array([-y * np.dot(w, x)]))[0])


class LogisticObjective(Objective):
    """Binary logistic regression without intercept.

    Labels equal to ``positive_label`` map to ``+1``, everything else to ``-1``.
    Append a constant feature to the data if an intercept is wanted.
    """

    is_convex = True
    has_hessian = True

    def __init__(self, data: Dataset, positive_label: int = 1):
        self.data = data
        self.positive_label = positive_label
        self.X = data.features
        self.y = np.where(data.labels == positive_label, 1.0, -1.0)
        self.dim = data.dim
        self.n_samples = data.n

    def rebind(self, data: Dataset) -> "LogisticObjective":
        return LogisticObjective(data, self.positive_label)

    def _batch(self, idx):
        if idx is None:
            return self.X, self.y
        return self.X[idx], self.y[idx]

    def loss(self, w, idx=None):
        X, y = self._batch(idx)
        return float(np.mean(_log1pexp(-y * (X @ w))))

    def grad(self, w, idx=None):
        X, y = self._batch(idx)
        coef = -y * _sigmoid(-y * (X @ w))
        return (coef @ X) / len(y)

    def sample_grad_norms(self, w):
        coef = _sigmoid(-self.y * (self.X @ w))
        return coef * np.linalg.norm(self.X, axis=1)

    def hessian(self, w):
        s = _sigmoid(self.X @ w)
        return SymmetricMatrix((self.X.T * (s * (1 - s))) @ self.X / self.n_samples)

    def predict(self, w, X=None):
        X = self.X if X is None else X
        return np.where(X @ w >= 0, 1.0, -1.0)

    def accuracy(self, w, data: Dataset | None = None) -> float:
        if data is None:
            return float(np.mean(self.predict(w) == self.y))
        y = np.where(data.labels == self.positive_label, 1.0, -1.0)
        return float(np.mean(self.predict(w, data.features) == y))


# --- one-hidden-layer tanh network -------------------------------------------


@dataclass(frozen=True)
class MLPLayout:
    """Flat parameter layout ``[W1 (h x d, row-major), b1 (h), W2 (k x h, row-major), b2 (k)]``."""

    n_in: int
    n_hidden: int
    n_out: int

    @property
    def size(self) -> int:
        return self.n_hidden * (self.n_in + 1) + self.n_out * (self.n_hidden + 1)

    def unpack(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.size,):
            raise ValueError(f"parameter vector has size {w.size}, layout expects {self.size}")
        d, h, k = self.n_in, self.n_hidden, self.n_out
        i = 0
        W1 = w[i:i + h * d].reshape(h, d); i += h * d
        b1 = w[i:i + h]; i += h
        W2 = w[i:i + k * h].reshape(k, h); i += k * h
        b2 = w[i:i + k]
        return W1, b1, W2, b2

    def pack(self, W1, b1, W2, b2) -> np.ndarray:
        return np.concatenate([np.ravel(W1), np.ravel(b1), np.ravel(W2), np.ravel(b2)])


def _mlp_forward(layout: MLPLayout, w, X):
    W1, b1, W2, b2 = layout.unpack(w)
    A = np.tanh(X @ W1.T + b1)
    Z = A @ W2.T + b2
    Z = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.sum(np.exp(Z), axis=1))
    return A, Z, logsum


def _mlp_batch_loss(layout, w, X, labels):
    _, Z, logsum = _mlp_forward(layout, w, X)
    return float(np.mean(logsum - Z[np.arange(len(labels)), labels]))


def _mlp_batch_grad(layout, w, X, labels):
    W1, b1, W2, b2 = layout.unpack(w)
    A, Z, logsum = _mlp_forward(layout, w, X)
    m = len(labels)
    P = np.exp(Z - logsum[:, None])
    P[np.arange(m), labels] -= 1.0
    P /= m
    gW2 = P.T @ A
    gb2 = P.sum(axis=0)
    dA = (P @ W2) * (1.0 - A * A)
    gW1 = dA.T @ X
    gb1 = dA.sum(axis=0)
    return layout.pack(gW1, gb1, gW2, gb2)


def mlp_loss(layout: MLPLayout, w, x, label: int) -> float:
    """Softmax cross-entropy of ``W2 tanh(W1 x + b1) + b2`` at one sample."""
    return _mlp_batch_loss(layout, w, np.atleast_2d(x), np.array([label]))


def mlp_grad(layout: MLPLayout, w, x, label: int) -> np.ndarray:
    return _mlp_batch_grad(layout, w, np.atleast_2d(x), np.array([label]))


class MLPObjective(Objective):
    def __init__(self, data: Dataset, n_hidden: int = 32, n_classes: int | None = None):
        self.data = data
        k = int(data.labels.max()) + 1 if n_classes is None else n_classes
        self.layout = MLPLayout(data.dim, n_hidden, k)
        self.dim = self.layout.size
        self.n_samples = data.n
        self.X = data.features
        self.labels = data.labels

    def rebind(self, data: Dataset) -> "MLPObjective":
        return MLPObjective(data, self.layout.n_hidden, self.layout.n_out)

    def _batch(self, idx):
        if idx is None:
            return self.X, self.labels
        return self.X[idx], self.labels[idx]

    def loss(self, w, idx=None):
        return _mlp_batch_loss(self.layout, w, *self._batch(idx))

    def grad(self, w, idx=None):
        return _mlp_batch_grad(self.layout, w, *self._batch(idx))

    def init_params(self, rng):
        """Scaled Gaussian init (1/sqrt(fan_in)) for weights, zero biases."""
        d, h, k = self.layout.n_in, self.layout.n_hidden, self.layout.n_out
        W1 = rng.standard_normal(h * d) / np.sqrt(d)
        W2 = rng.standard_normal(k * h) / np.sqrt(h)
        return self.layout.pack(W1, np.zeros(h), W2, np.zeros(k))

    def predict(self, w, X=None):
        _, Z, _ = _mlp_forward(self.layout, w, self.X if X is None else X)
        return np.argmax(Z, axis=1)

    def accuracy(self, w, data: Dataset | None = None) -> float:
        if data is None:
            return float(np.mean(self.predict(w) == self.labels))
        return float(np.mean(self.predict(w, data.features) == data.labels))
