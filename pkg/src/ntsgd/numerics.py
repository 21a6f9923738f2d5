"""Dense numerics shared by the optimizers and experiments.

Vectors are plain 1-D ``float64`` numpy arrays; :func:`as_vector` is the
single validation point.  Symmetric matrices get a thin wrapper so the
eigensolver can rely on exact symmetry.

Randomness
----------
:class:`RngState` wraps the Philox-4x64-10 counter-based generator (as
exposed by ``numpy.random.Philox``).  The raw output is a stream of 64-bit
words; everything else is derived from that stream by fixed transforms:

* uniform in [0, 1):  ``(word >> 11) * 2**-53``
* integer in [0, n):  ``floor(u * n)`` with ``u`` uniform in [0, 1)
* Gaussian:           Box-Muller on consecutive word pairs ``(w1, w2)`` with
  ``u1 = ((w1 >> 11) + 1) * 2**-53`` in (0, 1] and ``u2`` uniform in [0, 1),
  giving ``sqrt(-2 ln u1) cos(2 pi u2)`` then ``sqrt(-2 ln u1) sin(2 pi u2)``.

Uniforms and Gaussians are converted in blocks of at least 4096 words and
handed out in order, so the values a stream yields do not depend on how the
requests are sized, as long as one stream is used for one kind of draw.
Mixing kinds on one stream is deterministic but interleaves at block
granularity.

A child stream ``split(label)`` uses the Philox key
``blake2b(f"{key0}:{key1}/{label}")`` truncated to 128 bits, so children
are a pure function of the parent key and the label, never of how much the
parent has been consumed.
"""

from __future__ import annotations

import hashlib
from typing import Callable

import numpy as np

__all__ = [
    "as_vector",
    "SymmetricMatrix",
    "RngState",
    "sample_gaussian",
    "sym_eigvals",
    "sym_eigh",
    "finite_diff_grad",
    "relative_error",
    "MAX_EIG_DIM",
]

MAX_EIG_DIM = 512
_TWO_M53 = 2.0**-53
_BLOCK = 4096


def as_vector(values, *, name: str = "vector") -> np.ndarray:
    """Return ``values`` as a finite, non-empty 1-D float64 array (copied)."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    return arr


class SymmetricMatrix:
    """Square, exactly symmetric float64 matrix.

    Input that is symmetric only up to rounding (``allclose``) is
    symmetrized as ``(A + A.T) / 2``; anything else is rejected.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            if not np.allclose(a, a.T, rtol=1e-12, atol=1e-14):
                raise ValueError("matrix is not symmetric")
            a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self._a = a

    @classmethod
    def diag(cls, d) -> "SymmetricMatrix":
        return cls(np.diag(as_vector(d, name="diagonal")))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self) -> str:
        return f"SymmetricMatrix(dim={self.dim})"


def _label_key(key: tuple[int, int], label) -> tuple[int, int]:
    digest = hashlib.blake2b(f"{key[0]}:{key[1]}/{label}".encode(), digest_size=16).digest()
    return int.from_bytes(digest[:8], "little"), int.from_bytes(digest[8:], "little")


class RngState:
    """Deterministic, splittable random stream (see module docstring).

    Not thread-safe: each stream has a single owner.  Use :meth:`split` to
    hand independent streams to concurrent work.
    """

    def __init__(self, seed: int = 0, *, _key: tuple[int, int] | None = None):
        if _key is None:
            seed = int(seed)
            if not 0 <= seed < 2**64:
                seed %= 2**64
            _key = (seed, 0)
        self._key = _key
        self._bitgen = np.random.Philox(key=np.array(_key, dtype=np.uint64))
        self._buf = np.empty(0, dtype=np.uint64)
        self._pos = 0
        self._ubuf = np.empty(0)
        self._upos = 0
        self._gbuf = np.empty(0)
        self._gpos = 0

    @property
    def key(self) -> tuple[int, int]:
        return self._key

    def split(self, label) -> "RngState":
        return RngState(_key=_label_key(self._key, label))

    def _refill(self, need: int) -> np.ndarray:
        return self._bitgen.random_raw(max(_BLOCK, need))

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` 64-bit words of the raw stream."""
        avail = self._buf.size - self._pos
        if n <= avail:
            out = self._buf[self._pos:self._pos + n]
            self._pos += n
            return out
        head = self._buf[self._pos:]
        fresh = self._refill(n - avail)
        out = np.concatenate([head, fresh[:n - avail]])
        self._buf = fresh
        self._pos = n - avail
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` uniforms on [0, 1)."""
        avail = self._ubuf.size - self._upos
        if n > avail:
            words = self.raw(max(_BLOCK, n))
            fresh = (words >> np.uint64(11)).astype(np.float64) * _TWO_M53
            self._ubuf = np.concatenate([self._ubuf[self._upos:], fresh])
            self._upos = 0
        out = self._ubuf[self._upos:self._upos + n]
        self._upos += n
        return out

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers uniform on ``{0, ..., high - 1}``."""
        if high < 1:
            raise ValueError("high must be >= 1")
        out = (self.uniform(n) * high).astype(np.int64)
        # u * high can round up to high when u is within 2**-53 of 1
        np.minimum(out, high - 1, out=out)
        return out

    def standard_normal(self, n: int) -> np.ndarray:
        """``n`` standard normal values (Box-Muller, see module docstring)."""
        avail = self._gbuf.size - self._gpos
        if n > avail:
            pairs = max(_BLOCK, n) // 2 + 1
            words = self.raw(2 * pairs)
            u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53
            u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * _TWO_M53
            r = np.sqrt(-2.0 * np.log(u1))
            theta = 2.0 * np.pi * u2
            fresh = np.empty(2 * pairs)
            fresh[0::2] = r * np.cos(theta)
            fresh[1::2] = r * np.sin(theta)
            self._gbuf = np.concatenate([self._gbuf[self._gpos:], fresh])
            self._gpos = 0
        out = self._gbuf[self._gpos:self._gpos + n]
        self._gpos += n
        return out

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of ``range(n)`` (argsort of uniforms, stable)."""
        return np.argsort(self.uniform(n), kind="stable")

    def __repr__(self) -> str:
        return f"RngState(key={self._key})"


def sample_gaussian(rng: RngState, n: int, sigma: float) -> np.ndarray:
    """Draw ``n`` i.i.d. N(0, sigma^2) values from ``rng``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    z = rng.standard_normal(n)
    if sigma == 0:
        return np.zeros(n)
    return sigma * z


def _round_robin(m: int):
    """Pairings for a cyclic-by-rounds Jacobi sweep over ``m`` (even) indices."""
    players = list(range(m))
    for _ in range(m - 1):
        yield players[: m // 2], players[m // 2:][::-1]
        players = [players[0]] + [players[-1]] + players[1:-1]


def _rotation(app, aqq, apq, active):
    with np.errstate(over="ignore"):
        theta = (aqq - app) / (2.0 * np.where(active, apq, 1.0))
        t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
    t[theta == 0.0] = 1.0
    c = 1.0 / np.sqrt(t * t + 1.0)
    return np.where(active, c, 1.0), np.where(active, t * c, 0.0)


def _rotate_rows(a, P, Q, c, s):
    rp, rq = a[P, :], a[Q, :]
    a[P, :] = c[:, None] * rp - s[:, None] * rq
    a[Q, :] = s[:, None] * rp + c[:, None] * rq


def sym_eigh(H, *, tol: float = 1e-14, max_sweeps: int = 60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once; pairs are grouped into
    rounds of disjoint rotations so a whole round is applied as one
    vectorized row/column update.  Returns ``(eigenvalues, eigenvectors)``
    with eigenvalues ascending and eigenvectors as columns.
    """
    a = np.array(H.array if isinstance(H, SymmetricMatrix) else SymmetricMatrix(H).array)
    p = a.shape[0]
    if p > MAX_EIG_DIM:
        raise ValueError(f"unsupported size: dimension {p} exceeds {MAX_EIG_DIM}")
    m = p + (p % 2)
    if m != p:
        # pad with an isolated zero row/column so every round is a perfect pairing
        a = np.pad(a, ((0, 1), (0, 1)))
    vt = np.eye(m)  # eigenvectors stored as rows
    scale = np.linalg.norm(a)
    rounds = [(np.array(P), np.array(Q)) for P, Q in _round_robin(m)] if m > 1 else []

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale or scale == 0.0:
            break
        for P, Q in rounds:
            apq = a[P, Q]
            active = apq != 0.0
            if not np.any(active):
                continue
            c, s = _rotation(a[P, P], a[Q, Q], apq, active)
            # A <- J^T A J as two row passes: rows of J^T A, then rows of (J^T A)^T
            _rotate_rows(a, P, Q, c, s)
            a = np.ascontiguousarray(a.T)
            _rotate_rows(a, P, Q, c, s)
            a[P, Q] = 0.0
            a[Q, P] = 0.0
            _rotate_rows(vt, P, Q, c, s)

    vals = np.diag(a)[:p].copy()
    vecs = vt[:p, :p].T
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def sym_eigvals(H) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix (dim <= 512)."""
    return sym_eigh(H)[0]


def finite_diff_grad(f: Callable[[np.ndarray], float], w, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient ``(f(w + h e_i) - f(w - h e_i)) / 2h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    w = np.array(w, dtype=np.float64)
    grad = np.empty_like(w)
    for i in range(w.size):
        e = w.copy()
        e[i] += h
        fp = f(e)
        e[i] = w[i] - h
        fm = f(e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(a, b, floor: float = 1e-10) -> float:
    """``||a - b|| / max(||a||, ||b||, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))
