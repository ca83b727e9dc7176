"""Dense float64 matrix primitives used by the masking scheme.

Everything here is pure: callers own their random generators, and returned
arrays are never aliased to caller state. Matrices are plain numpy float64
arrays; finiteness is enforced at the boundaries where a non-finite entry
would silently poison a later trace evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConditioningError(RuntimeError):
    """Raised when no acceptably conditioned random matrix was found."""


def check_finite(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Return ``a`` as a float64 array, rejecting NaN/inf entries."""
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")
    return a


@dataclass(frozen=True)
class Permutation:
    """Bijection on {0..size-1}; ``mapping[i]`` is the destination of slot i."""

    mapping: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.int64)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("permutation mapping must be a non-empty 1-d index array")
        if not np.array_equal(np.sort(m), np.arange(m.size)):
            raise ValueError("permutation mapping is not a bijection")
        object.__setattr__(self, "mapping", m)

    @property
    def size(self) -> int:
        return int(self.mapping.size)

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        return cls(np.arange(size, dtype=np.int64))

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "Permutation":
        # Generator.permutation is a Fisher-Yates shuffle of arange(size).
        return cls(rng.permutation(size).astype(np.int64))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Scatter ``v`` so that result[mapping[i]] = v[i]."""
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or v.size != self.size:
            raise ValueError(f"vector length {v.size} does not match permutation size {self.size}")
        out = np.empty_like(v)
        out[self.mapping] = v
        return out


def apply_permutation(pi: Permutation, v: np.ndarray) -> np.ndarray:
    return pi.apply(v)


def rcond_1norm(m: np.ndarray, m_inv: np.ndarray) -> float:
    """Reciprocal 1-norm condition number 1 / (||M||_1 * ||Minv||_1)."""
    return 1.0 / (np.linalg.norm(m, 1) * np.linalg.norm(m_inv, 1))


def rand_invertible(
    dim: int,
    rng: np.random.Generator,
    min_rcond: float = 1e-6,
    max_tries: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw an invertible matrix with entries uniform on [-1, 1].

    Rejection-samples whole matrices until the reciprocal 1-norm condition
    number is at least ``min_rcond``; returns the matrix and its inverse.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if not 0.0 < min_rcond < 1.0:
        raise ValueError("min_rcond must lie strictly between 0 and 1")
    for _ in range(max_tries):
        m = rng.uniform(-1.0, 1.0, size=(dim, dim))
        try:
            m_inv = np.linalg.inv(m)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(m_inv)):
            continue
        if rcond_1norm(m, m_inv) >= min_rcond:
            return m, m_inv
    raise ConditioningError(
        f"no matrix of dim {dim} reached rcond {min_rcond:g} in {max_tries} draws"
    )


def rand_orthogonal(dim: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Haar-random orthogonal matrix and its inverse (= transpose).

    Preferred masking material: the condition number is exactly 1, so the
    sandwich products cancel without amplifying floating-point noise.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    # Fixing the sign of R's diagonal makes the distribution Haar.
    q = q * np.sign(np.diag(r))
    return q, np.ascontiguousarray(q.T)


def rand_unit_lower_triangular(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-lower-triangular matrix with strictly-lower entries uniform on [-1, 1]."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    s = np.tril(rng.uniform(-1.0, 1.0, size=(dim, dim)), -1)
    np.fill_diagonal(s, 1.0)
    return s


def trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """Trace of A @ B computed as sum_ij A[i,j] * B[j,i], never forming A @ B.

    This is the evaluation hot path; keeping it quadratic is what makes a
    database scan scale like n^2 per record instead of n^3.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"first operand is not square: {a.shape}")
    if b.shape != a.shape:
        raise ValueError(f"operand shapes differ: {a.shape} vs {b.shape}")
    return float(np.einsum("ij,ji->", a, b))
