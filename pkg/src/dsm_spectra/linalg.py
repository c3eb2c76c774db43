"""Dense real linear algebra: SVD, spectral norm, matrix powers, and
the mean-removal projector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFinite

RECONSTRUCTION_TOL = 1e-9


@dataclass(frozen=True)
class DenseMatrix:
    """Real matrix stored row-major as a float64 array."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-d, got shape {a.shape}")
        object.__setattr__(self, "entries", a)

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def identity(cls, n: int) -> "DenseMatrix":
        return cls(np.eye(n))


@dataclass(frozen=True)
class SvdResult:
    """Singular values sorted non-increasing, plus optional singular
    vector matrices with orthonormal columns."""

    singular_values: np.ndarray
    left_vectors: np.ndarray | None = None
    right_vectors: np.ndarray | None = None


def _require_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf")


def svd(m: DenseMatrix, want_vectors: bool = False) -> SvdResult:
    """Singular value decomposition; values only unless vectors are
    requested."""
    _require_finite(m.entries)
    if want_vectors:
        u, s, vh = np.linalg.svd(m.entries, full_matrices=False)
        return SvdResult(singular_values=s, left_vectors=u, right_vectors=vh.T)
    s = np.linalg.svd(m.entries, compute_uv=False)
    return SvdResult(singular_values=s)


def singular_values(a: np.ndarray) -> np.ndarray:
    """Convenience wrapper on raw arrays."""
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf")
    return np.linalg.svd(a, compute_uv=False)


def spectral_norm(m: DenseMatrix) -> float:
    """Largest singular value."""
    return float(svd(m).singular_values[0])


def project_detail(x: np.ndarray) -> np.ndarray:
    """Remove the coordinate mean: the action of I - (1/n) 11^T."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DimensionMismatch("vector must be non-empty")
    return x - x.mean()


def detail_projector(n: int) -> np.ndarray:
    """The projector I - (1/n) 11^T as an explicit matrix."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


def matrix_power_apply(m: DenseMatrix, x: np.ndarray, k: int) -> np.ndarray:
    """Apply m to x exactly k times; k = 0 returns x unchanged."""
    if k < 0:
        raise DimensionMismatch(f"power must be >= 0, got {k}")
    a = m.entries
    x = np.asarray(x, dtype=np.float64)
    if a.shape[0] != a.shape[1] or a.shape[1] != x.shape[0]:
        raise DimensionMismatch(
            f"cannot apply {a.shape} matrix to length-{x.shape[0]} vector")
    y = x.copy()
    for _ in range(k):
        y = a @ y
    return y
