"""Doubly-stochastic matrix generation via Sinkhorn balancing, plus
entropy and primitivity diagnostics.

Generation follows the single-trial recipe: sample costs d_ij uniform
on [0,1) row-major from the trial's COST stream, form the kernel
A = exp(-d / T), then run exactly K alternating row-then-column
normalizations. The certified `stochastic_tol` of the result is the
max absolute row/column-sum deviation actually measured.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DimensionMismatch, IoError, NotPositive,
                     NumericUnderflow)
from .linalg import DenseMatrix
from .rng import MAX_BASE_SEED, Role, derive_stream

UNDERFLOW_FLOOR = 1e-300
EXPERIMENT_TOL = 1e-6


@dataclass(frozen=True)
class StochasticMatrix:
    """A square matrix certified doubly stochastic up to
    `stochastic_tol` (max row/column-sum deviation from 1)."""

    matrix: DenseMatrix
    stochastic_tol: float

    def __post_init__(self):
        if self.matrix.n_rows != self.matrix.n_cols:
            raise DimensionMismatch("stochastic matrix must be square")
        if self.stochastic_tol < 0:
            raise ConfigError("stochastic_tol must be >= 0")

    @property
    def n(self) -> int:
        return self.matrix.n_rows


@dataclass(frozen=True)
class SinkhornConfig:
    n: int
    temperature: float
    iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if not 0 <= self.seed < MAX_BASE_SEED:
            raise ConfigError(f"seed must be in [0, 2**32), got {self.seed}")


def max_sum_deviation(a: np.ndarray) -> float:
    """Max absolute deviation of any row or column sum from 1."""
    row = np.abs(a.sum(axis=1) - 1.0).max()
    col = np.abs(a.sum(axis=0) - 1.0).max()
    return float(max(row, col))


def _balance_passes(a: np.ndarray, passes: int) -> np.ndarray:
    for _ in range(passes):
        a = a / a.sum(axis=1, keepdims=True)
        a = a / a.sum(axis=0, keepdims=True)
    return a


def sinkhorn_generate(cfg: SinkhornConfig, rep_index: int = 0,
                      cost_override: np.ndarray | None = None) -> StochasticMatrix:
    """Generate one balanced matrix from (cfg.seed, rep_index).

    `cost_override` substitutes the sampled cost matrix (test hook for
    degenerate kernels such as constant costs).
    """
    if cost_override is not None:
        d = np.asarray(cost_override, dtype=np.float64)
        if d.shape != (cfg.n, cfg.n):
            raise DimensionMismatch(
                f"cost override shape {d.shape} does not match n={cfg.n}")
    else:
        stream = derive_stream(cfg.seed, rep_index, Role.COST)
        d = stream.uniforms(cfg.n * cfg.n).reshape(cfg.n, cfg.n)
    kernel = np.exp(-d / cfg.temperature)
    if kernel.min() < UNDERFLOW_FLOOR:
        raise NumericUnderflow(
            f"kernel underflow at temperature {cfg.temperature}; "
            "entries below 1e-300 would balance a numerically-zero pattern")
    balanced = _balance_passes(kernel, cfg.iterations)
    return StochasticMatrix(DenseMatrix(balanced), max_sum_deviation(balanced))


def sinkhorn_balance(a: DenseMatrix, max_iters: int, tol: float) -> StochasticMatrix:
    """Balance an arbitrary positive matrix, stopping once the max
    row/column-sum deviation falls to `tol` or after `max_iters` full
    row+column passes. The deviation is checked before any pass, so an
    already balanced input is returned unchanged."""
    m = a.entries
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch("input must be square")
    if np.any(m <= 0):
        raise NotPositive("all entries must be > 0 for Sinkhorn balancing")
    current = m.copy()
    deviation = max_sum_deviation(current)
    iters = 0
    while deviation > tol and iters < max_iters:
        current = _balance_passes(current, 1)
        deviation = max_sum_deviation(current)
        iters += 1
    return StochasticMatrix(DenseMatrix(current), deviation)


def entropy(m: StochasticMatrix) -> float:
    """Shannon entropy -sum m_ij log m_ij in nats, with 0 log 0 = 0."""
    a = m.matrix.entries
    positive = a[a > 0]
    return float(-np.sum(positive * np.log(positive)))


def is_doubly_stochastic(m: DenseMatrix, tol: float) -> tuple[bool, float]:
    """Whether all entries are >= -tol and all row/column sums are
    within tol of 1; also returns the max absolute sum deviation."""
    a = m.entries
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch("input must be square")
    deviation = max_sum_deviation(a)
    ok = bool(a.min() >= -tol and deviation <= tol)
    return ok, deviation


def is_primitive(m: StochasticMatrix) -> bool:
    """Whether some power up to the Wielandt exponent (n-1)^2 + 1 is
    entrywise positive, checked on the boolean adjacency pattern by
    binary powering."""
    pattern = m.matrix.entries > 0
    n = m.n
    exponent = (n - 1) ** 2 + 1
    result = np.eye(n, dtype=bool)
    base = pattern
    e = exponent
    while e > 0:
        if e & 1:
            result = (result.astype(np.uint8) @ base.astype(np.uint8)) > 0
        base = (base.astype(np.uint8) @ base.astype(np.uint8)) > 0
        e >>= 1
    return bool(result.all())


def matrix_to_csv(m: DenseMatrix) -> str:
    """Serialize: first line n, then n comma-separated rows at 17
    significant digits, Unix newlines."""
    if m.n_rows != m.n_cols:
        raise DimensionMismatch("matrix serialization expects square input")
    lines = [str(m.n_rows)]
    for row in m.entries:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def matrix_from_csv(text: str) -> DenseMatrix:
    """Parse the serialization produced by matrix_to_csv."""
    reader = io.StringIO(text)
    first = reader.readline().strip()
    try:
        n = int(first)
    except ValueError as exc:
        raise IoError(f"matrix CSV must start with the dimension, got {first!r}") from exc
    rows = []
    for i in range(n):
        line = reader.readline()
        if not line:
            raise IoError(f"matrix CSV ended after {i} of {n} rows")
        try:
            row = [float(tok) for tok in line.strip().split(",")]
        except ValueError as exc:
            raise IoError(f"malformed matrix row {i}: {line.strip()!r}") from exc
        if len(row) != n:
            raise IoError(f"row {i} has {len(row)} entries, expected {n}")
        rows.append(row)
    return DenseMatrix(np.array(rows, dtype=np.float64))
