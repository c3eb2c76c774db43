"""Shared fixtures and independent oracle helpers for the test suite."""

import csv
import io
import math

import numpy as np
import pytest

from dsm_spectra import (
    DenseMatrix,
    SinkhornConfig,
    StochasticMatrix,
    sinkhorn_generate,
)


def parse_csv(text):
    """Split experiment CSV text into (comment lines, header, data rows)."""
    comments = []
    data_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif line:
            data_lines.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(data_lines))))
    if not rows:
        return comments, [], []
    return comments, rows[0], rows[1:]


def comment_value(comments, key):
    """Value of a `# key: value` comment line, or None."""
    prefix = f"# {key}: "
    for line in comments:
        if line.startswith(prefix):
            return line[len(prefix):]
    return None


def strip_generated(text):
    """Drop the timestamp line so reruns can be compared byte for byte."""
    return "\n".join(line for line in text.splitlines()
                     if not line.startswith("# generated_at:"))


def mean_std_oracle(values):
    """Mean and sample std (ddof 1) via fsum, independent of numpy."""
    vals = [float(v) for v in values]
    k = len(vals)
    mean = math.fsum(vals) / k
    if k < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (k - 1)
    return mean, math.sqrt(var)


def uniform_stochastic(n):
    """The rank-one averaging matrix: every entry 1/n."""
    return StochasticMatrix(DenseMatrix(np.full((n, n), 1.0 / n)), 0.0)


def permutation_stochastic(perm):
    """Permutation matrix as a (trivially doubly stochastic) operator."""
    n = len(perm)
    a = np.zeros((n, n))
    for i, j in enumerate(perm):
        a[i, j] = 1.0
    return StochasticMatrix(DenseMatrix(a), 0.0)


def symmetric_two_state(a):
    """[[1-a, a], [a, 1-a]]; its detail singular value is |1 - 2a|."""
    return StochasticMatrix(
        DenseMatrix(np.array([[1.0 - a, a], [a, 1.0 - a]])), 0.0)


def circulant_stochastic(c):
    """Circulant built from one non-negative row summing to 1."""
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    a = np.empty((n, n))
    for i in range(n):
        a[i] = np.roll(c, i)
    return StochasticMatrix(DenseMatrix(a), 1e-12)


def circulant_sigma2_oracle(c):
    """Detail singular value of a circulant from its DFT symbol.

    Circulants are normal, so singular values are eigenvalue moduli;
    the mean eigenvector carries symbol value sum(c) = 1 and every
    other eigenvalue lives on the detail subspace.
    """
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    mods = []
    for k in range(1, n):
        omega = complex(math.cos(2 * math.pi * k / n),
                        math.sin(2 * math.pi * k / n))
        mods.append(abs(sum(c[j] * omega ** j for j in range(n))))
    return max(mods)


def embed_in_detail(block, n):
    """Place a 2x2 block on an orthonormal detail basis of R^n (n >= 3).

    Returns a DenseMatrix acting as `block` on span{v1, v2} and as zero
    on the rest, where v1, v2 are mean-zero; the restricted powers of
    the result equal the powers of `block` exactly.
    """
    if n < 3:
        raise ValueError("need n >= 3 for a 2-d detail block")
    v1 = np.zeros(n)
    v1[0], v1[1] = 1.0, -1.0
    v1 /= np.linalg.norm(v1)
    v2 = np.full(n, 1.0)
    v2[2] = 1.0 - n
    v2 /= np.linalg.norm(v2)
    basis = np.stack([v1, v2], axis=1)
    return DenseMatrix(basis @ np.asarray(block, dtype=np.float64) @ basis.T)


def upper_triangular_power_norm(a, b, d, k):
    """Closed-form spectral norm of [[a, b], [0, d]]^k.

    The k-th power is [[a^k, b*s_k], [0, d^k]] with
    s_k = sum_{i=0}^{k-1} a^i d^(k-1-i); the norm of a 2x2 matrix
    [[p, q], [0, r]] is sqrt((m + sqrt(m^2 - 4 p^2 r^2)) / 2) with
    m = p^2 + q^2 + r^2.
    """
    s = math.fsum(a ** i * d ** (k - 1 - i) for i in range(k))
    p, q, r = a ** k, b * s, d ** k
    m = p * p + q * q + r * r
    disc = max(0.0, m * m - 4.0 * p * p * r * r)
    return math.sqrt((m + math.sqrt(disc)) / 2.0)


def generated_dsm(n, temperature, seed=0, rep=0, iterations=200):
    return sinkhorn_generate(
        SinkhornConfig(n=n, temperature=temperature, iterations=iterations,
                       seed=seed), rep_index=rep)


@pytest.fixture(scope="session")
def dsm8():
    return generated_dsm(8, 1.0)


@pytest.fixture(scope="session")
def dsm64():
    return generated_dsm(64, 1.0)


@pytest.fixture(scope="session")
def dsm64_cold():
    """Low-temperature operator: near-permutation, sigma2 close to 1."""
    return generated_dsm(64, 0.05)
