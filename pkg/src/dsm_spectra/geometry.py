"""Detail-subspace geometry: Layer Normalization (projective and
affine), isotropic noise sampling, SNR, cosine similarity, and the
normalized-perturbation bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DegenerateInput, ResampleExhausted,
                     ZeroNoise, ZeroVector)
from .linalg import project_detail
from .rng import SplitMix64

LOW_SNR_THRESHOLD = 0.125
LN_DEGENERACY_REL = 1e-12
SPHERE_RESAMPLE_LIMIT = 8


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic Gaussian noise with per-coordinate variance nu^2/n."""

    n: int
    nu: float

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.nu < 0:
            raise ConfigError(f"nu must be >= 0, got {self.nu}")

    def expected_detail_norm(self) -> float:
        """Exact E||P xi|| first-moment scale nu * sqrt((n-1)/n)."""
        return self.nu * math.sqrt((self.n - 1) / self.n)


@dataclass(frozen=True)
class FeatureVector:
    """A feature vector with its cached detail-component norm."""

    values: np.ndarray
    detail_norm: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> "FeatureVector":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, float(np.linalg.norm(project_detail(values))))


@dataclass(frozen=True)
class SnrResult:
    gamma: float
    low_snr: bool


def sample_noise(model: NoiseModel, rng: SplitMix64) -> FeatureVector:
    """n i.i.d. Gaussians with standard deviation nu/sqrt(n)."""
    if model.nu == 0:
        # consume nothing; the zero vector is exact
        return FeatureVector.from_values(np.zeros(model.n))
    values = (model.nu / math.sqrt(model.n)) * rng.normals(model.n)
    return FeatureVector.from_values(values)


def _detail_or_degenerate(y: np.ndarray) -> np.ndarray:
    detail = project_detail(y)
    norm = np.linalg.norm(detail)
    scale = np.abs(y).max(initial=0.0)
    if norm <= LN_DEGENERACY_REL * math.sqrt(y.size) * scale or norm == 0.0:
        raise DegenerateInput("detail component is numerically zero; "
                              "normalization is undefined for constant input")
    return detail / norm


def layer_norm(y: FeatureVector) -> FeatureVector:
    """sqrt(n) * P y / ||P y||: zero-mean output of norm sqrt(n)."""
    values = y.values
    unit = _detail_or_degenerate(values)
    return FeatureVector.from_values(math.sqrt(values.size) * unit)


def layer_norm_affine(y: FeatureVector, gamma_ln, beta_ln) -> FeatureVector:
    """gamma_ln * layer_norm(y) + beta_ln, elementwise."""
    base = layer_norm(y).values
    gamma = np.asarray(gamma_ln, dtype=np.float64)
    beta = np.asarray(beta_ln, dtype=np.float64)
    return FeatureVector.from_values(gamma * base + beta)


def normalized_gap(a: np.ndarray, b: np.ndarray) -> tuple[float, float, bool]:
    """Distance between directions against the perturbation bound.

    Returns (gap, bound, precondition_met): gap = ||a/||a|| - b/||b||||,
    bound = 4 ||a - b|| / ||b||, and the precondition
    ||a - b|| <= ||b|| / 2 under which gap <= bound is guaranteed."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ZeroVector("normalized_gap requires nonzero vectors")
    delta = np.linalg.norm(a - b)
    gap = float(np.linalg.norm(a / norm_a - b / norm_b))
    bound = float(4.0 * delta / norm_b)
    return gap, bound, bool(delta <= 0.5 * norm_b)


def snr(sigma2_value: float, x: FeatureVector, model: NoiseModel) -> SnrResult:
    """Spectral signal-to-noise ratio sigma2 * ||x_detail|| / nu with
    the low-SNR flag gamma <= 1/8."""
    if model.nu == 0:
        raise ZeroNoise("SNR undefined at nu = 0")
    gamma = sigma2_value * x.detail_norm / model.nu
    return SnrResult(gamma=float(gamma), low_snr=bool(gamma <= LOW_SNR_THRESHOLD))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Inner-product cosine, clamped to [-1, 1] against round-off."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu_ = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu_ == 0 or nv == 0:
        raise ZeroVector("cosine requires nonzero vectors")
    return float(np.clip(np.dot(u, v) / (nu_ * nv), -1.0, 1.0))


def uniform_sphere_sample(n: int, rng: SplitMix64) -> np.ndarray:
    """Unit vector uniform on the sphere inside the detail subspace:
    sample a Gaussian, remove the mean, normalize."""
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    for _ in range(SPHERE_RESAMPLE_LIMIT):
        g = project_detail(rng.normals(n))
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm
    raise ResampleExhausted(
        f"no usable sphere sample after {SPHERE_RESAMPLE_LIMIT} draws")


def sphere_batch(n: int, count: int, rng: SplitMix64) -> np.ndarray:
    """`count` sphere samples drawn from one block of count*n normals.

    For even n this consumes the stream exactly like `count` calls of
    uniform_sphere_sample; odd n falls back to the scalar path so the
    documented per-sample consumption is preserved."""
    if n % 2 == 1:
        return np.stack([uniform_sphere_sample(n, rng) for _ in range(count)])
    g = rng.normals(count * n).reshape(count, n)
    g = g - g.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ResampleExhausted("zero projection inside batched sphere draw")
    return g / norms
