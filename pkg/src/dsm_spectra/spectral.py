"""Spectral diagnostics of mixing operators: the subdominant singular
value on the detail subspace, the top-value check, effective depth,
and transient-growth profiling.

sigma2 is defined as the restriction norm: the top singular value of
P M P where P = I - (1/n) 11^T. For a genuinely doubly-stochastic M
this equals the second singular value of M itself because (1/sqrt(n))1
is the top singular pair on both sides; the operation computes both
routes and treats disagreement as evidence the input is not doubly
stochastic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsm import StochasticMatrix
from .errors import ConfigError, InvalidEpsilon, SpectralMismatch
from .linalg import DenseMatrix, detail_projector, singular_values
from .rng import Role, derive_stream

SIGMA2_CROSSCHECK_TOL = 1e-6
PERRON_TOL = 1e-7
DEFAULT_MAX_DEPTH = 50
DEFAULT_DEPTH_EPS = 0.01
DEFAULT_TEMPERATURE_GRID = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)

REPORT_COLUMNS = ("seed", "temperature", "sigma1", "sigma2", "entropy",
                  "d_eff", "transient_max", "transient_argmax")


@dataclass(frozen=True)
class TransientProfile:
    """Restricted-power norms ||(P M P)^k||_2 for k = 1..max_depth."""

    values: tuple[float, ...]

    @property
    def profile(self) -> tuple[tuple[int, float], ...]:
        return tuple((k + 1, v) for k, v in enumerate(self.values))

    @property
    def max_value(self) -> float:
        return max(self.values)

    @property
    def argmax_k(self) -> int:
        return int(np.argmax(self.values)) + 1


@dataclass(frozen=True)
class SpectralReport:
    sigma1: float
    sigma2: float
    entropy: float
    effective_depth: float
    transient_profile: TransientProfile
    temperature: float | None = None
    depth_eps: float = DEFAULT_DEPTH_EPS

    @property
    def transient_max(self) -> float:
        return self.transient_profile.max_value

    @property
    def transient_argmax(self) -> int:
        return self.transient_profile.argmax_k


def sigma2(m: StochasticMatrix) -> float:
    """Top singular value of the restriction P M P, cross-checked
    against the second singular value of M (they coincide for doubly
    stochastic inputs)."""
    a = m.matrix.entries
    n = m.n
    p = detail_projector(n)
    restricted = singular_values(p @ a @ p)[0]
    if n >= 2:
        second = singular_values(a)[1]
        if abs(restricted - second) > SIGMA2_CROSSCHECK_TOL:
            raise SpectralMismatch(
                f"restriction norm {restricted:.12g} and second singular "
                f"value {second:.12g} disagree beyond {SIGMA2_CROSSCHECK_TOL}; "
                "input is not doubly stochastic")
    return float(restricted)


def perron_check(m: StochasticMatrix) -> tuple[bool, float]:
    """Whether the top singular value is 1 within 1e-7."""
    top = float(singular_values(m.matrix.entries)[0])
    return abs(top - 1.0) <= PERRON_TOL, top


def effective_depth(sigma2_value: float, eps: float) -> float:
    """Layers before detail content decays below fraction eps:
    log(1/eps) / (-log sigma2). Zero when sigma2 is 0; +inf when
    sigma2 >= 1 (no decay)."""
    if not 0 < eps < 1:
        raise InvalidEpsilon(f"eps must be in (0, 1), got {eps}")
    if sigma2_value < 0:
        raise ConfigError(f"sigma2 must be >= 0, got {sigma2_value}")
    if sigma2_value == 0:
        return 0.0
    if sigma2_value >= 1:
        return math.inf
    return math.log(1.0 / eps) / (-math.log(sigma2_value))


def transient_growth(m: DenseMatrix, max_depth: int = DEFAULT_MAX_DEPTH) -> TransientProfile:
    """Norms of restricted powers (P M P)^k for k = 1..max_depth.

    For doubly stochastic M this equals ||P M^k P|| because M preserves
    the detail subspace; for generic matrices the profile reported is
    that of the restricted power."""
    if max_depth < 1:
        raise ConfigError(f"max_depth must be >= 1, got {max_depth}")
    a = m.entries
    n = a.shape[0]
    p = detail_projector(n)
    restricted = p @ a @ p
    values = []
    power = np.eye(n)
    for _ in range(max_depth):
        power = power @ restricted
        values.append(float(singular_values(power)[0]))
    return TransientProfile(tuple(values))


def contraction_check(m: StochasticMatrix, trials: int, rng_seed: int) -> float:
    """Max of ||M x|| / ||x|| over random unit x in the detail
    subspace; never exceeds sigma2 + 1e-9."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    stream = derive_stream(rng_seed, 0, Role.PROBE)
    a = m.matrix.entries
    n = m.n
    best = 0.0
    batch = 1024
    done = 0
    while done < trials:
        take = min(batch, trials - done)
        g = stream.normals(take * n).reshape(take, n)
        g = g - g.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        # zero projection has probability zero; guard the division
        norms[norms == 0] = 1.0
        x = g / norms
        ratios = np.linalg.norm(x @ a.T, axis=1)
        best = max(best, float(ratios.max()))
        done += take
    return best


def power_iteration_norm(a: np.ndarray, iterations: int = 200,
                         seed: int = 12345) -> float:
    """Independent estimate of the top singular value of `a` by power
    iteration on a^T a; used as a tightness oracle for sigma2."""
    stream = derive_stream(seed, 0, Role.PROBE)
    v = stream.normals(a.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        w = a.T @ (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return float(np.linalg.norm(a @ v))


def spectral_report(m: StochasticMatrix, eps: float = DEFAULT_DEPTH_EPS,
                    max_depth: int = DEFAULT_MAX_DEPTH,
                    temperature: float | None = None) -> SpectralReport:
    """Bundle the per-operator diagnostics used by sweeps and the CLI."""
    from .dsm import entropy as dsm_entropy

    s2 = sigma2(m)
    _, s1 = perron_check(m)
    return SpectralReport(
        sigma1=s1,
        sigma2=s2,
        entropy=dsm_entropy(m),
        effective_depth=effective_depth(s2, eps),
        transient_profile=transient_growth(m.matrix, max_depth),
        temperature=temperature,
        depth_eps=eps,
    )


def report_csv_row(report: SpectralReport, seed: int | None = None) -> list:
    """One row in the documented report schema (REPORT_COLUMNS)."""
    return [seed, report.temperature, report.sigma1, report.sigma2,
            report.entropy, report.effective_depth, report.transient_max,
            report.transient_argmax]
