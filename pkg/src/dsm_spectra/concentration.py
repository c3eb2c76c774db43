"""Closed-form tail bounds and their Monte Carlo verifiers.

Every verifier reports a BoundCheckResult whose `violated` flag uses
exact Clopper-Pearson confidence bounds at 99.9%: a check violates its
bound only when the one-sided lower confidence bound on the empirical
frequency exceeds the theoretical bound, so sampling noise on a true
inequality cannot produce flaky failures. `slack` is the distance from
the empirical frequency down to that lower confidence bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dsm import StochasticMatrix
from .errors import (ConfigError, HighSnr, InvalidDimension, ZeroGap)
from .geometry import FeatureVector, NoiseModel, snr, sphere_batch
from .linalg import DenseMatrix, project_detail, singular_values
from .rng import SplitMix64
from .spectral import sigma2 as spectral_sigma2

CP_CONFIDENCE = 0.999
MIN_VERIFIER_TRIALS = 1000
_BATCH = 4096

# Theorem constants fixed by the explicit Gaussian-concentration choice
THEOREM1_C_ONE_SIDED = 2.0
THEOREM1_C_TWO_SIDED = 4.0
THEOREM1_SMALL_C = 0.5


@dataclass(frozen=True)
class BoundCheckResult:
    check_name: str
    n: int | None
    params: dict = field(default_factory=dict)
    trials: int = 0
    theoretical_bound: float = 0.0
    empirical_frequency: float = 0.0
    slack: float = 0.0
    violated: bool = False


@dataclass(frozen=True)
class Theorem1Bound:
    bound: float
    vacuous: bool


def clopper_pearson(successes: int, trials: int,
                    confidence: float = CP_CONFIDENCE) -> tuple[float, float]:
    """One-sided exact binomial confidence bounds at the given level."""
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise ConfigError("successes must lie in [0, trials]")
    alpha = 1.0 - confidence
    lower = 0.0 if successes == 0 else float(
        stats.beta.ppf(alpha, successes, trials - successes + 1))
    upper = 1.0 if successes == trials else float(
        stats.beta.ppf(confidence, successes + 1, trials - successes))
    return lower, upper


def make_bound_check(check_name: str, n: int | None, params: dict,
                     trials: int, theoretical: float,
                     exceed_count: int) -> BoundCheckResult:
    """Assemble a result with the Clopper-Pearson violation rule."""
    empirical = exceed_count / trials
    lower, _ = clopper_pearson(exceed_count, trials)
    return BoundCheckResult(
        check_name=check_name,
        n=n,
        params=params,
        trials=trials,
        theoretical_bound=float(theoretical),
        empirical_frequency=float(empirical),
        slack=float(empirical - lower),
        violated=bool(lower > theoretical),
    )


def _require_trials(trials: int) -> None:
    if trials < MIN_VERIFIER_TRIALS:
        raise ConfigError(
            f"verifiers need >= {MIN_VERIFIER_TRIALS} trials, got {trials}")


def laurent_massart_tail(k: int, t: float) -> float:
    """Gaussian norm deviation bound 2 exp(-t^2 / 2), clamped to 1."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if not t > 0:
        raise ConfigError(f"t must be > 0, got {t}")
    return min(1.0, 2.0 * math.exp(-t * t / 2.0))


def verify_projected_norm_concentration(model: NoiseModel, t: float,
                                        trials: int,
                                        rng: SplitMix64) -> BoundCheckResult:
    """Frequency of |  ||P xi|| - nu sqrt((n-1)/n) | > nu t / sqrt(n)
    against the 2 exp(-t^2/2) bound.

    The deviation test is strict, so the degenerate nu = 0 model never
    registers the event."""
    _require_trials(trials)
    n = model.n
    center = model.expected_detail_norm()
    threshold = model.nu * t / math.sqrt(n)
    count = 0
    done = 0
    while done < trials:
        take = min(_BATCH, trials - done)
        xi = (model.nu / math.sqrt(n)) * rng.normals(take * n).reshape(take, n)
        xi = xi - xi.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(xi, axis=1)
        count += int(np.sum(np.abs(norms - center) > threshold))
        done += take
    return make_bound_check(
        "projected_norm_concentration", n, {"t": t, "nu": model.nu},
        trials, laurent_massart_tail(n - 1, t), count)


def levy_tail(n: int, eps: float) -> float:
    """Sphere inner-product tail bound 2 exp(-(n-2) eps^2 / 2)."""
    if n < 3:
        raise InvalidDimension(f"n must be >= 3, got {n}")
    if not eps > 0:
        raise ConfigError(f"eps must be > 0, got {eps}")
    return min(1.0, 2.0 * math.exp(-(n - 2) * eps * eps / 2.0))


def levy_cosine_samples(n: int, trials: int, rng: SplitMix64) -> np.ndarray:
    """Inner products of independent uniform sphere pairs in the detail
    subspace; each trial consumes the u draw then the v draw."""
    out = np.empty(trials)
    done = 0
    while done < trials:
        take = min(_BATCH, trials - done)
        pairs = sphere_batch(n, 2 * take, rng).reshape(take, 2, n)
        out[done:done + take] = np.einsum("ij,ij->i", pairs[:, 0], pairs[:, 1])
        done += take
    return out


def verify_levy(n: int, eps: float, trials: int,
                rng: SplitMix64) -> BoundCheckResult:
    """Frequency of |<u, v>| >= eps over independent sphere pairs."""
    _require_trials(trials)
    bound = levy_tail(n, eps)
    cosines = levy_cosine_samples(n, trials, rng)
    count = int(np.sum(np.abs(cosines) >= eps))
    return make_bound_check("levy_inner_product", n, {"eps": eps},
                            trials, bound, count)


def sphere_marginal_tail(n: int, eps: float) -> float:
    """Exact P(|<u, v>| >= eps) for uniform sphere pairs: the marginal
    of one coordinate is Beta((n-2)/2, (n-2)/2) mapped to [-1, 1]."""
    if n < 3:
        raise InvalidDimension(f"n must be >= 3, got {n}")
    a = (n - 2) / 2.0
    return float(2.0 * (1.0 - stats.beta.cdf((eps + 1.0) / 2.0, a, a)))


def sphere_marginal_cdf(n: int, t: np.ndarray) -> np.ndarray:
    """CDF of <u, v> for uniform sphere pairs at points t in [-1, 1]."""
    a = (n - 2) / 2.0
    return stats.beta.cdf((np.asarray(t) + 1.0) / 2.0, a, a)


def theorem1_bound(gamma: float, eps: float) -> Theorem1Bound:
    """Collapse bound eps + 8 gamma under the low-SNR hypothesis, with
    a vacuity flag when the bound exceeds 1."""
    if not eps > 0:
        raise ConfigError(f"eps must be > 0, got {eps}")
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    if gamma > 0.125:
        raise HighSnr(f"gamma {gamma} above 1/8; bound not asserted")
    bound = eps + 8.0 * gamma
    return Theorem1Bound(bound=float(bound), vacuous=bool(bound > 1.0))


def theorem1_floor(n: int, eps: float, delta: float,
                   two_sided: bool = False) -> float:
    """Probability floor 1 - delta - C exp(-c n eps^2) with C = 2,
    c = 1/2 (C = 4 for the union bound over both noise draws)."""
    c_const = THEOREM1_C_TWO_SIDED if two_sided else THEOREM1_C_ONE_SIDED
    return 1.0 - delta - c_const * math.exp(-THEOREM1_SMALL_C * n * eps * eps)


def verify_theorem1(m: StochasticMatrix, x: FeatureVector,
                    x_prime: FeatureVector, model: NoiseModel, eps: float,
                    trials: int, rng: SplitMix64) -> BoundCheckResult:
    """Monte Carlo check of the orthogonal-collapse bound.

    Per trial, fresh noise xi then xi_prime is drawn from `rng`; the
    normalized outputs u = (Mx + xi)_detail / ||.||, v likewise are
    compared against eps + 8 gamma_max. The implemented exceedance
    ceiling is delta_eff + 2 exp(-n eps^2 / 2) where delta_eff is the
    measured frequency of either noise norm leaving [nu/2, 3 nu/2]
    (the conditioning event of the norm-concentration step). The
    stricter two-sided constant 4 exp(...) floor is recorded in params.
    """
    _require_trials(trials)
    n = model.n
    s2 = spectral_sigma2(m)
    gammas = []
    for vec in (x, x_prime):
        result = snr(s2, vec, model)
        if result.gamma > 0.125:
            raise HighSnr(f"input SNR {result.gamma} above 1/8")
        gammas.append(result.gamma)
    gamma_max = max(gammas)
    bound = eps + 8.0 * gamma_max

    a = m.matrix.entries
    s = a @ project_detail(x.values)
    s_prime = a @ project_detail(x_prime.values)
    scale = model.nu / math.sqrt(n)

    exceed = 0
    conditioning_failures = 0
    done = 0
    while done < trials:
        take = min(_BATCH, trials - done)
        noise = scale * rng.normals(take * 2 * n).reshape(take, 2, n)
        noise = noise - noise.mean(axis=2, keepdims=True)
        y_u = s[None, :] + noise[:, 0]
        y_v = s_prime[None, :] + noise[:, 1]
        norm_u = np.linalg.norm(y_u, axis=1)
        norm_v = np.linalg.norm(y_v, axis=1)
        cosines = np.abs(np.einsum("ij,ij->i", y_u, y_v) / (norm_u * norm_v))
        exceed += int(np.sum(cosines > bound))
        xi_norms = np.linalg.norm(noise, axis=2)
        outside = (xi_norms < model.nu / 2) | (xi_norms > 1.5 * model.nu)
        conditioning_failures += int(np.sum(outside.any(axis=1)))
        done += take

    delta_eff = conditioning_failures / trials
    ceiling = min(1.0, delta_eff + THEOREM1_C_ONE_SIDED
                  * math.exp(-THEOREM1_SMALL_C * n * eps * eps))
    params = {
        "eps": eps,
        "gamma_max": gamma_max,
        "bound": bound,
        "delta_eff": delta_eff,
        "floor_c2": theorem1_floor(n, eps, delta_eff, two_sided=False),
        "floor_c4": theorem1_floor(n, eps, delta_eff, two_sided=True),
    }
    return make_bound_check("theorem1_collapse", n, params, trials,
                            ceiling, exceed)


def wedin_sin_theta(a: DenseMatrix, e: DenseMatrix, r: int) -> tuple[float, float]:
    """Rotation of the leading-r left singular subspace under an
    additive perturbation, with the bound ||E|| / gap.

    Returns (sin_theta, bound); the inequality sin_theta <= bound is
    guaranteed in the informative regime bound < 1."""
    if r < 1:
        raise ConfigError(f"r must be >= 1, got {r}")
    av = a.entries
    ev = e.entries
    if av.shape != ev.shape:
        raise ConfigError("perturbation shape must match the matrix")
    sv = singular_values(av)
    if r >= len(sv):
        raise ConfigError(f"r must be < min dimension {len(sv)}, got {r}")
    gap = float(sv[r - 1] - sv[r])
    if gap <= 1e-10 * sv[0]:
        raise ZeroGap(f"singular gap {gap} is numerically zero")
    u_a = np.linalg.svd(av)[0][:, :r]
    u_b = np.linalg.svd(av + ev)[0][:, :r]
    p_a = u_a @ u_a.T
    p_b = u_b @ u_b.T
    sin_theta = float(singular_values((np.eye(av.shape[0]) - p_b) @ p_a)[0])
    bound = float(singular_values(ev)[0] / gap)
    return sin_theta, bound
