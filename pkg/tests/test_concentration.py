"""Tail bounds, Monte Carlo verifiers, and the subspace rotation bound."""

import math

import numpy as np
import pytest
from scipy import stats

from dsm_spectra import (
    ConfigError,
    DenseMatrix,
    FeatureVector,
    HighSnr,
    InvalidDimension,
    NoiseModel,
    ZeroGap,
    clopper_pearson,
    laurent_massart_tail,
    levy_tail,
    sphere_marginal_cdf,
    sphere_marginal_tail,
    theorem1_bound,
    theorem1_floor,
    verify_levy,
    verify_projected_norm_concentration,
    verify_theorem1,
    wedin_sin_theta,
)
from dsm_spectra.concentration import (
    CP_CONFIDENCE,
    MIN_VERIFIER_TRIALS,
    levy_cosine_samples,
    make_bound_check,
)
from dsm_spectra.linalg import project_detail
from dsm_spectra.rng import Role, derive_stream

from conftest import generated_dsm


def test_clopper_pearson_edge_cases():
    lower, upper = clopper_pearson(0, 100)
    assert lower == 0.0
    assert 0.0 < upper < 0.1
    lower, upper = clopper_pearson(100, 100)
    assert upper == 1.0
    assert 0.9 < lower < 1.0


def test_clopper_pearson_brackets_point_estimate():
    for k, n in ((3, 50), (25, 50), (499, 1000)):
        lower, upper = clopper_pearson(k, n)
        assert lower < k / n < upper


def test_clopper_pearson_exact_coverage_identity():
    # at the lower endpoint the binomial upper tail equals alpha:
    # P(X >= k | p = lower) = 1 - confidence
    k, n = 17, 400
    lower, _ = clopper_pearson(k, n)
    tail = 1.0 - stats.binom.cdf(k - 1, n, lower)
    assert tail == pytest.approx(1.0 - CP_CONFIDENCE, rel=1e-9)


def test_clopper_pearson_monotone_in_count():
    lowers = [clopper_pearson(k, 200)[0] for k in (10, 50, 150)]
    uppers = [clopper_pearson(k, 200)[1] for k in (10, 50, 150)]
    assert lowers[0] < lowers[1] < lowers[2]
    assert uppers[0] < uppers[1] < uppers[2]


def test_clopper_pearson_validation():
    with pytest.raises(ConfigError):
        clopper_pearson(1, 0)
    with pytest.raises(ConfigError):
        clopper_pearson(5, 4)
    with pytest.raises(ConfigError):
        clopper_pearson(-1, 10)


def test_make_bound_check_violation_rule():
    ok = make_bound_check("x", 8, {}, 1000, theoretical=0.5, exceed_count=400)
    assert not ok.violated
    bad = make_bound_check("x", 8, {}, 1000, theoretical=0.01,
                           exceed_count=400)
    assert bad.violated
    assert bad.empirical_frequency == 0.4
    # slack is the distance from the empirical rate down to the
    # confidence-lower bound, always non-negative
    assert ok.slack >= 0.0 and bad.slack >= 0.0


def test_laurent_massart_tail_values():
    assert laurent_massart_tail(5, 1.0) == 1.0  # 2 e^{-1/2} > 1 clamps
    assert laurent_massart_tail(5, 3.0) == pytest.approx(
        2.0 * math.exp(-4.5), rel=1e-15)
    with pytest.raises(ConfigError):
        laurent_massart_tail(0, 1.0)
    with pytest.raises(ConfigError):
        laurent_massart_tail(5, 0.0)


def test_levy_tail_values():
    assert levy_tail(64, 0.3) == pytest.approx(
        2.0 * math.exp(-62 * 0.09 / 2.0), rel=1e-15)
    assert levy_tail(3, 0.1) == 1.0  # clamp
    with pytest.raises(InvalidDimension):
        levy_tail(2, 0.3)
    with pytest.raises(ConfigError):
        levy_tail(8, 0.0)


def test_sphere_marginal_tail_against_monte_carlo():
    n = 16
    cosines = levy_cosine_samples(n, 40_000, derive_stream(0, 0, Role.PROBE))
    for eps in (0.2, 0.4):
        exact = sphere_marginal_tail(n, eps)
        empirical = float(np.mean(np.abs(cosines) >= eps))
        assert abs(empirical - exact) < 0.01
        # the exact tail is below the exponential envelope
        assert exact <= levy_tail(n, eps)


def test_sphere_marginal_cdf_symmetry_and_range():
    t = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    cdf = sphere_marginal_cdf(10, t)
    assert cdf[0] == pytest.approx(0.0, abs=1e-12)
    assert cdf[2] == pytest.approx(0.5, rel=1e-12)
    assert cdf[4] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(cdf) > 0)
    assert cdf[1] == pytest.approx(1.0 - cdf[3], rel=1e-12)


def test_verify_projected_norm_concentration_not_violated():
    model = NoiseModel(64, 0.1)
    for t in (1.0, 2.0, 3.0):
        res = verify_projected_norm_concentration(
            model, t, 5000, derive_stream(1, 0, Role.NOISE))
        assert not res.violated
        assert res.empirical_frequency <= res.theoretical_bound


def test_verify_projected_norm_zero_noise_never_deviates():
    res = verify_projected_norm_concentration(
        NoiseModel(16, 0.0), 1.0, 1000, derive_stream(2, 0, Role.NOISE))
    assert res.empirical_frequency == 0.0
    assert not res.violated


def test_verify_levy_not_violated_and_below_exact():
    res = verify_levy(64, 0.3, 20_000, derive_stream(3, 0, Role.PROBE))
    assert not res.violated
    exact = sphere_marginal_tail(64, 0.3)
    assert abs(res.empirical_frequency - exact) < 0.005


def test_verifiers_reject_tiny_trial_counts():
    with pytest.raises(ConfigError):
        verify_levy(8, 0.3, MIN_VERIFIER_TRIALS - 1,
                    derive_stream(0, 0, Role.PROBE))
    with pytest.raises(ConfigError):
        verify_projected_norm_concentration(
            NoiseModel(8, 0.1), 1.0, 10, derive_stream(0, 0, Role.NOISE))


def test_theorem1_bound_values_and_vacuity():
    b = theorem1_bound(0.05, 0.3)
    assert b.bound == pytest.approx(0.7, rel=1e-15)
    assert not b.vacuous
    v = theorem1_bound(0.1, 0.3)
    assert v.bound == pytest.approx(1.1, rel=1e-15)
    assert v.vacuous
    with pytest.raises(HighSnr):
        theorem1_bound(0.2, 0.3)
    with pytest.raises(ConfigError):
        theorem1_bound(-0.1, 0.3)
    with pytest.raises(ConfigError):
        theorem1_bound(0.05, 0.0)


def test_theorem1_floor_values():
    one = theorem1_floor(64, 0.3, 0.01)
    assert one == pytest.approx(1.0 - 0.01 - 2.0 * math.exp(-0.5 * 64 * 0.09),
                                rel=1e-12)
    two = theorem1_floor(64, 0.3, 0.01, two_sided=True)
    assert two < one


def test_verify_theorem1_zero_signal_case():
    m = generated_dsm(64, 10.0)
    x = FeatureVector.from_values(np.zeros(64))
    model = NoiseModel(64, 0.1)
    res = verify_theorem1(m, x, x, model, eps=0.3, trials=2000,
                          rng=derive_stream(4, 0, Role.NOISE))
    assert not res.violated
    assert res.params["gamma_max"] == 0.0
    assert res.params["bound"] == pytest.approx(0.3, rel=1e-15)
    # pure-noise cosines concentrate near zero in 64 dimensions
    assert res.empirical_frequency < 0.05
    assert res.params["floor_c4"] <= res.params["floor_c2"]


def test_verify_theorem1_rejects_high_snr_input():
    m = generated_dsm(64, 0.05)  # sigma2 near 1
    x = FeatureVector.from_values(
        np.r_[1.0, -1.0, np.zeros(62)])
    with pytest.raises(HighSnr):
        verify_theorem1(m, x, x, NoiseModel(64, 0.1), eps=0.3, trials=1000,
                        rng=derive_stream(5, 0, Role.NOISE))


def test_wedin_zero_perturbation():
    a = DenseMatrix(np.diag([3.0, 2.0, 1.0]))
    sin_theta, bound = wedin_sin_theta(a, DenseMatrix(np.zeros((3, 3))), 1)
    assert sin_theta == pytest.approx(0.0, abs=1e-12)
    assert bound == 0.0


def test_wedin_diagonal_aligned_perturbation():
    # perturbing only the trailing diagonal entry leaves the leading
    # subspace untouched
    a = np.diag([3.0, 2.0, 1.0])
    e = np.zeros((3, 3))
    e[2, 2] = 0.3
    sin_theta, bound = wedin_sin_theta(DenseMatrix(a), DenseMatrix(e), 1)
    assert sin_theta <= 1e-12
    assert bound == pytest.approx(0.3, rel=1e-12)


def test_wedin_bound_holds_in_informative_regime():
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(300):
        a = rng.normal(size=(6, 6))
        sv = np.linalg.svd(a, compute_uv=False)
        r = int(rng.integers(1, 6))
        gap = sv[r - 1] - sv[r]
        if gap <= 1e-8 * sv[0]:
            continue
        e = rng.normal(size=(6, 6))
        e *= 0.4 * gap / np.linalg.svd(e, compute_uv=False)[0]
        sin_theta, bound = wedin_sin_theta(DenseMatrix(a), DenseMatrix(e), r)
        assert 0.0 <= sin_theta <= 1.0 + 1e-12
        if bound < 1.0:
            assert sin_theta <= bound + 1e-9
            checked += 1
    assert checked > 200


def test_wedin_validation():
    a = DenseMatrix(np.diag([2.0, 1.0]))
    with pytest.raises(ConfigError):
        wedin_sin_theta(a, DenseMatrix(np.zeros((2, 2))), 0)
    with pytest.raises(ConfigError):
        wedin_sin_theta(a, DenseMatrix(np.zeros((3, 3))), 1)
    with pytest.raises(ConfigError):
        wedin_sin_theta(a, DenseMatrix(np.zeros((2, 2))), 2)
    with pytest.raises(ZeroGap):
        wedin_sin_theta(DenseMatrix(np.eye(2)), DenseMatrix(np.zeros((2, 2))),
                        1)
