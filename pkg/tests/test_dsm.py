"""Sinkhorn generation and balancing, entropy, primitivity, matrix IO."""

import math

import numpy as np
import pytest

from dsm_spectra import (
    ConfigError,
    DenseMatrix,
    DimensionMismatch,
    IoError,
    NotPositive,
    NumericUnderflow,
    SinkhornConfig,
    StochasticMatrix,
    entropy,
    is_doubly_stochastic,
    is_primitive,
    matrix_from_csv,
    matrix_to_csv,
    sinkhorn_balance,
    sinkhorn_generate,
)
from dsm_spectra.dsm import EXPERIMENT_TOL, max_sum_deviation

from conftest import (
    generated_dsm,
    permutation_stochastic,
    uniform_stochastic,
)


def test_constant_cost_yields_exact_uniform():
    cfg = SinkhornConfig(n=4, temperature=1.0)
    m = sinkhorn_generate(cfg, cost_override=np.zeros((4, 4)))
    assert np.array_equal(m.matrix.entries, np.full((4, 4), 0.25))
    assert m.stochastic_tol == 0.0


def test_two_by_two_balance_analytic_fixed_point():
    # the doubly stochastic limit [[x, 1-x], [1-x, x]] preserves the
    # cross ratio (a11 a22)/(a12 a21); for [[1,2],[2,1]] that is 1/4,
    # so x/(1-x) = 1/2 and the limit is [[1/3, 2/3], [2/3, 1/3]]
    m = sinkhorn_balance(DenseMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])),
                         max_iters=500, tol=1e-15)
    expected = np.array([[1.0, 2.0], [2.0, 1.0]]) / 3.0
    assert np.allclose(m.matrix.entries, expected, atol=1e-12)


def test_balance_preserves_cross_ratio():
    rng = np.random.default_rng(7)
    a = rng.uniform(0.5, 2.0, size=(2, 2))
    before = (a[0, 0] * a[1, 1]) / (a[0, 1] * a[1, 0])
    m = sinkhorn_balance(DenseMatrix(a), max_iters=1000, tol=1e-14).matrix.entries
    after = (m[0, 0] * m[1, 1]) / (m[0, 1] * m[1, 0])
    assert after == pytest.approx(before, rel=1e-9)


def test_balance_returns_already_balanced_input_unchanged():
    a = np.array([[0.25, 0.75], [0.75, 0.25]])
    m = sinkhorn_balance(DenseMatrix(a), max_iters=10, tol=1e-9)
    assert np.array_equal(m.matrix.entries, a)
    assert m.stochastic_tol == 0.0


def test_balance_rejects_non_positive_entries():
    with pytest.raises(NotPositive):
        sinkhorn_balance(DenseMatrix(np.array([[1.0, 0.0], [1.0, 1.0]])),
                         max_iters=10, tol=1e-6)


def test_balance_rejects_non_square():
    with pytest.raises(DimensionMismatch):
        sinkhorn_balance(DenseMatrix(np.ones((2, 3))), max_iters=1, tol=1e-6)


def test_generated_matrix_is_deterministic_per_seed_rep():
    a = generated_dsm(16, 0.7, seed=5, rep=3)
    b = generated_dsm(16, 0.7, seed=5, rep=3)
    c = generated_dsm(16, 0.7, seed=5, rep=4)
    assert np.array_equal(a.matrix.entries, b.matrix.entries)
    assert not np.array_equal(a.matrix.entries, c.matrix.entries)


def test_default_iterations_reach_experiment_tolerance_at_n64():
    for t in (0.05, 0.2, 1.0, 5.0, 10.0):
        m = generated_dsm(64, t, seed=0)
        ok, dev = is_doubly_stochastic(m.matrix, EXPERIMENT_TOL)
        assert ok, f"T={t}: deviation {dev}"


@pytest.mark.parametrize("n,t", [(8, 1.0), (16, 1.0), (8, 100.0),
                                 (16, 0.2), (64, 0.05), (64, 100.0)])
def test_default_iterations_reach_tolerance_off_corner(n, t):
    m = generated_dsm(n, t, seed=1)
    assert max_sum_deviation(m.matrix.entries) <= 1e-6


@pytest.mark.parametrize("n", [8, 16])
def test_cold_small_corners_balance_with_more_passes(n):
    # at T = 0.05 these sizes need more than the default 200 passes to
    # reach 1e-6 (measured worst cases near 1e3); 2000 is ample
    m = generated_dsm(n, 0.05, seed=0, iterations=2000)
    assert max_sum_deviation(m.matrix.entries) <= 1e-6


def test_deviation_shrinks_with_more_passes():
    devs = [max_sum_deviation(generated_dsm(16, 0.05, iterations=k)
                              .matrix.entries)
            for k in (1, 10, 100, 1000)]
    assert devs[0] > devs[1] > devs[2] > devs[3]


def test_underflow_guard_fires_below_float_range():
    with pytest.raises(NumericUnderflow):
        sinkhorn_generate(SinkhornConfig(n=8, temperature=1e-4))


def test_entropy_oracles():
    for n in (2, 8, 64):
        assert entropy(uniform_stochastic(n)) == pytest.approx(
            n * math.log(n), rel=1e-12)
    assert entropy(permutation_stochastic([1, 2, 3, 0])) == 0.0
    h = entropy(generated_dsm(8, 1.0))
    assert 0.0 < h < 8 * math.log(8)


def test_entropy_increases_with_temperature():
    hs = [entropy(generated_dsm(16, t)) for t in (0.05, 0.5, 5.0)]
    assert hs[0] < hs[1] < hs[2]


def test_max_sum_deviation_hand_value():
    a = np.array([[0.6, 0.4], [0.5, 0.5]])
    # row sums are exact; column sums are 1.1 and 0.9
    assert max_sum_deviation(a) == pytest.approx(0.1, abs=1e-15)
    ok, dev = is_doubly_stochastic(DenseMatrix(a), 1e-6)
    assert not ok and dev == pytest.approx(0.1, abs=1e-15)


def test_is_doubly_stochastic_rejects_negative_entries():
    a = np.array([[1.2, -0.2], [-0.2, 1.2]])
    ok, dev = is_doubly_stochastic(DenseMatrix(a), 1e-6)
    assert not ok
    assert dev <= 1e-12  # sums are exact; the entries are the problem


def _naive_primitive(m: StochasticMatrix) -> bool:
    """Reference check: multiply the boolean pattern out one power at a
    time up to the (n-1)^2 + 1 exponent, looking for an all-positive
    power."""
    pattern = m.matrix.entries > 0
    n = pattern.shape[0]
    power = pattern.copy()
    for _ in range((n - 1) ** 2 + 1):
        if power.all():
            return True
        nxt = np.zeros_like(power)
        for i in range(n):
            for j in range(n):
                nxt[i, j] = bool(np.any(power[i] & pattern[:, j]))
        power = nxt
    return bool(power.all())


def test_primitivity_matches_naive_power_oracle():
    eye4 = permutation_stochastic([0, 1, 2, 3])
    cycle4 = permutation_stochastic([1, 2, 3, 0])
    swap = permutation_stochastic([1, 0, 3, 2])
    lazy_cycle = StochasticMatrix(
        DenseMatrix(0.5 * eye4.matrix.entries + 0.5 * cycle4.matrix.entries),
        0.0)
    two_shifts = StochasticMatrix(
        DenseMatrix(0.5 * cycle4.matrix.entries
                    + 0.5 * permutation_stochastic([2, 3, 0, 1]).matrix.entries),
        0.0)
    cases = [
        (uniform_stochastic(4), True),
        (eye4, False),
        (cycle4, False),
        (swap, False),
        (lazy_cycle, True),
        (two_shifts, None),
        (generated_dsm(8, 1.0), True),
    ]
    for m, expected in cases:
        got = is_primitive(m)
        assert got == _naive_primitive(m)
        if expected is not None:
            assert got == expected


def test_matrix_csv_round_trip_is_bitwise():
    m = generated_dsm(16, 0.7, seed=2)
    text = matrix_to_csv(m.matrix)
    back = matrix_from_csv(text)
    assert np.array_equal(back.entries, m.matrix.entries)
    assert text.endswith("\n")
    assert text.splitlines()[0] == "16"


@pytest.mark.parametrize("text", [
    "abc\n1,2\n",
    "2\n1.0,2.0\n",
    "2\n1.0,2.0\n3.0\n",
    "2\n1.0,x\n3.0,4.0\n",
])
def test_matrix_csv_rejects_malformed_input(text):
    with pytest.raises(IoError):
        matrix_from_csv(text)


def test_stochastic_matrix_validation():
    with pytest.raises(DimensionMismatch):
        StochasticMatrix(DenseMatrix(np.ones((2, 3))), 0.0)
    with pytest.raises(ConfigError):
        StochasticMatrix(DenseMatrix(np.eye(2)), -1.0)


@pytest.mark.parametrize("kwargs", [
    dict(n=0, temperature=1.0),
    dict(n=4, temperature=0.0),
    dict(n=4, temperature=-1.0),
    dict(n=4, temperature=1.0, iterations=0),
    dict(n=4, temperature=1.0, seed=-1),
    dict(n=4, temperature=1.0, seed=1 << 32),
])
def test_sinkhorn_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SinkhornConfig(**kwargs)


def test_cost_override_shape_checked():
    with pytest.raises(DimensionMismatch):
        sinkhorn_generate(SinkhornConfig(n=4, temperature=1.0),
                          cost_override=np.zeros((3, 3)))
