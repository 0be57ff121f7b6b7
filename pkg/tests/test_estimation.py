import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsd import (
    Kernel,
    Population,
    concentration_bound,
    etf63_kernel,
    ht_total,
    linear_total,
    mse_exact,
    perfect_estimation_check,
    poisson_kernel,
    schur_horn_projection,
    var_estimate_ht,
    var_estimate_syg,
)
from dsd.errors import NotFixedSize, OutOfRange, ZeroInclusion, ZeroJointInclusion
from dsd.estimation import estimate, level_sets, variance_geometric

from oracles import brute_force_law, law_expectation, random_kernel

PI = np.array([1 / 2, 3 / 4, 3 / 4, 1 / 5, 2 / 5, 3 / 5, 4 / 5])


def test_full_sample_unit_weights_gives_total():
    pop = Population([1.0, 2.0, 3.5])
    assert linear_total([0, 1, 2], pop) == pytest.approx(6.5)
    assert linear_total([], pop) == 0.0


def test_ht_unbiased_under_poisson():
    pi = np.array([0.1, 0.25, 0.4, 0.5, 0.7, 0.9])
    y = np.array([3.0, -1.0, 2.0, 5.0, 0.5, 4.0])
    K = poisson_kernel(pi)
    law = brute_force_law(K.entries)
    pop = Population(y)
    assert law_expectation(law, lambda s: ht_total(s, pop, K)) == pytest.approx(y.sum(), rel=1e-10)


def test_ht_total_rejects_zero_inclusion():
    with pytest.raises(ZeroInclusion):
        ht_total([0], Population([1.0, 1.0]), poisson_kernel([0.5, 0.0]))


def test_poisson_two_unit_variance():
    pop = Population([-1.0, 1.0], weights=[2.0, 2.0])
    mse, var, bias = mse_exact(poisson_kernel([0.5, 0.5]), pop)
    assert var == pytest.approx(2.0)
    assert bias == pytest.approx(0.0)
    assert mse == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(6))
def test_mse_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    N = 8
    K = random_kernel(N, rng, projection=bool(seed % 2))
    y = rng.normal(size=N)
    w = rng.uniform(0.5, 3.0, N)
    pop = Population(y, weights=w)
    law = brute_force_law(K)
    brute = law_expectation(law, lambda s: (sum(w[k] * y[k] for k in s) - y.sum()) ** 2)
    mse, var, bias = mse_exact(Kernel(K), pop)
    assert mse == pytest.approx(brute, rel=1e-10)
    mean = law_expectation(law, lambda s: sum(w[k] * y[k] for k in s))
    assert bias == pytest.approx(mean - y.sum(), rel=1e-10, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_variance_two_routes_agree(N, seed):
    rng = np.random.default_rng(seed)
    K = Kernel(random_kernel(N, rng))
    z = rng.normal(size=N)
    _, var, _ = mse_exact(K, Population(z))
    assert variance_geometric(K, z) == pytest.approx(var, rel=1e-9, abs=1e-12)
    assert var >= -1e-12


def test_stratified_proportional_y_has_zero_mse():
    P, _ = schur_horn_projection(PI)
    y = np.where(np.arange(7) < 3, 2.0, 5.0) * PI
    mse, _, _ = mse_exact(P, Population(y, weights=1 / PI))
    assert mse <= 1e-18 * y.sum() ** 2
    rep = perfect_estimation_check(P, Population(y))
    assert rep.is_perfect and rep.strata == [[0, 1, 2], [3, 4, 5, 6]]


def test_ht_variance_estimator_poisson_form():
    pi = np.array([0.2, 0.5, 0.9])
    y = np.array([1.0, 2.0, 3.0])
    K = poisson_kernel(pi)
    pop = Population(y, weights=1 / pi)
    s = [0, 2]
    expected = sum((y[k] / pi[k]) ** 2 * (1 - pi[k]) for k in s)
    assert var_estimate_ht(s, pop, K) == pytest.approx(expected)


@pytest.mark.parametrize("seed", range(4))
def test_ht_variance_estimator_unbiased(seed):
    rng = np.random.default_rng(20 + seed)
    K = random_kernel(6, rng)
    Kk = Kernel(K)
    pi = Kk.diagonal
    y = rng.normal(size=6)
    pop = Population(y, weights=1 / pi)
    law = brute_force_law(K)
    _, var, _ = mse_exact(Kk, pop)
    assert law_expectation(law, lambda s: var_estimate_ht(s, pop, Kk)) == pytest.approx(var, rel=1e-9)


def test_ht_variance_estimator_zero_pair():
    P, _ = schur_horn_projection(PI)
    pop = Population(PI, weights=1 / PI)
    # units 4 and 5 (1-based) lie inside one pivot interval: never drawn together
    with pytest.raises(ZeroJointInclusion) as exc:
        var_estimate_ht([3, 4], pop, P)
    assert set(exc.value.pair) == {3, 4}


def test_syg_zero_for_y_proportional_to_pi():
    K = etf63_kernel()
    pi = K.diagonal
    pop = Population(3.0 * pi, weights=1 / pi)
    assert var_estimate_syg([0, 1, 2], pop, K) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_syg_unbiased_on_projections(seed):
    rng = np.random.default_rng(40 + seed)
    K = random_kernel(6, rng, projection=True, rank=int(rng.integers(2, 5)))
    Kk = Kernel(K)
    pi = Kk.diagonal
    pop = Population(rng.normal(size=6), weights=1 / pi)
    law = brute_force_law(K)
    _, var, _ = mse_exact(Kk, pop)
    assert law_expectation(law, lambda s: var_estimate_syg(s, pop, Kk) if len(s) == round(pi.sum()) else 0.0) \
        == pytest.approx(var, rel=1e-9)


def test_syg_requires_fixed_size():
    with pytest.raises(NotFixedSize):
        var_estimate_syg([0], Population([1.0, 1.0]), poisson_kernel([0.5, 0.5]))


def test_estimate_report():
    K = etf63_kernel()
    pop = Population(np.arange(1.0, 7.0))
    rep = estimate([0, 1, 2], pop, K)
    assert rep.estimate == pytest.approx(2 * 6)
    assert rep.exact_bias == pytest.approx(0.0, abs=1e-12)
    assert rep.exact_mse == pytest.approx(rep.exact_variance)
    assert rep.plugin_variance_ht is not None and rep.plugin_variance_syg is not None


def test_level_sets():
    assert level_sets([1.0, 2.0, 1.0 + 1e-12, 3.0]) == [[0, 2], [1], [3]]


# ---------------------------------------------------------------- perfect estimation


def test_block_rank_one_projections_are_perfect():
    a = np.zeros((5, 5))
    a[np.ix_([0, 1], [0, 1])] = 0.5
    b = np.array([0.2, 0.3, 0.5])
    a[np.ix_([2, 3, 4], [2, 3, 4])] = np.outer(np.sqrt(b), np.sqrt(b))
    K = Kernel(a)
    pi = K.diagonal
    y = np.array([1.0, 1.0, 4.0, 4.0, 4.0]) * pi
    rep = perfect_estimation_check(K, Population(y))
    assert rep.is_perfect
    assert rep.strata == [[0, 1], [2, 3, 4]]


def test_poisson_not_perfect():
    rep = perfect_estimation_check(poisson_kernel([0.5, 0.5]), Population([1.0, 1.0]))
    assert not rep.is_perfect and not rep.is_projection


def test_schur_horn_integer_hits_perfect():
    P, _ = schur_horn_projection(PI)
    rep = perfect_estimation_check(P, Population(PI.copy()))
    assert rep.is_perfect
    assert rep.strata == [list(range(7))]


def test_perfect_check_rejects_noncommuting():
    P, _ = schur_horn_projection(PI)
    rep = perfect_estimation_check(P, Population(np.arange(1.0, 8.0)))
    assert not rep.is_perfect and not rep.commutes


# ---------------------------------------------------------------- concentration


def test_concentration_bound_projection_plugin():
    K = Kernel(np.diag([1.0, 1.0, 1.0, 1.0, 0.0]).astype(complex))
    one, two = concentration_bound(K, Population(np.ones(5)), np.ones(5), 8.0)
    assert one == pytest.approx(np.exp(-2.0))
    assert two == pytest.approx(2 * np.exp(-2.0))


def test_concentration_bound_vanishes_for_large_a():
    K = poisson_kernel([0.3, 0.6, 0.2])
    one, two = concentration_bound(K, Population([1.0, 2.0, 3.0]), None, 1e6)
    assert one < 1e-12 and two < 1e-12


def test_concentration_bound_requires_positive_a():
    with pytest.raises(OutOfRange):
        concentration_bound(etf63_kernel(), Population(np.ones(6)), None, 0.0)
