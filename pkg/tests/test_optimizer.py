import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsd import (
    Kernel,
    Population,
    balanced_objective,
    exact_distribution,
    greedy_rotations,
    mse_exact,
    ordered_projection,
    rank1_optimal,
    rotation_solve,
    schur_horn_projection,
)
from dsd.errors import NoRealRoot, SumExceedsOne
from dsd.optimizer import apply_rotation, rotation_for_pair, unpermute

from oracles import (
    brute_force_law,
    explicit_rotation,
    random_kernel,
    random_same_diagonal_contraction,
    scramble_keeping_diagonal,
)


def integer_sum_pi(N, n, rng):
    p = rng.uniform(0.1, 0.9, N)
    for _ in range(100):
        p = np.clip(p * n / p.sum(), 0.02, 0.98)
    return p * n / p.sum()


# ---------------------------------------------------------------- objective


def test_objective_is_variance_for_one_variable():
    rng = np.random.default_rng(0)
    K = Kernel(random_kernel(6, rng))
    x = rng.uniform(1, 2, 6)
    w = rng.uniform(1, 3, 6)
    pop = Population(x, x[None, :], w)
    assert balanced_objective(K, pop) == pytest.approx(mse_exact(K, pop)[1], rel=1e-12)


def test_objective_matches_brute_force_sum_of_variances():
    rng = np.random.default_rng(1)
    N = 8
    K = random_kernel(N, rng)
    X = rng.normal(size=(3, N))
    w = rng.uniform(0.5, 2, N)
    law = brute_force_law(K)
    brute = 0.0
    for q in range(3):
        z = w * X[q]
        mean = sum(p * z[list(s)].sum() for s, p in law.items())
        brute += sum(p * (z[list(s)].sum() - mean) ** 2 for s, p in law.items())
    val = balanced_objective(Kernel(K), Population(np.zeros(N), X, w))
    assert val == pytest.approx(brute, rel=1e-10)


# ---------------------------------------------------------------- rank one


def test_rank1_equal_probabilities_is_srs_one():
    K = rank1_optimal(np.full(5, 0.2))
    np.testing.assert_allclose(K.entries, np.full((5, 5), 0.2), atol=1e-15)


def test_rank1_explicit_law():
    d = exact_distribution(rank1_optimal([0.2, 0.3]))
    assert d.prob([]) == pytest.approx(0.5)
    assert d.prob([0]) == pytest.approx(0.2)
    assert d.prob([0, 1]) == pytest.approx(0.0, abs=1e-15)


def test_rank1_rejects_sum_above_one():
    with pytest.raises(SumExceedsOne):
        rank1_optimal([0.6, 0.6])


def test_rank1_warns_on_negative_aux():
    pop = Population(np.ones(2), [[-1.0, 1.0]])
    with pytest.warns(UserWarning):
        rank1_optimal([0.5, 0.5], pop)


def test_rank1_beats_random_same_diagonal_kernels():
    rng = np.random.default_rng(2)
    N = 8
    pi = rng.dirichlet(np.ones(N))
    pop = Population(np.zeros(N), rng.uniform(0, 5, (2, N)), 1 / pi)
    best = balanced_objective(rank1_optimal(pi, pop), pop)
    for _ in range(100):
        K = Kernel(random_same_diagonal_contraction(pi, rng))
        assert best <= balanced_objective(K, pop) + 1e-10


# ---------------------------------------------------------------- ordered projection


def test_ordered_projection_sorted_input_is_identity():
    pi = np.array([0.5, 0.75, 0.75, 0.2, 0.4, 0.6, 0.8])
    pop = Population(np.zeros(7), np.arange(1.0, 8.0)[None, :])
    K, sigma = ordered_projection(pi, pop, 0, np.ones(7))
    assert list(sigma) == list(range(7))
    np.testing.assert_allclose(K.entries, schur_horn_projection(pi)[0].entries)


def test_ordered_projection_reversed():
    pi = np.array([0.5, 0.75, 0.75, 0.2, 0.4, 0.6, 0.8])
    pop = Population(np.zeros(7), np.arange(7.0, 0.0, -1)[None, :])
    K, sigma = ordered_projection(pi, pop, 0, np.ones(7))
    assert list(sigma) == list(range(6, -1, -1))
    np.testing.assert_allclose(K.diagonal, pi[sigma], atol=1e-14)
    np.testing.assert_allclose(unpermute(K, sigma).diagonal, pi, atol=1e-14)


def test_ordered_projection_proportional_aux_is_perfect():
    rng = np.random.default_rng(3)
    x = rng.uniform(1, 3, 20)
    pi = 4 * x / x.sum()
    pop = Population(x, x[None, :], 1 / pi)
    K, sigma = ordered_projection(pi, pop, 0)
    mse, _, _ = mse_exact(unpermute(K, sigma), pop)
    assert mse <= 1e-20 * x.sum() ** 2


# ---------------------------------------------------------------- rotations


def test_rotation_identity_when_already_on_target():
    rot = rotation_solve(0.3, 0.8, 0.1, 0.3)
    assert rot.t == 0.0
    np.testing.assert_allclose(rot.matrix(), np.eye(2))


def test_rotation_half_half():
    rot = rotation_solve(0.0, 1.0, 0.0, 0.5)
    assert abs(rot.t) == pytest.approx(1.0)
    out = explicit_rotation(0.0, 0.0, 1.0, rot.t)
    np.testing.assert_allclose(np.diag(out), [0.5, 0.5], atol=1e-15)


def test_rotation_no_real_root():
    with pytest.raises(NoRealRoot):
        rotation_solve(0.1, 0.2, 0.0, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(-0.5, 0.5), st.floats(0, 1))
def test_rotation_solve_hits_target(a1, a2, b, frac):
    lo, hi = min(a1, a2), max(a1, a2)
    if hi - lo < 1e-6:
        return
    pi1 = lo + frac * (hi - lo)
    if abs(hi - pi1) < 1e-9:
        return
    rot = rotation_solve(lo, hi, b, pi1)
    assert rot.sin_theta ** 2 + rot.cos_theta ** 2 == pytest.approx(1.0, abs=1e-14)
    out = explicit_rotation(lo, b, hi, rot.t)
    assert out[0, 0] == pytest.approx(pi1, abs=1e-10)
    assert out[1, 1] == pytest.approx(lo + hi - pi1, abs=1e-10)


def test_pair_rotation_preserves_diagonal_and_spectrum():
    rng = np.random.default_rng(4)
    P, _ = schur_horn_projection(integer_sum_pi(9, 4, rng))
    A = P.entries.real
    for k, l in [(0, 3), (2, 7), (5, 8)]:
        B = apply_rotation(A, rotation_for_pair(A, k, l))
        np.testing.assert_allclose(np.diag(B), np.diag(A), atol=1e-12)
        np.testing.assert_allclose(np.linalg.eigvalsh(B), np.linalg.eigvalsh(A), atol=1e-12)


def test_greedy_constant_pi_unchanged():
    pi = np.full(6, 0.5)
    K, _ = schur_horn_projection(pi)
    pop = Population(np.zeros(6), np.arange(1.0, 7.0)[None, :])
    out = greedy_rotations(K, pop, 1 / pi)
    np.testing.assert_array_equal(out.entries, K.entries)


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2**31 - 1))
def test_greedy_never_increases_objective(N, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, N))
    pi = integer_sum_pi(N, n, rng)
    K, _ = schur_horn_projection(pi)
    pop = Population(np.zeros(N), rng.uniform(0.5, 2, (2, N)), 1 / pi)
    out = greedy_rotations(K, pop, 1 / pi, max_sweeps=5)
    assert balanced_objective(out, pop) <= balanced_objective(K, pop) + 1e-12
    np.testing.assert_allclose(out.diagonal, pi, atol=1e-10)
    np.testing.assert_allclose(out.eigenvalues, K.eigenvalues, atol=1e-8)


def test_greedy_random_instance_lower_envelope():
    rng = np.random.default_rng(5)
    N, n = 8, 3
    pi = integer_sum_pi(N, n, rng)
    x = rng.uniform(1, 3, N)
    w = 1 / pi
    pop = Population(x, x[None, :], w)
    Ks, sigma = ordered_projection(pi, pop, 0, w)
    ordered = unpermute(Ks, sigma)
    sorted_pop = Population(x[sigma], x[None, sigma], w[sigma])
    rotated = unpermute(greedy_rotations(Ks, sorted_pop, w[sigma]), sigma)
    f_ord = balanced_objective(ordered, pop)
    f_rot = balanced_objective(rotated, pop)
    assert f_rot <= f_ord + 1e-12
    # best of 10^4 random same-diagonal projections, reached by a random walk of
    # diagonal-preserving rotations started at the unordered construction
    z = w * x
    A = schur_horn_projection(pi)[0].entries.real
    best = np.inf
    for _ in range(10_000):
        A = scramble_keeping_diagonal(A, rng, 1)
        best = min(best, float(z @ ((np.eye(N) - A) * A) @ z))
    assert f_rot >= -1e-12
    assert f_rot <= best + 1e-9
