import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import g_pairs, random_g
from thermodbar.coupling_lab import (L_g, alternating_memory_g, cesaro_joining, check_marginals,
                                     coupling_kernel, dbar_upper_bounds, defect_bound_slack,
                                     floor_and_defect, marginal_errors, return_time_lower_bound,
                                     simulate_pair, stationary_joining, z_chain)
from thermodbar.gmeasure_lab import GFunction, g_measure, perturb_toward_uniform
from thermodbar.potential_lab import log_distance

P = GFunction.memoryless([2 / 3, 1 / 3])
Q = GFunction.memoryless([1 / 2, 1 / 2])
M = GFunction.from_matrix([[0.8, 0.4], [0.2, 0.6]])
M_PRIME = GFunction.from_matrix([[0.78, 0.4], [0.22, 0.6]])


def test_floor_and_defect_examples():
    F, delta = floor_and_defect(P, Q, [], [])
    assert np.allclose(F, [1 / 2, 1 / 3]) and delta == pytest.approx(1 / 6)
    F, delta = floor_and_defect(M, M, [0], [0])
    assert np.allclose(F, [0.8, 0.2]) and delta == 0.0
    # eps-level defect: 1/6 against 1 - exp(-ln(3/2)) = 1/3
    assert defect_bound_slack(P, Q) == pytest.approx(1 / 3 - 1 / 6)


def test_kernel_examples():
    K = coupling_kernel(P, Q)
    G = K.G[0, 0]
    assert G[0, 1] == pytest.approx(1 / 6) and G[1, 0] == 0.0
    assert G[0, 0] == pytest.approx(1 / 2) and G[1, 1] == pytest.approx(1 / 3)
    assert G[0].sum() == pytest.approx(2 / 3)
    K = coupling_kernel(M, M)
    for x in range(2):
        assert np.allclose(K.G[x, x], np.diag(M.fibers()[:, x]))


@given(g_pairs(max_N=4, max_depth=3))
def test_kernel_marginals_and_defect_bound(pair):
    g, h = pair
    K = coupling_kernel(g, h)
    assert np.all(K.G >= 0)
    assert max(marginal_errors(K)) <= 1e-12
    check_marginals(K)
    assert np.all((K.delta >= 0) & (K.delta < 1))
    diag = np.einsum("abii->abi", K.G)
    assert np.array_equal(diag, K.F)
    assert defect_bound_slack(g, h) >= -1e-12


def test_joining_examples():
    r = cesaro_joining(P, Q)
    assert r.mismatch == pytest.approx(1 / 6, abs=1e-12)
    r = cesaro_joining(M, M)
    # off-diagonal mass of the starting product decays geometrically
    assert r.mismatch <= 1e-10
    r = cesaro_joining(M, M_PRIME, m=3)
    assert r.marginal_error <= 1e-10 and r.residual <= 1e-8


def test_z_chain_examples():
    z = z_chain(P, Q)
    assert z.expected_return == pytest.approx(6.0, rel=1e-12)
    assert z.mismatch_mass == pytest.approx(1 / 6, rel=1e-12)
    assert np.allclose(z.match_prob[:-1], 5 / 6)
    z = z_chain(M, M)
    assert z.mismatch_mass == 0.0 and math.isinf(z.expected_return)


def _markov_pair(rng):
    A = rng.uniform(0.05, 1, size=(2, 2))
    B = A + rng.uniform(-0.04, 0.04, size=(2, 2))
    return (GFunction.from_matrix(A / A.sum(axis=0)), GFunction.from_matrix(B / B.sum(axis=0)))


@pytest.mark.parametrize("seed", range(10))
def test_kac_and_cesaro_consistency(seed):
    rng = np.random.default_rng(seed)
    if seed % 2:
        g, h = GFunction.memoryless(rng.dirichlet(np.ones(3))), \
            GFunction.memoryless(rng.dirichlet(np.ones(3)))
    else:
        g, h = _markov_pair(rng)
    z = z_chain(g, h)
    assert abs(z.mismatch_mass * z.expected_return - 1) <= 1e-10
    j = cesaro_joining(g, h)
    assert abs(j.mismatch - z.mismatch_mass) <= 1e-8
    # the running mean carries the transient of the first iterates, O(1/iters)
    assert abs(j.cesaro_mismatch - z.mismatch_mass) <= 100 / 10_000
    assert return_time_lower_bound(g, h).value <= z.expected_return + 1e-9


def test_stationary_joining_marginals():
    mu = stationary_joining(M, M_PRIME)
    assert np.allclose(mu.sum(axis=1), g_measure(M, 1).table, atol=1e-12)
    assert np.allclose(mu.sum(axis=0), g_measure(M_PRIME, 1).table, atol=1e-12)


@given(g_pairs(max_N=3, max_depth=2))
def test_coupling_value_is_symmetric(pair):
    g, h = pair
    assert z_chain(g, h).mismatch_mass == pytest.approx(z_chain(h, g).mismatch_mass, abs=1e-10)


def test_return_bound_examples():
    assert return_time_lower_bound(P, Q).value == pytest.approx(2.0, rel=1e-12)
    d = 0.1
    h = GFunction.memoryless([0.5 * math.exp(-0.1), 1 - 0.5 * math.exp(-0.1)])
    g = GFunction.memoryless([0.5, 0.5])
    assert log_distance(g, h) == pytest.approx(d)
    r = return_time_lower_bound(g, h, V=[0.0, math.log(3)])
    expected_terms = [math.exp(-(math.log(3) + d)) * math.exp(-d) ** (n - 1) for n in (1, 2, 3)]
    assert np.allclose(r.partial_sums[:3], np.cumsum(expected_terms), rtol=1e-12)
    closed = math.exp(-(math.log(3) + d)) / (1 - math.exp(-d))
    assert r.value == pytest.approx(closed, rel=1e-12)
    r = return_time_lower_bound(P, P, V=[0.0, 1.0, 0.5], n_max=5)
    assert r.partial_sums[-1] == pytest.approx(
        sum(math.exp(-sum([1.0, 0.5][:n])) for n in range(1, 6)))


def test_dbar_bound_examples():
    b = dbar_upper_bounds(P, Q)
    assert b.coupling_value == pytest.approx(1 / 6, abs=1e-12)
    assert b.kac_bound == pytest.approx(0.5)
    assert b.exp_bound == pytest.approx(0.5)
    assert b.lipschitz == pytest.approx(2 * math.log(1.5))
    b = dbar_upper_bounds(M, M)
    assert b.coupling_value == b.kac_bound == b.exp_bound == b.lipschitz == 0.0


def test_L_g_geometric_tail():
    g = GFunction(2, 1, [0.6, 0.4], tail_C=0.2, tail_theta=0.5)
    assert L_g(g) == pytest.approx(0.2 * 0.25 / 0.5)
    assert L_g(M) == pytest.approx(math.log(3))


@settings(max_examples=40)
@given(g_pairs(max_N=3, max_depth=3))
def test_bound_ordering(pair):
    g, h = pair
    b = dbar_upper_bounds(g, h)  # raises on a broken ordering
    assert b.coupling_value <= b.kac_bound + 1e-10


def test_monte_carlo_memoryless():
    s = simulate_pair(P, Q, steps=10**6, seed=7)
    assert abs(s.mismatch_rate - 1 / 6) <= 3 * s.mismatch_se
    assert abs(s.mean_return - 6) <= 3 * s.return_se


def test_monte_carlo_markov():
    z = z_chain(M, M_PRIME)
    s = simulate_pair(M, M_PRIME, steps=10**6, seed=3)
    assert abs(s.mismatch_rate - z.mismatch_mass) <= 3 * s.mismatch_se
    assert abs(s.mean_return - z.expected_return) <= 3 * s.return_se


def test_monte_carlo_identical_inputs_and_determinism():
    s = simulate_pair(M, M, steps=10**4)
    assert s.mismatch_rate == 0.0 and s.returns == 0
    assert simulate_pair(P, Q, steps=10**4, seed=5) == simulate_pair(P, Q, steps=10**4, seed=5)


def test_long_memory_trend():
    g = alternating_memory_g(6)
    V = [g.V(n) for n in range(2, 7)]
    assert all(v > 0 for v in V)
    values = []
    for j in range(1, 7):
        h = perturb_toward_uniform(g, 2.0**-j)
        assert log_distance(g, h) == pytest.approx(2.0**-j, rel=1e-9)
        values.append(z_chain(g, h).mismatch_mass)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] < values[0] / 8
