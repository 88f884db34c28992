import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import g_pairs
from thermodbar.dbar_oracle import (block_distribution, brute_force_transport, dbar_sandwich,
                                    hamming_cost, hamming_ot_lower, iid_dbar_exact,
                                    transportation_simplex)
from thermodbar.gmeasure_lab import CylinderMeasure, GFunction, g_measure
from thermodbar.shift_core import BoundViolation

P = GFunction.memoryless([2 / 3, 1 / 3])
Q = GFunction.memoryless([1 / 2, 1 / 2])
M = GFunction.from_matrix([[0.8, 0.4], [0.2, 0.6]])
M_PRIME = GFunction.from_matrix([[0.78, 0.4], [0.22, 0.6]])

prob_vectors = st.integers(2, 4).flatmap(
    lambda N: st.lists(st.floats(0.01, 1.0), min_size=N, max_size=N)).map(
    lambda v: np.asarray(v) / np.sum(v))


def test_block_distribution_examples():
    mu = g_measure(P, 2)
    assert np.allclose(block_distribution(mu, 1).table, [2 / 3, 1 / 3])
    assert np.allclose(block_distribution(mu, 2).table, [4 / 9, 2 / 9, 2 / 9, 1 / 9])
    mu = g_measure(M, 2)
    assert np.allclose(block_distribution(mu, 2).table, [8 / 15, 2 / 15, 2 / 15, 1 / 5])
    with pytest.raises(ValueError):
        block_distribution(mu, 3)


@given(g_pairs(max_N=3, max_depth=2))
def test_block_distributions_are_consistent(pair):
    g, _ = pair
    mu = g_measure(g, 3)
    for n in (1, 2, 3):
        t = block_distribution(mu, n).table
        assert t.sum() == pytest.approx(1.0)
        if n > 1:
            coarse = block_distribution(mu, n - 1).table
            assert np.allclose(t.reshape(coarse.size, -1).sum(axis=1), coarse, atol=1e-14)


def test_iid_exact_examples():
    assert iid_dbar_exact([2 / 3, 1 / 3], [1 / 2, 1 / 2]) == pytest.approx(1 / 6)
    assert iid_dbar_exact([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert iid_dbar_exact([1, 0], [0, 1]) == 1.0
    with pytest.raises(ValueError):
        iid_dbar_exact([0.5, 0.6], [0.5, 0.5])


def test_ot_examples():
    mp, mq = g_measure(P, 4), g_measure(Q, 4)
    for n in (1, 2, 3, 4):
        plan = hamming_ot_lower(block_distribution(mp, n), block_distribution(mq, n))
        assert plan.cost == pytest.approx(1 / 6, abs=1e-10)
        assert 0 <= plan.cost <= 1
        same = hamming_ot_lower(block_distribution(mp, n), block_distribution(mp, n))
        assert same.cost == pytest.approx(0.0, abs=1e-12)
    a = block_distribution(mp, 2).table
    b = block_distribution(mq, 2).table
    assert brute_force_transport(a, b, hamming_cost(2, 2)) == pytest.approx(1 / 6, abs=1e-12)


def test_simplex_matches_vertex_enumeration_small():
    rng = np.random.default_rng(0)
    for _ in range(30):
        m, n = rng.integers(2, 5, size=2)
        if m * n > 16:
            continue
        a = rng.dirichlet(np.ones(m))
        b = rng.dirichlet(np.ones(n))
        C = rng.random((m, n))
        x, cost, _ = transportation_simplex(a, b, C)
        assert np.allclose(x.sum(axis=1), a, atol=1e-12)
        assert np.allclose(x.sum(axis=0), b, atol=1e-12)
        assert cost == pytest.approx(brute_force_transport(a, b, C), abs=1e-10)


def test_simplex_handles_degenerate_supply():
    a = np.array([0.5, 0.5, 0.0])
    b = np.array([0.5, 0.0, 0.5])
    x, cost, _ = transportation_simplex(a, b, 1 - np.eye(3))
    assert cost == pytest.approx(0.5)
    assert np.all(x >= 0)


@given(prob_vectors, st.integers(0, 10**6))
def test_n1_equals_total_variation(p, seed):
    q = np.random.default_rng(seed).dirichlet(np.ones(p.size))
    plan = hamming_ot_lower(block_distribution(CylinderMeasure(p.size, 1, p), 1),
                            block_distribution(CylinderMeasure(q.size, 1, q), 1))
    assert plan.cost == pytest.approx(iid_dbar_exact(p, q), abs=1e-10)


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_iid_constant_in_n(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2))
    mp, mq = CylinderMeasure.product(p, 4), CylinderMeasure.product(q, 4)
    exact = iid_dbar_exact(p, q)
    for n in (1, 2, 3, 4):
        cost = hamming_ot_lower(block_distribution(mp, n), block_distribution(mq, n)).cost
        assert cost == pytest.approx(exact, abs=1e-10)
    a, b = mp.marginal(2), mq.marginal(2)
    assert brute_force_transport(a, b, hamming_cost(2, 2)) == pytest.approx(exact, abs=1e-10)


def test_sandwich_examples():
    r = dbar_sandwich(P, Q)
    assert r.lower == pytest.approx(1 / 6, abs=1e-10)
    assert r.upper == pytest.approx(1 / 6, abs=1e-10)
    assert r.exact == pytest.approx(1 / 6)
    r = dbar_sandwich(M, M)
    assert r.lower == pytest.approx(0.0, abs=1e-12) and r.upper == pytest.approx(0.0, abs=1e-12)
    r = dbar_sandwich(M, M_PRIME, (1, 2, 3, 4))
    assert r.lower <= r.upper + 1e-8
    assert all(v >= 0 for v in r.per_n.values())


def test_sandwich_rejects_inconsistent_upper():
    with pytest.raises(BoundViolation):
        dbar_sandwich(P, Q, upper=0.1)


def test_sandwich_on_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        N = int(rng.integers(2, 4))
        dg, dh = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        g = GFunction.from_log_table(N, dg, rng.normal(size=N**dg))
        h = GFunction.from_log_table(N, dh, rng.normal(size=N**dh))
        r = dbar_sandwich(g, h, (1, 2))
        assert r.lower <= r.upper + 1e-8
