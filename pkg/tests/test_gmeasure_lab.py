import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import g_functions, random_g
from thermodbar.gmeasure_lab import (CylinderMeasure, GFunction, GFunctionError, adjoint_residual,
                                     g_measure, perturb_toward_uniform, stationary_root,
                                     sup_contraction_check, transfer_g, validate_g)
from thermodbar.potential_lab import Potential, log_distance
from thermodbar.rpf_transfer import normalize_to_g, rpf_eigendata, rpf_measure

MEMORYLESS = GFunction.memoryless([2 / 3, 1 / 3])
MARKOV = GFunction.from_matrix([[0.8, 0.4], [0.2, 0.6]])


def test_validate_examples():
    rep = validate_g(MEMORYLESS)
    assert rep.positive and rep.V[1:] == [0.0]
    rep = validate_g(MARKOV)
    assert rep.max_fiber_deviation < 1e-15 and rep.V[1] == pytest.approx(math.log(3))
    bad = GFunction(2, 1, [0.6, 0.37])
    with pytest.raises(GFunctionError):
        validate_g(bad)
    with pytest.raises(GFunctionError):
        GFunction(2, 1, [0.0, 1.0])


def test_g_measure_examples():
    mu = g_measure(MEMORYLESS, 2)
    assert np.allclose(mu.table, [4 / 9, 2 / 9, 2 / 9, 1 / 9], atol=1e-15)
    assert np.allclose(stationary_root(MARKOV), [2 / 3, 1 / 3])
    mu = g_measure(MARKOV, 2)
    assert np.allclose(mu.table, [8 / 15, 2 / 15, 2 / 15, 1 / 5], atol=1e-15)
    phi = Potential.from_log_weights([0.2, 0.5, 0.3])
    g = normalize_to_g(phi, rpf_eigendata(phi))
    assert np.allclose(g_measure(g, 3).table, CylinderMeasure.product([0.2, 0.5, 0.3], 3).table)


def test_sup_contraction_examples():
    assert sup_contraction_check(MARKOV) <= 1 + 1e-12
    Lf, depth = transfer_g(MEMORYLESS, np.array([1.0, 0.0]), 1)
    assert depth == 1 and np.allclose(Lf, 2 / 3)
    ones, _ = transfer_g(MARKOV, np.ones(4), 2)
    assert np.allclose(ones, 1.0, atol=1e-15)


@given(g_functions(max_N=4, max_depth=3), st.integers(1, 4))
def test_g_measure_invariants(g, extra):
    m = g.depth + extra - 1
    mu = g_measure(g, m)
    assert abs(mu.table.sum() - 1) < 1e-12
    assert mu.shift_defect() < 1e-12
    assert adjoint_residual(g, mu) < 1e-12
    if m >= 1:
        assert np.max(np.abs(mu.marginal(m - 1) - g_measure(g, m - 1).table)) < 1e-12
    assert sup_contraction_check(g, samples=8) <= 1 + 1e-12


def test_memoryless_measure_is_exact_product(rng):
    p = rng.dirichlet(np.ones(4))
    mu = g_measure(GFunction.memoryless(p), 3)
    # same products, possibly associated in a different order
    assert np.allclose(mu.table, CylinderMeasure.product(p, 3).table, rtol=4e-16, atol=0)


@given(st.integers(0, 10**6))
def test_composition_with_normalization(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 4))
    depth = int(rng.integers(1, 4))
    phi = Potential(N, depth, rng.normal(size=N**depth))
    eig = rpf_eigendata(phi)
    g = normalize_to_g(phi, eig)
    assert np.max(np.abs(g.fibers().sum(axis=0) - 1)) < 1e-10
    m = eig.depth
    assert np.max(np.abs(g_measure(g, m).table - rpf_measure(eig).table)) < 1e-9


@given(g_functions(), st.floats(0.0, 1.0))
def test_perturbation_hits_requested_distance(g, delta):
    if np.allclose(g.fibers(), 1 / g.alphabet_size):
        return
    h = perturb_toward_uniform(g, delta)
    assert isinstance(h, GFunction)
    assert abs(log_distance(g, h) - delta) < 1e-9
    assert np.max(np.abs(h.fibers().sum(axis=0) - 1)) < 1e-12


def test_cylinder_measure_guards():
    with pytest.raises(ValueError):
        CylinderMeasure(2, 1, [1.5, -0.5])
