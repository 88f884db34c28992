"""The ten acceptance criteria, each reporting one PASS/FAIL line."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from thermodbar.coupling_lab import (L_g, coupling_kernel, dbar_upper_bounds, defect_bound_slack,
                                     marginal_errors, return_time_lower_bound, simulate_pair,
                                     z_chain)
from thermodbar.dbar_oracle import (block_distribution, brute_force_transport, dbar_sandwich,
                                    hamming_cost, hamming_ot_lower, iid_dbar_exact)
from thermodbar.experiments import ExperimentConfig, run, unit_direction
from thermodbar.gmeasure_lab import CylinderMeasure, GFunction, g_measure
from thermodbar.potential_lab import Potential, holder_distance, log_distance
from thermodbar.pressure_lab import gurevich_pressure, spr_classify
from thermodbar.rpf_transfer import normalized_potential_gap, rpf_eigendata

P = GFunction.memoryless([2 / 3, 1 / 3])
Q = GFunction.memoryless([1 / 2, 1 / 2])
CMAT = np.array([[2.0, 1.0], [1.0, 1.0]])
C = Potential.from_log_weights(CMAT)


@contextmanager
def criterion(number, title, budget_s):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"runtime {elapsed:.1f}s over the {budget_s}s budget"
    except AssertionError as exc:
        line = f"criterion {number:2d}: FAIL  {title}  ({exc})"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        raise
    line = f"criterion {number:2d}: PASS  {title}  ({time.perf_counter() - start:.2f}s)"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def _random_family(n_pairs, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        N = int(rng.integers(2, 5))
        dg, dh = (int(v) for v in rng.integers(1, 4, size=2))
        yield (GFunction.from_log_table(N, dg, rng.normal(size=N**dg)),
               GFunction.from_log_table(N, dh, rng.normal(size=N**dh)))


def test_criterion_01_kernel_marginals():
    with criterion(1, "coupling kernel marginals on 1000 random pairs", 10):
        worst = max(max(marginal_errors(coupling_kernel(g, h)))
                    for g, h in _random_family(1000, 1))
        assert worst <= 1e-12, f"worst marginal error {worst:.2e}"


def test_criterion_02_defect_bound():
    with criterion(2, "defect bound on 1000 random pairs", 10):
        worst = min(defect_bound_slack(g, h) for g, h in _random_family(1000, 1))
        assert worst >= -1e-12, f"defect exceeds its bound by {-worst:.2e}"


def test_criterion_03_lipschitz_sandwich():
    with criterion(3, "Lipschitz sandwich, memoryless pair plus 200 random pairs", 60):
        mp, mq = g_measure(P, 1), g_measure(Q, 1)
        oracle = hamming_ot_lower(block_distribution(mp, 1), block_distribution(mq, 1)).cost
        assert abs(oracle - 1 / 6) <= 1e-12
        b = dbar_upper_bounds(P, Q)
        assert abs(b.coupling_value - 1 / 6) <= 1e-8
        assert abs(b.lipschitz - 2 * math.log(1.5)) <= 1e-6 and 1 / 6 <= b.lipschitz
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 200:
            N = int(rng.integers(2, 4))
            depth = int(rng.integers(1, 3))
            base = rng.normal(size=N**depth)
            g = GFunction.from_log_table(N, depth, base)
            h = GFunction.from_log_table(N, depth, base + 0.3 * rng.normal(size=N**depth))
            d = log_distance(g, h)
            if d >= math.log(2):
                continue
            upper = dbar_upper_bounds(g, h)
            lower = dbar_sandwich(g, h, (1, 2), upper=upper.coupling_value).lower
            assert lower <= upper.coupling_value + 1e-8
            assert upper.coupling_value <= 2 * math.exp(L_g(g)) * d + 1e-12
            checked += 1


def test_criterion_04_expected_return():
    with criterion(4, "return-time bound 2 <= E(tau) = 6 and Monte Carlo agreement", 30):
        bound = return_time_lower_bound(P, Q).value
        exact = z_chain(P, Q).expected_return
        assert abs(bound - 2) <= 1e-12 and abs(exact - 6) <= 1e-10 and bound <= exact
        sim = simulate_pair(P, Q, steps=10**6, seed=0)
        assert abs(sim.mean_return - 6) <= 3 * sim.return_se, \
            f"{sim.mean_return:.4f} +- {sim.return_se:.4f}"


def test_criterion_05_kac_identity():
    with criterion(5, "Kac identity on 50 solvable inputs", 30):
        rng = np.random.default_rng(5)
        worst = 0.0
        for k in range(50):
            N = int(rng.integers(2, 4))
            if k % 2:
                g = GFunction.memoryless(rng.dirichlet(np.ones(N)))
                h = GFunction.memoryless(rng.dirichlet(np.ones(N)))
            else:
                A = rng.uniform(0.05, 1.0, size=(N, N))
                B = A * np.exp(0.2 * rng.normal(size=(N, N)))
                g = GFunction.from_matrix(A / A.sum(axis=0))
                h = GFunction.from_matrix(B / B.sum(axis=0))
            z = z_chain(g, h)
            worst = max(worst, abs(z.mismatch_mass - 1 / z.expected_return))
        assert worst <= 1e-10, f"worst Kac defect {worst:.2e}"


def test_criterion_06_rpf_eigendata():
    with criterion(6, "RPF eigendata for log p and the golden matrix", 5):
        e = rpf_eigendata(Potential.from_log_weights([2 / 3, 1 / 3]))
        assert e.lam == 1.0 and np.array_equal(e.h.table, [1.0, 1.0])
        assert np.max(np.abs(e.nu.table - [2 / 3, 1 / 3])) <= 1e-15
        e = rpf_eigendata(C)
        golden = math.log((3 + math.sqrt(5)) / 2)
        assert abs(math.log(e.lam) - golden) <= 1e-9
        extrapolated = gurevich_pressure(C, n_max=16).limit
        assert abs(math.log(e.lam) - extrapolated) <= 1e-6, \
            f"extrapolated {extrapolated!r} vs {math.log(e.lam)!r}"


def test_criterion_07_spr_classification():
    with criterion(7, "SPR margins for log p and the constant potentials", 5):
        r = spr_classify(Potential.from_log_weights([2 / 3, 1 / 3]))
        assert r.classification == "SPR" and abs(r.spr_margin - math.log(3)) <= 1e-3
        for N, margin in ((2, math.log(2)), (3, math.log(1.5))):
            r = spr_classify(Potential.constant(N))
            assert r.classification == "SPR" and abs(r.spr_margin - margin) <= 1e-3, \
                f"N={N}: margin {r.spr_margin:.6f}"


def test_criterion_08_normalized_gap_trend():
    with criterion(8, "normalized gap shrinks over 6 halvings of d_theta", 30):
        w = unit_direction(C, 0.5, 0)
        gaps = []
        for j in range(7):
            delta = 0.5 / 2**j
            tau = C + w * delta
            assert abs(holder_distance(C, tau, 0.5).d_theta - delta) <= 1e-12
            gaps.append(normalized_potential_gap(C, tau).gap)
        assert all(b <= a + 1e-9 for a, b in zip(gaps, gaps[1:])), gaps
        assert gaps[-1] < gaps[0] / 8, gaps


def test_criterion_09_measure_pipeline():
    with criterion(9, "d-bar bound between RPF measures over a 16x reduction", 60):
        sched = [0.4, 0.2, 0.1, 0.05, 0.025]
        rep = run(ExperimentConfig("continuity-potential", {"phi": C.to_dict()}, sched, seed=0))
        vals = [r["measure_coupling_upper"] for r in rep.rows]
        assert vals[-1] < vals[0] / 4, vals


def test_criterion_10_oracle_consistency():
    with criterion(10, "transport oracle against TV, i.i.d. closed form and vertices", 60):
        rng = np.random.default_rng(10)
        for _ in range(20):
            N = int(rng.integers(2, 4))
            p, q = rng.dirichlet(np.ones(N)), rng.dirichlet(np.ones(N))
            mp, mq = CylinderMeasure.product(p, 4), CylinderMeasure.product(q, 4)
            exact = iid_dbar_exact(p, q)
            n1 = hamming_ot_lower(block_distribution(mp, 1), block_distribution(mq, 1)).cost
            assert abs(n1 - exact) <= 1e-12
            for n in range(2, 5 if N == 2 else 4):
                cost = hamming_ot_lower(block_distribution(mp, n), block_distribution(mq, n)).cost
                assert abs(cost - exact) <= 1e-10, f"N={N} n={n}: {cost} vs {exact}"
            if N == 2:
                vert = brute_force_transport(mp.marginal(2), mq.marginal(2), hamming_cost(2, 2))
                assert abs(vert - exact) <= 1e-10
