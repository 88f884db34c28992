"""g-functions, their invariant measures at finite depth, and sup-norm contraction."""

from __future__ import annotations

from typing import List, NamedTuple

import numpy as np

from .potential_lab import CylinderTable, Potential, variation
from .shift_core import adjoint_table, lift, prefix_marginal, shift_marginal, transfer_table

FIBER_TOL = 1e-9


class GFunctionError(ValueError):
    pass


class GFunction(CylinderTable):
    """Positive table with unit sums over every preimage fiber.

    The entry at word ``i w`` is ``g(i w ...)``: the probability of prepending
    symbol ``i`` to a past that starts with ``w``.  The tail certificate bounds
    the variations of ``log g`` beyond the table depth.
    """

    kind = "g-function"

    def __init__(self, alphabet_size, depth, table, tail_C=0.0, tail_theta=0.5):
        if depth < 1:
            raise ValueError("g-function depth must be >= 1")
        super().__init__(alphabet_size, depth, table, tail_C, tail_theta)
        if np.any(self.table <= 0) or np.any(self.table > 1 + FIBER_TOL):
            raise GFunctionError("g-function entries must lie in (0, 1]")

    @classmethod
    def memoryless(cls, p) -> "GFunction":
        p = np.asarray(p, dtype=float)
        return cls(p.size, 1, p)

    @classmethod
    def from_matrix(cls, M) -> "GFunction":
        """Depth-2 g-function ``g(i j ...) = M[i, j]``; columns of ``M`` must sum to 1."""
        M = np.asarray(M, dtype=float)
        return cls(M.shape[0], 2, M.reshape(-1))

    @classmethod
    def uniform(cls, alphabet_size: int) -> "GFunction":
        return cls(alphabet_size, 1, np.full(alphabet_size, 1.0 / alphabet_size))

    @classmethod
    def from_log_table(cls, alphabet_size, depth, log_table, tail_C=0.0, tail_theta=0.5):
        """Exponentiate and renormalize each fiber of an arbitrary log table."""
        w = np.exp(np.asarray(log_table, dtype=float).reshape(alphabet_size, -1))
        w = w / w.sum(axis=0, keepdims=True)
        return cls(alphabet_size, depth, w.reshape(-1), tail_C, tail_theta)

    def fibers(self) -> np.ndarray:
        """``(N, N**(k-1))`` view: column ``x`` holds ``g(i x)`` for every symbol ``i``."""
        return self.table.reshape(self.alphabet_size, -1)

    def log_potential(self) -> Potential:
        return Potential(self.alphabet_size, self.depth, np.log(self.table), self.tail_C,
                         self.tail_theta)

    def with_depth(self, depth: int) -> "GFunction":
        return GFunction(self.alphabet_size, depth, self.lifted(depth), self.tail_C,
                         self.tail_theta)

    def V(self, n: int) -> float:
        """Variation of ``log g`` over points sharing their first ``n - 1`` symbols."""
        return variation(self.log_potential(), n).value


class CylinderMeasure(CylinderTable):
    """Probability masses of the depth-``m`` cylinders of a shift-invariant measure."""

    kind = "measure"

    def __init__(self, alphabet_size, depth, table):
        super().__init__(alphabet_size, depth, table)
        if np.any(self.table < -1e-15):
            raise ValueError("masses must be nonnegative")

    def marginal(self, depth: int) -> np.ndarray:
        return prefix_marginal(self.table, self.alphabet_size, self.depth, depth)

    def shift_defect(self) -> float:
        """Sup distance between the two depth-(m-1) marginals (zero when stationary)."""
        if self.depth == 0:
            return 0.0
        return float(np.max(np.abs(self.marginal(self.depth - 1)
                                   - shift_marginal(self.table, self.alphabet_size))))

    @classmethod
    def product(cls, p, depth: int) -> "CylinderMeasure":
        p = np.asarray(p, dtype=float)
        table = np.ones(1)
        for _ in range(depth):
            table = np.outer(table, p).reshape(-1)
        return cls(p.size, depth, table)


class GReport(NamedTuple):
    max_fiber_deviation: float
    positive: bool
    V: List[float]  # V_1 .. V_{k+1}


def validate_g(g: GFunction, tol: float = FIBER_TOL) -> GReport:
    dev = float(np.max(np.abs(g.fibers().sum(axis=0) - 1.0)))
    if dev > tol:
        raise GFunctionError(f"fiber sums deviate from 1 by {dev:.3e}")
    V = [g.V(n) for n in range(1, g.depth + 2)]
    return GReport(dev, bool(np.all(g.table > 0)), V)


def stationary_root(g: GFunction) -> np.ndarray:
    """Masses of the depth-(k-1) cylinders under the g-measure.

    Solves ``pi = M pi`` with ``M[v, u] = g(v_0 u)`` whenever ``v_1.. = u_..-1``
    (column-stochastic because fibers sum to one) and ``sum(pi) = 1``.
    """
    N, k = g.alphabet_size, g.depth
    if k == 1:
        return np.ones(1)
    S = N ** (k - 1)
    y = np.arange(N**k)
    M = np.zeros((S, S))
    M[y // N, y % S] = g.table
    A = M - np.eye(S)
    A[-1, :] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    if np.any(pi < -1e-12) or not np.all(np.isfinite(pi)):
        raise GFunctionError("stationary vector is not a probability vector")
    return np.clip(pi, 0.0, None)


def g_measure(g: GFunction, m: int) -> CylinderMeasure:
    """The g-measure on depth-``m`` cylinders: ``mu[i w] = g(i w) mu[w]`` from the stationary root."""
    N, k = g.alphabet_size, g.depth
    mu = stationary_root(g)
    d = k - 1
    while d < m:
        # prepend one symbol: new word y = i w, mass g(y[:k]) * mu[w]
        mu = lift(g.table, N, k, d + 1) * mu[np.arange(N ** (d + 1)) % (N**d)]
        d += 1
    if d > m:
        mu = prefix_marginal(mu, N, d, m)
    return CylinderMeasure(N, m, mu)


def adjoint_residual(g: GFunction, mu: CylinderMeasure) -> float:
    """``|| L*_{log g} mu - mu ||_1`` at the depth of ``mu``."""
    out = adjoint_table(g.alphabet_size, np.log(g.table), g.depth, mu.table, mu.depth)
    return float(np.sum(np.abs(out - mu.table)))


def transfer_g(g: GFunction, f: np.ndarray, f_depth: int):
    return transfer_table(g.alphabet_size, np.log(g.table), g.depth, f, f_depth)


def sup_contraction_check(g: GFunction, samples: int = 64, seed: int = 0, depth=None) -> float:
    """Largest ``||L f||_sup / ||f||_sup`` over sampled tables (never above 1)."""
    N = g.alphabet_size
    m = g.depth if depth is None else depth
    rng = np.random.default_rng(seed)
    tests = [np.ones(N**m)]
    tests += [np.eye(N**m)[i] for i in range(min(N**m, 16))]
    for _ in range(samples):
        tests.append(rng.choice([-1.0, 1.0], size=N**m))
        tests.append(rng.normal(size=N**m))
    best = 0.0
    for f in tests:
        Lf, _ = transfer_g(g, f, m)
        best = max(best, float(np.max(np.abs(Lf)) / np.max(np.abs(f))))
    return best


def perturb_toward_uniform(g: GFunction, delta: float, tol: float = 1e-12) -> GFunction:
    """Fiber-renormalized ``exp((1 - s) log g + s log u)`` with ``d(result, g) = delta``.

    ``u`` is the uniform kernel; ``s`` is found by bisection and may exceed 1
    when ``delta`` is larger than the distance from ``g`` to ``u``.
    """
    from .potential_lab import log_distance

    if delta < 0:
        raise ValueError("delta must be nonnegative")
    logg = np.log(g.table)
    logu = np.full_like(logg, -np.log(g.alphabet_size))

    def mixed(s):
        return GFunction.from_log_table(g.alphabet_size, g.depth, (1 - s) * logg + s * logu,
                                        g.tail_C, g.tail_theta)

    if delta == 0:
        return g
    if log_distance(mixed(1.0), g) == 0:
        raise ValueError("g is uniform; the mixing family is constant")
    hi = 1.0
    while log_distance(mixed(hi), g) < delta:
        hi *= 2
        if hi > 1e6:
            raise ValueError(f"distance {delta} unreachable along the mixing family")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if log_distance(mixed(mid), g) < delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return mixed(0.5 * (lo + hi))
