"""Lower bounds on d-bar from finite-block optimal transport, plus closed forms."""

from __future__ import annotations

import itertools
import math
from collections import deque
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .gmeasure_lab import CylinderMeasure, GFunction, g_measure
from .shift_core import BoundViolation, check_capacity, words_array

PLAN_TOL = 1e-9


class BlockDistribution(NamedTuple):
    alphabet_size: int
    n: int
    table: np.ndarray


class TransportPlan(NamedTuple):
    n: int
    plan: np.ndarray
    cost: float
    pivots: int


def block_distribution(mu: CylinderMeasure, n: int) -> BlockDistribution:
    if n > mu.depth:
        raise ValueError(f"block length {n} exceeds the measure depth {mu.depth}")
    return BlockDistribution(mu.alphabet_size, n, mu.marginal(n))


def hamming_cost(N: int, n: int) -> np.ndarray:
    W = words_array(N, n)
    return (W[:, None, :] != W[None, :, :]).sum(axis=2) / n


# --- transportation simplex -------------------------------------------------


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    x = np.zeros((m, n))
    basis = []
    s, d = a.copy(), b.copy()
    i = j = 0
    while i < m and j < n:
        q = min(s[i], d[j])
        x[i, j] = q
        basis.append((i, j))
        s[i] -= q
        d[j] -= q
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif s[i] <= d[j]:
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(C, basis, m, n):
    adj_r = [[] for _ in range(m)]
    adj_c = [[] for _ in range(n)]
    for i, j in basis:
        adj_r[i].append(j)
        adj_c[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in adj_r[k]:
                if np.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in adj_c[k]:
                if np.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    queue.append(("r", i))
    return u, v, adj_r, adj_c


def _tree_path(adj_r, adj_c, i0, j0):
    """Cells on the tree path from row node ``i0`` to column node ``j0``."""
    prev = {("r", i0): None}
    queue = deque([("r", i0)])
    while queue:
        node = queue.popleft()
        if node == ("c", j0):
            break
        kind, k = node
        nbrs = [("c", j) for j in adj_r[k]] if kind == "r" else [("r", i) for i in adj_c[k]]
        for nb in nbrs:
            if nb not in prev:
                prev[nb] = node
                queue.append(nb)
    cells = []
    node = ("c", j0)
    while prev[node] is not None:
        p = prev[node]
        cells.append((p[1], node[1]) if p[0] == "r" else (node[1], p[1]))
        node = p
    return cells[::-1]  # starts at a cell in row i0, ends at a cell in column j0


def transportation_simplex(a, b, C, max_pivots: Optional[int] = None):
    """Minimize ``<C, x>`` over nonnegative ``x`` with row sums ``a`` and column sums ``b``.

    Starts from the northwest-corner basis and pivots on the most negative
    reduced cost (switching to the first negative one if the pivot budget
    runs low), keeping degenerate zero cells in the spanning-tree basis.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    if abs(a.sum() - b.sum()) > 1e-9:
        raise ValueError("supply and demand totals differ")
    b = b * (a.sum() / b.sum())
    x, basis = _northwest_corner(a, b)
    budget = max_pivots or 50 * (m + n) ** 2
    in_basis = np.zeros((m, n), dtype=bool)
    for cell in basis:
        in_basis[cell] = True
    pivots = 0
    while True:
        u, v, adj_r, adj_c = _potentials(C, basis, m, n)
        red = C - u[:, None] - v[None, :]
        red[in_basis] = 0.0
        if red.min() >= -1e-12:
            break
        if pivots < budget // 2:
            i, j = np.unravel_index(np.argmin(red), red.shape)
        elif pivots < budget:
            i, j = np.unravel_index(np.argmax(red.reshape(-1) < -1e-12), red.shape)
        else:
            raise RuntimeError("transportation simplex exceeded its pivot budget")
        path = _tree_path(adj_r, adj_c, i, j)
        # cycle: (i, j)+, path[0]-, path[1]+, ...
        minus = path[0::2]
        plus = path[1::2]
        theta = min(x[c] for c in minus)
        leave = next(c for c in minus if x[c] == theta)
        for c in minus:
            x[c] -= theta
        for c in plus:
            x[c] += theta
        x[i, j] += theta
        x[leave] = 0.0
        basis.remove(leave)
        in_basis[leave] = False
        basis.append((i, j))
        in_basis[i, j] = True
        pivots += 1
    x = np.clip(x, 0.0, None)
    return x, float((C * x).sum()), pivots


def hamming_ot_lower(nu1: BlockDistribution, nu2: BlockDistribution,
                     n: Optional[int] = None) -> TransportPlan:
    """Optimal expected normalized Hamming distance between two ``n``-block laws."""
    if nu1.alphabet_size != nu2.alphabet_size:
        raise ValueError("block laws live on different alphabets")
    N = nu1.alphabet_size
    n = min(nu1.n, nu2.n) if n is None else n
    if n > min(nu1.n, nu2.n):
        raise ValueError("block length exceeds an input distribution")
    check_capacity(N ** (2 * n), "transport problem")
    a = nu1.table.reshape(N**n, -1).sum(axis=1)
    b = nu2.table.reshape(N**n, -1).sum(axis=1)
    x, cost, pivots = transportation_simplex(a, b, hamming_cost(N, n))
    if max(np.max(np.abs(x.sum(axis=1) - a)), np.max(np.abs(x.sum(axis=0) - b))) > PLAN_TOL:
        raise BoundViolation("transport plan marginals do not match the block laws")
    return TransportPlan(n, x, cost, pivots)


def brute_force_transport(a, b, C) -> float:
    """Minimum cost over every vertex of the transportation polytope (tiny inputs only)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    m, n = C.shape
    if m * n > 20:
        raise ValueError("vertex enumeration is limited to at most 20 cells")
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        A[m + j, j::n] = 1
    rhs = np.concatenate([a, b])
    r = m + n - 1
    best = math.inf
    for cols in itertools.combinations(range(m * n), r):
        B = A[:, cols]
        if np.linalg.matrix_rank(B) < r:
            continue
        sol, *_ = np.linalg.lstsq(B, rhs, rcond=None)
        if np.max(np.abs(B @ sol - rhs)) > 1e-10 or sol.min() < -1e-12:
            continue
        best = min(best, float(C.reshape(-1)[list(cols)] @ sol))
    return best


def iid_dbar_exact(p, q) -> float:
    """d-bar between two product measures: total variation of the one-symbol laws."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for v in (p, q):
        if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1) > 1e-9:
            raise ValueError("inputs must be probability vectors")
    if p.shape != q.shape:
        raise ValueError("probability vectors differ in length")
    return 0.5 * float(np.abs(p - q).sum())


class SandwichReport(NamedTuple):
    lower: float
    upper: float
    per_n: dict
    certified: bool
    exact: Optional[float]


def dbar_sandwich(g: GFunction, h: GFunction, n_list: Sequence[int] = (1, 2, 3),
                  slack: float = 1e-8, upper: Optional[float] = None) -> SandwichReport:
    """Block-transport lower bounds against the coupling upper bound."""
    from .coupling_lab import z_chain

    depth = max(n_list)
    mg, mh = g_measure(g, depth), g_measure(h, depth)
    per_n = {}
    for n in n_list:
        per_n[n] = hamming_ot_lower(block_distribution(mg, n), block_distribution(mh, n)).cost
    lower = max(per_n.values())
    if upper is None:
        upper = z_chain(g, h).mismatch_mass
    if lower > upper + slack:
        raise BoundViolation(f"block-transport lower bound {lower:.10g} exceeds the coupling "
                             f"upper bound {upper:.10g}")
    exact = None
    if g.depth == 1 and h.depth == 1:
        exact = iid_dbar_exact(g.table, h.table)
        if abs(lower - exact) > slack or abs(upper - exact) > slack:
            raise BoundViolation(f"product-measure sandwich ({lower:.10g}, {upper:.10g}) "
                                 f"misses the exact value {exact:.10g}")
    return SandwichReport(lower, upper, per_n, True, exact)
