"""Markovian couplings of two g-measures and the upper bounds they give on d-bar."""

from __future__ import annotations

import math
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .gmeasure_lab import GFunction, g_measure
from .potential_lab import log_distance
from .rpf_transfer import distortion_constant
from .shift_core import BoundViolation, check_capacity

MARGINAL_TOL = 1e-12
ZMAX = 64


class CouplingKernel(NamedTuple):
    """Pair transition probabilities on a common depth ``k``.

    Arrays are indexed by depth-(k-1) words ``x`` (of ``g``) and ``y`` (of ``h``):
    ``F[x, y, i]``, ``delta[x, y]`` and ``G[x, y, i, j] = G(i x, j y)``.
    """

    alphabet_size: int
    depth: int
    g: np.ndarray  # (S, N): g(i x)
    h: np.ndarray  # (S, N): h(j y)
    F: np.ndarray
    delta: np.ndarray
    G: np.ndarray


def _common(g: GFunction, h: GFunction):
    if g.alphabet_size != h.alphabet_size:
        raise ValueError("g-functions live on different alphabets")
    k = max(g.depth, h.depth)
    return k, g.with_depth(k).fibers().T, h.with_depth(k).fibers().T


def floor_and_defect(g: GFunction, h: GFunction, x: Sequence[int], y: Sequence[int]):
    """``F(i, x, y) = min(g(i x), h(i y))`` and ``delta = 1 - sum_i F``."""
    k, gx, hy = _common(g, h)
    N = g.alphabet_size
    from .shift_core import word_index

    xi = word_index(list(x)[: k - 1], N)
    yi = word_index(list(y)[: k - 1], N)
    F = np.minimum(gx[xi], hy[yi])
    return F, max(0.0, 1.0 - float(F.sum()))


def coupling_kernel(g: GFunction, h: GFunction) -> CouplingKernel:
    k, gx, hy = _common(g, h)
    N = g.alphabet_size
    S = gx.shape[0]
    check_capacity(S * S * N * N, "coupling kernel")
    F = np.minimum(gx[:, None, :], hy[None, :, :])
    delta = np.clip(1.0 - F.sum(axis=2), 0.0, None)
    eg = np.clip(gx[:, None, :] - F, 0.0, None)
    eh = np.clip(hy[None, :, :] - F, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = eg[..., :, None] * eh[..., None, :] / delta[..., None, None]
    off = np.where(delta[..., None, None] > 0, off, 0.0)
    G = off + F[..., :, None] * np.eye(N)
    return CouplingKernel(N, k, gx, hy, F, delta, G)


def marginal_errors(K: CouplingKernel):
    """Largest deviations of the row and column sums of every pair-fiber."""
    rows = np.max(np.abs(K.G.sum(axis=3) - K.g[:, None, :]))
    cols = np.max(np.abs(K.G.sum(axis=2) - K.h[None, :, :]))
    return float(rows), float(cols)


def check_marginals(K: CouplingKernel, tol: float = MARGINAL_TOL) -> None:
    r, c = marginal_errors(K)
    if max(r, c) > tol:
        raise BoundViolation(f"coupling marginal identity off by {max(r, c):.3e}")


def _agreement_table(N: int, L: int) -> np.ndarray:
    from .shift_core import disagreement_table

    return disagreement_table(N, L)


def defect_bound_slack(g: GFunction, h: GFunction) -> float:
    """Smallest ``bound - delta`` over all word pairs.

    For words sharing exactly ``j`` leading symbols, ``i x`` and ``i y`` share
    ``j + 1`` and the bound is ``1 - exp(-(V_{j+2}(g) + d(h, g)))``; identical
    words use ``j = k - 1``.
    """
    K = coupling_kernel(g, h)
    k, N = K.depth, K.alphabet_size
    d = log_distance(g, h)
    gk = g.with_depth(k)
    if k == 1:
        return float(1 - math.exp(-(gk.V(2) + d)) - K.delta[0, 0])
    agree = _agreement_table(N, k - 1)
    V = np.array([gk.V(j + 2) for j in range(k)])
    bound = 1 - np.exp(-(V[agree] + d))
    return float(np.min(bound - K.delta))


# --- joinings ---------------------------------------------------------------


class JoiningResult(NamedTuple):
    measure: np.ndarray  # (N^m, N^m) pair-cylinder masses
    cesaro: np.ndarray
    mismatch: float
    cesaro_mismatch: float
    residual: float
    cesaro_residual: float
    iterations: int
    marginal_error: float
    residual_curve: List[float]


def _pair_operator(K: CouplingKernel, m: int):
    N, k = K.alphabet_size, K.depth
    if m < k:
        raise ValueError(f"joining depth {m} must be at least the kernel depth {k}")
    check_capacity(N ** (2 * m), "pair table")
    W = N ** (m - 1)
    pref = np.arange(W) // N ** (m - k)
    Gfull = K.G[pref[:, None], pref[None, :]]  # (W, W, N, N)

    def T(mu):
        prev = mu.reshape(W, N, W, N).sum(axis=(1, 3))
        new = Gfull * prev[:, :, None, None]
        return new.transpose(2, 0, 3, 1).reshape(N**m, N**m)

    return T


def _mismatch_mass(mu: np.ndarray, N: int) -> float:
    M = mu.shape[0]
    first = np.arange(M) // (M // N)
    return float(mu[first[:, None] != first[None, :]].sum())


def cesaro_joining(g: GFunction, h: GFunction, m: Optional[int] = None, iters: int = 10_000,
                   tol: float = 1e-10, marginal_tol: float = 1e-10) -> JoiningResult:
    """Iterate the pair transfer adjoint from the product of the two g-measures.

    Both the running Cesàro mean and the plain iterate are tracked; the plain
    iterate's limit is returned as ``measure`` once its L1 residual falls
    below ``tol``.  Marginals are checked at every step.
    """
    K = coupling_kernel(g, h)
    N = K.alphabet_size
    m = K.depth if m is None else m
    T = _pair_operator(K, m)
    nu_g = g_measure(g, m).table
    nu_h = g_measure(h, m).table
    mu = np.outer(nu_g, nu_h)
    total = np.zeros_like(mu)
    curve = []
    worst = 0.0
    res = math.inf
    n = 0
    for n in range(1, iters + 1):
        total += mu
        nxt = T(mu)
        res = float(np.abs(nxt - mu).sum())
        curve.append(res)
        mu = nxt
        err = max(np.max(np.abs(mu.sum(axis=1) - nu_g)), np.max(np.abs(mu.sum(axis=0) - nu_h)))
        worst = max(worst, float(err))
        if err > marginal_tol:
            raise BoundViolation(f"joining marginals drifted by {err:.3e} at step {n}")
        if res <= tol:
            break
    if res <= tol and n < iters:
        # the remaining terms of the horizon equal the converged iterate
        total += (iters - n) * mu
        ces = total / iters
    else:
        ces = total / n
    ces_res = float(np.abs(T(ces) - ces).sum())
    return JoiningResult(mu, ces, _mismatch_mass(mu, N), _mismatch_mass(ces, N), res, ces_res,
                         n, worst, curve)


def _stationary(P: np.ndarray) -> np.ndarray:
    S = P.shape[0]
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi[pi < 1e-15] = 0.0  # solver roundoff on transient states
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


class PairChain(NamedTuple):
    """The coupled process on pairs of length-``L`` words."""

    alphabet_size: int
    L: int
    P: np.ndarray  # (S*S, S*S) transition matrix over flattened (u, v)
    mismatch: np.ndarray  # bool per state: leading symbols differ


def pair_chain(K: CouplingKernel) -> PairChain:
    N, k = K.alphabet_size, K.depth
    L = max(k - 1, 1)
    S = N**L
    check_capacity((S * S) ** 2, "pair chain")
    u = np.arange(S)
    pref = u // N ** (L - (k - 1))
    P = np.zeros((S, S, S, S))
    for i in range(N):
        for j in range(N):
            nx, ny = (i * S + u) // N, (j * S + u) // N
            P[u[:, None], u[None, :], nx[:, None], ny[None, :]] += K.G[pref[:, None],
                                                                        pref[None, :], i, j]
    P = P.reshape(S * S, S * S)
    first = u // N ** (L - 1)
    mismatch = (first[:, None] != first[None, :]).reshape(-1)
    return PairChain(N, L, P, mismatch)


def stationary_joining(g: GFunction, h: GFunction) -> np.ndarray:
    """Stationary law of the pair chain as an ``(N^L, N^L)`` table."""
    C = pair_chain(coupling_kernel(g, h))
    S = C.alphabet_size**C.L
    return _stationary(C.P).reshape(S, S)


class ZChain(NamedTuple):
    """Agreement-length process derived from the pair chain.

    ``level_mass[n]`` is the stationary probability of ``n`` consecutive
    matches (the last entry lumps ``n >= ZMAX``) and ``match_prob[n]`` the
    chance of moving from level ``n`` to ``n + 1`` rather than back to 0.
    """

    mismatch_mass: float
    expected_return: float
    level_mass: np.ndarray
    match_prob: np.ndarray
    survival: np.ndarray  # P(tau >= n) for n = 1..ZMAX


def _hitting_expectation(C: PairChain, pi: np.ndarray) -> float:
    """``E(tau)`` from a mismatch state via the first-passage linear system."""
    A = ~C.mismatch
    if pi[C.mismatch].sum() <= 1e-15:
        return math.inf
    PA = C.P[:, A]
    # t(s) = 1 + sum_{s' matched} P(s, s') t(s'); solve on matched states first
    n_match = int(A.sum())
    if n_match:
        t_match = np.linalg.solve(np.eye(n_match) - PA[A], np.ones(n_match))
    else:
        t_match = np.zeros(0)
    t_mis = 1.0 + PA[C.mismatch] @ t_match
    w = pi[C.mismatch]
    return float(w @ t_mis / w.sum())


def z_chain(g: GFunction, h: GFunction, zmax: int = ZMAX) -> ZChain:
    C = pair_chain(coupling_kernel(g, h))
    pi = _stationary(C.P)
    mm = float(pi[C.mismatch].sum())
    Et = _hitting_expectation(C, pi)
    match = (~C.mismatch).astype(float)
    q = pi * C.mismatch
    levels = np.zeros(zmax + 1)
    for n in range(zmax):
        levels[n] = q.sum()
        q = (q @ C.P) * match
    levels[zmax] = max(0.0, 1.0 - levels[:zmax].sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        match_prob = np.where(levels[:zmax] > 0,
                              np.append(levels[1:zmax], np.nan)[:zmax] / levels[:zmax], 1.0)
    match_prob[-1] = np.nan
    survival = levels[:zmax] / mm if mm > 0 else np.ones(zmax)
    return ZChain(mm, Et, levels, match_prob, survival)


# --- analytic bounds --------------------------------------------------------


def L_g(g: GFunction) -> float:
    """``sum_{i >= 1} V_{i+1}(g)`` including the certified tail."""
    return math.log(distortion_constant(g.log_potential()))


class ReturnBound(NamedTuple):
    value: float
    partial_sums: np.ndarray
    variation_series_divergent: bool


def return_time_lower_bound(g: GFunction, h: GFunction, n_max: int = 10_000,
                            V: Optional[Sequence[float]] = None) -> ReturnBound:
    """``sum_{n >= 1} prod_{i=1}^{n} exp(-(V_{i+1}(g) + d(h, g)))``.

    ``V`` overrides the variations (``V[i]`` is ``V_{i+1}``; missing entries
    are 0).  When the variations vanish past the table depth the geometric
    remainder is added in closed form; otherwise the partial sum at ``n_max``
    is returned, which is still a lower bound.
    """
    d = log_distance(g, h)
    if V is None:
        idx = np.arange(2, n_max + 2)
        Vs = g.tail_C * g.tail_theta ** idx.astype(float)
        for n in range(2, min(g.depth, n_max + 1) + 1):
            Vs[n - 2] = g.V(n)
        finite = g.tail_C == 0
    else:
        Vs = np.zeros(n_max)
        v = np.asarray(V, dtype=float)[1: n_max + 1]
        Vs[: v.size] = v
        finite = len(V) <= n_max
    logs = -np.cumsum(Vs + d)
    terms = np.exp(logs)
    partial = np.cumsum(terms)
    if V is None:
        divergent = bool(np.isfinite(Vs.sum()))  # summable variations
    else:
        divergent = bool(n_max * np.exp(-np.cumsum(Vs))[-1] > 1e-3)
    value = float(partial[-1])
    if finite:
        last_nonzero = int(np.max(np.nonzero(Vs)[0])) + 1 if np.any(Vs) else 0
        if last_nonzero < n_max:
            if d == 0:
                value = math.inf
            else:
                base = terms[last_nonzero - 1] if last_nonzero else 1.0
                value = float(partial[last_nonzero - 1] if last_nonzero else 0.0)
                value += base * math.exp(-d) / (-math.expm1(-d))
    elif d == 0 and divergent:
        value = math.inf
    return ReturnBound(value, partial, divergent)


class DbarBounds(NamedTuple):
    coupling_value: float
    kac_bound: float
    exp_bound: float
    lipschitz: float
    d: float
    L_g: float
    within_hypothesis: bool


def dbar_upper_bounds(g: GFunction, h: GFunction, slack: float = 1e-10) -> DbarBounds:
    """Coupling mismatch rate and the three analytic bounds above it, with the order checked."""
    zc = z_chain(g, h)
    rb = return_time_lower_bound(g, h)
    d = log_distance(g, h)
    Lg = L_g(g)
    kac = 0.0 if math.isinf(rb.value) else float(1.0 / rb.value)
    expb = math.exp(Lg) * math.expm1(d)
    lip = 2 * math.exp(Lg) * d
    within = d <= math.log(2)
    coupling = zc.mismatch_mass
    if coupling > kac + slack:
        raise BoundViolation(f"coupling mismatch {coupling:.6g} exceeds the return-time "
                             f"bound {kac:.6g}")
    if kac > expb + slack:
        raise BoundViolation(f"return-time bound {kac:.6g} exceeds the exponential bound "
                             f"{expb:.6g}")
    if within and expb > lip + slack:
        raise BoundViolation(f"exponential bound {expb:.6g} exceeds the Lipschitz bound "
                             f"{lip:.6g}")
    return DbarBounds(coupling, kac, expb, lip, d, Lg, within)


# --- Monte Carlo ------------------------------------------------------------


class SimulationReport(NamedTuple):
    mismatch_rate: float
    mismatch_se: float
    mean_return: float
    return_se: float
    returns: int
    steps: int
    replicas: int


def simulate_pair(g: GFunction, h: GFunction, steps: int = 1_000_000, seed: int = 0,
                  replicas: int = 32, burn_in: int = 1000) -> SimulationReport:
    """Run ``replicas`` independent copies of the pair chain for ``steps`` total steps.

    Each replica draws from its own Philox stream seeded with ``seed + index``.
    Standard errors come from the spread of per-replica estimates.
    """
    C = pair_chain(coupling_kernel(g, h))
    n_states = C.P.shape[0]
    per = max(1, steps // replicas)
    cum = np.cumsum(C.P, axis=1)
    cum[:, -1] = 1.0
    U = np.stack([np.random.Generator(np.random.Philox(seed + r)).random(per + burn_in)
                  for r in range(replicas)])
    state = np.zeros(replicas, dtype=np.int64)
    count = np.zeros(replicas)
    first = np.full(replicas, -1)
    last = np.full(replicas, -1)
    nret = np.zeros(replicas)
    for t in range(per + burn_in):
        rows = cum[state]
        state = np.minimum((rows < U[:, t, None]).sum(axis=1), n_states - 1)
        if t < burn_in:
            continue
        hit = C.mismatch[state]
        count += hit
        tt = t - burn_in
        nret += hit & (first >= 0)
        first = np.where(hit & (first < 0), tt, first)
        last = np.where(hit, tt, last)
    rate = count / per
    with np.errstate(divide="ignore", invalid="ignore"):
        ret = np.where(nret > 0, (last - first) / nret, np.nan)
    ok = ret[np.isfinite(ret)]
    mean_ret = float(ok.mean()) if ok.size else math.inf
    ret_se = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else math.inf
    return SimulationReport(float(rate.mean()), float(rate.std(ddof=1) / math.sqrt(replicas)),
                            mean_ret, ret_se, int(nret.sum()), per * replicas, replicas)


# --- synthetic long-memory family --------------------------------------------


def alternating_memory_g(depth: int, amplitude: float = 1.0) -> GFunction:
    """Binary g whose probability of a 0 depends on the run of leading 0s in the past.

    With ``l`` leading zeros (capped at ``depth - 1``) the chance of a 0 is
    ``q_l = 1 / (1 + exp(-(-1)^l a / (l + 2)))``, so the variations of ``log g``
    shrink like ``1 / n`` up to the table depth.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    N = 2
    from .shift_core import words_array

    W = words_array(N, depth - 1)
    if depth > 1:
        runs = np.where(W.any(axis=1), np.argmax(W == 1, axis=1), depth - 1)
    else:
        runs = np.zeros(1, dtype=int)
    z = (-1.0) ** runs * amplitude / (runs + 2)
    q = 1.0 / (1.0 + np.exp(-z))
    return GFunction(N, depth, np.concatenate([q, 1 - q]))
