"""Partition functions, Gurevich pressure and recurrence classification."""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .potential_lab import Potential
from .shift_core import check_capacity, words_array

SPR_THRESHOLD = 1e-3


class PressureEstimate(NamedTuple):
    sequence: np.ndarray  # (1/n) ln Z_n for n = 1..n_max
    increments: np.ndarray  # ln Z_n - ln Z_{n-1} for n = 2..n_max
    limit: float
    reference: float  # ln of the Perron eigenvalue of the state matrix


class RecurrenceReport(NamedTuple):
    spr_margin: float
    classification: str  # "SPR" or "not-SPR-at-horizon"
    horizon: int
    pressure: float
    loop_rate: float
    loop_sequence: np.ndarray  # (1/n) ln Z*_n for n = 1..n_max


class DiscriminantReport(NamedTuple):
    p_grid: np.ndarray
    pressures: np.ndarray  # NaN where the loop series did not converge within L_max
    divergent: np.ndarray
    sup: float
    p_boundary: float


class VariationalReport(NamedTuple):
    pressure: float
    value_at_rpf: float
    gap: float
    best_sampled: float


# --- transfer matrices on de Bruijn states -------------------------------------


def state_matrix(phi: Potential) -> np.ndarray:
    """Weights ``C[u, v] = exp(phi(u v_last))`` between overlapping depth-(K-1) words.

    ``K = max(depth, 2)``, so states always carry at least the current symbol.
    Closed walks of length ``n`` are exactly the points of period ``n``.
    """
    N = phi.alphabet_size
    K = max(phi.depth, 2)
    S = N ** (K - 1)
    check_capacity(S * S, "state matrix")
    y = np.arange(N**K)
    C = np.zeros((S, S))
    C[y // N, y % S] = np.exp(phi.lifted(K))
    return C


def _state_first_symbols(phi: Potential) -> np.ndarray:
    K = max(phi.depth, 2)
    return np.arange(phi.alphabet_size ** (K - 1)) // phi.alphabet_size ** (K - 2)


def _log_closed_walks(phi: Potential, a: int, n_max: int, avoid_a: bool) -> np.ndarray:
    """``ln Z_n`` (or ``ln Z*_n``) for ``n = 1..n_max`` via scaled matrix powers."""
    C = state_matrix(phi)
    first = _state_first_symbols(phi)
    start = np.flatnonzero(first == a)
    keep = (first != a).astype(float)
    R = C[:, start].copy()
    log_scale = 0.0
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        if n > 1:
            R = C @ (keep[:, None] * R) if avoid_a else C @ R
        s = np.max(np.abs(R))
        if s == 0:
            out[n - 1:] = -np.inf
            break
        R /= s
        log_scale += math.log(s)
        total = float(np.sum(R[start, np.arange(start.size)]))
        out[n - 1] = log_scale + math.log(total) if total > 0 else -np.inf
    return out


def _periodic_log_weights(phi: Potential, words: np.ndarray) -> np.ndarray:
    n = words.shape[1]
    N, k = phi.alphabet_size, phi.depth
    powers = N ** np.arange(k - 1, -1, -1)
    total = np.zeros(words.shape[0])
    for j in range(n):
        cols = (j + np.arange(k)) % n
        total += phi.table[words[:, cols] @ powers]
    return total


def log_partition_function(phi: Potential, a: int, n: int, method: str = "enumerate") -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "matrix":
        return float(_log_closed_walks(phi, a, n, avoid_a=False)[-1])
    rest = words_array(phi.alphabet_size, n - 1)
    words = np.hstack([np.full((rest.shape[0], 1), a), rest])
    return float(logsumexp(_periodic_log_weights(phi, words)))


def log_loop_partition_function(phi: Potential, a: int, n: int, method: str = "enumerate") -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "matrix":
        return float(_log_closed_walks(phi, a, n, avoid_a=True)[-1])
    N = phi.alphabet_size
    others = np.array([s for s in range(N) if s != a])
    rest = others[words_array(N - 1, n - 1)] if n > 1 else np.zeros((1, 0), dtype=int)
    words = np.hstack([np.full((rest.shape[0], 1), a), rest])
    return float(logsumexp(_periodic_log_weights(phi, words)))


def partition_function(phi: Potential, a: int, n: int, method: str = "enumerate") -> float:
    """``Z_n(phi, a)``: sum of ``exp(S_n phi)`` over points of period ``n`` starting at ``a``."""
    return math.exp(log_partition_function(phi, a, n, method))


def loop_partition_function(phi: Potential, a: int, n: int, method: str = "enumerate") -> float:
    """``Z*_n(phi, a)``: as :func:`partition_function` but over first-return loops."""
    return math.exp(log_loop_partition_function(phi, a, n, method))


def perron_log_eigenvalue(phi: Potential) -> float:
    vals = np.linalg.eigvals(state_matrix(phi))
    return float(math.log(np.max(np.abs(vals))))


def _extrapolate(r: np.ndarray) -> float:
    """Aitken delta-squared on the tail of a sequence of log-ratio increments."""
    if r.size < 3:
        return float(r[-1])
    r0, r1, r2 = r[-3], r[-2], r[-1]
    d1 = r2 - r1
    denom = r2 - 2 * r1 + r0
    if abs(d1) < 1e-13 * max(1.0, abs(r2)) or abs(denom) < 1e-300:
        return float(r2)
    est = r2 - d1 * d1 / denom
    # Aitken is only trusted when it moves the estimate by less than the last step.
    return float(est) if abs(est - r2) <= abs(d1) * 10 else float(r2)


def gurevich_pressure(phi: Potential, a: int = 0, n_max: int = 16) -> PressureEstimate:
    """Growth rate of ``Z_n(phi, a)`` with an extrapolated limit.

    The ``1/n`` prefactor bias is removed by working with ``ln Z_n - ln Z_{n-1}``
    before Aitken extrapolation.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    logZ = _log_closed_walks(phi, a, n_max, avoid_a=False)
    n = np.arange(1, n_max + 1)
    incr = np.diff(logZ)
    return PressureEstimate(logZ / n, incr, _extrapolate(incr), perron_log_eigenvalue(phi))


def spr_classify(phi: Potential, a: int = 0, n_max: int = 16,
                 threshold: float = SPR_THRESHOLD) -> RecurrenceReport:
    """Compare the first-return growth rate at ``a`` with the Gurevich pressure.

    The limsup of the loop growth rate is estimated by the largest log-ratio
    increment ``ln Z*_n - ln Z*_{n-1}`` over the upper half of the window.
    A margin at or below ``threshold`` is reported as undecided at this
    horizon, never as "not SPR".
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    P = gurevich_pressure(phi, a, n_max).limit
    logZs = _log_closed_walks(phi, a, n_max, avoid_a=True)
    n = np.arange(1, n_max + 1)
    incr = np.diff(logZs)  # incr[i] belongs to n = i + 2
    lo = max(n_max // 2, 2)
    window = incr[lo - 2:]
    finite = window[np.isfinite(window)]
    rate = float(np.max(finite)) if finite.size else -math.inf
    margin = P - rate
    label = "SPR" if margin > threshold else "not-SPR-at-horizon"
    return RecurrenceReport(margin, label, n_max, P, rate, logZs / n)


# --- inducing on a state -------------------------------------------------------


def induced_potential(phi: Potential, a: int, loop: Sequence[int],
                      continuation: Optional[Sequence[int]] = None) -> float:
    """Birkhoff sum of ``phi`` over one first-return loop at ``a``.

    Depth-1 potentials need nothing beyond the loop.  Deeper potentials read
    past the end of the loop, so ``continuation`` (starting with ``a``, at
    least ``depth - 1`` symbols) must fix the next loop's prefix; this case is
    experimental.
    """
    loop = tuple(int(s) for s in loop)
    if not loop or loop[0] != a or a in loop[1:]:
        raise ValueError("loop must start with a and contain no interior a")
    k = phi.depth
    if k == 1:
        return float(sum(phi.table[s] for s in loop))
    if continuation is None or len(continuation) < k - 1 or continuation[0] != a:
        raise ValueError("depth > 1 needs a continuation starting with a of length >= depth - 1")
    word = loop + tuple(continuation)
    return float(sum(phi.at(word[j:j + k]) for j in range(len(loop))))


def _depth1_loop_ratio(phi: Potential, a: int) -> float:
    return float(sum(math.exp(phi.table[b]) for b in range(phi.alphabet_size) if b != a))


def induced_pressure_closed_form(phi: Potential, a: int, p: float) -> float:
    """``ln sum_m e^{p m} W_m`` in closed form for a depth-1 potential; ``inf`` if divergent."""
    if phi.depth != 1:
        raise ValueError("closed form needs a depth-1 potential")
    R = _depth1_loop_ratio(phi, a)
    q = math.exp(p) * R
    if q >= 1:
        return math.inf
    return p + phi.table[a] - math.log1p(-q)


def discriminant(phi: Potential, a: int = 0, p_grid: Optional[Sequence[float]] = None,
                 L_max: int = 10_000, tol: float = 1e-12) -> DiscriminantReport:
    """Sup of the induced pressure ``P_G(induced(phi + p))`` over grid points where it is finite.

    For depth-1 potentials on the full shift the induced system is a full
    shift on loops and the induced potential depends on the first loop only,
    so its pressure is the log of the total loop weight ``sum_m e^{p m} W_m``.
    The series is summed up to loop length ``L_max``; a grid point counts as
    divergent when the last term is not negligible against the partial sum.
    """
    if phi.depth != 1:
        raise NotImplementedError("discriminant is implemented for depth-1 potentials only")
    logR = math.log(_depth1_loop_ratio(phi, a))
    m = np.arange(1, L_max + 1)
    log_w = phi.table[a] + (m - 1) * logR
    # successive loop weights have ratio R, so the series diverges once p >= -ln R
    p_star = -logR
    if p_grid is None:
        span = max(1.0, abs(p_star))
        p_grid = p_star - span * 2.0 ** (-np.arange(64) / 4.0)
    p_grid = np.asarray(p_grid, dtype=float)
    pressures = np.full(p_grid.size, np.nan)
    divergent = np.ones(p_grid.size, dtype=bool)
    for i, p in enumerate(p_grid):
        terms = p * m + log_w
        total = logsumexp(terms)
        if terms[-1] - total < math.log(tol):
            pressures[i] = total
            divergent[i] = False
    if divergent.all():
        raise ValueError("every grid point diverges")
    return DiscriminantReport(p_grid, pressures, divergent, float(np.nanmax(pressures)), p_star)


# --- variational principle -----------------------------------------------------


def markov_value(phi: Potential, Q: np.ndarray) -> float:
    """``h_mu + int phi dmu`` for the stationary Markov measure with transitions ``Q``."""
    if phi.depth > 2:
        raise ValueError("Markov evaluation needs depth <= 2")
    N = phi.alphabet_size
    w, v = np.linalg.eig(Q.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi = pi / pi.sum()
    flow = pi[:, None] * Q
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.nansum(np.where(Q > 0, flow * np.log(Q), 0.0))
    energy = float(np.sum(flow * phi.lifted(2).reshape(N, N)))
    return float(ent + energy)


def rpf_markov_matrix(phi: Potential) -> np.ndarray:
    """Transition matrix ``P[i, j] = C[i, j] r_j / (lambda r_i)`` of the equilibrium state."""
    C = np.exp(phi.lifted(2).reshape(phi.alphabet_size, -1))
    w, v = np.linalg.eig(C)
    i = np.argmax(np.real(w))
    lam = float(np.real(w[i]))
    r = np.abs(np.real(v[:, i]))
    return C * r[None, :] / (lam * r[:, None])


def variational_check(phi: Potential, samples: int = 200, seed: int = 0) -> VariationalReport:
    """Gap between the pressure and ``h + int phi`` at the equilibrium Markov measure.

    Random Markov measures are sampled as well; none should exceed the pressure.
    """
    if phi.depth > 2:
        raise ValueError("variational check needs depth <= 2")
    P = perron_log_eigenvalue(phi)
    value = markov_value(phi, rpf_markov_matrix(phi))
    rng = np.random.default_rng(seed)
    N = phi.alphabet_size
    best = -math.inf
    for _ in range(samples):
        Q = rng.dirichlet(np.ones(N), size=N)
        best = max(best, markov_value(phi, Q))
    return VariationalReport(P, value, P - value, best)
