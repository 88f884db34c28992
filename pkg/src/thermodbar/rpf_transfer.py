"""Transfer operators on cylinder functions, Perron eigendata and the weighted B-norm."""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq

from .gmeasure_lab import CylinderMeasure, GFunction
from .potential_lab import CylinderTable, Potential, log_distance, table_oscillation, variation
from .pressure_lab import induced_pressure_closed_form, perron_log_eigenvalue
from .shift_core import (BoundViolation, adjoint_table, check_capacity, lift, marked_count_table,
                         transfer_table, words_array)

DEFAULT_EPS_A = 0.05
PRESSURE_TOL = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class CylinderFunction(CylinderTable):
    """Real function of the first ``depth`` symbols (depth 0 means constant)."""

    kind = "function"

    def __init__(self, alphabet_size, depth, table):
        super().__init__(alphabet_size, depth, table)
        if not np.all(np.isfinite(self.table)):
            raise ValueError("function table entries must be finite")

    @classmethod
    def constant(cls, alphabet_size, value=1.0, depth=0):
        return cls(alphabet_size, depth, np.full(alphabet_size**depth, float(value)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.table)))


class EigenData(NamedTuple):
    lam: float
    h: CylinderFunction
    nu: CylinderMeasure
    residual: float
    iterations: int

    @property
    def depth(self) -> int:
        return self.h.depth

    @property
    def log_lam(self) -> float:
        return math.log(self.lam)


def apply_transfer(phi: Potential, f: CylinderFunction) -> CylinderFunction:
    """``(L f)(x) = sum_i exp(phi(i x)) f(i x)``."""
    if f.alphabet_size != phi.alphabet_size:
        raise ValueError("alphabet mismatch")
    out, depth = transfer_table(phi.alphabet_size, phi.table, phi.depth, f.table, f.depth)
    return CylinderFunction(phi.alphabet_size, depth, out)


def apply_adjoint(phi: Potential, nu: CylinderTable) -> np.ndarray:
    """Dual action on cylinder masses at the depth of ``nu``."""
    return adjoint_table(phi.alphabet_size, phi.table, phi.depth, nu.table, nu.depth)


def _default_depth(phi: Potential, m: Optional[int]) -> int:
    if m is None:
        return max(phi.depth - 1, 1)
    if m < phi.depth - 1:
        raise ValueError(f"depth {m} is too shallow for a depth-{phi.depth} potential")
    return int(m)


def rpf_eigendata(phi: Potential, m: Optional[int] = None, max_iter: int = 100_000,
                  tol: float = 1e-12) -> EigenData:
    """Perron eigenfunction, eigenmeasure and eigenvalue on depth-``m`` tables.

    Power iteration runs from the constant function and uniform masses.  Since
    the operator maps depth-``m`` tables to depth-``m`` tables when
    ``m >= depth - 1``, the result is exact up to floating point.
    """
    N = phi.alphabet_size
    m = _default_depth(phi, m)
    check_capacity(N ** (m + 1))
    E = m + 1
    w = np.exp(phi.lifted(E)).reshape(N, N**m)  # w[i, x] = exp(phi(i x))
    # h(i x) only reads the first m symbols of i x
    x = np.arange(N**m)
    if m > 0:
        child = np.arange(N)[:, None] * N ** (m - 1) + x[None, :] // N
    else:
        child = np.zeros((N, 1), dtype=int)

    def forward(h):
        return (w * h[child]).sum(axis=0)

    h = np.ones(N**m)
    residual = math.inf
    it = 0
    lam = 1.0
    for it in range(1, int(max_iter) + 1):
        Lh = forward(h)
        lam = float(Lh.max() / h.max())
        # entrywise relative test so that small entries of h are resolved too
        residual = float(np.max(np.abs(Lh - lam * h) / h))
        if residual <= tol * max(1.0, lam):
            break
        h = Lh / Lh.max()
    else:
        raise ConvergenceError("eigenfunction iteration did not converge", residual)

    nu = np.full(N**m, 1.0 / N**m)
    nu_res = math.inf
    for _ in range(int(max_iter)):
        Lnu = adjoint_table(N, phi.table, phi.depth, nu, m)
        mass = Lnu.sum()
        nu_res = float(np.sum(np.abs(Lnu / mass - nu)))
        nu = Lnu / mass
        if nu_res <= tol:
            break
    else:
        raise ConvergenceError("eigenmeasure iteration did not converge", nu_res)

    lam = float(nu @ forward(h) / (nu @ h))
    h = h / float(nu @ h)
    residual = float(np.max(np.abs(forward(h) - lam * h)) / np.max(np.abs(h)))
    return EigenData(lam, CylinderFunction(N, m, h), CylinderMeasure(N, m, nu), residual, it)


def rpf_measure(eig: EigenData) -> CylinderMeasure:
    """Masses of ``h dnu`` on depth-``m`` cylinders (``h`` is constant on them)."""
    return CylinderMeasure(eig.h.alphabet_size, eig.depth, eig.h.table * eig.nu.table)


def nu_depth_increment(phi: Potential, m: int) -> float:
    """L1 distance between the depth-``m`` eigenmeasure and the marginal of the depth-``m+1`` one."""
    a = rpf_eigendata(phi, m).nu
    b = rpf_eigendata(phi, m + 1).nu
    return float(np.sum(np.abs(b.marginal(m) - a.table)))


def normalize_to_g(phi: Potential, eig: EigenData, tol: float = 1e-10) -> GFunction:
    """``g = exp(phi) h / (lam h o shift)`` as a table of depth ``max(k, m + 1)``."""
    if eig.residual > tol * max(1.0, eig.lam):
        raise ConvergenceError("eigendata residual too large to normalize", eig.residual)
    N, m = phi.alphabet_size, eig.depth
    D = max(phi.depth, m + 1)
    y = np.arange(N**D)
    h_y = eig.h.table[y // N ** (D - m)]
    h_sy = eig.h.table[(y % N ** (D - 1)) // N ** (D - 1 - m)]
    g = np.exp(phi.lifted(D)) * h_y / (eig.lam * h_sy)
    return GFunction(N, D, g, phi.tail_C, phi.tail_theta)


# --- shifted potential and the B-norm ---------------------------------------


class PsiShift(NamedTuple):
    psi: Potential
    eps_a: float
    p: float
    theta: float


def _indicator(N: int, a: int) -> Potential:
    e = np.zeros(N)
    e[a] = 1.0
    return Potential(N, 1, e)


def _shift_exponent(phi: Potential, a: int, eps: float) -> float:
    """Root ``p`` of ``P(phi + eps - p 1_[a]) = 0``."""
    if eps == 0:
        return 0.0
    if phi.depth == 1:
        return float(induced_pressure_closed_form(phi, a, eps))
    ind = _indicator(phi.alphabet_size, a)

    def f(p):
        return perron_log_eigenvalue(phi + eps - ind * p)

    hi = 1.0
    while f(hi) > 0:
        hi *= 2
        if hi > 1e6:
            return math.inf
    return float(brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-15))


def psi_shift(phi: Potential, a: int, eps_a: float = DEFAULT_EPS_A, theta: float = 0.5,
              halve: bool = True) -> PsiShift:
    """``psi = phi + eps - p 1_[a]`` with ``P(psi) = 0`` and ``theta e^p < 1``.

    ``phi`` must already have zero pressure.  With ``halve`` the offset is
    halved until the contraction condition holds; otherwise a violation raises.
    """
    P = perron_log_eigenvalue(phi)
    if abs(P) > PRESSURE_TOL:
        raise ValueError(f"potential has pressure {P:.3e}; subtract it first")
    eps = float(eps_a)
    for _ in range(64):
        p = _shift_exponent(phi, a, eps)
        if theta * math.exp(p) < 1:
            break
        if not halve:
            raise ValueError(f"theta * e^p = {theta * math.exp(p):.6g} >= 1 (p = {p:.6g})")
        eps /= 2
    else:
        raise ValueError("could not find an offset with theta * e^p < 1")
    psi = phi + eps - _indicator(phi.alphabet_size, a) * p
    Ppsi = perron_log_eigenvalue(psi)
    if abs(Ppsi) > PRESSURE_TOL:
        raise BoundViolation(f"shifted potential has pressure {Ppsi:.3e}, expected 0")
    return PsiShift(psi, eps, p, theta)


class BNormWeights(NamedTuple):
    a: int
    theta: float
    h0_sup: np.ndarray  # sup of h0 over each 1-cylinder [b]
    h0: CylinderFunction
    c: float
    shift: Optional[PsiShift]


def distortion_constant(phi: Potential) -> float:
    """``exp(sum_{n >= 2} var_n phi)`` including the certified tail."""
    total = sum(variation(phi, n).value for n in range(2, phi.depth + 1))
    if phi.tail_C > 0:
        th = phi.tail_theta
        total += phi.tail_C * th ** (phi.depth + 1) / (1 - th)
    return math.exp(total)


def b_norm_weights(phi: Potential, a: int = 0, theta: float = 0.5,
                   eps_a: float = DEFAULT_EPS_A, m: Optional[int] = None) -> BNormWeights:
    """Weights built from the eigenfunction of the shifted potential of a zero-pressure ``phi``."""
    shift = psi_shift(phi, a, eps_a, theta)
    eig = rpf_eigendata(shift.psi, m)
    N = phi.alphabet_size
    h0 = eig.h
    sup = h0.table.reshape(N, -1).max(axis=1) if h0.depth > 0 else np.full(N, h0.table[0])
    return BNormWeights(a, theta, sup, h0, distortion_constant(phi), shift)


def flat_weights(N: int, a: int = 0, theta: float = 0.5) -> BNormWeights:
    """Unit weights (``h0 = 1``)."""
    return BNormWeights(a, theta, np.ones(N), CylinderFunction.constant(N), 1.0, None)


def b_norm(f: CylinderFunction, weights: BNormWeights) -> float:
    """``max_b (sup_[b] |f| + sup_{x,y in [b]} |f(x)-f(y)| / theta^{s_a(x,y)}) / h0[b]``."""
    N = f.alphabet_size
    m = max(f.depth, 1)
    F = f.lifted(m) if f.depth < m else f.table
    S = marked_count_table(N, m, weights.a)
    scale = weights.theta ** (-S.astype(float))
    block = N ** (m - 1)
    best = 0.0
    for b in range(N):
        sl = slice(b * block, (b + 1) * block)
        vals = F[sl]
        diff = np.abs(vals[:, None] - vals[None, :]) * scale[sl, sl]
        best = max(best, (np.max(np.abs(vals)) + np.max(diff)) / weights.h0_sup[b])
    return float(best)


def local_holder_constant(phi: Potential, theta: float) -> float:
    """``sup |phi(r x) - phi(r y)| / theta^{t(x, y)}`` over a common first symbol ``r``."""
    best = 0.0
    for t in range(phi.depth - 1):
        best = max(best, table_oscillation(phi.table, phi.alphabet_size, t + 1) / theta**t)
    if phi.tail_C > 0:
        best = max(best, phi.tail_C * phi.tail_theta ** (phi.depth + 1)
                   / theta ** (phi.depth - 1))
    return best


class OperatorGapReport(NamedTuple):
    lower: float
    upper: float
    sup_diff: float
    holder_diff: float
    within_hypothesis: bool


def _pressure_normalized(phi: Potential) -> Potential:
    return phi - perron_log_eigenvalue(phi)


def operator_gap_estimate(phi: Potential, tau: Potential, weights: Optional[BNormWeights] = None,
                          m: Optional[int] = None, samples: int = 64, seed: int = 0,
                          normalize: bool = True) -> OperatorGapReport:
    """Sampled lower estimate and analytic upper bound for the B-operator-norm of ``L_phi - L_tau``.

    Both potentials are pressure-normalized first unless ``normalize`` is off.
    The upper bound uses ``C = C0 = C2 = C3 = e - 1`` and ``C1 = c (e - 1)``.
    """
    from .potential_lab import holder_distance

    if normalize:
        phi0, tau0 = _pressure_normalized(phi), _pressure_normalized(tau)
    else:
        phi0, tau0 = phi, tau
    if weights is None:
        weights = b_norm_weights(phi0)
    N = phi.alphabet_size
    D = max(phi0.depth, tau0.depth)
    m = max(D - 1, 1) if m is None else m
    rng = np.random.default_rng(seed)
    tests = [np.ones(N**m)] + [np.eye(N**m)[i] for i in range(min(N**m, 64))]
    for _ in range(samples):
        tests.append(rng.normal(size=N**m))
        tests.append(rng.random(N**m))
    lower = 0.0
    for t in tests:
        f = CylinderFunction(N, m, t)
        nf = b_norm(f, weights)
        if nf == 0:
            continue
        d1, d2 = apply_transfer(phi0, f), apply_transfer(tau0, f)
        depth = max(d1.depth, d2.depth)
        diff = CylinderFunction(N, depth, lift(d1.table, N, d1.depth, depth)
                                - lift(d2.table, N, d2.depth, depth))
        lower = max(lower, b_norm(diff, weights) / nf)
    hd = holder_distance(phi0, tau0, weights.theta)
    sup, holder = hd.sup_diff, hd.seminorm_diff + hd.tail_bound
    K = math.e - 1
    p = weights.shift.p if weights.shift is not None else 0.0
    c = weights.c
    Cphi = local_holder_constant(phi0, weights.theta)
    ep = math.exp(p)
    upper = K * sup * ep + c * K * holder * ep + K * sup * (c * ep + K * Cphi)
    return OperatorGapReport(lower, upper, sup, holder, sup < 1)


# --- eigenfunction ratios, recoding and normalized gaps ----------------------


def _ratio_table(h: CylinderFunction, D: int) -> np.ndarray:
    """``h(y) / h(shift y)`` on depth-``D`` words (``D >= m + 1``)."""
    N, m = h.alphabet_size, h.depth
    y = np.arange(N**D)
    return h.table[y // N ** (D - m)] / h.table[(y % N ** (D - 1)) // N ** (D - 1 - m)]


def _common_eigendata(phi, tau, m):
    m = max(_default_depth(phi, m), _default_depth(tau, m))
    return rpf_eigendata(phi, m), rpf_eigendata(tau, m), m


def eigen_ratio_deviation(phi: Potential, tau: Potential, m: Optional[int] = None,
                          eigs=None) -> float:
    """``sup |(h_phi / h_phi o shift) (h_tau o shift / h_tau) - 1|``."""
    if eigs is None:
        ephi, etau, m = _common_eigendata(phi, tau, m)
    else:
        ephi, etau = eigs
    D = ephi.depth + 1
    r = _ratio_table(ephi.h, D) / _ratio_table(etau.h, D)
    return float(np.max(np.abs(r - 1)))


class RecodedPotential(NamedTuple):
    potential: Potential  # over the pair alphabet; inadmissible entries hold 0
    admissible: np.ndarray
    source_alphabet: int

    def variation(self, n: int) -> float:
        """Variation restricted to admissible pair-words (same indexing as ``variation``)."""
        P = self.potential
        M = P.alphabet_size
        agree = n - 1
        if agree >= P.depth:
            return 0.0
        vals = P.table.reshape(M**agree, -1)
        mask = self.admissible.reshape(M**agree, -1)
        hi = np.where(mask, vals, -np.inf).max(axis=1)
        lo = np.where(mask, vals, np.inf).min(axis=1)
        ok = mask.any(axis=1)
        return float(np.max((hi - lo)[ok]))


def pair_admissible(N: int, depth: int) -> np.ndarray:
    """Mask of pair-words ``(u_0 v_0)(u_1 v_1)...`` with ``v_j == u_{j+1}``."""
    W = words_array(N * N, depth)
    first, second = W // N, W % N
    return np.all(second[:, :-1] == first[:, 1:], axis=1)


def recode_pairs(phi: Potential) -> RecodedPotential:
    """Rewrite ``phi`` over the alphabet of overlapping symbol pairs, one level shallower."""
    N = phi.alphabet_size
    kt = max(phi.depth - 1, 1)
    check_capacity((N * N) ** kt, "recoded table")
    W = words_array(N * N, kt)
    first, second = W // N, W % N
    # source word x_0 .. x_kt read from the pairs
    src = np.concatenate([first, second[:, -1:]], axis=1)
    idx = src @ (N ** np.arange(kt, -1, -1))
    table = lift(phi.table, N, phi.depth, kt + 1)[idx]
    mask = pair_admissible(N, kt)
    table = np.where(mask, table, 0.0)
    return RecodedPotential(Potential(N * N, kt, table, phi.tail_C, phi.tail_theta), mask, N)


def recoded_log_eigenvalue(rec: RecodedPotential) -> float:
    """Log Perron root of the transfer operator restricted to admissible pair sequences."""
    P = rec.potential
    M = P.alphabet_size
    K = max(P.depth, 2)
    S = M ** (K - 1)
    check_capacity(S * S, "state matrix")
    y = np.arange(M**K)
    Cm = np.zeros((S, S))
    Cm[y // M, y % S] = np.exp(P.lifted(K)) * pair_admissible(rec.source_alphabet, K)
    return float(math.log(np.max(np.abs(np.linalg.eigvals(Cm)))))


class GapReport(NamedTuple):
    gap: float
    sup_term: float
    ratio_term: float
    g_phi: GFunction
    g_tau: GFunction


def normalized_potential_gap(phi: Potential, tau: Potential, m: Optional[int] = None,
                             slack: float = 1e-10) -> GapReport:
    """``sup |log g_phi - log g_tau|`` with its triangle split into potential and ratio parts."""
    ephi, etau, m = _common_eigendata(phi, tau, m)
    phi0 = phi - math.log(ephi.lam)
    tau0 = tau - math.log(etau.lam)
    e0 = ephi._replace(lam=1.0)
    t0 = etau._replace(lam=1.0)
    g_phi, g_tau = normalize_to_g(phi0, e0), normalize_to_g(tau0, t0)
    gap = log_distance(g_phi, g_tau)
    D = max(phi.depth, tau.depth)
    sup_term = float(np.max(np.abs(phi0.lifted(D) - tau0.lifted(D))))
    R = _ratio_table(ephi.h, m + 1) / _ratio_table(etau.h, m + 1)
    ratio_term = float(np.max(np.abs(np.log(R))))
    if gap > sup_term + ratio_term + slack:
        raise BoundViolation(f"normalized gap {gap:.6g} exceeds its triangle split "
                             f"{sup_term:.6g} + {ratio_term:.6g}")
    return GapReport(gap, sup_term, ratio_term, g_phi, g_tau)
