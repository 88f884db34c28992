"""Locally constant potentials with certified Hölder tails.

A :class:`Potential` is a depth-``k`` cylinder table together with a tail
certificate ``(C, theta)``.  Variations are indexed by the number of leading
symbols two points must share *plus one*: ``variation(phi, n)`` is the sup of
``|phi(x) - phi(y)|`` over points agreeing on their first ``n - 1`` symbols.
With this indexing a depth-``k`` table has ``variation(phi, n) == 0`` for every
``n > k``, and the tail certificate reads ``var_n <= C * theta**n`` there.
"""

from __future__ import annotations

import json
from typing import NamedTuple, Sequence

import numpy as np

from .shift_core import INF, check_capacity, lift, word_index


class Variation(NamedTuple):
    value: float
    bound: bool  # True when the value is a certificate bound rather than exact


class HolderMetricReport(NamedTuple):
    sup_diff: float
    seminorm_diff: float
    tail_bound: float
    d_theta: float


class CylinderTable:
    """Shared storage for tables indexed by depth-``k`` words."""

    kind = "table"

    def __init__(self, alphabet_size: int, depth: int, table, tail_C: float = 0.0,
                 tail_theta: float = 0.5):
        N = int(alphabet_size)
        if N < 2:
            raise ValueError("alphabet size must be >= 2")
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        check_capacity(N**depth)
        arr = np.array(table, dtype=float).reshape(-1)
        if arr.size != N**depth:
            raise ValueError(f"table has {arr.size} entries, expected {N**depth}")
        if tail_C < 0:
            raise ValueError("tail constant must be nonnegative")
        if not 0 < tail_theta < 1:
            raise ValueError("tail theta must lie in (0, 1)")
        arr.setflags(write=False)
        self.alphabet_size = N
        self.depth = int(depth)
        self.table = arr
        self.tail_C = float(tail_C)
        self.tail_theta = float(tail_theta)

    def lifted(self, depth: int) -> np.ndarray:
        return lift(self.table, self.alphabet_size, self.depth, depth)

    def at(self, word: Sequence[int]) -> float:
        if len(word) < self.depth:
            raise ValueError(f"word of length {len(word)} is shorter than depth {self.depth}")
        return float(self.table[word_index(word[: self.depth], self.alphabet_size)])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "depth": self.depth,
            "alphabet_size": self.alphabet_size,
            "table": [float(v) for v in self.table],
            "tail": {"C": self.tail_C, "theta": self.tail_theta},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict):
        tail = doc.get("tail") or {}
        return cls(doc["alphabet_size"], doc["depth"], doc["table"],
                   tail_C=tail.get("C", 0.0), tail_theta=tail.get("theta", 0.5))

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return (f"{type(self).__name__}(N={self.alphabet_size}, depth={self.depth}, "
                f"tail=({self.tail_C}, {self.tail_theta}))")


class Potential(CylinderTable):
    """Real-valued potential, locally constant at ``depth`` up to a certified tail."""

    kind = "potential"

    def __init__(self, alphabet_size, depth, table, tail_C=0.0, tail_theta=0.5):
        if depth < 1:
            raise ValueError("potential depth must be >= 1")
        super().__init__(alphabet_size, depth, table, tail_C, tail_theta)
        if not np.all(np.isfinite(self.table)):
            raise ValueError("potential table entries must be finite")

    @classmethod
    def constant(cls, alphabet_size: int, value: float = 0.0) -> "Potential":
        return cls(alphabet_size, 1, np.full(alphabet_size, float(value)))

    @classmethod
    def from_log_weights(cls, weights) -> "Potential":
        """Depth-1 potential ``log p_i`` (depth 2 when given a matrix ``C[i, j]``)."""
        w = np.asarray(weights, dtype=float)
        if w.ndim == 1:
            return cls(w.size, 1, np.log(w))
        if w.ndim == 2 and w.shape[0] == w.shape[1]:
            return cls(w.shape[0], 2, np.log(w).reshape(-1))
        raise ValueError("weights must be a vector or a square matrix")

    def eval(self, word: Sequence[int]) -> float:
        return self.at(word)

    def shifted(self, c: float) -> "Potential":
        return Potential(self.alphabet_size, self.depth, self.table + c, self.tail_C, self.tail_theta)

    def with_depth(self, depth: int) -> "Potential":
        return Potential(self.alphabet_size, depth, self.lifted(depth), self.tail_C, self.tail_theta)

    def _combine(self, other: "Potential", sign: float) -> "Potential":
        if other.alphabet_size != self.alphabet_size:
            raise ValueError("potentials live on different alphabets")
        D = max(self.depth, other.depth)
        table = self.lifted(D) + sign * other.lifted(D)
        return Potential(self.alphabet_size, D, table, self.tail_C + other.tail_C,
                         max(self.tail_theta, other.tail_theta))

    def __add__(self, other):
        if isinstance(other, Potential):
            return self._combine(other, 1.0)
        return self.shifted(float(other))

    def __sub__(self, other):
        if isinstance(other, Potential):
            return self._combine(other, -1.0)
        return self.shifted(-float(other))

    def __mul__(self, c):
        c = float(c)
        return Potential(self.alphabet_size, self.depth, c * self.table, abs(c) * self.tail_C,
                         self.tail_theta)

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.table)))


def table_oscillation(table: np.ndarray, N: int, agree: int) -> float:
    """Max spread of a table over groups of words sharing their first ``agree`` symbols."""
    groups = np.asarray(table).reshape(N**agree, -1)
    return float(np.max(groups.max(axis=1) - groups.min(axis=1)))


def variation(phi: CylinderTable, n: int) -> Variation:
    """``var_n``: sup of ``|phi(x) - phi(y)|`` over points sharing their first ``n - 1`` symbols."""
    if n < 1:
        raise ValueError("variation index must be >= 1")
    agree = n - 1
    if agree < phi.depth:
        return Variation(table_oscillation(phi.table, phi.alphabet_size, agree), False)
    if phi.tail_C == 0.0:
        return Variation(0.0, False)
    return Variation(phi.tail_C * phi.tail_theta**n, True)


def holder_seminorm_table(table: np.ndarray, N: int, depth: int, theta: float) -> float:
    """``sup |f(x) - f(y)| / theta**t(x, y)`` for a locally constant depth-``depth`` table."""
    best = 0.0
    for t in range(depth):
        best = max(best, table_oscillation(table, N, t) / theta**t)
    return best


def holder_distance(phi: Potential, tau: Potential, theta: float) -> HolderMetricReport:
    """Sup-norm and Hölder-seminorm parts of ``d_theta(phi, tau)``.

    Table contributions are exact.  When either potential carries a tail, its
    contribution to the seminorm is bounded by ``C * sup_{n > D} (theta_c / theta)**n``
    and reported in ``tail_bound``; it is infinite when ``theta_c > theta``.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if phi.alphabet_size != tau.alphabet_size:
        raise ValueError("potentials live on different alphabets")
    N = phi.alphabet_size
    D = max(phi.depth, tau.depth)
    diff = phi.lifted(D) - tau.lifted(D)
    sup_diff = float(np.max(np.abs(diff)))
    semi = holder_seminorm_table(diff, N, D, theta)
    tail = 0.0
    for p in (phi, tau):
        if p.tail_C > 0:
            if p.tail_theta > theta:
                tail = INF
            else:
                tail += p.tail_C * (p.tail_theta / theta) ** (D + 1)
    return HolderMetricReport(sup_diff, semi, tail, sup_diff + semi + tail)


def holder_norm(phi: Potential, theta: float) -> float:
    zero = Potential.constant(phi.alphabet_size, 0.0)
    return holder_distance(phi, zero, theta).d_theta


def birkhoff_sum(phi: Potential, word: Sequence[int], n: int, periodic: bool = False) -> float:
    """``sum_{j<n} phi(sigma^j w)``; with ``periodic`` the word is repeated cyclically."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w = list(word)
    k = phi.depth
    if periodic:
        if not w:
            raise ValueError("periodic evaluation needs a nonempty word")
        reps = (n + k) // len(w) + 1
        w = w * reps
    elif len(w) < n + k - 1:
        raise ValueError(f"need a word of length >= {n + k - 1} for a length-{n} Birkhoff sum")
    return float(sum(phi.at(w[j:j + k]) for j in range(n)))


def log_distance(g: CylinderTable, h: CylinderTable) -> float:
    """``d(g, h) = sup |log g - log h|`` evaluated on the common-depth tables."""
    if g.alphabet_size != h.alphabet_size:
        raise ValueError("g-functions live on different alphabets")
    D = max(g.depth, h.depth)
    a, b = g.lifted(D), h.lifted(D)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("g-function entries must be positive")
    return float(np.max(np.abs(np.log(a) - np.log(b))))


def load_table(path) -> CylinderTable:
    """Read a potential or g-function JSON document."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") == "g-function":
        from .gmeasure_lab import GFunction

        return GFunction.from_dict(doc)
    return Potential.from_dict(doc)
