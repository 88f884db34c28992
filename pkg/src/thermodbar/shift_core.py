"""Alphabets, words and cylinder indexing for finite truncations of the full shift.

A depth-``k`` cylinder table over an alphabet of size ``N`` is a flat array of
length ``N**k`` indexed lexicographically: the word ``w_0 w_1 ... w_{k-1}`` sits
at index ``sum_j w_j * N**(k-1-j)``.  Because the first symbol is the most
significant digit, a C-order reshape to ``(N,) * k`` recovers the nested
layout, prefixes are integer division and suffixes are remainders.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

Word = Tuple[int, ...]

DEFAULT_CAPACITY = 10**7
INF = math.inf


class CapacityError(ValueError):
    """Raised when a table or enumeration would exceed the configured size cap."""


class BoundViolation(AssertionError):
    """A computed quantity broke an inequality the construction guarantees."""


def capacity() -> int:
    """Current table-size cap (``THERMO_CAPACITY`` overrides the default)."""
    raw = os.environ.get("THERMO_CAPACITY")
    if raw is None:
        return DEFAULT_CAPACITY
    return int(float(raw))


def check_capacity(count: int, what: str = "table") -> None:
    if count > capacity():
        raise CapacityError(f"{what} of size {count} exceeds capacity {capacity()}")


@dataclass(frozen=True)
class Alphabet:
    """Symbols ``0..size-1`` with optional display labels."""

    size: int
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {self.size}")
        if self.labels is not None and len(self.labels) != self.size:
            raise ValueError("label table must have one entry per symbol")

    def __contains__(self, symbol) -> bool:
        return isinstance(symbol, (int, np.integer)) and 0 <= symbol < self.size

    def symbols(self) -> range:
        return range(self.size)

    def check_word(self, word: Sequence[int]) -> Word:
        w = tuple(int(s) for s in word)
        for s in w:
            if not 0 <= s < self.size:
                raise ValueError(f"symbol {s} out of range for alphabet of size {self.size}")
        return w


def _as_alphabet(alphabet) -> Alphabet:
    return alphabet if isinstance(alphabet, Alphabet) else Alphabet(int(alphabet))


@dataclass(frozen=True)
class CylinderIndex:
    """Bijection between depth-``k`` words and ``0..N**k - 1``."""

    alphabet: Alphabet
    depth: int

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    @property
    def size(self) -> int:
        return self.alphabet.size**self.depth

    def index(self, word: Sequence[int]) -> int:
        w = self.alphabet.check_word(word)
        if len(w) != self.depth:
            raise ValueError(f"expected a word of length {self.depth}, got {len(w)}")
        idx = 0
        for s in w:
            idx = idx * self.alphabet.size + s
        return idx

    def word(self, index: int) -> Word:
        if not 0 <= index < self.size:
            raise ValueError(f"index {index} out of range")
        N = self.alphabet.size
        out = []
        for _ in range(self.depth):
            index, r = divmod(index, N)
            out.append(r)
        return tuple(reversed(out))


def word_index(word: Sequence[int], N: int) -> int:
    idx = 0
    for s in word:
        idx = idx * N + int(s)
    return idx


def enumerate_words(alphabet, n: int) -> list:
    """All words of length ``n`` in lexicographic order."""
    A = _as_alphabet(alphabet)
    if n < 0:
        raise ValueError("word length must be nonnegative")
    check_capacity(A.size**n, "word enumeration")
    return list(itertools.product(range(A.size), repeat=n))


def periodic_words(alphabet, n: int, a: int) -> list:
    """Length-``n`` words starting with ``a``; each is the period of a point of period ``n``."""
    A = _as_alphabet(alphabet)
    if n < 1:
        raise ValueError("period must be >= 1")
    A.check_word([a])
    check_capacity(A.size ** (n - 1), "periodic-word enumeration")
    return [(a,) + rest for rest in itertools.product(range(A.size), repeat=n - 1)]


def first_return_words(alphabet, n: int, a: int) -> list:
    """Length-``n`` words ``a w_1 ... w_{n-1}`` with no interior occurrence of ``a``."""
    A = _as_alphabet(alphabet)
    if n < 1:
        raise ValueError("period must be >= 1")
    A.check_word([a])
    check_capacity((A.size - 1) ** (n - 1), "first-return enumeration")
    others = [s for s in range(A.size) if s != a]
    return [(a,) + rest for rest in itertools.product(others, repeat=n - 1)]


def first_disagreement(x: Sequence[int], y: Sequence[int], truncate: bool = False):
    """Smallest index where ``x`` and ``y`` differ, or ``math.inf`` if none.

    Words of unequal length are rejected unless ``truncate`` is set, in which
    case only the common prefix range is compared.
    """
    if len(x) != len(y) and not truncate:
        raise ValueError("words differ in length; pass truncate=True to compare prefixes")
    for i, (u, v) in enumerate(zip(x, y)):
        if u != v:
            return i
    return INF


def marked_prefix_count(x: Sequence[int], y: Sequence[int], a: int, truncate: bool = False) -> int:
    """Number of positions before the first disagreement where both words read ``a``."""
    t = first_disagreement(x, y, truncate=truncate)
    stop = min(len(x), len(y)) if t == INF else t
    return sum(1 for i in range(stop) if x[i] == a and y[i] == a)


# --- vectorized table helpers ------------------------------------------------


def words_array(N: int, n: int) -> np.ndarray:
    """``(N**n, n)`` integer array whose rows are the depth-``n`` words in index order."""
    check_capacity(N**n * max(n, 1), "word array")
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    idx = np.arange(N**n, dtype=np.int64)
    powers = N ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % N


def lift(table: np.ndarray, N: int, depth: int, new_depth: int) -> np.ndarray:
    """Re-express a depth-``depth`` table as a (constant-extended) deeper table."""
    if new_depth < depth:
        raise ValueError("cannot lift to a shallower depth")
    check_capacity(N**new_depth)
    return np.repeat(np.asarray(table), N ** (new_depth - depth))


def prefix_marginal(table: np.ndarray, N: int, depth: int, new_depth: int) -> np.ndarray:
    """Sum out the trailing ``depth - new_depth`` coordinates of a mass table."""
    if new_depth > depth:
        raise ValueError("cannot marginalize to a deeper table")
    return np.asarray(table).reshape(N**new_depth, -1).sum(axis=1)


def shift_marginal(table: np.ndarray, N: int) -> np.ndarray:
    """Sum out the first coordinate of a mass table (push-forward under the shift)."""
    return np.asarray(table).reshape(N, -1).sum(axis=0)


def disagreement_table(N: int, depth: int) -> np.ndarray:
    """Pairwise first-disagreement index between all depth-``depth`` words.

    Equal words get ``depth`` (no disagreement within the compared range).
    """
    check_capacity(N ** (2 * depth), "pair table")
    W = words_array(N, depth)
    neq = W[:, None, :] != W[None, :, :]
    any_neq = neq.any(axis=2)
    first = np.argmax(neq, axis=2)
    return np.where(any_neq, first, depth)


def marked_count_table(N: int, depth: int, a: int) -> np.ndarray:
    """Pairwise ``s_a`` counts (matching ``a`` symbols before the first disagreement)."""
    W = words_array(N, depth)
    t = disagreement_table(N, depth)
    both_a = (W[:, None, :] == a) & (W[None, :, :] == a)
    pos = np.arange(depth)
    before = pos[None, None, :] < t[:, :, None]
    return (both_a & before).sum(axis=2)


def transfer_table(N: int, log_weight: np.ndarray, weight_depth: int, f: np.ndarray,
                   f_depth: int):
    """``(L f)(x) = sum_i exp(w(ix)) f(ix)`` on tables; returns ``(table, depth)``.

    The output depth is ``max(weight_depth - 1, f_depth)``.
    """
    out_depth = max(weight_depth - 1, f_depth)
    E = out_depth + 1
    w = np.exp(lift(log_weight, N, weight_depth, E))
    F = lift(f, N, f_depth, E)
    return (w * F).reshape(N, -1).sum(axis=0), out_depth


def adjoint_table(N: int, log_weight: np.ndarray, weight_depth: int, nu: np.ndarray,
                  depth: int) -> np.ndarray:
    """Dual action on cylinder masses: ``(L* nu)[w] = sum_j exp(weight(w j)) nu[w_1.. j]``.

    Exact at ``depth`` whenever ``weight_depth <= depth + 1``.
    """
    if weight_depth > depth + 1:
        raise ValueError("mass table too shallow for this weight")
    E = depth + 1
    w = np.exp(lift(log_weight, N, weight_depth, E))
    tail = np.asarray(nu)[np.arange(N**E) % (N**depth)]
    return (w * tail).reshape(N**depth, N).sum(axis=1)
