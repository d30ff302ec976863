"""Permutations of {1..n} and ordered set partitions of shape lambda.

Element labels are 1-based in the public API (images, cycles, ``sigma(x)``),
while partition indices and block labels are 0-based.  A ``PartitionWord``
stores, for each element, the block that element sits in; words are ranked
in lexicographic order, so index 0 is the word ``0...0 1...1 ...``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CAP = 10**6
_WIDTH_LIMIT = 2**127
_INT64_SAFE = 2**62


class CapExceeded(ValueError):
    """Raised when D_lambda exceeds the configured cap."""


class Permutation:
    """A bijection of {1..n} given by its one-line images."""

    __slots__ = ("_img", "_hash")

    def __init__(self, images: Iterable[int]):
        img = tuple(int(v) - 1 for v in images)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"not a permutation of 1..{len(img)}: {[v + 1 for v in img]}")
        if not img:
            raise ValueError("permutation must act on at least one element")
        self._img = img
        self._hash = hash(img)

    @classmethod
    def from_array(cls, arr) -> "Permutation":
        """Build from 0-based images (numpy array or sequence)."""
        return cls(int(v) + 1 for v in arr)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(1, n + 1))

    @classmethod
    def from_cycles(cls, n: int, *cycles: Sequence[int]) -> "Permutation":
        img = list(range(1, n + 1))
        seen: set[int] = set()
        for cyc in cycles:
            if seen.intersection(cyc) or len(set(cyc)) != len(cyc):
                raise ValueError("cycles must be disjoint")
            seen.update(cyc)
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                if not 1 <= a <= n:
                    raise ValueError(f"element {a} outside 1..{n}")
                img[a - 1] = b
        return cls(img)

    @property
    def n(self) -> int:
        return len(self._img)

    @property
    def images(self) -> tuple[int, ...]:
        return tuple(v + 1 for v in self._img)

    @property
    def array(self) -> np.ndarray:
        """0-based images as an int64 array."""
        return np.array(self._img, dtype=np.int64)

    def __call__(self, x: int) -> int:
        return self._img[x - 1] + 1

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and self._img == other._img

    def __lt__(self, other: "Permutation") -> bool:
        return self._img < other._img

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Permutation({list(self.images)})"

    def __str__(self) -> str:
        cyc = [c for c in cycle_decomposition(self).cycles if len(c) > 1]
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc) or "id"


def compose(a: Permutation, b: Permutation) -> Permutation:
    """Return a∘b, i.e. x ↦ a(b(x))."""
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")
    ai = a._img
    return Permutation(ai[v] + 1 for v in b._img)


def inverse(a: Permutation) -> Permutation:
    inv = [0] * a.n
    for x, y in enumerate(a._img):
        inv[y] = x + 1
    return Permutation(inv)


@dataclass(frozen=True)
class CycleDecomposition:
    cycles: tuple[tuple[int, ...], ...]

    @property
    def nontrivial_cycle_count(self) -> int:
        return sum(1 for c in self.cycles if len(c) > 1)

    def __len__(self) -> int:
        return len(self.cycles)


def cycle_decomposition(a: Permutation) -> CycleDecomposition:
    """Disjoint cycles (1-based), each starting at its minimum, sorted by it."""
    seen = [False] * a.n
    out = []
    for start in range(a.n):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x + 1)
            x = a._img[x]
        out.append(tuple(cyc))
    return CycleDecomposition(tuple(out))


def sample_uniform(n: int, rng: np.random.Generator) -> Permutation:
    """Uniform permutation via the generator's Fisher-Yates shuffle."""
    return Permutation.from_array(rng.permutation(n))


def sample_uniform_batch(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k independent uniform permutations as a (k, n) array of 0-based images."""
    base = np.broadcast_to(np.arange(n, dtype=np.int64), (k, n))
    return rng.permuted(base, axis=1)


# --- shapes and partition words -------------------------------------------------


def _multinomial(counts: Sequence[int]) -> int:
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


@dataclass(frozen=True)
class LambdaShape:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if len(parts) < 2:
            raise ValueError("shape needs at least two parts (one part carries no information)")
        if any(p < 1 for p in parts):
            raise ValueError(f"parts must be positive: {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"parts must be weakly decreasing: {parts}")

    @classmethod
    def parse(cls, text: str) -> "LambdaShape":
        return cls(tuple(int(t) for t in text.replace(" ", "").strip("[]()").split(",") if t))

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def r(self) -> int:
        return len(self.parts)

    @cached_property
    def d(self) -> int:
        # entropy calculators accept any shape; counting stops at 2^127
        d = _multinomial(self.parts)
        if d >= _WIDTH_LIMIT:
            raise OverflowError(f"D_lambda for shape ({self}) exceeds 2^127")
        return d

    def __str__(self) -> str:
        return ",".join(map(str, self.parts))


def d_lambda(shape: LambdaShape) -> int:
    """n! / prod(lambda_i!)."""
    return shape.d


def check_cap(shape: LambdaShape, cap: int | None) -> None:
    cap = DEFAULT_CAP if cap is None else cap
    if shape.d > cap:
        raise CapExceeded(f"D_lambda = {shape.d} exceeds cap {cap} for shape ({shape})")


@dataclass(frozen=True)
class PartitionWord:
    shape: LambdaShape
    word: tuple[int, ...]

    def __post_init__(self):
        word = tuple(int(b) for b in self.word)
        object.__setattr__(self, "word", word)
        if len(word) != self.shape.n:
            raise ValueError("word length differs from n")
        counts = [0] * self.shape.r
        for b in word:
            if not 0 <= b < self.shape.r:
                raise ValueError(f"block label {b} outside 0..{self.shape.r - 1}")
            counts[b] += 1
        if tuple(counts) != self.shape.parts:
            raise ValueError(f"block sizes {counts} do not match shape {self.shape.parts}")

    def blocks(self) -> list[list[int]]:
        """Blocks as lists of 1-based elements."""
        out: list[list[int]] = [[] for _ in range(self.shape.r)]
        for x, b in enumerate(self.word):
            out[b].append(x + 1)
        return out


def rank_partition(w: PartitionWord) -> int:
    """Lexicographic rank of a word among all words of its shape."""
    counts = list(w.shape.parts)
    remaining = w.shape.n
    total = w.shape.d
    rank = 0
    for b in w.word:
        # total = number of words on the remaining multiset
        for smaller in range(b):
            if counts[smaller]:
                rank += total * counts[smaller] // remaining
        total = total * counts[b] // remaining
        counts[b] -= 1
        remaining -= 1
    return rank


def unrank_partition(shape: LambdaShape, idx: int) -> PartitionWord:
    if not 0 <= idx < shape.d:
        raise IndexError(f"index {idx} outside 0..{shape.d - 1}")
    counts = list(shape.parts)
    remaining = shape.n
    total = shape.d
    word = []
    for _ in range(shape.n):
        for b, c in enumerate(counts):
            if not c:
                continue
            block = total * c // remaining
            if idx < block:
                word.append(b)
                total = block
                counts[b] -= 1
                remaining -= 1
                break
            idx -= block
    return PartitionWord(shape, tuple(word))


def act(sigma: Permutation, t: PartitionWord) -> PartitionWord:
    """sigma(t): element sigma(x) lands in the block that held x."""
    if sigma.n != t.shape.n:
        raise ValueError(f"size mismatch: {sigma.n} vs {t.shape.n}")
    out = [0] * sigma.n
    for x, b in enumerate(t.word):
        out[sigma._img[x]] = b
    return PartitionWord(t.shape, tuple(out))


# --- vectorized ranking ----------------------------------------------------------


class PartitionTable:
    """All words of a shape in sparse form, with an exact vectorized rank.

    A word is stored by the sorted positions ``E`` of its elements outside
    block 0 together with their labels ``L``.  Ranking uses
    N(c) = C(R, c_0) * N_small(c_1..c_{r-1}), with the binomial and
    small-multinomial factors precomputed.
    """

    def __init__(self, shape: LambdaShape):
        if shape.d >= _INT64_SAFE:
            raise CapExceeded(f"D_lambda = {shape.d} too large for table ranking")
        self.shape = shape
        self.n = shape.n
        self.d = shape.d
        small = shape.parts[1:]
        self.m = m = sum(small)
        self._radix = np.array([c + 1 for c in small], dtype=np.int64)
        stride = np.ones(len(small), dtype=np.int64)
        for b in range(len(small) - 2, -1, -1):
            stride[b] = stride[b + 1] * self._radix[b + 1]
        # stride indexed by block label (label 0 unused)
        self._stride = np.concatenate([[0], stride])
        states = list(itertools.product(*(range(c + 1) for c in small)))
        self._ns = np.array([min(_multinomial(s), _INT64_SAFE) for s in states], dtype=np.int64)
        self._state_count = np.array([(0,) + s for s in states], dtype=np.int64)
        self._full_state = len(states) - 1
        self._binom = np.array(
            [[min(math.comb(N, k), _INT64_SAFE) for k in range(m + 1)] for N in range(self.n)],
            dtype=np.int64,
        )
        self.E, self.L = self._enumerate()

    def _enumerate(self) -> tuple[np.ndarray, np.ndarray]:
        small = self.shape.parts[1:]
        arrangements = sorted(set(itertools.permutations(
            [b + 1 for b, c in enumerate(small) for _ in range(c)])))
        combos = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations(range(self.n), self.m)),
            dtype=np.int64,
        ).reshape(-1, self.m)
        arr = np.array(arrangements, dtype=np.int64)
        E = np.repeat(combos, len(arr), axis=0)
        L = np.tile(arr, (len(combos), 1))
        ranks = self.rank(E, L)
        E_sorted = np.empty_like(E)
        L_sorted = np.empty_like(L)
        E_sorted[ranks] = E
        L_sorted[ranks] = L
        return E_sorted, L_sorted

    def rank(self, E: np.ndarray, L: np.ndarray) -> np.ndarray:
        """Ranks of words given positions sorted ascending along the last axis."""
        shape = E.shape[:-1]
        E = E.reshape(-1, self.m)
        L = L.reshape(-1, self.m)
        m = self.m
        state = np.full(E.shape[0], self._full_state, dtype=np.int64)
        out = np.zeros(E.shape[0], dtype=np.int64)
        for t in range(m):
            r1 = self.n - 1 - E[:, t]
            b = L[:, t]
            out += self._binom[r1, m - t] * self._ns[state]
            for bp in range(1, self.shape.r - 1):
                ok = (bp < b) & (self._state_count[state, bp] > 0)
                if ok.any():
                    idx = np.where(ok, state - self._stride[bp], 0)
                    out += np.where(ok, self._binom[r1, m - t - 1] * self._ns[idx], 0)
            state = state - self._stride[b]
        return out.reshape(shape)

    def words(self) -> np.ndarray:
        """Dense (D, n) array of block labels (small shapes only)."""
        out = np.zeros((self.d, self.n), dtype=np.int64)
        np.put_along_axis(out, self.E, self.L, axis=1)
        return out

    def induced_maps(self, perms: np.ndarray) -> np.ndarray:
        """(k, D) array: row k is the induced map of 0-based permutation perms[k]."""
        perms = np.asarray(perms, dtype=np.int64).reshape(-1, self.n)
        moved = perms[:, self.E]
        if self.m == 1:
            return self.rank(moved, np.broadcast_to(self.L, moved.shape))
        order = np.argsort(moved, axis=-1)
        moved = np.take_along_axis(moved, order, axis=-1)
        labels = np.take_along_axis(np.broadcast_to(self.L, moved.shape), order, axis=-1)
        return self.rank(moved, labels)


@lru_cache(maxsize=32)
def partition_table(shape: LambdaShape) -> PartitionTable:
    return PartitionTable(shape)


@dataclass(frozen=True)
class InducedPermutation:
    shape: LambdaShape
    map: tuple[int, ...]

    def edges(self) -> list[tuple[int, int]]:
        """(row, col) cells of the permutation matrix."""
        return [(i, j) for j, i in enumerate(self.map)]


def induced_permutation(sigma: Permutation, shape: LambdaShape, cap: int | None = None) -> InducedPermutation:
    if sigma.n != shape.n:
        raise ValueError(f"size mismatch: {sigma.n} vs {shape.n}")
    check_cap(shape, cap)
    row = partition_table(shape).induced_maps(sigma.array[None, :])[0]
    return InducedPermutation(shape, tuple(int(v) for v in row))


def induced_permutation_reference(sigma: Permutation, shape: LambdaShape) -> InducedPermutation:
    """Slow path straight from rank/unrank, kept as a cross-check."""
    return InducedPermutation(
        shape,
        tuple(rank_partition(act(sigma, unrank_partition(shape, j))) for j in range(shape.d)),
    )


def map_cycle_count(mapping: Sequence[int]) -> int:
    seen = [False] * len(mapping)
    count = 0
    for s in range(len(mapping)):
        if not seen[s]:
            count += 1
            x = s
            while not seen[x]:
                seen[x] = True
                x = mapping[x]
    return count


def lambda_cycle_count(sigma: Permutation, shape: LambdaShape, cap: int | None = None) -> int:
    """Number of cycles of sigma acting on the partition indices."""
    return map_cycle_count(induced_permutation(sigma, shape, cap).map)
