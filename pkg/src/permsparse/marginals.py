"""Sparse non-negative functions on S_n and their lambda-marginals."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .symgroup import LambdaShape, Permutation, check_cap, partition_table

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)


@dataclass(frozen=True)
class Tolerance:
    """Float equality: |a-b| <= max(abs_tol, rel_tol * max(|a|, |b|))."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-9

    def close(self, a, b) -> bool:
        return abs(a - b) <= max(self.abs_tol, self.rel_tol * max(abs(a), abs(b)))


DEFAULT_TOL = Tolerance()


def to_scalar(value, mode: str):
    """Coerce to the scalar type of ``mode``; strings may be decimals or p/q."""
    if mode == EXACT:
        return Fraction(value)
    if mode == FLOAT:
        return float(Fraction(value)) if isinstance(value, str) else float(value)
    raise ValueError(f"unknown mode {mode!r}")


def format_scalar(value) -> str:
    """Lossless text form: finite decimals where possible, else p/q."""
    if isinstance(value, float):
        return repr(value)
    value = Fraction(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    if value.denominator == 1:
        return str(value.numerator)
    digits = max(twos, fives)
    scaled = value * 10**digits
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


class SparseSupportFunction:
    """f = sum_k p_k [sigma_k] with positive values; repeated permutations merge."""

    def __init__(self, n: int, entries: Iterable[tuple[Permutation, object]] = (), mode: str = EXACT):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.n = n
        self.mode = mode
        merged: dict[Permutation, object] = {}
        seen = 0
        for perm, value in entries:
            if perm.n != n:
                raise ValueError(f"permutation on {perm.n} elements in a function on {n}")
            v = to_scalar(value, mode)
            if not (v > 0) or (mode == FLOAT and not math.isfinite(v)):
                raise ValueError(f"values must be positive and finite, got {value!r}")
            merged[perm] = merged[perm] + v if perm in merged else v
            seen += 1
        self._entries = merged
        self.duplicates_merged = seen - len(merged)

    @classmethod
    def from_arrays(cls, perms: np.ndarray, values, mode: str) -> "SparseSupportFunction":
        perms = np.asarray(perms)
        return cls(perms.shape[1], zip(map(Permutation.from_array, perms), values), mode)

    @property
    def K(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[tuple[Permutation, object]]:
        return list(self._entries.items())

    @property
    def support(self) -> list[Permutation]:
        return list(self._entries)

    @property
    def values(self) -> list:
        return list(self._entries.values())

    def perms_array(self) -> np.ndarray:
        if not self._entries:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.array([p.array for p in self._entries], dtype=np.int64)

    def mass(self):
        return sum(self._entries.values(), Fraction(0) if self.mode == EXACT else 0.0)

    def __getitem__(self, perm: Permutation):
        return self._entries.get(perm, 0)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseSupportFunction):
            return NotImplemented
        return self.n == other.n and self._entries == other._entries

    def close_to(self, other: "SparseSupportFunction", tol: Tolerance = DEFAULT_TOL) -> bool:
        if self.n != other.n or set(self._entries) != set(other._entries):
            return False
        return all(tol.close(v, other._entries[p]) for p, v in self._entries.items())

    def __repr__(self) -> str:
        body = ", ".join(f"{p}: {format_scalar(v)}" for p, v in self._entries.items())
        return f"SparseSupportFunction(n={self.n}, {{{body}}})"


@dataclass(frozen=True, eq=False)
class MarginalMatrix:
    """Non-zero cells of f-hat(lambda), sorted by (row, col), 0-based."""

    n: int
    shape: LambdaShape
    mode: str
    rows: np.ndarray
    cols: np.ndarray
    values: object  # tuple of Fractions (exact) or float64 array (float)

    @classmethod
    def from_cells(cls, shape: LambdaShape, cells: Mapping[tuple[int, int], object], mode: str = EXACT) -> "MarginalMatrix":
        d = shape.d
        items = sorted((k, to_scalar(v, mode)) for k, v in cells.items())
        for (i, j), v in items:
            if not (0 <= i < d and 0 <= j < d):
                raise ValueError(f"cell ({i}, {j}) outside the {d}x{d} matrix")
            if not v > 0:
                raise ValueError(f"cell ({i}, {j}) has non-positive value {v}")
        rows = np.array([k[0] for k, _ in items], dtype=np.int64)
        cols = np.array([k[1] for k, _ in items], dtype=np.int64)
        vals = [v for _, v in items]
        values = tuple(vals) if mode == EXACT else np.array(vals, dtype=np.float64)
        return cls(shape.n, shape, mode, rows, cols, values)

    @property
    def d(self) -> int:
        return self.shape.d

    @property
    def cells(self) -> dict[tuple[int, int], object]:
        return {(int(i), int(j)): v for i, j, v in zip(self.rows, self.cols, self.value_list())}

    def value_list(self) -> list:
        return list(self.values) if self.mode == EXACT else [float(v) for v in self.values]

    def __len__(self) -> int:
        return len(self.rows)

    def dense(self) -> list[list]:
        zero = Fraction(0) if self.mode == EXACT else 0.0
        out = [[zero] * self.d for _ in range(self.d)]
        for (i, j), v in self.cells.items():
            out[i][j] = v
        return out

    def total(self):
        return sum(self.value_list(), Fraction(0) if self.mode == EXACT else 0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarginalMatrix):
            return NotImplemented
        return self.shape == other.shape and self.cells == other.cells

    def close_to(self, other: "MarginalMatrix", tol: Tolerance = DEFAULT_TOL) -> bool:
        if self.shape != other.shape or len(self) != len(other):
            return False
        if not (np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols)):
            return False
        if self.mode == FLOAT and other.mode == FLOAT:
            a, b = self.values, other.values
            bound = np.maximum(tol.abs_tol, tol.rel_tol * np.maximum(np.abs(a), np.abs(b)))
            return bool(np.all(np.abs(a - b) <= bound))
        return all(tol.close(a, b) for a, b in zip(self.value_list(), other.value_list()))


def fourier_coefficient(f: SparseSupportFunction, shape: LambdaShape, cap: int | None = None) -> MarginalMatrix:
    """f-hat(lambda): cell (i, j) sums p_k over the k whose matching sends j to i."""
    if f.n != shape.n:
        raise ValueError(f"dimension mismatch: function on {f.n}, shape of {shape.n}")
    check_cap(shape, cap)
    d = shape.d
    if f.K == 0:
        empty = np.zeros(0, dtype=np.int64)
        vals = () if f.mode == EXACT else np.zeros(0)
        return MarginalMatrix(shape.n, shape, f.mode, empty, empty, vals)
    maps = partition_table(shape).induced_maps(f.perms_array())
    ids = (maps * d + np.arange(d, dtype=np.int64)).ravel()
    values = f.values
    if f.mode == FLOAT:
        uniq, inverse = np.unique(ids, return_inverse=True)
        sums = np.bincount(inverse, weights=np.repeat(np.asarray(values, dtype=np.float64), d))
        return MarginalMatrix(shape.n, shape, f.mode, uniq // d, uniq % d, sums)
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    owner = (order // d).tolist()
    bounds = starts.tolist() + [len(order)]
    sums = tuple(
        sum((values[k] for k in owner[a:b]), Fraction(0)) for a, b in zip(bounds, bounds[1:])
    )
    uniq = sorted_ids[starts]
    return MarginalMatrix(shape.n, shape, f.mode, uniq // d, uniq % d, sums)


@dataclass
class MarginalReport:
    ok: bool
    total: object
    reference: object
    bad_rows: list[int] = field(default_factory=list)
    bad_cols: list[int] = field(default_factory=list)
    mass_ok: bool = True


def verify_marginal(M: MarginalMatrix, expected_mass=None, tol: Tolerance = DEFAULT_TOL) -> MarginalReport:
    """Check that all row and column sums agree (with each other and the mass)."""
    d = M.d
    vals = M.value_list()
    zero = Fraction(0) if M.mode == EXACT else 0.0
    row_sums = [zero] * d
    col_sums = [zero] * d
    for i, j, v in zip(M.rows.tolist(), M.cols.tolist(), vals):
        row_sums[i] += v
        col_sums[j] += v
    total = sum(vals, zero)
    if M.mode == EXACT:
        same = lambda a, b: a == b
    else:
        same = tol.close
    if expected_mass is not None:
        reference = to_scalar(expected_mass, M.mode)
    elif M.mode == EXACT:
        reference = Counter(row_sums + col_sums).most_common(1)[0][0]
    else:
        reference = float(np.median(row_sums + col_sums))
    bad_rows = [i for i, s in enumerate(row_sums) if not same(s, reference)]
    bad_cols = [j for j, s in enumerate(col_sums) if not same(s, reference)]
    mass_ok = same(total, d * reference)
    return MarginalReport(not bad_rows and not bad_cols and mass_ok, total, reference, bad_rows, bad_cols, mass_ok)


def example1_identity(n: int) -> tuple[MarginalMatrix, MarginalMatrix]:
    """Both sides of M((1 2)) + M((3 4)) = M((1 2)(3 4)) + M(id) at (n-1, 1)."""
    if n < 4:
        raise ValueError("the identity needs n >= 4")
    shape = LambdaShape((n - 1, 1))
    s1 = Permutation.from_cycles(n, (1, 2))
    s2 = Permutation.from_cycles(n, (3, 4))
    s3 = Permutation.from_cycles(n, (1, 2), (3, 4))
    s4 = Permutation.identity(n)
    lhs = fourier_coefficient(SparseSupportFunction(n, [(s1, 1), (s2, 1)]), shape)
    rhs = fourier_coefficient(SparseSupportFunction(n, [(s3, 1), (s4, 1)]), shape)
    return lhs, rhs
