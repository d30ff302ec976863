"""Brute-force ground truth for small n and the equal-l1 witness construction."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .marginals import EXACT, MarginalMatrix, SparseSupportFunction, fourier_coefficient
from .sparsestfit import ReconstructionError, reconstruct_permutation
from .symgroup import LambdaShape, Permutation, partition_table

MAX_N = 5
MAX_K = 5
_COMBINATION_BUDGET = 5_000_000


class OracleError(ValueError):
    pass


def _solve_exact(columns: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Unique solution of sum_s x_s columns[s] = rhs, or None when the columns are
    dependent or the system is inconsistent."""
    m = len(rhs)
    s = len(columns)
    rows = [[columns[c][r] for c in range(s)] + [rhs[r]] for r in range(m)]
    pivot_row = 0
    for c in range(s):
        pr = next((r for r in range(pivot_row, m) if rows[r][c] != 0), None)
        if pr is None:
            return None
        rows[pivot_row], rows[pr] = rows[pr], rows[pivot_row]
        piv = rows[pivot_row][c]
        rows[pivot_row] = [v / piv for v in rows[pivot_row]]
        for r in range(m):
            if r != pivot_row and rows[r][c] != 0:
                factor = rows[r][c]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[pivot_row])]
        pivot_row += 1
    if any(rows[r][s] != 0 for r in range(pivot_row, m)):
        return None
    return [rows[c][s] for c in range(s)]


def l0_oracle(M: MarginalMatrix, k_max: int = 4) -> list[SparseSupportFunction]:
    """All positive solutions g with g-hat = M of the least support size <= k_max.

    Only permutations whose whole matching lies inside M's non-zero cells can
    carry mass.  At the least feasible size every solution sits on linearly
    independent columns (a dependent support could be shrunk along a null
    vector while staying non-negative), so dependent supports are skipped and
    each remaining system has at most one solution.
    """
    if M.mode != EXACT:
        raise OracleError("the l0 oracle needs exact values")
    if M.n > MAX_N:
        raise OracleError(f"n = {M.n} exceeds the oracle cap {MAX_N}")
    if not 0 <= k_max <= MAX_K:
        raise OracleError(f"k_max must lie in 0..{MAX_K}")
    n = M.n
    if len(M) == 0:
        return [SparseSupportFunction(n, [], EXACT)]
    cells = M.cells
    index = {cell: r for r, cell in enumerate(sorted(cells))}
    rhs = [cells[c] for c in sorted(cells)]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    maps = partition_table(M.shape).induced_maps(perms)
    candidates = []
    for perm, row in zip(perms, maps):
        mine = [(int(i), j) for j, i in enumerate(row.tolist())]
        if all(c in index for c in mine):
            mask = 0
            for c in mine:
                mask |= 1 << index[c]
            candidates.append((Permutation.from_array(perm), mask, [index[c] for c in mine]))
    full = (1 << len(index)) - 1
    for size in range(1, k_max + 1):
        if math.comb(len(candidates), size) > _COMBINATION_BUDGET:
            raise OracleError(f"{len(candidates)} candidates: support search too large at size {size}")
        found = []
        for combo in itertools.combinations(candidates, size):
            cover = 0
            for _, mask, _ in combo:
                cover |= mask
            if cover != full:
                continue
            columns = []
            for _, _, rows in combo:
                col = [Fraction(0)] * len(index)
                for r in rows:
                    col[r] = Fraction(1)
                columns.append(col)
            x = _solve_exact(columns, rhs)
            if x is not None and all(v > 0 for v in x):
                found.append(SparseSupportFunction(n, [(p, v) for (p, _, _), v in zip(combo, x)], EXACT))
        if found:
            return found
    raise OracleError(f"no solution with support size <= {k_max}")


def _alternating_cycles(ma: np.ndarray, mb: np.ndarray) -> list[list[int]]:
    """Column sets of the non-trivial cycles in the union of two matchings."""
    inv_a = np.empty_like(ma)
    inv_a[ma] = np.arange(len(ma))
    step = inv_a[mb]
    seen = np.zeros(len(ma), dtype=bool)
    out = []
    for start in range(len(ma)):
        if seen[start] or step[start] == start:
            continue
        cyc = []
        j = start
        while not seen[j]:
            seen[j] = True
            cyc.append(j)
            j = int(step[j])
        out.append(cyc)
    return out


def l1_witness(f: SparseSupportFunction, shape: LambdaShape, max_cycles: int = 12) -> SparseSupportFunction | None:
    """A verified g != f with the same marginal and the same l1 norm, or None.

    For support permutations a, b the union of their matchings splits into
    alternating cycles; taking b's edges on some cycles and a's on the rest
    (and vice versa) gives two matchings with the same sum.  When both come
    from permutations tau1, tau2, moving min(p_a, p_b) from {a, b} onto
    {tau1, tau2} keeps the marginal and the mass.  At shape (n-1, 1) this
    is the cycle split of b a^-1.  None means no certified witness was
    found, not that the l1 solution is unique.
    """
    if f.K < 2:
        raise ValueError("an l1 witness needs at least two support permutations")
    if f.n != shape.n:
        raise ValueError(f"dimension mismatch: function on {f.n}, shape of {shape.n}")
    if f.mode != EXACT:
        f = SparseSupportFunction(f.n, [(p, Fraction(v)) for p, v in f.entries], EXACT)
    table = partition_table(shape)
    perms = f.support
    maps = table.induced_maps(f.perms_array())
    target = fourier_coefficient(f, shape, cap=shape.d)
    for a, b in itertools.combinations(range(f.K), 2):
        cycles = _alternating_cycles(maps[a], maps[b])
        if len(cycles) < 2:
            continue
        usable = cycles[:max_cycles]
        # subsets containing the first cycle: each split counted once
        for size in range(1, len(usable)):
            for rest in itertools.combinations(range(1, len(usable)), size - 1):
                chosen = np.zeros(shape.d, dtype=bool)
                for c in (0,) + rest:
                    chosen[usable[c]] = True
                t1 = np.where(chosen, maps[b], maps[a])
                t2 = np.where(chosen, maps[a], maps[b])
                try:
                    tau1 = reconstruct_permutation(list(zip(t1.tolist(), range(shape.d))), shape)
                    tau2 = reconstruct_permutation(list(zip(t2.tolist(), range(shape.d))), shape)
                except ReconstructionError:
                    continue
                g = _shift_mass(f, perms[a], perms[b], tau1, tau2)
                if g != f and fourier_coefficient(g, shape, cap=shape.d) == target and g.mass() == f.mass():
                    return g
    return None


def _shift_mass(f, sa, sb, t1, t2) -> SparseSupportFunction:
    m = min(f[sa], f[sb])
    values = dict(f.entries)
    for p, delta in ((sa, -m), (sb, -m), (t1, m), (t2, m)):
        values[p] = values.get(p, Fraction(0)) + delta
    return SparseSupportFunction(f.n, [(p, v) for p, v in values.items() if v != 0], EXACT)


def single_cycle_probability(n: int) -> Fraction:
    """P(a uniform permutation of n has at most one non-trivial cycle)."""
    if n < 1:
        raise ValueError("n must be positive")
    return Fraction(1, math.factorial(n)) + sum(
        (Fraction(1, l * math.factorial(n - l)) for l in range(2, n + 1)), Fraction(0)
    )


def single_cycle_probability_as_printed(n: int) -> Fraction:
    """The l = 1..n sum as usually written; the l = 1 term counts the identity
    n times, so this exceeds the true probability by (n - 1)/n!."""
    if n < 1:
        raise ValueError("n must be positive")
    return sum((Fraction(1, l * math.factorial(n - l)) for l in range(1, n + 1)), Fraction(0))

