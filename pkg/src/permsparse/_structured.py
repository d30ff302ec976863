"""Compiled sparsest-fit decoder for large float inputs.

Same discovery rule as the core (a value that is no subset sum of the values
found so far is a new permutation), but each cell is decoded on its own: its
candidate members are only the permutations whose matching is still open in
that cell's row and column.  A permutation owns exactly one cell per column
and per row, so once a cell is decoded its members close there, shrinking the
candidate sets of the remaining cells.

Cells are worked level by level: the ascending discovery pass tries subsets
of at most three values, later rounds raise the limit once smaller cells
have settled.  Cells whose decomposition is ambiguous or too expensive wait
for a later round.  Whatever comes out is checked by the caller against the
input matrix.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .marginals import FLOAT, MarginalMatrix, Tolerance
from .sparsestfit import RecoveredTerm, RecoveryResult, ReconstructionError, _aborted, _finish, reconstruct_permutation

_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_DEBRUIJN_TABLE = np.array([
    0, 1, 48, 2, 57, 49, 28, 3, 61, 58, 50, 42, 38, 29, 17, 4,
    62, 55, 59, 36, 53, 51, 43, 22, 45, 39, 33, 30, 24, 18, 12, 5,
    63, 47, 56, 27, 60, 41, 37, 16, 54, 35, 52, 21, 44, 32, 23, 11,
    46, 26, 40, 15, 34, 20, 31, 10, 25, 14, 19, 9, 13, 8, 7, 6,
], dtype=np.int64)

OK, NEED_CAPACITY, UNRESOLVED, EXHAUSTED, OVERFULL = 0, 1, 2, 3, 4
MAX_EDGE_CELLS = 400_000_000
MAX_TABLE_BUILDS = 64
MAX_TABLE_VALUES = 12_000
_DECODED, _NEW, _WAIT = 0, 1, 2
MAX_LEVEL = 48


@njit(cache=True)
def _ctz(x, table):
    low = x & (~x + np.uint64(1))
    return table[(low * _DEBRUIJN) >> np.uint64(58)]


@njit(cache=True)
def _prefix_error(C, total):
    return 2.3e-16 * (C + 2) * total


@njit(cache=True)
def _build_pairs(p, K):
    npairs = K * (K - 1) // 2
    sums = np.empty(npairs)
    px = np.empty(npairs, np.int32)
    py = np.empty(npairs, np.int32)
    e = 0
    for x in range(K):
        for y in range(x + 1, K):
            sums[e] = p[x] + p[y]
            px[e] = x
            py[e] = y
            e += 1
    order = np.argsort(sums)
    sums = sums[order]
    px = px[order]
    py = py[order]
    nb = 1
    while nb < max(npairs, 1):
        nb *= 2
    lo = sums[0] if npairs else 0.0
    hi = sums[npairs - 1] if npairs else 1.0
    scale = nb / (hi - lo) if hi > lo else 0.0
    starts = np.zeros(nb + 1, np.int64)
    b = 0
    for e in range(npairs):
        key = min(int((sums[e] - lo) * scale), nb - 1)
        while b < key:
            b += 1
            starts[b] = e
    for bb in range(b + 1, nb + 1):
        starts[bb] = npairs
    # finer occupancy bitmap: most lookups miss and stop here
    nf = 8 * nb
    occ = np.zeros(nf // 64 + 1, np.uint64)
    for e in range(npairs):
        key = min(int((sums[e] - lo) * scale * 8), nf - 1)
        occ[key >> 6] |= np.uint64(1) << np.uint64(key & 63)
    return sums, px, py, starts, lo, scale, nb, occ


@njit(cache=True)
def _record(sols, nsol, idx, t, a, b):
    for u in range(t):
        sols[nsol, u] = idx[u]
    sols[nsol, t] = a
    sols[nsol, t + 1] = b


@njit(cache=True)
def _final_pairs(target_total, partial, lo_pos, C, cv, ck, pos, mark, stamp, slack,
                 use_table, psum, px, py, pstart, plo, pscale, pnb, occ, kbuilt, K,
                 sols, nsol, idx, t):
    """Pairs among candidates at positions > lo_pos completing the sum; returns
    the new solution count (stops at 2) and the work spent."""
    tau = target_total - partial
    window = slack + 1e-15 * abs(target_total)
    work = 0
    if not use_table:
        a = lo_pos + 1
        b = C - 1
        while a < b:
            work += 1
            s = cv[a] + cv[b]
            if s < tau - window:
                a += 1
            elif s > tau + window:
                b -= 1
            else:
                bb = b
                while bb > a and cv[a] + cv[bb] >= tau - window:
                    work += 1
                    if abs(partial + cv[a] + cv[bb] - target_total) <= slack:
                        _record(sols, nsol, idx, t, a, bb)
                        nsol += 1
                        if nsol >= 2:
                            return nsol, work
                    bb -= 1
                a += 1
        return nsol, work
    f1 = min(max(int((tau - window - plo) * pscale * 8), 0), 8 * pnb - 1)
    f2 = min(max(int((tau + window - plo) * pscale * 8), 0), 8 * pnb - 1)
    hit = False
    for f in range(f1, f2 + 1):
        work += 1
        if (occ[f >> 6] >> np.uint64(f & 63)) & np.uint64(1):
            hit = True
            break
    b1 = min(max(int((tau - window - plo) * pscale), 0), pnb - 1)
    b2 = min(max(int((tau + window - plo) * pscale), 0), pnb - 1)
    if not hit:
        b2 = b1 - 1
        first = 0
        last = 0
    else:
        first = pstart[b1]
        last = pstart[b2 + 1]
    for e in range(first, last):
        work += 1
        sv = psum[e]
        if sv < tau - window or sv > tau + window:
            continue
        x = px[e]
        y = py[e]
        if mark[x] != stamp or mark[y] != stamp:
            continue
        a = pos[x]
        b = pos[y]
        if a <= lo_pos or b <= lo_pos:
            continue
        if a > b:
            a, b = b, a
        if abs(partial + cv[a] + cv[b] - target_total) <= slack:
            _record(sols, nsol, idx, t, a, b)
            nsol += 1
            if nsol >= 2:
                return nsol, work
    if kbuilt == K:
        return nsol, work
    # permutations discovered after the table was built
    for a in range(lo_pos + 1, C):
        if ck[a] < kbuilt:
            continue
        want = tau - cv[a]
        lo = lo_pos + 1
        hi = C
        while lo < hi:
            mid = (lo + hi) // 2
            if cv[mid] < want - window:
                lo = mid + 1
            else:
                hi = mid
        bpos = lo
        while bpos < C and cv[bpos] <= want + window:
            work += 1
            if bpos != a and (ck[bpos] < kbuilt or bpos > a):
                x, y = (a, bpos) if a < bpos else (bpos, a)
                if abs(partial + cv[x] + cv[y] - target_total) <= slack:
                    _record(sols, nsol, idx, t, x, y)
                    nsol += 1
                    if nsol >= 2:
                        return nsol, work
            bpos += 1
    return nsol, work


@njit(cache=True)
def _four_sum(q, partial, lo_pos, C, cv, slack, sols, nsol, idx, t, budget):
    """Quadruples i < j < k < l of positions > lo_pos completing the sum.

    Pairs (i, j) go into a small hash keyed by sum bucket just before k = j + 1
    is reached, so each quadruple is met once, at its (k, l) lookup.
    """
    tau = q - partial
    first = lo_pos + 1
    nr = C - first
    if nr < 4:
        return nsol, 0
    cap = nr * (nr - 1) // 2
    hbits = 6
    while (1 << hbits) < 2 * cap:
        hbits += 1
    shift = np.uint64(64 - hbits)
    head = np.full(1 << hbits, -1, np.int64)
    esum = np.empty(cap)
    ekey = np.empty(cap, np.int64)
    ei = np.empty(cap, np.int64)
    ej = np.empty(cap, np.int64)
    enext = np.empty(cap, np.int64)
    win = slack + 1e-15 * abs(q)
    width = max(1e-9, 4.0 * win)
    smin = cv[first] + cv[first + 1]
    floor_sum = tau - cv[C - 1] - cv[C - 2] - win
    n = 0
    work = 0
    for k in range(first + 2, C - 1):
        j = k - 1
        cap_sum = tau - cv[k] - cv[k + 1] + win
        for i in range(first, j):
            sv = cv[i] + cv[j]
            work += 1
            if sv > cap_sum:
                break
            if sv < floor_sum:
                continue
            key = int(sv / width)
            h = (np.uint64(key) * _GOLDEN) >> shift
            esum[n] = sv
            ekey[n] = key
            ei[n] = i
            ej[n] = j
            enext[n] = head[h]
            head[h] = n
            n += 1
        if smin + cv[k] + cv[k + 1] > tau + win:
            break
        if n == 0:
            continue
        for l in range(k + 1, C):
            tt = tau - cv[k] - cv[l]
            if tt < smin - win:
                break
            work += 1
            k1 = int((tt - win) / width)
            k2 = int((tt + win) / width)
            for key in range(k1, k2 + 1):
                e = head[(np.uint64(key) * _GOLDEN) >> shift]
                while e >= 0:
                    if ekey[e] == key and abs(esum[e] - tt) <= win:
                        if abs(partial + esum[e] + cv[k] + cv[l] - q) <= slack:
                            for u in range(t):
                                sols[nsol, u] = idx[u]
                            sols[nsol, t] = ei[e]
                            sols[nsol, t + 1] = ej[e]
                            sols[nsol, t + 2] = k
                            sols[nsol, t + 3] = l
                            nsol += 1
                            if nsol >= 2:
                                return nsol, work
                    e = enext[e]
        if work > budget:
            return nsol, work
    return nsol, work


@njit(cache=True)
def _search(s, q, slack, C, cv, ck, pre, pos, mark, stamp, use_table,
            psum, px, py, pstart, plo, pscale, pnb, occ, kbuilt, K, sols, idx, budget):
    """Subsets of exactly s candidates summing to q: returns 0, 1, 2 (= at
    least two) or -1 when the work budget runs out."""
    # prefix-sum differences carry rounding error; prune with a wider margin
    guard = slack + _prefix_error(C, pre[C])
    if s == 1:
        lo = 0
        hi = C
        while lo < hi:
            mid = (lo + hi) // 2
            if cv[mid] < q - slack:
                lo = mid + 1
            else:
                hi = mid
        nsol = 0
        while lo < C and cv[lo] <= q + slack:
            sols[nsol, 0] = lo
            nsol += 1
            if nsol >= 2:
                break
            lo += 1
        return nsol
    tail = 2 if s < 4 else 4
    t = s - tail
    nsol = 0
    work = 0
    if s == 2:
        nsol, w = _final_pairs(q, 0.0, -1, C, cv, ck, pos, mark, stamp, slack, use_table and C > 48,
                               psum, px, py, pstart, plo, pscale, pnb, occ, kbuilt, K, sols, nsol, idx, 0)
        return nsol
    if s == 4:
        nsol, w = _four_sum(q, 0.0, -1, C, cv, slack, sols, nsol, idx, 0, budget)
        return -1 if w > budget and nsol < 2 else nsol
    partial = np.zeros(t + 1)
    depth = 0
    idx[0] = -1
    while depth >= 0:
        idx[depth] += 1
        cur = idx[depth]
        remaining = s - depth - 1
        if cur + remaining >= C:
            depth -= 1
            continue
        base = partial[depth - 1] if depth > 0 else 0.0
        val = base + cv[cur]
        # cheapest completion uses the next values in ascending order
        if val + (pre[cur + 1 + remaining] - pre[cur + 1]) > q + guard:
            depth -= 1
            continue
        if val + (pre[C] - pre[C - remaining]) < q - guard:
            continue
        partial[depth] = val
        if depth == t - 1:
            if tail == 2:
                nsol, w = _final_pairs(q, val, cur, C, cv, ck, pos, mark, stamp, slack,
                                       use_table and C - cur > 48, psum, px, py, pstart, plo,
                                       pscale, pnb, occ, kbuilt, K, sols, nsol, idx, t)
            else:
                nsol, w = _four_sum(q, val, cur, C, cv, slack, sols, nsol, idx, t, budget - work)
            work += w + 1
            if nsol >= 2:
                return nsol
            if work > budget:
                return -1
        else:
            depth += 1
            idx[depth] = cur
    return nsol


@njit(cache=True)
def _decode(D, rows, cols, vals, abs_tol, rel_tol, kcap, budget, table_min, max_exhausted, mass_cap):
    L = vals.shape[0]
    W = kcap // 64 + 1
    ctz_table = _DEBRUIJN_TABLE
    open_c = np.zeros((D, W), np.uint64)
    open_r = np.zeros((D, W), np.uint64)
    edge = np.full((kcap, D), -1, np.int32)
    p = np.zeros(kcap)
    K = 0
    p_sorted = True
    excl = np.zeros(L, np.int32)
    excl_epoch = np.zeros(L, np.int64)
    epoch = 0
    cv = np.empty(kcap)
    ck = np.empty(kcap, np.int64)
    pre = np.zeros(kcap + 1)
    pos = np.zeros(kcap, np.int64)
    mark = np.zeros(kcap, np.int64)
    stamp = 0
    sols = np.zeros((2, MAX_LEVEL + 2), np.int64)
    idx = np.zeros(MAX_LEVEL + 2, np.int64)
    psum = np.zeros(1)
    px = np.zeros(1, np.int32)
    py = np.zeros(1, np.int32)
    pstart = np.zeros(2, np.int64)
    plo = 0.0
    pscale = 0.0
    pnb = 1
    occ = np.zeros(1, np.uint64)
    kbuilt = 0
    have_table = False
    exhausted = 0
    builds = 0
    found_mass = 0.0
    pending = np.argsort(vals, kind="mergesort")
    npend = L
    level = 3
    while npend > 0:
        progress = False
        keep = 0
        for u in range(npend):
            c = pending[u]
            i = rows[c]
            j = cols[c]
            q = vals[c]
            slack = max(abs_tol, rel_tol * q)
            start = excl[c] + 1 if excl_epoch[c] == epoch else 1
            if start > level:
                pending[keep] = c
                keep += 1
                continue
            stamp += 1
            C = 0
            for w in range(W):
                x = open_c[j, w] & open_r[i, w]
                while x:
                    b = _ctz(x, ctz_table)
                    k = w * 64 + b
                    ck[C] = k
                    cv[C] = p[k]
                    C += 1
                    x &= x - np.uint64(1)
            if not p_sorted and C > 1:
                order = np.argsort(cv[:C])
                tv = cv[:C][order].copy()
                tk = ck[:C][order].copy()
                cv[:C] = tv
                ck[:C] = tk
            for a in range(C):
                pre[a + 1] = pre[a] + cv[a]
                mark[ck[a]] = stamp
                pos[ck[a]] = a
            outcome = _NEW
            guard = slack + _prefix_error(C, pre[C])
            for s in range(1, C + 1):
                if pre[s] > q + guard:
                    break
                if pre[C] - pre[C - s] < q - guard or s < start:
                    continue
                if s > level or s > MAX_LEVEL:
                    outcome = _WAIT
                    break
                use_table = False
                if s >= 2 and C > table_min:
                    if (not have_table) or K - kbuilt > max(16, kbuilt // 50):
                        builds += 1
                        if builds > MAX_TABLE_BUILDS or K > MAX_TABLE_VALUES:
                            return EXHAUSTED, K, p, edge, npend
                        psum, px, py, pstart, plo, pscale, pnb, occ = _build_pairs(p, K)
                        kbuilt = K
                        have_table = True
                    use_table = True
                nsol = _search(s, q, slack, C, cv, ck, pre, pos, mark, stamp, use_table,
                               psum, px, py, pstart, plo, pscale, pnb, occ, kbuilt, K, sols, idx, budget)
                if nsol == 1:
                    for u2 in range(s):
                        k = ck[sols[0, u2]]
                        edge[k, j] = i
                        open_c[j, k // 64] &= ~(np.uint64(1) << np.uint64(k % 64))
                        open_r[i, k // 64] &= ~(np.uint64(1) << np.uint64(k % 64))
                    outcome = _DECODED
                    break
                if nsol != 0:
                    if nsol < 0:
                        exhausted += 1
                        if exhausted > max_exhausted:
                            return EXHAUSTED, K, p, edge, npend
                    outcome = _WAIT
                    break
                excl[c] = s
                excl_epoch[c] = epoch
            if outcome == _DECODED:
                progress = True
            elif outcome == _NEW:
                if K == kcap:
                    return NEED_CAPACITY, K, p, edge, npend
                # each value sits in exactly D cells, so values sum to total / D
                found_mass += q
                if found_mass > mass_cap:
                    return OVERFULL, K, p, edge, npend
                k = K
                K += 1
                if K > 1 and q < p[K - 2]:
                    p_sorted = False
                p[k] = q
                edge[k, j] = i
                bit = np.uint64(1) << np.uint64(k % 64)
                for jj in range(D):
                    if jj != j:
                        open_c[jj, k // 64] |= bit
                    if jj != i:
                        open_r[jj, k // 64] |= bit
                epoch += 1
                progress = True
            else:
                pending[keep] = c
                keep += 1
        npend = keep
        if not progress:
            if level >= MAX_LEVEL:
                return UNRESOLVED, K, p, edge, npend
            level += 1
    return OK, K, p, edge, 0


def decode_cells(M: MarginalMatrix, tol: Tolerance, budget: int = 2_000_000, table_min: int = 48,
                 max_exhausted: int | None = None):
    """Run the compiled decoder; returns (status, values, (K, D) row-of-column array, cells left).

    ``budget`` bounds the work of one subset search; after ``max_exhausted``
    searches run out of it the decoder gives up (EXHAUSTED).
    """
    d = M.d
    rows = np.ascontiguousarray(M.rows, dtype=np.int64)
    cols = np.ascontiguousarray(M.cols, dtype=np.int64)
    vals = np.ascontiguousarray(M.values, dtype=np.float64)
    if max_exhausted is None:
        max_exhausted = max(100, len(vals) // 1000)
    mass = math.fsum(vals.tolist()) / d
    mass_cap = mass + tol.abs_tol + (tol.rel_tol + 1e-12) * mass
    kcap = max(64, 4 * len(vals) // max(d, 1) + 64)
    while True:
        status, K, p, edge, left = _decode(d, rows, cols, vals, tol.abs_tol, tol.rel_tol, kcap, budget,
                                           table_min, max_exhausted, mass_cap)
        if status != NEED_CAPACITY:
            return status, p[:K].copy(), edge[:K].copy(), left
        kcap *= 2
        if kcap * d > MAX_EDGE_CELLS:
            return NEED_CAPACITY, p[:K].copy(), edge[:K].copy(), left


def recover_structured(M: MarginalMatrix, tol: Tolerance) -> RecoveryResult:
    if M.mode != FLOAT:
        return _aborted("input", "the structured engine decodes float matrices only", "structured")
    if len(M) == 0:
        return _finish(M, [], tol, "structured")
    status, values, edge, left = decode_cells(M, tol)
    if status == UNRESOLVED:
        return _aborted("decode", f"{left} cells could not be decoded unambiguously", "structured")
    if status == EXHAUSTED:
        return _aborted("decode", f"search budget exhausted with {len(values)} values found; a tighter "
                        "tolerance may separate the sums", "structured")
    if status == OVERFULL:
        return _aborted("decode", f"discovered values exceed the total mass after {len(values)} values; "
                        "some cell was matched by a spurious subset sum", "structured")
    if status == NEED_CAPACITY:
        return _aborted("decode", f"more than {len(values)} distinct values; input is not sparse enough "
                        "for this engine at this tolerance", "structured")
    missing = np.flatnonzero((edge < 0).any(axis=1))
    if len(missing):
        return _aborted("decode", f"{len(missing)} recovered values have unassigned columns", "structured")
    terms = []
    d = M.d
    for k, (value, row_of_col) in enumerate(zip(values.tolist(), edge)):
        try:
            perm = reconstruct_permutation(np.column_stack([row_of_col, np.arange(d)]), M.shape)
        except ReconstructionError as exc:
            return _aborted("reconstruct", f"value {value} (k={k + 1}): {exc}", "structured")
        terms.append(RecoveredTerm(value, (), perm))
    return _finish(M, terms, tol, "structured")
