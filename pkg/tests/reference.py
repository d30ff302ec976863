"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package's ranking or matching code: partitions are
enumerated as sorted distinct rearrangements of a block word, and matrices are
built densely from the set-partition action.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def words(parts):
    base = [b for b, c in enumerate(parts) for _ in range(c)]
    return sorted(set(itertools.permutations(base)))


def as_blocks(word, r):
    return tuple(frozenset(x + 1 for x, b in enumerate(word) if b == k) for k in range(r))


def act_blocks(images, blocks):
    """images: 1-based one-line form."""
    return tuple(frozenset(images[x - 1] for x in block) for block in blocks)


def dense_matrix(images, parts):
    """M(sigma)[i][j] = 1 iff sigma(t_j) = t_i."""
    ws = words(parts)
    blocks = [as_blocks(w, len(parts)) for w in ws]
    index = {b: i for i, b in enumerate(blocks)}
    d = len(ws)
    out = [[0] * d for _ in range(d)]
    for j, t in enumerate(blocks):
        out[index[act_blocks(images, t)]][j] = 1
    return out


def dense_marginal(entries, parts):
    """entries: iterable of (images, value)."""
    d = len(words(parts))
    out = [[Fraction(0)] * d for _ in range(d)]
    for images, value in entries:
        m = dense_matrix(images, parts)
        for i in range(d):
            for j in range(d):
                if m[i][j]:
                    out[i][j] += value
    return out


def nontrivial_cycles(images):
    seen = set()
    count = 0
    for s in range(1, len(images) + 1):
        if s in seen:
            continue
        length = 0
        x = s
        while x not in seen:
            seen.add(x)
            x = images[x - 1]
            length += 1
        count += length > 1
    return count


def cycle_count(mapping):
    seen = set()
    count = 0
    for s in range(len(mapping)):
        if s not in seen:
            count += 1
            x = s
            while x not in seen:
                seen.add(x)
                x = mapping[x]
    return count


def witness_columns(entries, parts):
    """Per support permutation, its first column j whose cell is not shared."""
    mats = [dense_matrix(images, parts) for images in entries]
    d = len(mats[0])
    out = []
    for k, m in enumerate(mats):
        hit = None
        for j in range(d):
            i = next(r for r in range(d) if m[r][j])
            if not any(other[i][j] for o, other in enumerate(mats) if o != k):
                hit = (i, j)
                break
        out.append(hit)
    return out


def has_relation(values, bound):
    """Exhaustive search for c in {-bound..bound}^K, c != 0, with c.p = 0."""
    for c in itertools.product(range(-bound, bound + 1), repeat=len(values)):
        if any(c) and sum(ci * v for ci, v in zip(c, values)) == 0:
            return True
    return False


def fig1_decoder(qs):
    """Ascending scan: q is a subset sum of found values or becomes a new one.
    Returns (values, member sets) or None when some q has two decompositions."""
    p, members = [], []
    for ell, q in enumerate(qs):
        hits = [T for s in range(1, len(p) + 1) for T in itertools.combinations(range(len(p)), s)
                if sum(p[k] for k in T) == q]
        if len(hits) > 1:
            return None
        if hits:
            for k in hits[0]:
                members[k].add(ell)
        else:
            p.append(q)
            members.append({ell})
    return p, members
