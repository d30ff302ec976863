"""Condition checks, the sparsest-fit core and the full recovery pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .marginals import (
    DEFAULT_TOL,
    EXACT,
    FLOAT,
    MarginalMatrix,
    SparseSupportFunction,
    Tolerance,
    fourier_coefficient,
    to_scalar,
)
from .symgroup import LambdaShape, Permutation, check_cap, partition_table

EXACT_LI_CAP = 12
_MITM_BUDGET = 5_000_000
_DP_WORK_BUDGET = 300_000_000
# the Fig. 1 core is exponential in the number of discovered values; float
# inputs with more cells than this go to the structured engine under "auto"
CORE_CELL_LIMIT = 5_000


@dataclass(frozen=True)
class ValueGroup:
    value: object
    cells: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AbortCertificate:
    stage: str
    detail: str
    value_index: int | None = None

    def to_json(self) -> dict:
        out = {"stage": self.stage, "detail": self.detail}
        if self.value_index is not None:
            out["value_index"] = self.value_index + 1
        return out


class SparsestFitAbort(Exception):
    def __init__(self, certificate: AbortCertificate):
        super().__init__(f"{certificate.stage}: {certificate.detail}")
        self.certificate = certificate


class ReconstructionError(ValueError):
    """Membership edges do not describe a permutation."""


@dataclass(frozen=True)
class LIVerdict:
    status: str  # verified | refuted | skipped
    coefficients: tuple[int, ...] | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        out: dict = {"status": self.status}
        if self.coefficients is not None:
            out["coefficients"] = list(self.coefficients)
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass
class Condition1Report:
    unique_witness: list[tuple[int, int] | None]
    linear_independence: LIVerdict

    @property
    def witnesses_ok(self) -> bool:
        return all(w is not None for w in self.unique_witness)

    @property
    def holds(self) -> bool:
        return self.witnesses_ok and self.linear_independence.status == "verified"


@dataclass
class RecoveredTerm:
    value: object
    groups: tuple[int, ...]
    perm: Permutation


@dataclass
class RecoveryResult:
    status: str  # recovered | aborted
    terms: list[RecoveredTerm] = field(default_factory=list)
    function: SparseSupportFunction | None = None
    certificate: AbortCertificate | None = None
    engine: str = "core"

    @property
    def recovered(self) -> bool:
        return self.status == "recovered"


# --- Condition 1 ----------------------------------------------------------------


def _cell_counts(ids: np.ndarray, d: int) -> np.ndarray:
    """Multiplicity of each entry of ids among all entries."""
    if d * d <= 50_000_000:
        return np.bincount(ids.ravel(), minlength=d * d)[ids]
    _, inverse, counts = np.unique(ids.ravel(), return_inverse=True, return_counts=True)
    return counts[inverse].reshape(ids.shape)


def unique_witness_mask(perms: np.ndarray, shape: LambdaShape) -> tuple[np.ndarray, np.ndarray]:
    """(K, D) mask of cells covered by no other matching, and the (K, D) maps."""
    d = shape.d
    maps = partition_table(shape).induced_maps(perms)
    ids = maps * d + np.arange(d, dtype=np.int64)
    return _cell_counts(ids, d) == 1, maps


def check_unique_witness(f: SparseSupportFunction, shape: LambdaShape, cap: int | None = None) -> list[tuple[int, int] | None]:
    """Per support permutation, its first witness cell (row, col) in column order."""
    if f.n != shape.n:
        raise ValueError(f"dimension mismatch: function on {f.n}, shape of {shape.n}")
    check_cap(shape, cap)
    if f.K == 0:
        return []
    mask, maps = unique_witness_mask(f.perms_array(), shape)
    first = mask.argmax(axis=1)
    out: list[tuple[int, int] | None] = []
    for k, j in enumerate(first.tolist()):
        out.append((int(maps[k, j]), j) if mask[k, j] else None)
    return out


def _scaled_integers(values: Sequence[Fraction]) -> list[int]:
    den = 1
    for v in values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    return [int(v * den) for v in values]


def _mitm_relation(ints: list[int], bound: int) -> tuple[int, ...] | None:
    half = len(ints) // 2
    big = bound * sum(abs(a) for a in ints) >= 2**62
    dtype = object if big else np.int64
    coeffs = np.arange(-bound, bound + 1, dtype=np.int64).astype(dtype)

    def sums(part):
        out = np.zeros(1, dtype=dtype)
        for a in part:
            out = (out[:, None] + coeffs * a).ravel()
        return out

    def decode(index, size):
        digits = []
        for _ in range(size):
            index, rem = divmod(int(index), 2 * bound + 1)
            digits.append(rem - bound)
        return tuple(reversed(digits))

    left, right = sums(ints[:half]), sums(ints[half:])
    nl, nr = half, len(ints) - half
    zero_l = np.flatnonzero(left == 0)
    zero_r = np.flatnonzero(right == 0)
    zero_vec_l = (0,) * nl
    zero_vec_r = (0,) * nr
    for i in zero_l:
        c = decode(i, nl)
        if c != zero_vec_l:
            return c + zero_vec_r
    for i in zero_r:
        c = decode(i, nr)
        if c != zero_vec_r:
            return zero_vec_l + c
    order = np.argsort(left, kind="stable")
    sorted_left = left[order]
    neg = -right
    pos = np.searchsorted(sorted_left, neg)
    pos = np.minimum(pos, len(sorted_left) - 1)
    hit = np.flatnonzero((sorted_left[pos] == neg) & (neg != 0))
    if len(hit):
        b = int(hit[0])
        a = int(order[pos[b]])
        return decode(a, nl) + decode(b, nr)
    return None


def _dp_relation(ints: list[int], bound: int) -> tuple[int, ...] | None:
    total = bound * sum(ints)
    span = 2 * total + 1
    history = []
    reach = np.zeros(span, dtype=bool)  # sums hit by some non-zero coefficient prefix
    for a in ints:
        new = np.zeros(span, dtype=bool)
        for c in range(-bound, bound + 1):
            shift = c * a
            if shift >= 0:
                new[shift:] |= reach[: span - shift]
            else:
                new[:shift] |= reach[-shift:]
            if c:
                new[total + shift] = True
        history.append(reach)
        reach = new
    if not reach[total]:
        return None
    coeffs = [0] * len(ints)
    s = 0
    for k in range(len(ints) - 1, -1, -1):
        a = ints[k]
        for c in range(-bound, bound + 1):
            rest = s - c * a
            if c and rest == 0:
                coeffs[k] = c
                return tuple(coeffs)
            if -total <= rest <= total and history[k][total + rest]:
                coeffs[k] = c
                s = rest
                break
    raise AssertionError("backtrack lost the relation")


def check_linear_independence(values: Sequence, K: int | None = None, exact_li_cap: int = EXACT_LI_CAP) -> LIVerdict:
    """Search for integers c in {-K..K}, not all zero, with sum c_k p_k = 0."""
    values = list(values)
    K = len(values) if K is None else K
    if not values:
        return LIVerdict("verified")
    if any(isinstance(v, float) for v in values):
        return LIVerdict("skipped", reason="float values: no exact relation search")
    fracs = [Fraction(v) for v in values]
    if any(v <= 0 for v in fracs):
        raise ValueError("values must be positive")
    if len(fracs) > exact_li_cap:
        return LIVerdict("skipped", reason=f"{len(fracs)} values exceed the exact cap {exact_li_cap}")
    if K < 1:
        return LIVerdict("verified")
    ints = _scaled_integers(fracs)
    if (2 * K + 1) ** math.ceil(len(ints) / 2) <= _MITM_BUDGET:
        relation = _mitm_relation(ints, K)
    elif len(ints) * (2 * K + 1) * (2 * K * sum(ints) + 1) <= _DP_WORK_BUDGET:
        relation = _dp_relation(ints, K)
    else:
        return LIVerdict("skipped", reason="coefficient search exceeds the work budget")
    if relation is None:
        return LIVerdict("verified")
    return LIVerdict("refuted", coefficients=relation)


def check_condition1(f: SparseSupportFunction, shape: LambdaShape, exact_li_cap: int = EXACT_LI_CAP, cap: int | None = None) -> Condition1Report:
    return Condition1Report(
        check_unique_witness(f, shape, cap),
        check_linear_independence(f.values, f.K, exact_li_cap),
    )


# --- sparsest fit ---------------------------------------------------------------


def build_value_groups(M: MarginalMatrix, tol: Tolerance = DEFAULT_TOL) -> list[ValueGroup]:
    """Cells grouped by value (exact equality, or tolerance chains anchored at
    each group's smallest value in float mode), ascending."""
    if len(M) == 0:
        return []
    vals = M.value_list()
    order = sorted(range(len(vals)), key=lambda c: (vals[c], M.rows[c], M.cols[c]))
    groups: list[ValueGroup] = []
    anchor = None
    cells: list[tuple[int, int]] = []
    for c in order:
        v = vals[c]
        same = anchor is not None and (v == anchor if M.mode == EXACT else tol.close(v, anchor))
        if not same:
            if cells:
                groups.append(ValueGroup(anchor, tuple(sorted(cells))))
            anchor, cells = v, []
        cells.append((int(M.rows[c]), int(M.cols[c])))
    groups.append(ValueGroup(anchor, tuple(sorted(cells))))
    return groups


def _subset_matches(p: list, q, mode: str, tol: Tolerance, limit: int = 2) -> list[tuple[int, ...]]:
    """Subsets T of discovered values with sum(p[T]) == q; stops after ``limit``."""
    order = sorted(range(len(p)), key=lambda k: p[k], reverse=True)
    vals = [p[k] for k in order]
    suffix = [0] * (len(vals) + 1)
    for i in range(len(vals) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + vals[i]
    slack = 0 if mode == EXACT else max(tol.abs_tol, tol.rel_tol * abs(q))
    found: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def dfs(i: int, remaining) -> None:
        if len(found) >= limit:
            return
        if chosen and abs(remaining) <= slack:
            found.append(tuple(sorted(order[c] for c in chosen)))
        if i == len(vals) or remaining - suffix[i] > slack:
            return
        for c in range(i, len(vals)):
            if vals[c] > remaining + slack:
                continue
            if remaining - suffix[c] > slack:
                break
            chosen.append(c)
            dfs(c + 1, remaining - vals[c])
            chosen.pop()
            if len(found) >= limit:
                return

    dfs(0, q)
    return found


@dataclass
class CoreResult:
    values: list
    members: list[list[int]]

    @property
    def K(self) -> int:
        return len(self.values)


def sparsest_fit_core(groups: Sequence, mode: str = EXACT, tol: Tolerance = DEFAULT_TOL) -> CoreResult:
    """Scan q_1 < q_2 < ...; each q is either a unique subset sum of the values
    found so far (its index joins every member's set) or a new value."""
    qs = [g.value if isinstance(g, ValueGroup) else to_scalar(g, mode) for g in groups]
    for a, b in zip(qs, qs[1:]):
        if not a < b:
            raise ValueError("group values must be strictly ascending")
    if qs and not qs[0] > 0:
        raise ValueError("group values must be positive")
    p: list = []
    members: list[list[int]] = []
    for ell, q in enumerate(qs):
        matches = _subset_matches(p, q, mode, tol)
        if len(matches) > 1:
            what = "tolerance admits" if mode == FLOAT else "distinct subsets give"
            raise SparsestFitAbort(AbortCertificate(
                "core",
                f"{what} two decompositions of q={q}: {[list(m) for m in matches]} (distinct subset sums violated)",
                ell,
            ))
        if matches:
            for k in matches[0]:
                members[k].append(ell)
        else:
            p.append(q)
            members.append([ell])
    return CoreResult(p, members)


# --- reconstruction ---------------------------------------------------------------


_SIG_WEIGHTS: dict[int, np.ndarray] = {}


def _signature_weights(d: int) -> np.ndarray:
    if d not in _SIG_WEIGHTS:
        rng = np.random.default_rng(0x5EED + d)
        _SIG_WEIGHTS[d] = rng.integers(1, 2**63, size=d, dtype=np.uint64) | np.uint64(1)
    return _SIG_WEIGHTS[d]


def reconstruct_permutation(edges: Sequence[tuple[int, int]], shape: LambdaShape) -> Permutation:
    """Invert the matching encoding: sigma(x) = y iff, for every edge (i, j),
    y sits in t_i in the same block as x in t_j."""
    d = shape.d
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) != d or sorted(edges[:, 1].tolist()) != list(range(d)):
        raise ReconstructionError("need exactly one edge per column")
    if edges[:, 0].min() < 0 or edges[:, 0].max() >= d:
        raise ReconstructionError("row index out of range")
    table = partition_table(shape)
    weights = _signature_weights(d)
    rows, cols = edges[:, 0], edges[:, 1]
    src = np.zeros(shape.n, dtype=np.uint64)
    dst = np.zeros(shape.n, dtype=np.uint64)
    # a word's signature entry for element x is its block label; block 0 adds nothing
    np.add.at(src, table.E[cols].ravel(), (weights[:, None] * table.L[cols].astype(np.uint64)).ravel())
    np.add.at(dst, table.E[rows].ravel(), (weights[:, None] * table.L[rows].astype(np.uint64)).ravel())
    order = np.argsort(dst, kind="stable")
    sorted_dst = dst[order]
    if np.any(sorted_dst[1:] == sorted_dst[:-1]):
        raise ReconstructionError("an element has several candidate images")
    pos = np.minimum(np.searchsorted(sorted_dst, src), shape.n - 1)
    if np.any(sorted_dst[pos] != src):
        raise ReconstructionError("an element has no candidate image")
    image = order[pos]
    if len(set(image.tolist())) != shape.n:
        raise ReconstructionError("candidate images do not form a bijection")
    sigma = Permutation.from_array(image)
    induced = table.induced_maps(image[None, :])[0]
    if not np.array_equal(induced[cols], rows):
        raise ReconstructionError("reconstructed permutation disagrees with an edge")
    return sigma


# --- pipeline ---------------------------------------------------------------------


def _aborted(stage: str, detail: str, engine: str, value_index: int | None = None) -> RecoveryResult:
    return RecoveryResult("aborted", certificate=AbortCertificate(stage, detail, value_index), engine=engine)


def _finish(M: MarginalMatrix, terms: list[RecoveredTerm], tol: Tolerance, engine: str) -> RecoveryResult:
    """Self-check the candidate against M before returning it."""
    g = SparseSupportFunction(M.n, [(t.perm, t.value) for t in terms], M.mode)
    if g.K != len(terms):
        return _aborted("verify", "two recovered values share one permutation", engine)
    ghat = fourier_coefficient(g, M.shape, cap=M.d)
    same = ghat == M if M.mode == EXACT else ghat.close_to(M, tol)
    if not same:
        return _aborted("verify", "marginal of the reconstruction differs from the input", engine)
    missing = [k for k, w in enumerate(check_unique_witness(g, M.shape, cap=M.d)) if w is None]
    if missing:
        return _aborted("witness", f"recovered permutations {missing} have no unique witness", engine)
    return RecoveryResult("recovered", terms, g, engine=engine)


def recover(M: MarginalMatrix, tol: Tolerance = DEFAULT_TOL, engine: str = "auto") -> RecoveryResult:
    """Recover f from f-hat(lambda), or return an abort certificate."""
    if engine == "auto":
        engine = "structured" if M.mode == FLOAT and len(M) > CORE_CELL_LIMIT else "core"
    if engine == "structured":
        from ._structured import recover_structured

        return recover_structured(M, tol)
    if engine != "core":
        raise ValueError(f"unknown engine {engine!r}")
    if len(M) == 0:
        return RecoveryResult("recovered", [], SparseSupportFunction(M.n, [], M.mode))
    groups = build_value_groups(M, tol)
    try:
        core = sparsest_fit_core(groups, M.mode, tol)
    except SparsestFitAbort as exc:
        return RecoveryResult("aborted", certificate=exc.certificate)
    terms = []
    for k, (value, members) in enumerate(zip(core.values, core.members)):
        edges = [cell for ell in members for cell in groups[ell].cells]
        try:
            perm = reconstruct_permutation(edges, M.shape)
        except ReconstructionError as exc:
            return _aborted("reconstruct", f"value {value} (k={k + 1}): {exc}", "core", members[0])
        terms.append(RecoveredTerm(value, tuple(members), perm))
    return _finish(M, terms, tol, "core")
