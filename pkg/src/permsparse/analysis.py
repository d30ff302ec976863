"""Closed-form threshold calculators (natural logarithms throughout)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .symgroup import LambdaShape

THM3, THM4, THM5, THM6 = "Thm3", "Thm4", "Thm5", "Thm6"


def _neg_xlogx(a: Fraction) -> float:
    # log1p keeps precision when a is close to 1
    log_a = math.log1p(float(a - 1)) if a >= Fraction(1, 2) else math.log(float(a))
    return -float(a) * log_a


@dataclass(frozen=True)
class AlphaProfile:
    alpha: tuple[Fraction, ...]
    H: float
    H_tail: float


def alpha_profile(shape: LambdaShape) -> AlphaProfile:
    alpha = tuple(Fraction(p, shape.n) for p in shape.parts)
    terms = [_neg_xlogx(a) for a in alpha]
    return AlphaProfile(alpha, math.fsum(terms), math.fsum(terms[1:]))


def entropies(shape: LambdaShape) -> tuple[float, float]:
    """H(alpha) and H'(alpha), the entropy without the first part."""
    prof = alpha_profile(shape)
    return prof.H, prof.H_tail


def m_floor(shape: LambdaShape) -> int:
    """floor(1 / (1 - alpha_1)), computed in integers."""
    return shape.n // (shape.n - shape.parts[0])


def gamma_exponent(shape: LambdaShape, C_prime: float = 1.0) -> tuple[float, int]:
    if C_prime <= 0:
        raise ValueError("C' must be positive")
    H, Ht = entropies(shape)
    M = m_floor(shape)
    return M / (M + 1) * (1 - C_prime * (H - Ht) / H), M


@dataclass
class Lemma1Table:
    family: str
    rows: list[tuple[LambdaShape, float]] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [r for _, r in self.rows]

    @property
    def monotone(self) -> bool:
        """Strictly increasing and below 1 along the supplied points."""
        rs = self.ratios
        return all(a < b for a, b in zip(rs, rs[1:])) and all(r < 1 for r in rs)


def lemma1_check(family: str, points: Iterable) -> Lemma1Table:
    """H'/H along a family of shapes.

    ``points`` are shapes or, for the named families, sizes n:
    "alpha1-to-1" maps n to (n-1, 1); "alpha1-to-0" maps n to (1, ..., 1).
    """
    builders = {
        "alpha1-to-1": lambda n: LambdaShape((n - 1, 1)),
        "alpha1-to-0": lambda n: LambdaShape((1,) * n),
        "interior": None,
    }
    if family not in builders:
        raise ValueError(f"unknown family {family!r}")
    table = Lemma1Table(family)
    for pt in points:
        if isinstance(pt, LambdaShape):
            shape = pt
        elif builders[family] is None:
            raise ValueError("interior points must be given as shapes")
        else:
            shape = builders[family](int(pt))
        H, Ht = entropies(shape)
        table.rows.append((shape, Ht / H))
    return table


def converse_bound(shape: LambdaShape, T: float, constant: float = 3.0) -> float:
    """constant * x * ln(max(x, T)) with x = D^2 / (n ln n)."""
    n, d = shape.n, shape.d
    if d < n:
        raise ValueError("the bound needs D_lambda >= n")
    if T < 1:
        raise ValueError("T must be at least 1")
    if n < 2:
        raise ValueError("n must be at least 2")
    x = float(d) ** 2 / (n * math.log(n))
    return constant * x * math.log(max(x, T))


@dataclass(frozen=True)
class ThresholdEstimate:
    case: str
    K: int


def achievable_threshold(shape: LambdaShape, epsilon: float, m_cap: int = 4, C: float = 1.0, C_prime: float = 1.0) -> ThresholdEstimate:
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n, parts = shape.n, shape.parts
    c = 1 - epsilon
    if parts == (n - 1, 1):
        return ThresholdEstimate(THM3, math.floor(c * n * math.log(n)))
    if len(parts) == 2 and 2 <= parts[1] <= m_cap:
        m = parts[1]
        return ThresholdEstimate(THM4, math.floor(c / math.factorial(m) * n**m * math.log(n)))
    d = float(shape.d)
    if parts[0] >= n - n ** (2 / 9):
        return ThresholdEstimate(THM5, max(0, math.floor(c * d * math.log(math.log(d)))))
    gamma, _ = gamma_exponent(shape, C_prime)
    return ThresholdEstimate(THM6, math.floor(C * d**gamma))


@dataclass
class ThresholdReport:
    shape: LambdaShape
    case: str
    K_achievable: int
    gamma: float
    M_floor: int
    K_converse: float
    T: float
    constant: float
    note: str = ""

    def to_json(self) -> dict:
        return {
            "shape": list(self.shape.parts),
            "n": self.shape.n,
            "D_lambda": self.shape.d,
            "case": self.case,
            "K_achievable": self.K_achievable,
            "gamma": self.gamma,
            "M_floor": self.M_floor,
            "K_converse": self.K_converse,
            "T": self.T,
            "converse_constant": self.constant,
            "note": self.note,
        }


def threshold_report(shape: LambdaShape, epsilon: float, T: float, constant: float = 3.0,
                     C: float = 1.0, C_prime: float = 1.0, m_cap: int = 4) -> ThresholdReport:
    est = achievable_threshold(shape, epsilon, m_cap, C, C_prime)
    gamma, M = gamma_exponent(shape, C_prime)
    note = "exponent-scale estimate: order of growth only" if est.case == THM6 else ""
    return ThresholdReport(shape, est.case, est.K, gamma, M, converse_bound(shape, T, constant), T, constant, note)
