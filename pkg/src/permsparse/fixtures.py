"""Named small instances: the four-permutation counterexamples and the
disjoint-cycle pair at shape (n-1, 1)."""

from __future__ import annotations

from fractions import Fraction

from .marginals import EXACT, SparseSupportFunction
from .symgroup import LambdaShape, Permutation


def example_perms(n: int) -> tuple[Permutation, Permutation, Permutation, Permutation]:
    """(1 2), (3 4), (1 2)(3 4), id."""
    if n < 4:
        raise ValueError("the fixtures need n >= 4")
    return (
        Permutation.from_cycles(n, (1, 2)),
        Permutation.from_cycles(n, (3, 4)),
        Permutation.from_cycles(n, (1, 2), (3, 4)),
        Permutation.identity(n),
    )


def example1_case1(n: int = 4, p=(1, 2, 3, 4)) -> SparseSupportFunction:
    """Four-term f with a three-term alternative (needs p1 <= p2)."""
    return SparseSupportFunction(n, zip(example_perms(n), p), EXACT)


def example1_case1_alternative(n: int = 4, p=(1, 2, 3, 4)) -> SparseSupportFunction:
    p1, p2, p3, p4 = map(Fraction, p)
    _, s2, s3, s4 = example_perms(n)
    return SparseSupportFunction(n, [(s2, p2 - p1), (s3, p3 + p1), (s4, p4 + p1)], EXACT)


def example1_case2(n: int = 4, p=1) -> SparseSupportFunction:
    """Equal weights on (1 2) and (3 4): two sparsest solutions."""
    s1, s2, _, _ = example_perms(n)
    return SparseSupportFunction(n, [(s1, p), (s2, p)], EXACT)


def example1_case3(n: int = 4, p=(1, 2, 3)) -> SparseSupportFunction:
    """Three terms on linearly independent matchings, still not unique."""
    return SparseSupportFunction(n, zip(example_perms(n)[:3], p), EXACT)


def example1_case3_alternative(n: int = 4, p=(1, 2, 3)) -> SparseSupportFunction:
    p1, p2, p3 = map(Fraction, p)
    _, s2, s3, s4 = example_perms(n)
    return SparseSupportFunction(n, [(s2, p2 - p1), (s3, p3 + p1), (s4, p1)], EXACT)


def disjoint_cycle_pair(n: int = 4, p=(1, 2)) -> SparseSupportFunction:
    """(1 2) and (3 4): their matchings sum to those of (1 2)(3 4) and id."""
    s1, s2, _, _ = example_perms(n)
    return SparseSupportFunction(n, [(s1, p[0]), (s2, p[1])], EXACT)


BUILTINS = {
    "example1-case1": example1_case1,
    "example1-case2": example1_case2,
    "example1-case3": example1_case3,
    "disjoint-pair": disjoint_cycle_pair,
}


def default_shape(n: int) -> LambdaShape:
    return LambdaShape((n - 1, 1))
