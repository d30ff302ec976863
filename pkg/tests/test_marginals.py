from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permsparse.marginals import (
    EXACT,
    FLOAT,
    MarginalMatrix,
    SparseSupportFunction,
    Tolerance,
    example1_identity,
    format_scalar,
    fourier_coefficient,
    to_scalar,
    verify_marginal,
)
from permsparse.symgroup import LambdaShape, Permutation, unrank_partition

import reference

SHAPES4 = [(3, 1), (2, 2), (2, 1, 1)]


@st.composite
def functions(draw, n=4, max_k=5, mode=EXACT):
    k = draw(st.integers(0, max_k))
    entries = []
    for _ in range(k):
        images = draw(st.permutations(range(1, n + 1)))
        if mode == EXACT:
            value = Fraction(draw(st.integers(1, 50)), draw(st.integers(1, 6)))
        else:
            value = draw(st.floats(0.1, 10.0))
        entries.append((Permutation(images), value))
    return SparseSupportFunction(n, entries, mode)


def dense_of(M):
    return [[Fraction(v) for v in row] for row in M.dense()]


def test_hook_shape_cells_follow_sigma():
    n = 5
    shape = LambdaShape((n - 1, 1))
    rng = np.random.default_rng(0)
    entries = [(Permutation.from_array(rng.permutation(n)), Fraction(k + 1)) for k in range(3)]
    M = fourier_coefficient(SparseSupportFunction(n, entries), shape)
    single = {unrank_partition(shape, k).blocks()[1][0]: k for k in range(n)}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            want = sum((v for s, v in entries if s(j) == i), Fraction(0))
            assert M.cells.get((single[i], single[j]), Fraction(0)) == want


def test_empty_function_has_empty_marginal():
    M = fourier_coefficient(SparseSupportFunction(4, []), LambdaShape((3, 1)))
    assert len(M) == 0 and M.cells == {}


def test_four_permutation_marginal_against_dense_sum():
    p = [1, 2, 3, 4]
    perms = [(2, 1, 3, 4), (1, 2, 4, 3), (2, 1, 4, 3), (1, 2, 3, 4)]
    f = SparseSupportFunction(4, [(Permutation(s), v) for s, v in zip(perms, p)])
    for parts in SHAPES4:
        M = fourier_coefficient(f, LambdaShape(parts))
        assert dense_of(M) == reference.dense_marginal(zip(perms, map(Fraction, p)), parts)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        fourier_coefficient(SparseSupportFunction(4, []), LambdaShape((4, 1)))


def test_verify_marginal_accepts_fourier_output():
    f = SparseSupportFunction(5, [(Permutation([2, 3, 1, 5, 4]), "1.5"), (Permutation.identity(5), "2")])
    report = verify_marginal(fourier_coefficient(f, LambdaShape((3, 2))), expected_mass=f.mass())
    assert report.ok and report.mass_ok


def test_verify_marginal_flags_perturbed_cell():
    f = SparseSupportFunction(4, [(Permutation([2, 1, 4, 3]), 1), (Permutation.identity(4), 2)])
    M = fourier_coefficient(f, LambdaShape((3, 1)))
    cells = M.cells
    (i, j), v = next(iter(cells.items()))
    cells[(i, j)] = v + 1
    bad = MarginalMatrix.from_cells(M.shape, cells)
    report = verify_marginal(bad, expected_mass=3)
    assert not report.ok
    assert report.bad_rows == [i] and report.bad_cols == [j]


def test_verify_marginal_empty():
    empty = MarginalMatrix.from_cells(LambdaShape((3, 1)), {})
    assert verify_marginal(empty, expected_mass=0).ok


def test_verify_marginal_wrong_mass():
    f = SparseSupportFunction(4, [(Permutation.identity(4), 2)])
    report = verify_marginal(fourier_coefficient(f, LambdaShape((3, 1))), expected_mass=3)
    assert not report.ok


@pytest.mark.parametrize("n", [4, 6, 10])
def test_example1_identity_holds(n):
    lhs, rhs = example1_identity(n)
    assert lhs == rhs
    assert len(lhs) > 0


def test_example1_identity_breaks_with_other_permutation():
    n = 4
    shape = LambdaShape((3, 1))
    lhs, _ = example1_identity(n)
    other = SparseSupportFunction(n, [(Permutation.from_cycles(n, (1, 2), (3, 4)), 1),
                                      (Permutation.from_cycles(n, (1, 3)), 1)])
    assert fourier_coefficient(other, shape) != lhs


def test_example1_identity_needs_four_points():
    with pytest.raises(ValueError):
        example1_identity(3)


def test_duplicates_merge():
    s = Permutation([2, 1, 3])
    f = SparseSupportFunction(3, [(s, 1), (s, "0.5"), (Permutation.identity(3), 2)])
    assert f.K == 2 and f[s] == Fraction(3, 2) and f.duplicates_merged == 1


def test_values_must_be_positive():
    with pytest.raises(ValueError):
        SparseSupportFunction(3, [(Permutation.identity(3), 0)])
    with pytest.raises(ValueError):
        SparseSupportFunction(3, [(Permutation.identity(3), float("inf"))], FLOAT)
    with pytest.raises(ValueError):
        SparseSupportFunction(3, [(Permutation.identity(4), 1)])


def test_from_cells_validation():
    shape = LambdaShape((2, 1))
    with pytest.raises(ValueError):
        MarginalMatrix.from_cells(shape, {(0, 3): 1})
    with pytest.raises(ValueError):
        MarginalMatrix.from_cells(shape, {(0, 0): 0})


def test_scalar_text_roundtrip():
    assert format_scalar(Fraction(1, 2)) == "0.5"
    assert format_scalar(Fraction(-9, 4)) == "-2.25"
    assert format_scalar(Fraction(3, 80)) == "0.0375"
    assert format_scalar(Fraction(7)) == "7"
    assert format_scalar(Fraction(1, 3)) == "1/3"
    assert to_scalar("1/3", EXACT) == Fraction(1, 3)
    assert to_scalar("0.1", EXACT) == Fraction(1, 10)
    assert to_scalar("0.25", FLOAT) == 0.25
    with pytest.raises(ValueError):
        to_scalar("1", "complex")


@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=10**6))
def test_format_scalar_lossless(v):
    assert to_scalar(format_scalar(v), EXACT) == v


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_lossless(v):
    assert to_scalar(format_scalar(v), FLOAT) == v


@given(functions(), st.sampled_from(SHAPES4))
@settings(max_examples=60, deadline=None)
def test_rows_and_columns_carry_the_mass(f, parts):
    M = fourier_coefficient(f, LambdaShape(parts))
    dense = dense_of(M)
    mass = f.mass()
    d = M.d
    assert all(sum(row) == mass for row in dense)
    assert all(sum(dense[i][j] for i in range(d)) == mass for j in range(d))
    assert M.total() == d * mass
    assert len(M) <= f.K * d


@given(functions(mode=FLOAT), st.sampled_from(SHAPES4))
@settings(max_examples=40, deadline=None)
def test_float_total_mass(f, parts):
    M = fourier_coefficient(f, LambdaShape(parts))
    assert abs(M.total() - M.d * f.mass()) <= 1e-9 * max(1.0, M.d * f.mass())
    assert verify_marginal(M, f.mass(), Tolerance(1e-12, 1e-9)).ok


@given(functions(max_k=3), functions(max_k=3), st.sampled_from(SHAPES4))
@settings(max_examples=60, deadline=None)
def test_linearity(f, g, parts):
    shape = LambdaShape(parts)
    merged = SparseSupportFunction(4, f.entries + g.entries)
    a, b = fourier_coefficient(f, shape).cells, fourier_coefficient(g, shape).cells
    summed = {k: a.get(k, 0) + b.get(k, 0) for k in set(a) | set(b)}
    assert fourier_coefficient(merged, shape).cells == summed


@given(functions(max_k=4), st.sampled_from(SHAPES4))
@settings(max_examples=40, deadline=None)
def test_matches_dense_reference(f, parts):
    M = fourier_coefficient(f, LambdaShape(parts))
    want = reference.dense_marginal(((s.images, v) for s, v in f.entries), parts)
    assert dense_of(M) == want
