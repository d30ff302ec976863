import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permsparse.symgroup import (
    CapExceeded,
    LambdaShape,
    PartitionWord,
    Permutation,
    act,
    check_cap,
    compose,
    cycle_decomposition,
    d_lambda,
    induced_permutation,
    induced_permutation_reference,
    inverse,
    lambda_cycle_count,
    partition_table,
    rank_partition,
    sample_uniform,
    sample_uniform_batch,
    unrank_partition,
)

import reference


def integer_partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first,) + rest


def shapes_of(n):
    return [LambdaShape(p) for p in integer_partitions(n) if len(p) >= 2]


@st.composite
def perms(draw, n=None):
    n = draw(st.integers(1, 9)) if n is None else n
    return Permutation(np.array(draw(st.permutations(range(1, n + 1)))))


@st.composite
def perm_and_shape(draw):
    n = draw(st.integers(2, 7))
    shape = draw(st.sampled_from(shapes_of(n)))
    return draw(perms(n)), shape


def test_compose_disjoint_transpositions():
    a = Permutation.from_cycles(4, (1, 2))
    b = Permutation.from_cycles(4, (3, 4))
    assert compose(a, b).images == (2, 1, 4, 3)


def test_compose_applies_right_factor_first():
    a = Permutation([2, 3, 1])
    b = Permutation([2, 1, 3])
    ab = compose(a, b)
    assert all(ab(x) == a(b(x)) for x in (1, 2, 3))
    assert ab == a * b


def test_compose_identity_and_inverse():
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = sample_uniform(7, rng)
        e = Permutation.identity(7)
        assert compose(s, e) == s
        assert compose(s, inverse(s)) == e
        assert compose(inverse(s), s) == e


def test_compose_size_mismatch():
    with pytest.raises(ValueError):
        compose(Permutation.identity(3), Permutation.identity(4))


def test_inverse_examples():
    assert inverse(Permutation.identity(5)) == Permutation.identity(5)
    assert inverse(Permutation([2, 3, 1])).images == (3, 1, 2)


def test_permutation_validation():
    with pytest.raises(ValueError):
        Permutation([1, 1, 2])
    with pytest.raises(ValueError):
        Permutation([])
    with pytest.raises(ValueError):
        Permutation.from_cycles(4, (1, 2), (2, 3))


def test_cycle_decomposition_examples():
    c = cycle_decomposition(Permutation([2, 1, 4, 3]))
    assert c.cycles == ((1, 2), (3, 4))
    assert c.nontrivial_cycle_count == 2

    c = cycle_decomposition(Permutation.identity(5))
    assert c.cycles == ((1,), (2,), (3,), (4,), (5,))
    assert c.nontrivial_cycle_count == 0

    c = cycle_decomposition(Permutation([2, 3, 1, 4]))
    assert c.cycles == ((1, 2, 3), (4,))
    assert c.nontrivial_cycle_count == 1


def test_str_uses_cycle_notation():
    assert str(Permutation([2, 1, 4, 3])) == "(1 2)(3 4)"
    assert str(Permutation.identity(3)) == "id"


def test_d_lambda_values():
    for n in (2, 5, 30):
        assert d_lambda(LambdaShape((n - 1, 1))) == n
    assert d_lambda(LambdaShape((2, 2))) == 6
    assert d_lambda(LambdaShape((1, 1, 1))) == 6
    assert d_lambda(LambdaShape((3, 2, 2))) == math.factorial(7) // (6 * 2 * 2)


def test_d_lambda_width_limit():
    big = LambdaShape((1,) * 40)
    with pytest.raises(OverflowError):
        d_lambda(big)
    # just below 2^127
    assert d_lambda(LambdaShape((1,) * 33)) == math.factorial(33)


def test_shape_validation():
    with pytest.raises(ValueError):
        LambdaShape((4,))
    with pytest.raises(ValueError):
        LambdaShape((1, 2))
    with pytest.raises(ValueError):
        LambdaShape((3, 0))
    assert LambdaShape.parse("[3, 1]") == LambdaShape((3, 1))


def test_cap():
    check_cap(LambdaShape((3, 1)), 4)
    with pytest.raises(CapExceeded):
        check_cap(LambdaShape((3, 1)), 3)
    with pytest.raises(CapExceeded):
        induced_permutation(Permutation.identity(4), LambdaShape((2, 2)), cap=5)


def test_unrank_first_word_is_least():
    assert unrank_partition(LambdaShape((2, 1)), 0).word == (0, 0, 1)


def test_unrank_range_errors():
    shape = LambdaShape((2, 1))
    with pytest.raises(IndexError):
        unrank_partition(shape, 3)
    with pytest.raises(IndexError):
        unrank_partition(shape, -1)


def test_word_validation():
    with pytest.raises(ValueError):
        PartitionWord(LambdaShape((2, 1)), (0, 1, 1))
    with pytest.raises(ValueError):
        PartitionWord(LambdaShape((2, 1)), (0, 0))


def test_singleton_shape_enumerates_singletons():
    shape = LambdaShape((3, 1))
    blocks = [unrank_partition(shape, k).blocks() for k in range(shape.d)]
    singles = sorted(b[1][0] for b in blocks)
    assert singles == [1, 2, 3, 4]
    assert all(sorted(b[0] + b[1]) == [1, 2, 3, 4] for b in blocks)


@pytest.mark.parametrize("n", range(2, 8))
def test_rank_unrank_exhaustive(n):
    for shape in shapes_of(n):
        ws = reference.words(shape.parts)
        assert len(ws) == shape.d
        for k, w in enumerate(ws):
            assert unrank_partition(shape, k).word == w
            assert rank_partition(PartitionWord(shape, w)) == k


def test_rank_unrank_roundtrip_larger_shape():
    shape = LambdaShape((5, 3, 2, 1))  # D = 27720
    rng = np.random.default_rng(1)
    for k in rng.integers(0, shape.d, 300).tolist():
        assert rank_partition(unrank_partition(shape, k)) == k


def test_act_on_singletons_follows_sigma():
    n = 6
    shape = LambdaShape((n - 1, 1))
    rng = np.random.default_rng(5)
    for _ in range(20):
        s = sample_uniform(n, rng)
        for i in range(1, n + 1):
            t = PartitionWord(shape, tuple(int(x == i) for x in range(1, n + 1)))
            moved = act(s, t)
            assert moved.blocks()[1] == [s(i)]


def test_act_identity_and_law():
    rng = np.random.default_rng(9)
    shape = LambdaShape((3, 2, 1))
    for _ in range(50):
        s, r = sample_uniform(6, rng), sample_uniform(6, rng)
        t = unrank_partition(shape, int(rng.integers(shape.d)))
        assert act(Permutation.identity(6), t) == t
        assert act(s, act(r, t)) == act(compose(s, r), t)


def test_act_size_mismatch():
    with pytest.raises(ValueError):
        act(Permutation.identity(3), unrank_partition(LambdaShape((3, 1)), 0))


def test_induced_identity():
    for shape in shapes_of(5):
        assert induced_permutation(Permutation.identity(5), shape).map == tuple(range(shape.d))


def test_induced_transposition_on_singletons():
    shape = LambdaShape((3, 1))
    m = induced_permutation(Permutation.from_cycles(4, (1, 2)), shape).map
    index = {unrank_partition(shape, k).blocks()[1][0]: k for k in range(4)}
    assert m[index[1]] == index[2] and m[index[2]] == index[1]
    assert m[index[3]] == index[3] and m[index[4]] == index[4]


def test_induced_matches_dense_reference():
    rng = np.random.default_rng(11)
    for parts in [(3, 1), (2, 2), (2, 1, 1), (3, 2), (2, 2, 1), (4, 2, 1)]:
        shape = LambdaShape(parts)
        for _ in range(5):
            s = sample_uniform(shape.n, rng)
            dense = reference.dense_matrix(s.images, parts)
            m = induced_permutation(s, shape).map
            assert all(dense[m[j]][j] == 1 for j in range(shape.d))
            assert m == induced_permutation_reference(s, shape).map


def test_homomorphism_exhaustive_n4():
    all4 = [Permutation(p) for p in itertools.permutations(range(1, 5))]
    for shape in shapes_of(4):
        maps = {s: induced_permutation(s, shape).map for s in all4}
        for s in all4:
            for r in all4:
                sr = maps[compose(s, r)]
                assert sr == tuple(maps[s][maps[r][j]] for j in range(shape.d))


def test_table_batch_matches_single_calls():
    shape = LambdaShape((5, 2, 2))
    rng = np.random.default_rng(2)
    batch = sample_uniform_batch(9, 12, rng)
    maps = partition_table(shape).induced_maps(batch)
    for row, p in zip(maps, batch):
        assert tuple(row.tolist()) == induced_permutation_reference(Permutation.from_array(p), shape).map


def test_lambda_cycle_count_examples():
    shape = LambdaShape((2, 2))
    assert lambda_cycle_count(Permutation.identity(4), shape) == 6
    s = Permutation([2, 1, 4, 3])
    assert lambda_cycle_count(s, LambdaShape((3, 1))) == 2
    rng = np.random.default_rng(4)
    for _ in range(20):
        s = sample_uniform(4, rng)
        dense = reference.dense_matrix(s.images, (2, 2))
        mapping = [next(i for i in range(6) if dense[i][j]) for j in range(6)]
        assert lambda_cycle_count(s, shape) == reference.cycle_count(mapping)


def test_sample_uniform_small_cases():
    rng = np.random.default_rng(0)
    assert sample_uniform(1, rng) == Permutation([1])
    a = [sample_uniform(8, np.random.default_rng(42)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_sample_uniform_is_uniform_on_s3():
    rng = np.random.default_rng(2024)
    draws = 60000
    counts = {}
    for p in sample_uniform_batch(3, draws, rng):
        key = tuple(p.tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    sd = math.sqrt(draws * (1 / 6) * (5 / 6))
    assert all(abs(c - draws / 6) <= 6 * sd for c in counts.values())


def test_sample_uniform_matches_batch_distribution():
    rng = np.random.default_rng(7)
    counts = {}
    for _ in range(6000):
        key = sample_uniform(3, rng).images
        counts[key] = counts.get(key, 0) + 1
    sd = math.sqrt(6000 * (1 / 6) * (5 / 6))
    assert len(counts) == 6 and all(abs(c - 1000) <= 6 * sd for c in counts.values())


@given(perm_and_shape())
@settings(max_examples=60, deadline=None)
def test_induced_map_is_bijection(ps):
    s, shape = ps
    m = induced_permutation(s, shape).map
    assert sorted(m) == list(range(shape.d))


@given(perms())
def test_cycles_partition_the_ground_set(s):
    cycles = cycle_decomposition(s).cycles
    flat = [x for c in cycles for x in c]
    assert sorted(flat) == list(range(1, s.n + 1))
    assert all(c[0] == min(c) for c in cycles)
    assert [c[0] for c in cycles] == sorted(c[0] for c in cycles)
    for c in cycles:
        assert all(s(a) == b for a, b in zip(c, c[1:] + c[:1]))


@given(perms())
@settings(deadline=None)
def test_lambda_cycles_match_cycle_count_at_hook(s):
    if s.n < 2:
        return
    assert lambda_cycle_count(s, LambdaShape((s.n - 1, 1))) == len(cycle_decomposition(s))


@given(perms(), perms())
def test_inverse_law(a, b):
    assert compose(inverse(a), a) == Permutation.identity(a.n)
    if a.n == b.n:
        assert inverse(compose(a, b)) == compose(inverse(b), inverse(a))
