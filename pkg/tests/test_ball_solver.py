import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nearcol.ball_solver import (TemplateDatabase, brute_force_cardinality, build_linear_system,
                                 cardinal_reduction_ratio, column_partition, column_partition_pairwise,
                                 enumerate_intersection, intersection_cardinality, membership_by_system,
                                 partition_size_bounds, partition_size_pmf, partition_size_simplex, read_database,
                                 write_database)
from nearcol.combinatorics import ball_size, intersection_size
from nearcol.errors import FormatError, ResourceError
from nearcol.simulate import simulate_partition_sizes, wilson_interval


def random_db(rng, n, size):
    return TemplateDatabase(n, tuple(rng.getrandbits(n) for _ in range(size)))


def as_sets(classes):
    return sorted(sorted(c) for c in classes)


def test_partition_trivial_cases():
    assert column_partition(TemplateDatabase(10, (0b1011001110,))).sizes == (10,)
    assert column_partition(TemplateDatabase(10, (77, 77, 77))).sizes == (10,)


def test_partition_matches_pairwise_oracle():
    rng = random.Random(5)
    for _ in range(100):
        db = random_db(rng, 12, rng.randint(1, 6))
        assert as_sets(column_partition(db).classes) == as_sets(column_partition_pairwise(db))
        assert sum(column_partition(db).sizes) == 12


def test_linear_system_examples():
    s = build_linear_system(TemplateDatabase(8, (0b10110000,)), 3)
    assert s.sign_matrix == ((1,),) and s.slack == (3,)
    s = build_linear_system(TemplateDatabase(8, (0, 0b00011111)), 3)
    assert s.slack == (3, 3 - 5)


def test_membership_equivalence_exhaustive():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 14)
        size = rng.randint(1, 5)
        eps = rng.randint(0, n // 2)
        db = random_db(rng, n, size)
        system = build_linear_system(db, eps)
        v0 = db.templates[0]
        for p in range(1 << n):
            direct = all((p ^ v).bit_count() <= eps for v in db.templates)
            assert membership_by_system(system, p, v0) == direct


def test_cardinality_examples():
    v = 0b110010101100
    assert intersection_cardinality(TemplateDatabase(12, (v,)), 4) == ball_size(12, 4)
    for d in range(0, 13):
        u = v ^ ((1 << d) - 1)
        assert intersection_cardinality(TemplateDatabase(12, (v, u)), 4) == intersection_size(12, 4, d)


def test_cardinality_matches_full_space_count():
    rng = random.Random(3)
    for _ in range(25):
        db = random_db(rng, 14, 3)
        # pull the templates together so the intersection is usually nonempty
        db = TemplateDatabase(14, tuple(db.templates[0] ^ (t & rng.getrandbits(14) & rng.getrandbits(14))
                                        for t in db.templates))
        assert intersection_cardinality(db, 4) == brute_force_cardinality(db, 4)


def test_cardinality_independent_of_reference_and_workers():
    rng = random.Random(8)
    db = TemplateDatabase(16, tuple(0xA5A5 ^ (rng.getrandbits(16) & rng.getrandbits(16) & rng.getrandbits(16))
                                    for _ in range(4)))
    base = intersection_cardinality(db, 5)
    assert base > 0
    assert intersection_cardinality(db, 5, v0_index=rng.randrange(4)) == base
    assert intersection_cardinality(db, 5, workers=3) == base


def test_budget_guard():
    db = TemplateDatabase(20, (0, 1 << 19))
    with pytest.raises(ResourceError, match="exceeds"):
        intersection_cardinality(db, 10, budget=10)


def test_enumeration_examples():
    v = 0b1010011
    assert list(enumerate_intersection(TemplateDatabase(7, (v,)), 0)) == [v]
    assert list(enumerate_intersection(TemplateDatabase(7, (0, 0b1111111)), 3)) == []
    rng = random.Random(21)
    for _ in range(20):
        db = TemplateDatabase(12, tuple(rng.getrandbits(12) & rng.getrandbits(12) for _ in range(3)))
        got = list(enumerate_intersection(db, 3))
        want = {p for p in range(1 << 12) if all((p ^ t).bit_count() <= 3 for t in db.templates)}
        assert len(got) == len(set(got)) and set(got) == want
        assert len(got) == intersection_cardinality(db, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.data())
def test_cardinality_monotone_in_radius(n, data):
    templates = data.draw(st.lists(st.integers(0, (1 << n) - 1), min_size=1, max_size=4))
    db = TemplateDatabase(n, tuple(templates))
    counts = [intersection_cardinality(db, e) for e in range(n + 1)]
    assert counts == sorted(counts) and counts[-1] == 1 << n


def test_cardinal_reduction_examples():
    one = column_partition(TemplateDatabase(10, (5,)))
    assert float(cardinal_reduction_ratio(one).log2) == pytest.approx(10 - math.log2(11))
    singles = column_partition(TemplateDatabase(3, (0b001, 0b010, 0b100)))
    assert singles.sizes == (1, 1, 1)
    assert float(cardinal_reduction_ratio(singles).log2) == pytest.approx(0.0, abs=1e-30)


def test_cardinal_reduction_never_exceeds_true_ratio():
    rng = random.Random(4)
    for _ in range(100):
        n = rng.randint(4, 16)
        db = random_db(rng, n, rng.randint(1, 4))
        sizes = column_partition(db).sizes
        true_ratio = Fraction(1 << n, math.prod(s + 1 for s in sizes))
        assert cardinal_reduction_ratio(column_partition(db)).log2 <= math.log2(true_ratio) + 1e-12


def test_database_file_round_trip():
    db = TemplateDatabase(13, (0, 0x1FFF, 0x0A5A))
    text = write_database(db)
    assert text.splitlines()[0] == "n=13 N=3"
    assert read_database(text) == db
    with pytest.raises(FormatError):
        read_database("n=13 N=1\n0001\n")
    with pytest.raises(FormatError):
        read_database("n=13 N=2\n0000\n")


def test_partition_pmf_examples():
    assert partition_size_pmf(1, 5) == [1]
    for n in (1, 2, 7, 20, 64):
        for size in (1, 2, 3, 8, 16):
            assert abs(float(sum(partition_size_pmf(n, size))) - 1) < 1e-12
    assert partition_size_pmf(5, 1) == [1, 0, 0, 0, 0]


def test_partition_pmf_equals_simplex_sum():
    for n in range(1, 13):
        for size in range(1, 7):
            pmf = partition_size_pmf(n, size)
            for i in range(1, n + 1):
                assert pmf[i - 1] == partition_size_simplex(n, size, i, factor="statement")


def test_proof_factor_does_not_normalise():
    assert partition_size_simplex(1, 3, 1, factor="proof") != 1
    assert partition_size_simplex(1, 3, 1, factor="statement") == 1


def test_partition_pmf_monte_carlo():
    rep = simulate_partition_sizes(8, 3, seed=77, replicas=100_000)
    pmf = partition_size_pmf(8, 3)
    for i in range(1, 9):
        hits = sum(1 for v in rep.outcomes if v == i)
        lo, hi = wilson_interval(hits, rep.replicas, 3)
        assert lo <= float(pmf[i - 1]) <= hi, i


@pytest.mark.parametrize("n,size", [(8, 3), (20, 5), (12, 2)])
def test_partition_bounds_sandwich_dp(n, size):
    pmf = partition_size_pmf(n, size)
    for i in range(1, n + 1):
        lo, hi = partition_size_bounds(n, size, i)
        exact = float(pmf[i - 1])
        assert float(lo) <= exact * (1 + 1e-12) + 1e-300
        assert exact <= float(hi) * (1 + 1e-12) + 1e-300


def test_partition_bounds_top_index():
    lo, hi = partition_size_bounds(6, 4, 6)
    want = math.prod(1 - Fraction(j - 1, 8) for j in range(1, 7))
    assert float(lo) == pytest.approx(float(want)) and float(hi) == pytest.approx(float(want))
