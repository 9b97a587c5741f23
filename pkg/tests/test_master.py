import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nearcol.combinatorics import ball_volume, mp
from nearcol.master import (ball_masks, count_k_master_subsets, disjoint_balls_probability_bounds,
                            full_master_template_bounds, k_master_template_bounds, k_near_collision_probability,
                            master_probability_bruteforce, master_probability_cover_sum)
from nearcol.metric import SystemParams, strong_nc_probability, weak_nc_probability_bounds
from nearcol.simulate import replica_rng, simulate_database_events, wilson_interval


def test_full_master_examples():
    b = full_master_template_bounds(SystemParams(20, 1, 3))
    assert float(b.lower) == 1 and float(b.upper) == 1
    b = full_master_template_bounds(SystemParams(10, 4, 5))
    assert float(b.upper) == 1
    b = full_master_template_bounds(SystemParams(8, 3, 2))
    assert float(b.lower) == pytest.approx((37 / 256) ** 2)
    assert float(b.upper) == pytest.approx((163 / 256) ** 2)


def test_full_master_exact_by_two_routes():
    for n, size, eps in [(6, 2, 1), (6, 3, 1), (8, 2, 2), (7, 3, 2)]:
        brute = master_probability_bruteforce(n, size, eps)
        assert brute == master_probability_cover_sum(n, size, eps)
        b = full_master_template_bounds(SystemParams(n, size, eps))
        assert float(b.lower) <= float(brute) <= float(b.upper)


def test_full_master_monte_carlo():
    p = SystemParams(8, 3, 2)
    b = full_master_template_bounds(p)
    rep = simulate_database_events(8, 3, 2, seed=31, replicas=100_000, master=True)["full_master"]
    lo, hi = rep.frequency_interval(3)
    assert hi >= float(b.lower) and lo <= float(b.upper)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 64), st.integers(1, 50), st.data())
def test_full_master_ordered(n, size, data):
    eps = data.draw(st.integers(0, n))
    b = full_master_template_bounds(SystemParams(n, size, eps))
    assert b.lower <= b.upper
    if size >= 2 and 0 < eps and 2 * eps < n:
        assert b.lower < b.upper


def test_k_master_reductions():
    p = SystemParams(10, 4, 2)
    k = k_master_template_bounds(p, 4)
    full = full_master_template_bounds(p)
    assert float(k.lower) == pytest.approx(float(full.lower), rel=1e-12)
    assert float(k.upper) == pytest.approx(float(full.upper), rel=1e-12)
    assert float(k_master_template_bounds(SystemParams(10, 4, 5), 2).lower) == 0


def test_k_master_monte_carlo_expected_count():
    n, size, eps, k = 8, 4, 1, 2
    b = k_master_template_bounds(SystemParams(n, size, eps), k)
    masks = ball_masks(n, eps)
    counts = []
    for r in range(20_000):
        rng = replica_rng(404, r)
        db = [int(x) for x in rng.integers(0, 1 << n, size=size)]
        counts.append(count_k_master_subsets(n, db, eps, k, masks))
    mean = np.mean(counts)
    se = np.std(counts) / math.sqrt(len(counts))
    assert mean + 3 * se >= float(b.lower) and mean - 3 * se <= float(b.upper)


def test_k_near_collision_examples():
    p = SystemParams(20, 30, 3)
    zero = k_near_collision_probability(p, 0)
    assert (zero.to_mpf() + strong_nc_probability(p).to_mpf()) == pytest.approx(1, abs=1e-30)
    v = ball_volume(20, 3).exact
    top = k_near_collision_probability(p, 29)
    assert top.log2 == pytest.approx(29 * math.log2(v), abs=1e-9)


@pytest.mark.parametrize("n,size,eps", [(12, 10, 2), (20, 200, 3), (64, 1000, 10), (8, 2, 4)])
def test_k_near_collision_complete(n, size, eps):
    p = SystemParams(n, size, eps)
    total = mp.fsum(k_near_collision_probability(p, k).to_mpf() for k in range(size))
    assert abs(total - 1) < 1e-9


def test_k_near_collision_monte_carlo():
    p = SystemParams(12, 10, 2)
    want = float(k_near_collision_probability(p, 1))
    rep = simulate_database_events(12, 10, 2, seed=55, replicas=100_000)["k_nc"]
    hits = sum(1 for v in rep.outcomes if v == 1)
    lo, hi = wilson_interval(hits, rep.replicas, 3)
    assert lo <= want <= hi


def test_disjoint_examples():
    b = disjoint_balls_probability_bounds(SystemParams(16, 1, 2))
    assert float(b.lower) == 1 and float(b.upper) == 1
    b = disjoint_balls_probability_bounds(SystemParams(16, 2, 2))
    want = 1 - float(ball_volume(16, 4).exact)
    assert float(b.lower) == pytest.approx(want) and float(b.upper) == pytest.approx(want)


def test_disjoint_monte_carlo():
    b = disjoint_balls_probability_bounds(SystemParams(16, 5, 2))
    rep = simulate_database_events(16, 5, 2, seed=66, replicas=100_000)["disjoint_balls"]
    lo, hi = rep.frequency_interval(3)
    assert hi >= float(b.lower) and lo <= float(b.upper)


def test_disjoint_below_no_weak_collision():
    for n in range(8, 65, 8):
        for eps in range(0, n // 4 + 1):
            for size in (2, 5, 20, 100):
                p = SystemParams(n, size, eps)
                disjoint = disjoint_balls_probability_bounds(p).lower
                weak_lower = weak_nc_probability_bounds(p).lower
                assert disjoint.to_mpf() <= 1 - weak_lower.to_mpf() + mp.mpf(2) ** -100


def test_cover_sum_matches_first_principles_pair():
    # two templates: some ball covers both iff their distance is at most 2 eps
    n, eps = 6, 1
    want = Fraction(sum(math.comb(n, d) for d in range(2 * eps + 1)), 1 << n)
    assert master_probability_cover_sum(n, 2, eps) == want
