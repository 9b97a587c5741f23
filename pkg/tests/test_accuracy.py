import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nearcol.accuracy import (AccuracyRates, derive_rates, max_database_size, max_database_size_asymptotic,
                              near_collision_probability_fmr, outsider_trials_far, outsider_trials_fmr,
                              outsider_trials_fpir, outsider_trials_uniform)
from nearcol.combinatorics import LogProb
from nearcol.errors import ConsistencyError, DomainError, PreconditionError
from nearcol.sentinels import UNBOUNDED


def nc_float(fmr, users):
    # independent route: product over pairs in plain floats (fine for small N)
    return 1 - (1 - fmr) ** (users * (users - 1) // 2)


def test_derive_rates():
    assert derive_rates(AccuracyRates(fmr=0.01, fta=0)).far == 0.01
    assert derive_rates(AccuracyRates(fnmr=0.02, fta=0.1)).frr == pytest.approx(0.118, abs=1e-15)
    assert derive_rates(AccuracyRates(fmr=0.5, fta=1)).far == 0
    with pytest.raises(ConsistencyError):
        derive_rates(AccuracyRates(fmr=0.01, fta=0.5, far=0.01))
    with pytest.raises(DomainError):
        AccuracyRates(fmr=1.5)


def test_outsider_trials_fmr_examples():
    lo, up = outsider_trials_fmr([1e-6] * 8).rounded()
    assert (lo, up) == (16, 16)
    assert outsider_trials_fmr([0.5]).upper_log2 == 1
    b = outsider_trials_fmr([1e-4] * 100)
    assert round(b.lower_log2, 2) == 6.64 and round(b.upper_log2, 2) == 6.64
    assert outsider_trials_fmr([1e-3, 0]) is UNBOUNDED
    with pytest.raises(PreconditionError):
        outsider_trials_fmr([0.6])


def test_uniform_equals_list_form():
    a = outsider_trials_uniform(3e-5, 40)
    b = outsider_trials_fmr([3e-5] * 40)
    assert a.lower_log2 == pytest.approx(b.lower_log2, abs=1e-12)
    assert a.upper_log2 == pytest.approx(b.upper_log2, abs=1e-12)


def test_fpir():
    assert outsider_trials_fpir(0.5).upper_log2 == 1
    b = outsider_trials_fpir(2.0 ** -20)
    assert b.upper_log2 == 20 and b.lower_log2 == pytest.approx(20 - 1.4e-6, abs=1e-7)
    b = outsider_trials_fpir(1e-3)
    assert round(b.upper_log2, 2) == 9.97 and b.lower_log2 == pytest.approx(9.97, abs=0.01)
    assert outsider_trials_fpir(0) is UNBOUNDED


def test_far():
    a = outsider_trials_far([1e-4, 2e-4], [0, 0])
    b = outsider_trials_fmr([1e-4, 2e-4])
    assert a == b
    assert outsider_trials_far([5e-7], [0.5]).upper_log2 == pytest.approx(19.93, abs=0.005)
    assert outsider_trials_far([1e-6] * 10, [0.9] * 10).upper_log2 == pytest.approx(13.29, abs=0.005)
    with pytest.raises(DomainError):
        outsider_trials_far([1e-6], [1.0])


def test_near_collision_probability():
    assert float(near_collision_probability_fmr(0.3, 1)) == 0
    assert float(near_collision_probability_fmr(2e-6, 7)) == pytest.approx(4.2e-5, rel=1e-4)
    assert round(100 * float(near_collision_probability_fmr(1e-4, 100)), 3) == 39.044
    for fmr, users in [(1e-3, 50), (0.01, 20), (1e-6, 2000)]:
        assert float(near_collision_probability_fmr(fmr, users)) == pytest.approx(nc_float(fmr, users), rel=1e-9)


def test_near_collision_huge_database():
    p = near_collision_probability_fmr(1e-12, 10**8)
    # 5e15 pairs * 1e-12 = 5000 expected false matches
    assert float(p) == 1.0
    q = near_collision_probability_fmr(1e-20, 10**4)
    assert float(q) == pytest.approx(1e-20 * (10**4 * (10**4 - 1) // 2), rel=1e-9)


def test_max_database_size_examples():
    assert max_database_size(1e-6, 100) == 142
    assert max_database_size(2e-6, 100) == 100
    assert max_database_size(0.04, 100) == 1
    assert max_database_size(0, 100) is UNBOUNDED
    assert max_database_size_asymptotic(1e-6, 100) == pytest.approx(141.42, abs=0.01)
    assert max_database_size_asymptotic(2e-6, 100) == pytest.approx(100.0)
    assert max_database_size_asymptotic(5e-6, 100) == pytest.approx(63.25, abs=0.01)


@pytest.mark.parametrize("exponent", range(2, 9))
def test_max_database_size_is_maximal(exponent):
    for mant in (1, 3, 7):
        fmr = mant * 10.0 ** -exponent
        for lam in (2, 10, 100, 128, 1024):
            size = max_database_size(fmr, lam)
            threshold = LogProb.from_fraction(Fraction(1, lam))
            assert near_collision_probability_fmr(fmr, size) < threshold or size == 1
            assert near_collision_probability_fmr(fmr, size + 1) >= threshold


def test_max_database_size_monotone():
    fmrs = [10.0 ** -e for e in range(2, 9)][::-1]
    sizes = [max_database_size(f, 100) for f in fmrs]
    assert sizes == sorted(sizes, reverse=True)
    lams = [2, 10, 100, 1000]
    sizes = [max_database_size(1e-6, lam) for lam in lams]
    assert sizes == sorted(sizes, reverse=True)


def test_asymptotic_close_to_exact_where_quadratic_regime_holds():
    # |exact - asymptotic| <= 1 needs sqrt(2/(lam fmr)) <= 2 lam (second-order term of log(1-1/lam))
    for e in range(3, 9):
        fmr = 10.0 ** -e
        for lam in (10, 100, 128, 1024):
            approx = max_database_size_asymptotic(fmr, lam)
            if approx <= 2 * lam:
                assert abs(max_database_size(fmr, lam) - approx) <= 1


def test_asymptotic_drifts_outside_quadratic_regime():
    exact, approx = max_database_size(1e-8, 10), max_database_size_asymptotic(1e-8, 10)
    assert exact - approx > 100


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-9, 0.5), min_size=1, max_size=30))
def test_median_inside_bracket(fmrs):
    b = outsider_trials_fmr(fmrs)
    lo, up = b.median_bracket()
    assert b.lower_log2 <= b.upper_log2
    assert lo - 1e-9 <= b.median_log2 <= up + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-9, 0.5), st.integers(1, 10**6))
def test_uniform_median_inside_bracket(fmr, users):
    b = outsider_trials_uniform(fmr, users)
    lo, up = b.median_bracket()
    if users * fmr <= 0.5:
        assert lo - 1e-9 <= b.median_log2 <= up + 1e-9


def test_statement_form_omits_ln2_constant():
    b = outsider_trials_uniform(1e-6, 8)
    assert b.median_log2 < b.lower_log2
    assert b.median_log2 == pytest.approx(b.upper_log2 + math.log2(math.log(2)), abs=1e-5)
