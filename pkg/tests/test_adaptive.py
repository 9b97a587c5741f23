import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nearcol.adaptive import (AttackerConfig, adaptive_cdf, adaptive_cdf_displayed, adaptive_pmf, adaptive_survival,
                              cdf_ratio, median_trials_adaptive, pmf_ratio)
from nearcol.combinatorics import mp
from nearcol.errors import DomainError
from nearcol.sentinels import BEYOND_HORIZON
from nearcol.tables import golden


def urn_pmf(n, success, kappa, upto):
    """Forward DP over the urn: mass still alive and failure states left before each draw."""
    failures = (1 << n) - success
    alive = Fraction(1)
    out = []
    for a in range(1, upto + 1):
        left = max(failures - (a - 1) * kappa, 0)
        total = success + left
        out.append(alive * Fraction(success, total))
        alive *= Fraction(left, total)
        if alive == 0:
            break
    return out


def rel_err(x, y):
    return abs(mp.mpf(x.numerator) / x.denominator - y) / (mp.mpf(x.numerator) / x.denominator)


URN_CASES = [(4, 3, 1), (6, 5, 2), (8, 16, 3), (10, 7, 8), (12, 64, 4), (16, 1000, 512), (16, 1, 4096), (12, 4096, 2)]


@pytest.mark.parametrize("n,success,kappa", URN_CASES)
def test_pmf_matches_urn_dp(n, success, kappa):
    config = AttackerConfig(Fraction(success, 1 << n), kappa, n)
    upto = min(config.horizon, 150)
    exact = urn_pmf(n, success, kappa, upto)
    for a, q in enumerate(exact, start=1):
        got = adaptive_pmf(config, a).to_mpf()
        assert q == 0 and got == 0 or rel_err(q, got) < 1e-9, (a, float(q), got)


@pytest.mark.parametrize("n,success,kappa", [c for c in URN_CASES if c[2] >= 2])
def test_pmf_normalised_over_support(n, success, kappa):
    config = AttackerConfig(Fraction(success, 1 << n), kappa, n)
    h = config.horizon
    if h > 1200:
        pytest.skip("support too long for a term-by-term sum")
    total = mp.fsum(adaptive_pmf(config, a).to_mpf() for a in range(1, h + 1))
    assert abs(total - 1) < 1e-6
    assert float(adaptive_cdf(config, h)) == pytest.approx(1.0, abs=1e-9)


def test_pmf_examples():
    for kappa in (0, 1, 7, 1000):
        assert float(adaptive_pmf(AttackerConfig(Fraction(3, 100), kappa, 20), 1)) == pytest.approx(0.03, rel=1e-15)
    p = Fraction(1, 37)
    for a in (1, 5, 40):
        want = float(p) * (1 - float(p)) ** (a - 1)
        assert float(adaptive_pmf(AttackerConfig(p, 0, 30), a)) == pytest.approx(want, rel=1e-12)
    with pytest.raises(DomainError):
        adaptive_pmf(AttackerConfig(Fraction(1, 2), 1, 2), 10)


def test_cdf_examples():
    p = Fraction(1, 50)
    for a in (1, 10, 100):
        assert float(adaptive_cdf(AttackerConfig(p, 0, 20), a)) == pytest.approx(1 - (1 - 1 / 50) ** a, rel=1e-12)
    cfg = AttackerConfig(Fraction(64, 4096), 4, 12)
    values = [adaptive_cdf(cfg, a) for a in range(1, 200)]
    assert all(x <= y for x, y in zip(values, values[1:]))
    running = mp.mpf(0)
    for a in range(1, 60):
        running += adaptive_pmf(cfg, a).to_mpf()
        assert abs(adaptive_cdf(cfg, a).to_mpf() - running) < mp.mpf(10) ** -30


def test_survival_is_complement():
    cfg = AttackerConfig(Fraction(1, 100), 3, 10)
    for a in (0, 1, 20, 300):
        assert float(adaptive_survival(cfg, a)) + (float(adaptive_cdf(cfg, a)) if a else 0) == pytest.approx(1.0)


def test_pmf_ratio():
    cfg = AttackerConfig(Fraction(1, 64), 4, 12)
    assert pmf_ratio(cfg, 1) == 1
    assert all(pmf_ratio(AttackerConfig(Fraction(1, 64), 0, 12), a) == 1 for a in (1, 9, 50))
    naive = AttackerConfig(cfg.p, 0, 12)
    quotient = adaptive_pmf(naive, 10).to_mpf() / adaptive_pmf(cfg, 10).to_mpf()
    assert pmf_ratio(cfg, 10) == pytest.approx(float(quotient), rel=1e-12)


def test_cdf_ratio_table_examples():
    assert cdf_ratio(128, 30, 10**6, 2**47, 10**3, form="displayed") == pytest.approx(0.9981, abs=0.0005)
    assert cdf_ratio(128, 30, 10**7, 2**47, 10**3, form="displayed") == pytest.approx(0.9808, abs=0.0005)
    assert round(cdf_ratio(256, 30, 10**6, 2**47, 10**3, form="displayed"), 4) == 1.0
    flipped = cdf_ratio(128, 30, 10**6, 2**47, 10**3, form="displayed", orientation="naive_over_adaptive")
    assert flipped * cdf_ratio(128, 30, 10**6, 2**47, 10**3, form="displayed") == pytest.approx(1.0)


def test_cumulative_form_is_one_on_table_grid():
    for c in golden()["table3"]["cells"]:
        r = cdf_ratio(c["n"], c["epsilon"], 10 ** c["log10_users"], 1 << c["log2_kappa"], 10 ** c["log10_trials"])
        assert r == pytest.approx(1.0, abs=1e-4)


def test_equivalence_regime_on_table_grid():
    for c in golden()["table3"]["cells"]:
        n, kappa, a = c["n"], 1 << c["log2_kappa"], 10 ** c["log10_trials"]
        if kappa <= 2 ** (n / 2 - 10) and a <= 2 ** (n / 2):
            for form in ("cumulative", "displayed"):
                r = cdf_ratio(n, c["epsilon"], 10 ** c["log10_users"], kappa, a, form=form)
                assert abs(r - 1) <= 0.02


def test_displayed_form_is_not_the_cumulative_pmf():
    cfg = AttackerConfig(Fraction(1, 100), 0, 64)
    # with kappa = 0 the displayed sum carries an extra (1-p)^3 factor
    assert adaptive_cdf_displayed(cfg, 50) == pytest.approx(float(adaptive_cdf(cfg, 50)) * (1 - 0.01) ** 3, rel=1e-9)


def test_median_examples():
    assert median_trials_adaptive(AttackerConfig(Fraction(1, 2), 0, 8)) == 1
    assert median_trials_adaptive(AttackerConfig(Fraction(1, 1000), 0, 40)) == 693
    assert median_trials_adaptive(AttackerConfig(Fraction(1, 1000), 0, 40)) == math.ceil(-math.log(2) / math.log1p(-1e-3))
    adaptive = median_trials_adaptive(AttackerConfig(Fraction(1, 64), 4, 12))
    naive = median_trials_adaptive(AttackerConfig(Fraction(1, 64), 0, 12))
    assert abs(adaptive - naive) <= 1
    assert median_trials_adaptive(AttackerConfig(Fraction(0), 0, 12)) is BEYOND_HORIZON
    assert median_trials_adaptive(AttackerConfig(Fraction(1, 10**12), 0, 64), limit=10**6) is BEYOND_HORIZON


def test_median_agrees_with_cdf_definition():
    for n, s, kappa in [(12, 64, 4), (10, 3, 2), (16, 100, 30)]:
        cfg = AttackerConfig(Fraction(s, 1 << n), kappa, n)
        m = median_trials_adaptive(cfg)
        half = mp.mpf(1) / 2
        assert adaptive_cdf(cfg, m).to_mpf() >= half
        assert m == 1 or adaptive_cdf(cfg, m - 1).to_mpf() < half


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 14), st.data())
def test_horizon_and_first_trial(n, data):
    s = data.draw(st.integers(1, (1 << n) - 1))
    kappa = data.draw(st.integers(1, 1 << n))
    cfg = AttackerConfig(Fraction(s, 1 << n), kappa, n)
    assert float(adaptive_pmf(cfg, 1)) == pytest.approx(s / (1 << n), rel=1e-12)
    assert float(adaptive_survival(cfg, cfg.horizon)) == 0.0
    assert pmf_ratio(cfg, 1) == 1.0
