"""First-success laws of the kappa-adaptive attacker.

The attacker draws guesses from a population of ``2^n`` templates of which a
fraction ``p`` succeed; every failed guess lets it discard ``kappa`` failing
templates. With ``r = kappa / 2^n`` and ``q_j = max(1 - p - (j-1) r, 0)`` the
failure mass left before trial ``j``, trial ``j`` succeeds with probability
``p / (p + q_j)`` given that the earlier ones failed. ``kappa = 0`` is the
naive attacker (geometric law).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .combinatorics import LogProb, ball_volume, mp, to_mpf
from .errors import DomainError
from .sentinels import BEYOND_HORIZON, Sentinel


@dataclass(frozen=True)
class AttackerConfig:
    p: Fraction
    kappa: int
    n: int

    def __post_init__(self):
        p = self.p
        if not isinstance(p, Fraction):
            p = Fraction(p)
            object.__setattr__(self, "p", p)
        if not 0 <= p <= 1:
            raise DomainError(f"success probability {p} outside [0, 1]")
        if self.kappa < 0:
            raise DomainError(f"kappa={self.kappa} must be nonnegative")
        if self.n < 1:
            raise DomainError(f"n={self.n} must be >= 1")

    @property
    def rate(self) -> Fraction:
        """``kappa / 2^n``, kept exact even when kappa exceeds 2^53."""
        return Fraction(self.kappa, 1 << self.n)

    @property
    def horizon(self) -> Union[int, float]:
        """Last trial index with nonzero probability (``inf`` for kappa = 0)."""
        if self.kappa == 0:
            return math.inf
        return math.ceil((1 - self.p) / self.rate) + 1


def _check_trial(config: AttackerConfig, a: int) -> None:
    if a < 1:
        raise DomainError(f"trial index {a} must be >= 1")
    if a > config.horizon:
        raise DomainError(f"trial index {a} beyond the horizon {config.horizon}")


def _log_failure_terms(config: AttackerConfig, count: int):
    """Natural logs of the conditional failure probabilities of trials 1..count (mpf)."""
    p, r = to_mpf(config.p), to_mpf(config.rate)
    out = []
    for j in range(1, count + 1):
        q = 1 - p - (j - 1) * r
        if q <= 0:
            out.append(mp.ninf)
            break
        out.append(mp.log(q) - mp.log(p + q))
    return out


def adaptive_pmf(config: AttackerConfig, a: int) -> LogProb:
    """``P(A(kappa) = a)``."""
    _check_trial(config, a)
    p = to_mpf(config.p)
    if p == 0:
        return LogProb.zero()
    if config.kappa == 0:
        if p == 1:
            return LogProb.one() if a == 1 else LogProb.zero()
        return LogProb((mp.log(p) + (a - 1) * mp.log1p(-p)) / mp.ln2)
    logs = _log_failure_terms(config, a - 1)
    if logs and logs[-1] == mp.ninf:
        return LogProb.zero()
    q = max(1 - p - (a - 1) * to_mpf(config.rate), 0)
    log_pmf = mp.log(p) - mp.log(p + q) + mp.fsum(logs)
    return LogProb(log_pmf / mp.ln2)


def adaptive_survival(config: AttackerConfig, a: int) -> LogProb:
    """``P(A(kappa) > a)``."""
    if a < 0:
        raise DomainError(f"trial index {a} must be >= 0")
    p = to_mpf(config.p)
    if config.kappa == 0:
        if p == 1:
            return LogProb.one() if a == 0 else LogProb.zero()
        return LogProb(a * mp.log1p(-p) / mp.ln2)
    logs = _log_failure_terms(config, a)
    if logs and logs[-1] == mp.ninf:
        return LogProb.zero()
    return LogProb(mp.fsum(logs) / mp.ln2)


def adaptive_cdf(config: AttackerConfig, a: int) -> LogProb:
    """``P(A(kappa) <= a)``, the complement of the product of failure terms."""
    if a < 1:
        raise DomainError(f"trial index {a} must be >= 1")
    return adaptive_survival(config, a).complement()


def adaptive_cdf_displayed(config: AttackerConfig, a: int):
    """The cumulative expression with inner product up to ``i + 2``.

    This is the form that matches the published ratio table; it is not the
    cumulative sum of :func:`adaptive_pmf`. Returned as an mpf.
    """
    p, r = to_mpf(config.p), to_mpf(config.rate)
    log_prod = mp.mpf(0)
    for j in (1, 2):
        log_prod += mp.log(1 - p - j * r) - mp.log(1 - j * r)
    total = mp.mpf(0)
    for i in range(1, a + 1):
        j = i + 2
        log_prod += mp.log(1 - p - j * r) - mp.log(1 - j * r)
        total += mp.exp(mp.log(p) - mp.log(1 - (i - 1) * r) + log_prod)
    return total


def pmf_ratio(config: AttackerConfig, a: int) -> float:
    """``P(A(0) = a) / P(A(kappa) = a)`` from the closed-form product."""
    if a < 1:
        raise DomainError(f"trial index {a} must be >= 1")
    p, r = to_mpf(config.p), to_mpf(config.rate)
    total = mp.mpf(0)
    for j in range(1, a):
        num = 1 - j * r
        den = 1 - (j - 1) * r / (1 - p)
        if num <= 0 or den <= 0:
            raise DomainError(f"ratio term {j} is not positive")
        total += mp.log(num) - mp.log(den)
    return float(mp.exp(total))


def table_success_probability(n: int, epsilon: int, n_users: int) -> Fraction:
    """``N * V_eps``: per-trial success when all enrolled balls are disjoint."""
    p = n_users * ball_volume(n, epsilon).exact
    if p > 1:
        raise DomainError(f"N * V_eps = {float(p):.3g} exceeds 1")
    return p


def cdf_ratio(n: int, epsilon: int, n_users: int, kappa: int, a: int,
              form: str = "cumulative", orientation: str = "adaptive_over_naive") -> float:
    """Ratio of the kappa-adaptive and naive CDFs after ``a`` trials, ``p = N V_eps``.

    ``form="cumulative"`` uses the cumulative PMF; ``form="displayed"`` the
    expression with the ``i + 2`` product bound. ``orientation`` may be
    flipped to ``"naive_over_adaptive"``.
    """
    config = AttackerConfig(table_success_probability(n, epsilon, n_users), kappa, n)
    naive = adaptive_cdf(AttackerConfig(config.p, 0, n), a).to_mpf()
    if form == "cumulative":
        adaptive = adaptive_cdf(config, a).to_mpf()
    elif form == "displayed":
        adaptive = adaptive_cdf_displayed(config, a)
    else:
        raise DomainError(f"unknown form {form!r}")
    if orientation == "adaptive_over_naive":
        return float(adaptive / naive)
    if orientation == "naive_over_adaptive":
        return float(naive / adaptive)
    raise DomainError(f"unknown orientation {orientation!r}")


def median_trials_adaptive(config: AttackerConfig, limit: int = 10**8) -> Union[int, Sentinel]:
    """Smallest ``a`` with ``P(A(kappa) <= a) >= 1/2``.

    Scans the log-survival in chunks of doubling size, then bisects inside
    the chunk where it crosses ``-ln 2``. Returns ``BEYOND_HORIZON`` if the
    median exceeds ``limit``.
    """
    p = to_mpf(config.p)
    if p == 0:
        return BEYOND_HORIZON
    if config.kappa == 0:
        if p >= mp.mpf(1) / 2:
            return 1
        a = int(mp.ceil(-mp.ln2 / mp.log1p(-p)))
        # guard the ceiling against rounding at an exact crossing
        while a > 1 and adaptive_survival(config, a - 1).to_mpf() <= mp.mpf(1) / 2:
            a -= 1
        return a if a <= limit else BEYOND_HORIZON
    pf, rf = float(p), float(config.rate)
    target = -math.log(2)
    acc, start, size = 0.0, 1, 1024
    while start <= limit:
        stop = min(start + size, limit + 1)
        j = np.arange(start, stop, dtype=np.float64)
        q = np.maximum(1 - pf - (j - 1) * rf, 0.0)
        with np.errstate(divide="ignore"):
            logs = np.log1p(-pf / (pf + q))
        cum = acc + np.cumsum(logs)
        hit = np.searchsorted(-cum, -target, side="left")
        if hit < len(cum):
            return int(start + hit)
        acc = float(cum[-1])
        start, size = stop, size * 2
    return BEYOND_HORIZON
