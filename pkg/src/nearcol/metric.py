"""Median-trial bounds for outsider and insider attackers on a uniform template database.

Three families are available for every bound:

``exact``
    uses the exact ball volume and exact two-ball intersection (default);
``entropy``
    the entropy-based chain with all constants kept, always looser than ``exact``;
``asymptotic``
    the Big-Omega/Big-O exponents with constants dropped, as used for the
    published comparison tables.

All values are log2 trial counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .combinatorics import LogProb, ball_volume, binary_entropy, intersection_measure, mp, one_minus_power, to_mpf
from .errors import DomainError
from .sentinels import INFEASIBLE, Sentinel

LOG2_LN2 = math.log2(math.log(2))
FAMILIES = ("exact", "entropy", "asymptotic")


@dataclass(frozen=True)
class SystemParams:
    n: int
    N: int
    epsilon: int
    alpha: Optional[float] = None
    ell: Optional[int] = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n={self.n} must be >= 1")
        if self.N < 1:
            raise DomainError(f"N={self.N} must be >= 1")
        if not 0 <= self.epsilon <= self.n:
            raise DomainError(f"epsilon={self.epsilon} outside [0, {self.n}]")
        if self.ell is not None and not 1 <= self.ell <= self.N:
            raise DomainError(f"ell={self.ell} outside [1, {self.N}]")

    @property
    def ratio(self) -> float:
        return self.epsilon / self.n

    @property
    def entropy(self) -> float:
        return binary_entropy(self.ratio)

    @property
    def log2_volume(self) -> float:
        return ball_volume(self.n, self.epsilon).log.log2

    @property
    def redundancy(self) -> float:
        """``n (1 - h(eps/n))``."""
        return self.n * (1 - self.entropy)


@dataclass(frozen=True)
class TrialBound:
    """Raw lower/upper log2 trial counts plus the checks that back them.

    ``upper_log2`` is ``None`` when the upper bound is undefined (for
    instance a nonpositive denominator). ``lower``/``upper`` give the values
    clipped at 0.
    """

    lower_log2: float
    upper_log2: Optional[float]
    family: str
    rounding: str = "floor"
    validity: dict = field(default_factory=dict)

    @property
    def lower(self) -> float:
        return max(self.lower_log2, 0.0)

    @property
    def upper(self) -> Optional[float]:
        return None if self.upper_log2 is None else max(self.upper_log2, 0.0)

    @property
    def clipped(self) -> bool:
        return self.lower_log2 < 0 or (self.upper_log2 is not None and self.upper_log2 < 0)

    @property
    def valid(self) -> bool:
        return all(self.validity.values())

    def _round(self, x: float) -> int:
        if self.rounding == "nearest":
            return math.floor(x + 0.5)
        return math.floor(x)

    def rounded(self) -> tuple[int, Optional[int]]:
        up = None if self.upper is None else self._round(self.upper)
        return self._round(self.lower), up


def _check_family(family: str) -> None:
    if family not in FAMILIES:
        raise DomainError(f"unknown bound family {family!r}; choose from {FAMILIES}")


def _entropy_chain_term(p: SystemParams) -> float:
    """``1/2 log2(8 eps (1 - eps/n))``, the entropy bracket width."""
    return 0.5 * math.log2(8 * p.epsilon * (1 - p.ratio))


def outsider_validity(p: SystemParams) -> dict:
    x = p.ratio
    return {
        "eps_over_n_le_half": 2 * p.epsilon <= p.n,
        "outsider_size_condition": x < 0.5 and math.log2(p.N) < p.redundancy - 1,
    }


def outsider_bounds(p: SystemParams, family: str = "exact") -> TrialBound:
    _check_family(family)
    log_n = math.log2(p.N)
    validity = outsider_validity(p)
    if family == "exact":
        lv = p.log2_volume
        lower, upper = LOG2_LN2 - 1 - log_n - lv, LOG2_LN2 - log_n - lv
    elif family == "entropy":
        lower = LOG2_LN2 - 1 + p.redundancy - log_n
        upper = LOG2_LN2 + p.redundancy + _entropy_chain_term(p) - log_n if p.epsilon else None
    else:
        lower = p.redundancy - log_n
        upper = p.redundancy + 0.5 * math.log2(p.epsilon * (1 - p.ratio)) - log_n if p.epsilon else None
    return TrialBound(lower, upper, family, "floor", validity)


def outsider_bounds_distinct(p: SystemParams, family: str = "exact") -> TrialBound:
    """Outsider bounds when enrollment rejects duplicate templates."""
    base = outsider_bounds(p, family)
    scale = 2.0 ** -(p.n + 1)
    lower = base.lower_log2 - math.log1p(6 * (p.N - 1) * scale) / math.log(2)
    upper = None
    if base.upper_log2 is not None:
        upper = base.upper_log2 - math.log1p((p.N - 1) * scale) / math.log(2)
    return TrialBound(lower, upper, family, base.rounding, base.validity)


def geometric_median_log2(success: LogProb) -> float:
    """log2 of ``-ln 2 / ln(1 - p)``, the continuous geometric median."""
    q = success.to_mpf()
    return float(mp.log(-mp.ln2 / mp.log1p(-q), 2))


def outsider_median_exact(p: SystemParams) -> float:
    """log2 of the geometric median for per-trial success ``1 - (1 - V)^N``."""
    return geometric_median_log2(one_minus_power(ball_volume(p.n, p.epsilon).exact, p.N))


def strong_nc_probability(p: SystemParams) -> LogProb:
    """Probability that a given user's ball contains one of the other ``N - 1`` templates."""
    return one_minus_power(ball_volume(p.n, p.epsilon).exact, p.N - 1)


def _intersection_next(p: SystemParams) -> Fraction:
    if p.epsilon + 1 > p.n:
        return Fraction(0)
    return intersection_measure(p.n, p.epsilon, p.epsilon + 1).exact


def n_max(p: SystemParams) -> float:
    """Size below which the pairwise-corrected lower bound stays positive."""
    x = p.ratio
    if p.epsilon == 0 or x >= 0.5:
        return math.inf if p.epsilon == 0 else 0.0
    c = -(-(p.epsilon + 1) // 2)
    log2_term = -p.epsilon - _entropy_chain_term(p) + c * math.log2((1 - x) / x)
    return 1 + 2.0 ** log2_term if log2_term < 1000 else math.inf


def weak_nc_validity(p: SystemParams) -> dict:
    x = p.ratio
    half = x < 0.5
    upper_ok = half and math.log2(p.N) < p.redundancy
    nmax_ok = half and p.N < n_max(p)
    below_one = half and p.n * (1 - 2 * p.entropy) > 2 * math.log2(3) - p.epsilon
    return {
        "eps_over_n_lt_half": half,
        "volume_sum_below_one": upper_ok,
        "below_n_max": nmax_ok,
        "lower_below_one": below_one,
        "monotone_regime": nmax_ok and below_one,
    }


@dataclass(frozen=True)
class ProbabilityBounds:
    lower: LogProb
    upper: LogProb
    validity: dict = field(default_factory=dict)


def _log_product(slope, curvature, count: int, start: int = 1, chunk: int = 1 << 20):
    """Natural log of ``prod_{j=start}^{count} (1 - (j-1) slope + C(j-1, 2) curvature)``.

    Exact-rational inputs are evaluated at 160 bits for ``count`` up to
    ``2^15`` and in float64 chunks beyond. Returns ``None`` if some factor is
    nonpositive (the bound is then uninformative).
    """
    if count - start < 1 << 15:
        slope, curvature = to_mpf(slope), to_mpf(curvature)
        terms = []
        for j in range(start - 1, count):
            t = -j * slope + mp.mpf(j * (j - 1)) / 2 * curvature
            if t <= -1:
                return None
            terms.append(mp.log1p(t))
        return mp.fsum(terms)
    slope, curvature = float(slope), float(curvature)
    total = 0.0
    for lo in range(start - 1, count, chunk):
        j = np.arange(lo, min(lo + chunk, count), dtype=np.float64)
        term = -j * slope + j * (j - 1) / 2 * curvature
        if np.any(term <= -1):
            return None
        total += float(np.sum(np.log1p(term)))
    return mp.mpf(total)


def chain_bounds(slope: Fraction, curvature: Fraction, count: int, start: int = 1):
    """``(prod without curvature, prod with curvature)`` as log-domain pairs.

    Each entry is ``(log_product or None)``; helpers for the weak-collision
    and disjoint-ball chain-rule bounds.
    """
    return _log_product(slope, 0, count, start), _log_product(slope, curvature, count, start)


def weak_nc_probability_bounds(p: SystemParams) -> ProbabilityBounds:
    """Bounds on the probability that some pair of the N templates is within epsilon.

    ``upper = 1 - prod_j (1 - (j-1) V)`` and
    ``lower = 1 - prod_j (1 - (j-1) V + C(j-1, 2) I_{eps+1})``. Factors that
    turn nonpositive make the bound trivial (1 for the upper, 0 for the
    lower); that is reported in ``validity``.
    """
    validity = weak_nc_validity(p)
    if p.N == 1:
        return ProbabilityBounds(LogProb.zero(), LogProb.zero(), validity)
    up_sum, lo_sum = chain_bounds(ball_volume(p.n, p.epsilon).exact, _intersection_next(p), p.N)
    upper = LogProb.one() if up_sum is None else LogProb.from_value(-mp.expm1(up_sum))
    if lo_sum is None or lo_sum > 0:
        lower = LogProb.zero()
    else:
        lower = LogProb.from_value(-mp.expm1(lo_sum))
    validity = dict(validity, upper_informative=up_sum is not None,
                    lower_informative=lo_sum is not None and lo_sum <= 0)
    return ProbabilityBounds(lower, upper, validity)


def insider_alpha_min(p: SystemParams) -> Optional[float]:
    """Smallest slack exponent allowed by the insider size condition, or ``None``.

    The condition reads ``t >= 2^(-n alpha)`` with
    ``t = 1/sqrt(8 eps (1-x)) - (N-2) 2^eps (x/(1-x))^ceil((eps+1)/2)``.
    """
    t = _insider_entropy_denominator(p)
    if t is None or t <= 0:
        return None
    alpha = max(-math.log2(t) / p.n, 0.0)
    if alpha >= p.entropy:
        return None
    return alpha


def _insider_entropy_denominator(p: SystemParams) -> Optional[float]:
    x = p.ratio
    if p.epsilon == 0 or x >= 0.5:
        return None
    c = -(-(p.epsilon + 1) // 2)
    correction = (p.N - 2) * 2.0 ** (p.epsilon + c * math.log2(x / (1 - x)))
    return 2.0 ** -_entropy_chain_term(p) - correction


def _insider(p: SystemParams, family: str, attackers: int) -> TrialBound:
    _check_family(family)
    if p.N < 2:
        raise DomainError("insider attacks need at least two users")
    log_n, log_n1, log_l = math.log2(p.N), math.log2(p.N - 1), math.log2(attackers)
    validity = {"eps_over_n_le_half": 2 * p.epsilon <= p.n}
    rounding = "floor"
    if family == "exact":
        v = ball_volume(p.n, p.epsilon).exact
        lower = LOG2_LN2 - p.log2_volume - log_l - log_n - log_n1
        denom = v - Fraction(p.N - 2, 2) * _intersection_next(p)
        validity["denominator_positive"] = denom > 0
        upper = LOG2_LN2 - log_l - log_n1 - LogProb.from_fraction(denom).log2 if denom > 0 else None
    elif family == "entropy":
        lower = LOG2_LN2 + p.redundancy - log_l - log_n - log_n1
        if p.alpha is not None:
            t = _insider_entropy_denominator(p)
            validity["alpha_below_entropy"] = p.alpha < p.entropy
            validity["size_condition"] = t is not None and t >= 2.0 ** (-p.n * p.alpha)
            upper = LOG2_LN2 + p.redundancy + p.n * p.alpha - log_l - log_n1
        else:
            t = _insider_entropy_denominator(p)
            validity["denominator_positive"] = t is not None and t > 0
            upper = LOG2_LN2 + p.redundancy - log_l - log_n1 - math.log2(t) if t and t > 0 else None
    else:
        rounding = "nearest"
        alpha = p.alpha or 0.0
        lower = p.redundancy - log_l - 2 * log_n
        upper = p.redundancy + p.n * alpha - log_l - log_n
    return TrialBound(lower, upper, family, rounding, validity)


def insider_bounds(p: SystemParams, family: str = "exact") -> TrialBound:
    """Median rounds until some enrolled user impersonates another (all N attack)."""
    return _insider(p, family, p.N)


def insider_bounds_subset(p: SystemParams, family: str = "exact") -> TrialBound:
    """Same as :func:`insider_bounds` with only ``p.ell`` attacking users."""
    if p.ell is None:
        raise DomainError("insider_bounds_subset needs ell")
    return _insider(p, family, p.ell)


def insider_round_probability_bounds(p: SystemParams, attackers: Optional[int] = None) -> ProbabilityBounds:
    """Bounds on the success probability of one insider round, given no enrolled collision.

    For any collision-free database an attacker's fresh template lands in the
    union of the other ``N - 1`` balls with probability in
    ``[(N-1) V - C(N-1, 2) I_{eps+1}, (N-1) V]``; attackers draw
    independently, so a round succeeds with probability between
    ``1 - (1 - low)^l`` and ``1 - (1 - high)^l``.
    """
    attackers = p.N if attackers is None else attackers
    if not 1 <= attackers <= p.N:
        raise DomainError(f"attackers={attackers} outside [1, {p.N}]")
    v = ball_volume(p.n, p.epsilon).exact
    others = p.N - 1
    high = min(others * v, Fraction(1))
    low = max(others * v - Fraction(others * (others - 1), 2) * _intersection_next(p), Fraction(0))
    return ProbabilityBounds(one_minus_power(low, attackers), one_minus_power(high, attackers),
                             {"lower_informative": low > 0, "upper_informative": high < 1})


@dataclass(frozen=True)
class SecurityScores:
    s1: float
    s2: float
    s3: float
    validity: dict = field(default_factory=dict)

    def rounded(self) -> tuple[float, int, int]:
        return round(self.s1, 4), math.floor(self.s2 + 0.5), math.floor(self.s3 + 0.5)


def passive_score(p: SystemParams) -> float:
    """S1: one minus the upper bound on the weak near-collision probability."""
    return max(0.0, 1.0 - float(weak_nc_probability_bounds(p).upper))


def security_scores(p: SystemParams, family: str = "asymptotic") -> SecurityScores:
    """S1 from the weak-collision upper bound; S2/S3 are lower bounds minus 128 bits."""
    out = outsider_bounds(p, family)
    ins = insider_bounds(p, family)
    validity = {**{f"outsider_{k}": v for k, v in out.validity.items()},
                **{f"insider_{k}": v for k, v in ins.validity.items()}}
    return SecurityScores(passive_score(p), out.lower_log2 - 128, ins.lower_log2 - 128, validity)


def robustness_threshold(free: str, *, n: Optional[int] = None, N: Optional[int] = None,
                         epsilon: Optional[int] = None, limit: int = 1 << 20) -> Union[int, Sentinel]:
    """Extreme value of the free parameter keeping S1 >= 1/2.

    ``free="epsilon"`` returns the largest epsilon, ``"N"`` the largest N and
    ``"n"`` the smallest n. S1 is monotone in each, so a bisection suffices.
    """
    def ok(**kw) -> bool:
        return passive_score(SystemParams(**kw)) >= 0.5

    if free == "epsilon":
        lo, hi = 0, n
        if not ok(n=n, N=N, epsilon=0):
            return INFEASIBLE
        if ok(n=n, N=N, epsilon=n):
            return n
        while hi - lo > 1:  # ok(lo), not ok(hi)
            mid = (lo + hi) // 2
            lo, hi = (mid, hi) if ok(n=n, N=N, epsilon=mid) else (lo, mid)
        return lo
    if free == "N":
        if not ok(n=n, N=1, epsilon=epsilon):
            return INFEASIBLE
        lo, hi = 1, 2
        while ok(n=n, N=hi, epsilon=epsilon):
            lo, hi = hi, hi * 2
            if hi > limit:
                return INFEASIBLE
        while hi - lo > 1:
            mid = (lo + hi) // 2
            lo, hi = (mid, hi) if ok(n=n, N=mid, epsilon=epsilon) else (lo, mid)
        return lo
    if free == "n":
        lo, hi = max(epsilon, 1), max(epsilon, 1)
        if ok(n=hi, N=N, epsilon=epsilon):
            return hi
        while not ok(n=hi, N=N, epsilon=epsilon):
            lo, hi = hi, hi * 2
            if hi > limit:
                return INFEASIBLE
        while hi - lo > 1:  # not ok(lo), ok(hi)
            mid = (lo + hi) // 2
            lo, hi = (lo, mid) if ok(n=mid, N=N, epsilon=epsilon) else (mid, hi)
        return hi
    raise DomainError(f"free parameter must be 'epsilon', 'N' or 'n', not {free!r}")
