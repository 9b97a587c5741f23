"""Exact and log-domain combinatorics on the binary Hamming space.

Volumes and intersection measures are computed exactly with Python integers
and :class:`fractions.Fraction`; the entropy-based estimates are kept as a
separate, explicitly named API. Probabilities that are too small for doubles
travel as :class:`LogProb` (log base 2 carried at 160 bits).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Union

from mpmath.ctx_mp import MPContext

from .errors import DomainError, PreconditionError

# Private context: the precision is set once here and never mutated, so the
# context can be shared between threads.
mp = MPContext()
mp.prec = 160

Real = Union[int, float, Fraction]


def to_mpf(x) -> "mp.mpf":
    """Convert int/float/Fraction/mpf to an mpf without going through float."""
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / x.denominator
    return mp.mpf(x)


@dataclass(frozen=True)
class LogProb:
    """A nonnegative quantity stored as its base-2 logarithm.

    Mostly used for probabilities (``log2_value <= 0``) but also for counts
    and trial numbers. ``is_zero`` marks an exact zero, for which
    ``log2_value`` is ``-inf``.
    """

    log2_value: object
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "LogProb":
        return cls(mp.ninf, True)

    @classmethod
    def one(cls) -> "LogProb":
        return cls(mp.mpf(0))

    @classmethod
    def from_log2(cls, value) -> "LogProb":
        value = mp.mpf(value)
        if value == mp.ninf:
            return cls.zero()
        return cls(value)

    @classmethod
    def from_fraction(cls, q: Real) -> "LogProb":
        q = Fraction(q)
        if q < 0:
            raise DomainError(f"negative value {q} has no logarithm")
        if q == 0:
            return cls.zero()
        return cls(mp.log(q.numerator, 2) - mp.log(q.denominator, 2))

    @classmethod
    def from_value(cls, x) -> "LogProb":
        if isinstance(x, LogProb):
            return x
        if isinstance(x, (int, Fraction)):
            return cls.from_fraction(x)
        x = mp.mpf(x)
        if x < 0:
            raise DomainError(f"negative value {x} has no logarithm")
        if x == 0:
            return cls.zero()
        return cls(mp.log(x, 2))

    @property
    def log2(self) -> float:
        return float("-inf") if self.is_zero else float(self.log2_value)

    def to_mpf(self):
        return mp.mpf(0) if self.is_zero else mp.power(2, self.log2_value)

    def __float__(self) -> float:
        return float(self.to_mpf())

    def __mul__(self, other) -> "LogProb":
        other = LogProb.from_value(other)
        if self.is_zero or other.is_zero:
            return LogProb.zero()
        return LogProb(self.log2_value + other.log2_value)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogProb":
        other = LogProb.from_value(other)
        if other.is_zero:
            raise ZeroDivisionError("division by an exact zero LogProb")
        if self.is_zero:
            return self
        return LogProb(self.log2_value - other.log2_value)

    def __pow__(self, exponent) -> "LogProb":
        exponent = to_mpf(exponent)
        if self.is_zero:
            if exponent == 0:
                return LogProb.one()
            return self
        return LogProb(self.log2_value * exponent)

    def __add__(self, other) -> "LogProb":
        other = LogProb.from_value(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        hi, lo = max(self.log2_value, other.log2_value), min(self.log2_value, other.log2_value)
        return LogProb(hi + mp.log(1 + mp.power(2, lo - hi), 2))

    __radd__ = __add__

    def complement(self) -> "LogProb":
        """Return ``1 - p``; requires ``p <= 1``."""
        if self.is_zero:
            return LogProb.one()
        if self.log2_value > 0:
            raise DomainError("complement of a value above 1")
        # log2(1 - 2^l) = log(-expm1(l ln2)) / ln2
        t = -mp.expm1(self.log2_value * mp.ln2)
        if t == 0:
            return LogProb.zero()
        return LogProb(mp.log(t, 2))

    def _key(self):
        return mp.ninf if self.is_zero else self.log2_value

    def __lt__(self, other) -> bool:
        return self._key() < LogProb.from_value(other)._key()

    def __le__(self, other) -> bool:
        return self._key() <= LogProb.from_value(other)._key()

    def __gt__(self, other) -> bool:
        return self._key() > LogProb.from_value(other)._key()

    def __ge__(self, other) -> bool:
        return self._key() >= LogProb.from_value(other)._key()

    def __repr__(self) -> str:
        if self.is_zero:
            return "LogProb(0)"
        return f"LogProb(2^{float(self.log2_value):.6g})"


class Measure(NamedTuple):
    """Exact rational value with its log-domain twin."""

    exact: Fraction
    log: LogProb

    @classmethod
    def of(cls, q: Fraction) -> "Measure":
        return cls(q, LogProb.from_fraction(q))


def one_minus_power(x, exponent) -> LogProb:
    """``1 - (1 - x)**exponent`` without cancellation, for ``0 <= x <= 1``.

    The exponent may be huge (10**15 pairs and beyond).
    """
    x = x.to_mpf() if isinstance(x, LogProb) else to_mpf(x)
    if x < 0 or x > 1:
        raise DomainError(f"x={x} outside [0, 1]")
    exponent = to_mpf(exponent)
    if exponent == 0 or x == 0:
        return LogProb.zero()
    if x == 1:
        return LogProb.one()
    return LogProb.from_value(-mp.expm1(exponent * mp.log1p(-x)))


def power_of_complement(x, exponent) -> LogProb:
    """``(1 - x)**exponent`` in the log domain."""
    x = x.to_mpf() if isinstance(x, LogProb) else to_mpf(x)
    if x < 0 or x > 1:
        raise DomainError(f"x={x} outside [0, 1]")
    exponent = to_mpf(exponent)
    if exponent == 0:
        return LogProb.one()
    if x == 1:
        return LogProb.zero()
    return LogProb(exponent * mp.log1p(-x) / mp.ln2)


def hamming(u: int, v: int) -> int:
    return (u ^ v).bit_count()


def binomial(n: int, k: int) -> int:
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"binomial({n}, {k}) undefined: need 0 <= k <= n")
    return math.comb(n, k)


@lru_cache(maxsize=4096)
def ball_size(n: int, epsilon: int) -> int:
    """Number of points of Z_2^n within Hamming distance ``epsilon`` of a center."""
    if n < 1:
        raise DomainError(f"dimension n={n} must be >= 1")
    if epsilon < 0 or epsilon > n:
        raise DomainError(f"radius {epsilon} outside [0, {n}]")
    return sum(math.comb(n, k) for k in range(epsilon + 1))


def ball_volume(n: int, epsilon: int) -> Measure:
    """Measure of a Hamming ball, ``2^-n * sum_{k<=eps} C(n, k)``."""
    return Measure.of(Fraction(ball_size(n, epsilon), 1 << n))


def ball_volume_capped(n: int, radius: int) -> Fraction:
    """Exact ball measure with the radius capped at ``n`` (radius ``2*eps`` may exceed it)."""
    return Fraction(ball_size(n, min(radius, n)), 1 << n)


def binary_entropy(x: float) -> float:
    if x < 0 or x > 1:
        raise DomainError(f"entropy argument {x} outside [0, 1]")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def entropy_volume_bounds(n: int, k: int) -> tuple[LogProb, LogProb]:
    """Entropy bracket on the partial binomial sum ``sum_{j<=k} C(n, j)``.

    Returns ``(lower, upper)`` with ``lower = n h(k/n) - 1/2 log2(8k(1-k/n))``
    and ``upper = n h(k/n)``. At ``k = 0`` the sum is 1 and both are exact.
    """
    if n < 1 or k < 0 or 2 * k >= n:
        raise PreconditionError(f"entropy bounds need k/n < 1/2, got k={k}, n={n}")
    if k == 0:
        return LogProb.one(), LogProb.one()
    x = mp.mpf(k) / n
    upper = n * _entropy_mp(x)
    lower = upper - mp.log(8 * k * (1 - x), 2) / 2
    return LogProb(lower), LogProb(upper)


def _entropy_mp(x):
    if x == 0 or x == 1:
        return mp.mpf(0)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


@lru_cache(maxsize=8192)
def intersection_size(n: int, epsilon: int, d: int) -> int:
    """Points within ``epsilon`` of two centers at Hamming distance ``d``."""
    if d < 0 or d > n:
        raise DomainError(f"center distance {d} outside [0, {n}]")
    if epsilon < 0:
        raise DomainError(f"negative radius {epsilon}")
    total = 0
    for k in range(max(0, d - epsilon), min(epsilon, d) + 1):
        top = min(epsilon - k, epsilon - d + k)
        inner = sum(math.comb(n - d, i) for i in range(top + 1))
        total += math.comb(d, k) * inner
    return total


def intersection_measure(n: int, epsilon: int, d: int) -> Measure:
    return Measure.of(Fraction(intersection_size(n, epsilon, d), 1 << n))


def _check_intersection_bound_domain(n: int, epsilon: int, d: int) -> None:
    if d < 0 or d > 2 * epsilon or d > n:
        raise PreconditionError(f"need 0 <= d <= 2*eps (and d <= n), got d={d}, eps={epsilon}")
    if 2 * epsilon >= n:
        raise PreconditionError(f"need eps/n < 1/2, got eps={epsilon}, n={n}")


def intersection_upper_bound(n: int, epsilon: int, d: int) -> tuple[LogProb, LogProb]:
    """The two entropy upper bounds on the two-ball intersection measure.

    First ``2^(n(h((eps - ceil(d/2))/n) - 1) + d)``, then the looser
    ``2^(n(h(eps/n) - 1) + d) * (x/(1-x))^ceil(d/2)`` with ``x = eps/n``.
    """
    _check_intersection_bound_domain(n, epsilon, d)
    half = -(-d // 2)
    first = n * (_entropy_mp(mp.mpf(epsilon - half) / n) - 1) + d
    x = mp.mpf(epsilon) / n
    second = n * (_entropy_mp(x) - 1) + d + half * mp.log(x / (1 - x), 2)
    return LogProb(first), LogProb(second)


class RegimeBound(NamedTuple):
    bound: LogProb
    regime: str


def intersection_lower_bounds(n: int, epsilon: int, d: int) -> RegimeBound:
    """Regime-dependent lower bound on the two-ball intersection measure.

    Regimes: ``d < eps``; ``eps <= d < 3eps/2``; ``3eps/2 < d <= 2eps``. The
    boundary ``d = 3eps/2`` falls back to ``2^-n``. At ``d = eps + 1`` the
    result is at least ``2^-n (2^eps - 1)``.
    """
    _check_intersection_bound_domain(n, epsilon, d)
    if d < epsilon:
        x = mp.mpf(epsilon - d) / (n - d)
        log2 = (d - n) * (1 - _entropy_mp(x)) - mp.log(8 * (epsilon - d) * mp.mpf(n - epsilon) / (n - d), 2) / 2
        result = RegimeBound(LogProb(log2), "d<eps")
    elif 2 * d < 3 * epsilon:
        # sum_{k=d-eps}^{eps} C(eps, k) >= 2^eps - 2^(eps h((d-eps)/eps))
        tail = mp.power(2, epsilon * _entropy_mp(mp.mpf(d - epsilon) / epsilon))
        bound = LogProb.from_value(max(mp.power(2, epsilon) - tail, 0)) * LogProb(mp.mpf(-n))
        result = RegimeBound(bound, "eps<=d<3eps/2")
    elif 2 * d > 3 * epsilon:
        m = 2 * epsilon - d
        if m == 0:
            result = RegimeBound(LogProb(mp.mpf(-n)), "3eps/2<d<=2eps")
        else:
            y = mp.mpf(m) / epsilon
            log2 = -n + epsilon * _entropy_mp(y) - mp.log(8 * m * (1 - y), 2) / 2
            result = RegimeBound(LogProb(log2), "3eps/2<d<=2eps")
    else:
        result = RegimeBound(LogProb(mp.mpf(-n)), "d=3eps/2")
    if d == epsilon + 1 and epsilon >= 1:
        special = LogProb.from_fraction(Fraction((1 << epsilon) - 1, 1 << n))
        if special > result.bound:
            result = RegimeBound(special, result.regime + "|eps+1")
    return result


_stirling_rows: list[list[int]] = [[1]]
_stirling_lock = threading.Lock()


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind via the additive recurrence (memoised)."""
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"stirling2({n}, {k}) undefined: need 0 <= k <= n")
    with _stirling_lock:
        while len(_stirling_rows) <= n:
            prev = _stirling_rows[-1]
            m = len(_stirling_rows)
            row = [0] * (m + 1)
            for j in range(1, m + 1):
                left = prev[j - 1]
                right = prev[j] if j < len(prev) else 0
                row[j] = j * right + left
            _stirling_rows.append(row)
        return _stirling_rows[n][k]
