"""Attack complexity and near-collision estimates driven by published accuracy rates.

All trial counts are returned as log2 values. The printed (statement) form
omits the ``log2(ln 2)`` constant of the geometric median; the constant is
available through :meth:`Bound.median_bracket`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .combinatorics import LogProb, one_minus_power
from .errors import ConsistencyError, DomainError, PreconditionError
from .sentinels import UNBOUNDED, Sentinel

LOG2_LN2 = math.log2(math.log(2))


@dataclass(frozen=True)
class AccuracyRates:
    fmr: Optional[float] = None
    fnmr: Optional[float] = None
    fta: Optional[float] = None
    fpir: Optional[float] = None
    far: Optional[float] = None
    frr: Optional[float] = None

    def __post_init__(self):
        for name in ("fmr", "fnmr", "fta", "fpir", "far", "frr"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise DomainError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class Bound:
    """Lower/upper log2 trial counts with the convention used when printing."""

    lower_log2: float
    upper_log2: float
    rounding: str = "floor"
    median_log2: Optional[float] = None

    def rounded(self) -> tuple[float, float]:
        if self.rounding == "floor":
            return math.floor(self.lower_log2), math.floor(self.upper_log2)
        if self.rounding == "nearest":
            return round(self.lower_log2), round(self.upper_log2)
        return self.lower_log2, self.upper_log2

    def median_bracket(self) -> tuple[float, float]:
        """Bracket on the log2 geometric median, constant included."""
        return self.lower_log2 + LOG2_LN2, self.upper_log2 + LOG2_LN2


def _close(a: float, b: float, rel: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-15)


def derive_rates(rates: AccuracyRates) -> AccuracyRates:
    """Fill FAR and FRR from FMR, FNMR and FTA; check them if already given."""
    out = rates
    fta = rates.fta if rates.fta is not None else None
    if rates.fmr is not None and fta is not None:
        far = rates.fmr * (1 - fta)
        if rates.far is not None and not _close(rates.far, far):
            raise ConsistencyError(f"far={rates.far} but fmr*(1-fta)={far}")
        out = replace(out, far=far)
    elif rates.far is not None and fta is not None and rates.fmr is None and fta < 1:
        out = replace(out, fmr=rates.far / (1 - fta))
    if rates.fnmr is not None and fta is not None:
        frr = fta + rates.fnmr * (1 - fta)
        if rates.frr is not None and not _close(rates.frr, frr):
            raise ConsistencyError(f"frr={rates.frr} but fta+fnmr*(1-fta)={frr}")
        out = replace(out, frr=frr)
    return out


def outsider_trials_fmr(per_user_fmr: Sequence[float]) -> Union[Bound, Sentinel]:
    """Median trials for an outsider facing users with the given FMRs.

    ``lower = -log2(sum FMR_i (1 + FMR_i))``, ``upper = -log2(sum FMR_i)``.
    """
    rates = list(per_user_fmr)
    if not rates:
        raise DomainError("need at least one user")
    for f in rates:
        if f < 0:
            raise DomainError(f"FMR {f} is negative")
        if f > 0.5:
            raise PreconditionError(f"FMR {f} > 1/2: the log inequality does not hold")
    if any(f == 0 for f in rates):
        return UNBOUNDED
    s = math.fsum(rates)
    s2 = math.fsum(f * (1 + f) for f in rates)
    # log(1-p) = sum log(1 - FMR_i); median = -ln2 / ln(1-p)
    log_miss = math.fsum(math.log1p(-f) for f in rates)
    median = math.log2(-math.log(2) / log_miss)
    return Bound(-math.log2(s2), -math.log2(s), "floor", median)


def outsider_trials_uniform(fmr: float, n_users: int) -> Union[Bound, Sentinel]:
    if n_users < 1:
        raise DomainError("need at least one user")
    if fmr == 0:
        return UNBOUNDED
    if fmr < 0:
        raise DomainError(f"FMR {fmr} is negative")
    if fmr > 0.5:
        raise PreconditionError(f"FMR {fmr} > 1/2")
    lower = -math.log2(fmr) - math.log2(1 + fmr) - math.log2(n_users)
    upper = -math.log2(fmr) - math.log2(n_users)
    median = math.log2(-math.log(2) / (n_users * math.log1p(-fmr)))
    return Bound(lower, upper, "floor", median)


def outsider_trials_fpir(fpir: float) -> Union[Bound, Sentinel]:
    if fpir < 0:
        raise DomainError(f"FPIR {fpir} is negative")
    if fpir == 0:
        return UNBOUNDED
    if fpir > 0.5:
        raise PreconditionError(f"FPIR {fpir} > 1/2")
    median = math.log2(-math.log(2) / math.log1p(-fpir))
    return Bound(-math.log2(fpir) - math.log2(1 + fpir), -math.log2(fpir), "floor", median)


def outsider_trials_far(per_user_far: Sequence[float], per_user_fta: Sequence[float]) -> Union[Bound, Sentinel]:
    """Same as :func:`outsider_trials_fmr` with ``FMR_i = FAR_i / (1 - FTA_i)``."""
    if len(per_user_far) != len(per_user_fta):
        raise DomainError("FAR and FTA lists differ in length")
    equivalent = []
    for far, fta in zip(per_user_far, per_user_fta):
        if fta >= 1:
            raise DomainError("FTA = 1: no sample is ever acquired")
        equivalent.append(far / (1 - fta))
    return outsider_trials_fmr(equivalent)


def near_collision_probability_fmr(fmr: float, n_users: int) -> LogProb:
    """``1 - (1 - FMR)^(N(N-1)/2)``: some pair of the N users falsely matches."""
    if n_users < 1:
        raise DomainError("need at least one user")
    if not 0 <= fmr <= 1:
        raise DomainError(f"FMR {fmr} outside [0, 1]")
    return one_minus_power(fmr, n_users * (n_users - 1) // 2)


def _check_lambda(fmr: float, lam: int) -> None:
    if lam < 2:
        raise DomainError(f"lambda={lam} must be >= 2")
    if not 0 <= fmr < 1:
        raise DomainError(f"FMR {fmr} outside [0, 1)")


def max_database_size(fmr: float, lam: int = 100) -> Union[int, Sentinel]:
    """Largest N whose near-collision probability stays below ``1/lam``.

    Closed form ``floor(1/2 (1 + sqrt(1 + 8 log2(1-1/lam) / log2(1-FMR))))``,
    then nudged by one if float rounding put it on the wrong side.
    """
    _check_lambda(fmr, lam)
    if fmr == 0:
        return UNBOUNDED
    ratio = math.log1p(-1 / lam) / math.log1p(-fmr)
    size = max(1, math.floor(0.5 * (1 + math.sqrt(1 + 8 * ratio))))
    threshold = LogProb.from_fraction(1) / lam
    while size > 1 and near_collision_probability_fmr(fmr, size) >= threshold:
        size -= 1
    while near_collision_probability_fmr(fmr, size + 1) < threshold:
        size += 1
    return size


def max_database_size_asymptotic(fmr: float, lam: int = 100) -> Union[float, Sentinel]:
    _check_lambda(fmr, lam)
    if fmr == 0:
        return UNBOUNDED
    return math.sqrt(2 / (lam * fmr))
