"""Master templates and multi near-collisions.

A template is an ``(k, eps)``-master template for a database if it lies
within ``eps`` of ``k`` distinct enrolled templates. Production functions
return bounds; the exact probabilities are available only by brute force on
tiny spaces.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from .combinatorics import LogProb, ball_size, ball_volume, ball_volume_capped, intersection_measure, mp, to_mpf
from .errors import DomainError, ResourceError
from .metric import ProbabilityBounds, SystemParams, chain_bounds, weak_nc_validity


def _double_radius(p: SystemParams) -> Fraction:
    return ball_volume_capped(p.n, 2 * p.epsilon)


def full_master_template_bounds(p: SystemParams) -> ProbabilityBounds:
    """``V_eps^(N-1) <= P(some ball covers the whole database) <= V_2eps^(N-1)``."""
    lower = ball_volume(p.n, p.epsilon).log ** (p.N - 1)
    upper = LogProb.from_fraction(_double_radius(p)) ** (p.N - 1)
    return ProbabilityBounds(lower, upper, {})


def k_master_template_bounds(p: SystemParams, k: int) -> ProbabilityBounds:
    """Bounds on the expected number of covered-but-not-extendable ``k``-subsets.

    ``C(N,k) V_eps^(k-1) (1 - V_2eps)^(N-k)`` and
    ``C(N,k) V_2eps^(k-1) (1 - V_eps)^(N-k)``. With the ``C(N, k)`` factor the
    upper value can exceed 1; it is then flagged but not altered.
    """
    if not 2 <= k <= p.N:
        raise DomainError(f"k={k} outside [2, {p.N}]")
    v = ball_volume(p.n, p.epsilon).exact
    v2 = _double_radius(p)
    choose = LogProb.from_fraction(math.comb(p.N, k))
    lower = choose * LogProb.from_fraction(v) ** (k - 1) * LogProb.from_fraction(1 - v2) ** (p.N - k)
    upper = choose * LogProb.from_fraction(v2) ** (k - 1) * LogProb.from_fraction(1 - v) ** (p.N - k)
    return ProbabilityBounds(lower, upper, {"upper_at_most_one": upper <= 1})


def k_near_collision_probability(p: SystemParams, k: int) -> LogProb:
    """Probability that exactly ``k`` of the other ``N - 1`` templates fall in a given user's ball."""
    if not 0 <= k <= p.N - 1:
        raise DomainError(f"k={k} outside [0, {p.N - 1}]")
    v = to_mpf(ball_volume(p.n, p.epsilon).exact)
    rest = p.N - 1 - k
    if v == 1:
        return LogProb.one() if rest == 0 else LogProb.zero()
    if p.N < 10**6:
        log_choose = mp.log(math.comb(p.N - 1, k), 2)
    else:
        log_choose = (mp.loggamma(p.N) - mp.loggamma(k + 1) - mp.loggamma(rest + 1)) / mp.ln2
    log_value = log_choose + k * mp.log(v, 2) + rest * mp.log1p(-v) / mp.ln2
    return LogProb(log_value)


def disjoint_balls_probability_bounds(p: SystemParams) -> ProbabilityBounds:
    """Bounds on the probability that all N balls are pairwise disjoint.

    ``prod_{j=1}^{N} (1 - (j-1) V_2eps)`` below and
    ``prod_{j=2}^{N} (1 - (j-1) V_2eps + C(j-1, 2) I^{2eps}_{2eps+1})`` above.
    """
    radius = 2 * p.epsilon
    validity = weak_nc_validity(SystemParams(p.n, p.N, radius)) if radius <= p.n else {"double_radius_in_range": False}
    if p.N == 1:
        return ProbabilityBounds(LogProb.one(), LogProb.one(), validity)
    v2 = _double_radius(p)
    inter = intersection_measure(p.n, radius, radius + 1).exact if radius + 1 <= p.n else Fraction(0)
    low_sum, up_sum = chain_bounds(v2, inter, p.N, start=2)
    lower = LogProb.zero() if low_sum is None else LogProb(low_sum / mp.ln2)
    upper = LogProb.one() if up_sum is None or up_sum > 0 else LogProb(up_sum / mp.ln2)
    return ProbabilityBounds(lower, upper, validity)


def ball_masks(n: int, epsilon: int) -> list:
    """Ball around each point of Z_2^n as a bitset over the 2^n points."""
    size = 1 << n
    offsets = [x for x in range(size) if x.bit_count() <= epsilon]
    masks = []
    for center in range(size):
        m = 0
        for off in offsets:
            m |= 1 << (center ^ off)
        masks.append(m)
    return masks


def master_probability_bruteforce(n: int, size: int, epsilon: int) -> Fraction:
    """Exact ``P(some ball covers the database)`` by scanning all databases with ``v_1 = 0``."""
    if n > 10 or (1 << n) ** (size - 1) > 2 * 10**7:
        raise ResourceError("brute force limited to tiny n and N")
    masks = ball_masks(n, epsilon)
    covered = 0
    for rest in itertools.product(range(1 << n), repeat=size - 1):
        acc = masks[0]
        for v in rest:
            acc &= masks[v]
            if not acc:
                break
        covered += acc != 0
    return Fraction(covered, (1 << n) ** (size - 1))


def master_probability_cover_sum(n: int, size: int, epsilon: int) -> Fraction:
    """Same probability via ``2^(-n(N-1)) sum_{B inside a fixed ball} 1/|cap of balls around B|``."""
    if n > 10 or ball_size(n, epsilon) ** size > 2 * 10**7:
        raise ResourceError("cover sum limited to tiny n and N")
    masks = ball_masks(n, epsilon)
    inside = [x for x in range(1 << n) if x.bit_count() <= epsilon]
    total = Fraction(0)
    for db in itertools.product(inside, repeat=size):
        acc = masks[db[0]]
        for v in db[1:]:
            acc &= masks[v]
        total += Fraction(1, acc.bit_count())
    return total / (1 << (n * (size - 1)))


def count_k_master_subsets(n: int, templates, epsilon: int, k: int, masks=None) -> int:
    """Number of ``k``-subsets that some ball covers while no ball covering them reaches another template."""
    masks = masks if masks is not None else ball_masks(n, epsilon)
    count = 0
    everyone = list(range(len(templates)))
    for subset in itertools.combinations(everyone, k):
        centers = masks[templates[subset[0]]]
        for i in subset[1:]:
            centers &= masks[templates[i]]
        if not centers:
            continue
        reach = 0
        c = centers
        while c:
            low = c & -c
            reach |= masks[low.bit_length() - 1]
            c ^= low
        others = (templates[i] for i in everyone if i not in subset)
        if not any((reach >> t) & 1 for t in others):
            count += 1
    return count
