"""Monte Carlo attack simulators and brute-force collision oracles.

Stream rule: replica ``r`` of a run with master seed ``s`` draws from
``Philox(SeedSequence(s, spawn_key=(r,)))`` and consumes it in trial (or
round) order, in fixed block sizes. Outcomes therefore depend only on
``(s, r)``, never on how replicas are spread across workers.

Simulated templates are ``uint64`` words, so ``n <= 64`` (``n <= 62`` for the
urn, whose population must fit in an int64).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import networkx as nx
import numpy as np

from .ball_solver import TemplateDatabase, column_partition
from .errors import DomainError, ResourceError
from .master import ball_masks

MAX_BLOCK = 1 << 16
CLIQUE_BUDGET = 5000
REDRAW_ATTEMPTS = 10**5


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


def _draw(rng: np.random.Generator, n: int, shape) -> np.ndarray:
    if n == 64:
        return rng.integers(0, np.iinfo(np.uint64).max, size=shape, dtype=np.uint64, endpoint=True)
    return rng.integers(0, 1 << n, size=shape, dtype=np.uint64)


def _check_width(n: int, limit: int = 64) -> None:
    if not 1 <= n <= limit:
        raise DomainError(f"simulated templates need 1 <= n <= {limit}, got {n}")


def _pair_distances(templates: np.ndarray) -> np.ndarray:
    """Hamming distances between all templates along the last axis."""
    return np.bitwise_count(templates[..., :, None] ^ templates[..., None, :])


def _has_weak_nc(templates: np.ndarray, epsilon: int) -> np.ndarray:
    """Weak near-collision flag for each database along the last axis."""
    d = _pair_distances(templates)
    size = templates.shape[-1]
    d[..., np.arange(size), np.arange(size)] = 255
    return (d <= epsilon).any(axis=(-2, -1))


def _distinct_templates(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """Uniform templates, resampling duplicated entries until all differ."""
    t = _draw(rng, n, size)
    while True:
        _, first = np.unique(t, return_index=True)
        dup = np.setdiff1d(np.arange(size), first)
        if dup.size == 0:
            return t
        t[dup] = _draw(rng, n, dup.size)


def generate_database(n: int, size: int, seed: int, distinct: bool = False) -> TemplateDatabase:
    """``size`` independent uniform templates of ``n`` bits."""
    if size < 1:
        raise DomainError("database size must be >= 1")
    if distinct and size > (1 << n):
        raise DomainError(f"cannot draw {size} distinct templates from 2^{n}")
    rng = replica_rng(seed, 0)
    if n <= 64:
        t = _distinct_templates(rng, n, size) if distinct else _draw(rng, n, size)
        return TemplateDatabase(n, tuple(int(x) for x in t), distinct)
    nbytes = (n + 7) // 8
    out: list = []
    seen: set = set()
    while len(out) < size:
        x = int.from_bytes(rng.bytes(nbytes), "big") >> (8 * nbytes - n)
        if distinct and x in seen:
            continue
        seen.add(x)
        out.append(x)
    return TemplateDatabase(n, tuple(out), distinct)


def wilson_interval(events: int, trials: int, sigmas: float = 3.0) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    f = events / trials
    z2 = sigmas * sigmas
    centre = (f + z2 / (2 * trials)) / (1 + z2 / trials)
    half = sigmas * math.sqrt(f * (1 - f) / trials + z2 / (4 * trials * trials)) / (1 + z2 / trials)
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SimulationReport:
    """Per-replica outcomes of one simulation run.

    ``outcomes`` holds a trial or round count (or a 0/1 event flag); censored
    replicas carry the cap. ``events / exposures`` is the empirical
    per-trial (or per-replica) success frequency.
    """

    kind: str
    params: dict
    seed: int
    outcomes: tuple
    censored: tuple
    events: int
    exposures: int
    extra: dict = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return len(self.outcomes)

    @property
    def uncensored(self) -> int:
        return self.replicas - sum(self.censored)

    @property
    def empirical_median(self) -> Optional[int]:
        """Lower sample median, reported only when more than half the replicas finished."""
        if 2 * self.uncensored <= self.replicas:
            return None
        finished = sorted(o for o, c in zip(self.outcomes, self.censored) if not c)
        return finished[(self.replicas + 1) // 2 - 1]

    def median_interval(self, sigmas: float = 3.0) -> Optional[tuple[int, int]]:
        """Distribution-free interval for the population median from order statistics.

        The number of samples below the median is Binomial(R, 1/2); the
        interval spans the order statistics ``R/2 -+ sigmas sqrt(R)/2``.
        Censored replicas sort last; ``None`` if the upper end is censored.
        """
        r = self.replicas
        half = sigmas * math.sqrt(r) / 2
        lo = max(0, math.floor(r / 2 - half) - 1)
        hi = min(r - 1, math.ceil(r / 2 + half))
        ordered = sorted((c, o) for o, c in zip(self.outcomes, self.censored))
        if ordered[hi][0]:
            return None
        return ordered[lo][1], ordered[hi][1]

    def median_consistent(self, lower: float, upper: float, sigmas: float = 3.0) -> bool:
        """Whether the median interval meets ``[lower, ceil(upper)]`` (trial counts, not log2)."""
        interval = self.median_interval(sigmas)
        if interval is None:
            return False
        return interval[0] <= math.ceil(upper) and interval[1] >= math.floor(lower)

    @property
    def empirical_mean(self) -> Optional[float]:
        finished = [o for o, c in zip(self.outcomes, self.censored) if not c]
        return math.fsum(finished) / len(finished) if finished else None

    @property
    def empirical_frequency(self) -> float:
        return self.events / self.exposures if self.exposures else 0.0

    def frequency_interval(self, sigmas: float = 3.0) -> tuple[float, float]:
        """Wilson score interval at ``sigmas`` standard errors (nondegenerate at 0 and 1)."""
        return wilson_interval(self.events, self.exposures, sigmas)

    def summary(self) -> dict:
        lo, hi = self.frequency_interval()
        return {
            "replicas": self.replicas,
            "uncensored": self.uncensored,
            "empirical_median": self.empirical_median,
            "empirical_mean": self.empirical_mean,
            "empirical_frequency": self.empirical_frequency,
            "frequency_interval_3sigma": [lo, hi],
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["outcomes"] = list(self.outcomes)
        out["censored"] = list(self.censored)
        out["summary"] = self.summary()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replica", "outcome", "censored"])
        for i, (o, c) in enumerate(zip(self.outcomes, self.censored)):
            w.writerow([i, o, int(c)])
        return buf.getvalue()


# Per-replica kernels. Each returns (outcome, censored, auxiliary int).

def _outsider_replica(rng, n, size, epsilon, max_trials):
    db = _draw(rng, n, size)
    done, block = 0, 64
    while done < max_trials:
        b = min(block, max_trials - done)
        guesses = _draw(rng, n, b)
        hits = (np.bitwise_count(guesses[:, None] ^ db[None, :]) <= epsilon).any(axis=1)
        if hits.any():
            return done + int(np.argmax(hits)) + 1, False, 0
        done += b
        block = min(block * 2, MAX_BLOCK)
    return max_trials, True, 0


def _adaptive_replica(rng, n, success_states, kappa, max_trials):
    failures = (1 << n) - success_states
    done, block = 0, 64
    while done < max_trials:
        b = min(block, max_trials - done)
        j = np.arange(done, done + b, dtype=np.int64)  # failures so far
        left = np.maximum(failures - j * kappa, 0)
        draws = rng.integers(0, success_states + left, dtype=np.int64)
        hits = draws < success_states
        if hits.any():
            k = int(np.argmax(hits))
            return done + k + 1, False, int(left[k] == 0)
        done += b
        block = min(block * 2, MAX_BLOCK)
    return max_trials, True, 0


def _clean_databases(rng, n, size, epsilon, count):
    """``count`` databases without a weak near-collision, by rejection."""
    kept, attempts = [], 0
    need = count
    while need > 0:
        batch = _draw(rng, n, (max(need, 8), size))
        attempts += len(batch)
        good = batch[~_has_weak_nc(batch, epsilon)]
        kept.append(good[:need])
        need -= len(kept[-1])
        if need > 0 and attempts > REDRAW_ATTEMPTS * count:
            raise ResourceError("collision-free databases too rare for redraw mode")
    return np.concatenate(kept)


def _insider_replica(rng, n, size, epsilon, ell, max_rounds, mode):
    db = _draw(rng, n, size)
    if size >= 2 and _has_weak_nc(db, epsilon):
        return 0, False, 1
    if size == 1:
        return max_rounds, True, 0
    own = np.full((ell, size), False)
    own[np.arange(ell), np.arange(ell)] = True
    done, block = 0, 16
    rows = max(1, 10**6 // (ell * size))
    while done < max_rounds:
        b = min(block, max_rounds - done, rows)
        dbs = _clean_databases(rng, n, size, epsilon, b) if mode == "redraw" else np.broadcast_to(db, (b, size))
        attempts = _draw(rng, n, (b, ell))
        d = np.bitwise_count(attempts[:, :, None] ^ dbs[:, None, :])
        hits = ((d <= epsilon) & ~own).any(axis=(1, 2))
        if hits.any():
            return done + int(np.argmax(hits)) + 1, False, 0
        done += b
        block = min(block * 2, MAX_BLOCK)
    return max_rounds, True, 0


@lru_cache(maxsize=8)
def _masks(n: int, epsilon: int) -> tuple:
    return tuple(ball_masks(n, epsilon))


EVENTS = ("weak_nc", "strong_nc", "k_nc", "disjoint_balls", "full_master")


def _events_replica(rng, n, size, epsilon, master):
    db = _draw(rng, n, size)
    d = _pair_distances(db)
    upper = d[np.triu_indices(size, 1)]
    near_first = int((d[0, 1:] <= epsilon).sum())
    flags = [
        int((upper <= epsilon).any()),
        int(near_first > 0),
        near_first,
        int((upper > 2 * epsilon).all()),
        -1,
    ]
    if master:
        masks = _masks(n, epsilon)
        acc = masks[int(db[0])]
        for t in db[1:]:
            acc &= masks[int(t)]
        flags[4] = int(acc != 0)
    return tuple(flags), False, 0


def _partition_replica(rng, n, size):
    db = TemplateDatabase(n, tuple(int(x) for x in _draw(rng, n, size)))
    return len(column_partition(db).classes), False, 0


KERNELS = {
    "outsider": _outsider_replica,
    "adaptive": _adaptive_replica,
    "insider": _insider_replica,
    "events": _events_replica,
    "partition": _partition_replica,
}


def _run_chunk(kind, params, seed, start, stop):
    kernel = KERNELS[kind]
    return [kernel(replica_rng(seed, r), **params) for r in range(start, stop)]


def default_workers() -> int:
    return max(1, int(os.environ.get("NEARCOL_WORKERS", "1")))


def run_replicas(kind: str, params: dict, seed: int, replicas: int, workers: Optional[int] = None) -> list:
    """Per-replica results in replica order; the worker count never changes them."""
    if replicas < 1:
        raise DomainError("need at least one replica")
    if not 0 <= seed < 1 << 64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    workers = default_workers() if workers is None else workers
    if workers <= 1 or replicas < 2 * workers:
        return _run_chunk(kind, params, seed, 0, replicas)
    step = -(-replicas // (4 * workers))
    bounds = [(s, min(s + step, replicas)) for s in range(0, replicas, step)]
    with ProcessPoolExecutor(workers) as pool:
        parts = pool.map(_run_chunk, *zip(*[(kind, params, seed, a, b) for a, b in bounds]))
        return [r for part in parts for r in part]


def _trial_report(kind, params, seed, results, extra=None) -> SimulationReport:
    outcomes = tuple(r[0] for r in results)
    censored = tuple(r[1] for r in results)
    events = sum(not c for c in censored)
    return SimulationReport(kind, params, seed, outcomes, censored, events, sum(outcomes), extra or {})


def simulate_outsider(n: int, size: int, epsilon: int, seed: int, replicas: int,
                      max_trials: int = 10**6, workers: Optional[int] = None) -> SimulationReport:
    """Naive outsider: per replica a fresh database, then uniform guesses until one lands in a ball.

    ``extra["first_trial_successes"]`` counts replicas whose first guess hit.
    """
    _check_width(n)
    if max_trials < 1:
        raise DomainError("max_trials must be >= 1")
    if size < 1 or epsilon < 0:
        raise DomainError("need N >= 1 and epsilon >= 0")
    params = {"n": n, "size": size, "epsilon": epsilon, "max_trials": max_trials}
    results = run_replicas("outsider", params, seed, replicas, workers)
    # first guesses are one unbiased draw of the per-trial probability per database;
    # events / exposures is a ratio estimator and sits below it when balls overlap
    first = sum(1 for o, c, _ in results if o == 1 and not c)
    return _trial_report("outsider", params, seed, results, {"first_trial_successes": first})


def simulate_adaptive(n: int, success_states: int, kappa: int, seed: int, replicas: int,
                      max_trials: int = 10**7, workers: Optional[int] = None) -> SimulationReport:
    """Urn with ``2^n`` states, ``success_states`` winning; each failure discards ``kappa`` failing states.

    ``extra["exhausted"]`` counts replicas that only succeeded after the
    failing states ran out.
    """
    _check_width(n, 62)
    if not 0 <= success_states <= 1 << n:
        raise DomainError(f"success_states={success_states} outside [0, 2^{n}]")
    if kappa < 0 or max_trials < 1:
        raise DomainError("need kappa >= 0 and max_trials >= 1")
    params = {"n": n, "success_states": success_states, "kappa": kappa, "max_trials": max_trials}
    results = run_replicas("adaptive", params, seed, replicas, workers)
    return _trial_report("adaptive", params, seed, results, {"exhausted": sum(r[2] for r in results)})


def simulate_insider(n: int, size: int, epsilon: int, ell: int, seed: int, replicas: int,
                     max_rounds: int = 10**5, mode: str = "redraw",
                     workers: Optional[int] = None) -> SimulationReport:
    """Round protocol of ``ell`` enrolled attackers; outcome is the first successful round.

    Round 0 succeeds when the enrolled database already has a weak
    collision. ``mode="redraw"`` replaces the database each later round by a
    fresh collision-free one; ``"fixed-db"`` keeps it. ``events /
    exposures`` is the per-round success frequency over rounds >= 1.
    """
    _check_width(n)
    if not 1 <= ell <= size:
        raise DomainError(f"ell={ell} outside [1, {size}]")
    if mode not in ("redraw", "fixed-db"):
        raise DomainError(f"unknown mode {mode!r}")
    if max_rounds < 1:
        raise DomainError("max_rounds must be >= 1")
    params = {"n": n, "size": size, "epsilon": epsilon, "ell": ell, "max_rounds": max_rounds, "mode": mode}
    results = run_replicas("insider", params, seed, replicas, workers)
    later = [r for r in results if r[2] == 0]
    round0 = len(results) - len(later)
    events = sum(not r[1] for r in later)
    conditional = sorted(r[0] for r in later if not r[1])
    extra = {
        "mode": mode,
        "round0_successes": round0,
        "round0_frequency": round0 / len(results),
        "conditional_replicas": len(later),
        "conditional_median": (conditional[(len(later) + 1) // 2 - 1]
                               if later and 2 * len(conditional) > len(later) else None),
    }
    return SimulationReport("insider", params, seed, tuple(r[0] for r in results), tuple(r[1] for r in results),
                            events, sum(r[0] for r in later), extra)


def simulate_database_events(n: int, size: int, epsilon: int, seed: int, replicas: int,
                             master: bool = False, workers: Optional[int] = None) -> dict:
    """Collision statistics of uniform databases, one report per statistic.

    ``weak_nc``: some pair within epsilon; ``strong_nc``: the first user has
    a neighbour within epsilon; ``k_nc``: how many neighbours it has;
    ``disjoint_balls``: all pairwise distances exceed ``2 epsilon``;
    ``full_master``: one ball covers the whole database (``n <= 14`` only).
    All reports share the same databases.
    """
    _check_width(n)
    if size < 2:
        raise DomainError("need at least two templates")
    if master and n > 14:
        raise ResourceError("master-template check enumerates 2^n points; n <= 14")
    params = {"n": n, "size": size, "epsilon": epsilon, "master": master}
    results = run_replicas("events", params, seed, replicas, workers)
    out = {}
    for i, name in enumerate(EVENTS):
        if name == "full_master" and not master:
            continue
        values = tuple(r[0][i] for r in results)
        events = sum(values) if name != "k_nc" else sum(v > 0 for v in values)
        out[name] = SimulationReport(name, params, seed, values, (False,) * len(values), events, len(values))
    return out


def simulate_weak_nc(n: int, size: int, epsilon: int, seed: int, replicas: int,
                     workers: Optional[int] = None) -> SimulationReport:
    return simulate_database_events(n, size, epsilon, seed, replicas, workers=workers)["weak_nc"]


def simulate_partition_sizes(n: int, size: int, seed: int, replicas: int,
                             workers: Optional[int] = None) -> SimulationReport:
    """Number of column classes of uniform databases."""
    _check_width(n)
    params = {"n": n, "size": size}
    results = run_replicas("partition", params, seed, replicas, workers)
    values = tuple(r[0] for r in results)
    return SimulationReport("partition", params, seed, values, (False,) * len(values), len(values), len(values))


def brute_force_weak_nc(db: TemplateDatabase, epsilon: int) -> tuple[bool, list]:
    """All index pairs ``(i, j)``, ``i < j``, at distance at most epsilon."""
    t = db.templates
    pairs = [(i, j) for i, j in itertools.combinations(range(len(t)), 2) if (t[i] ^ t[j]).bit_count() <= epsilon]
    return bool(pairs), pairs


def near_graph(db: TemplateDatabase, epsilon: int) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(db.size))
    g.add_edges_from(brute_force_weak_nc(db, epsilon)[1])
    return g


def brute_force_multi_nc(db: TemplateDatabase, epsilon: int, m: int, budget: int = CLIQUE_BUDGET) -> bool:
    """True iff ``m`` templates are pairwise within epsilon (an m-clique of the near graph)."""
    if m < 2:
        raise DomainError(f"m={m} must be >= 2")
    if db.size > budget:
        raise ResourceError(f"{db.size} templates exceed the clique-search budget {budget}")
    if m > db.size:
        return False
    return any(len(c) >= m for c in nx.find_cliques(near_graph(db, epsilon)))
