"""Exact intersections of several Hamming balls via the column partition.

Templates are Python ints of ``n`` bits; coordinate 1 is the most
significant bit. Two coordinates are equivalent when their database columns
are equal or complementary. Inside one class every template either agrees
with the reference template ``v0`` on all coordinates or on none, so a point
``p`` is described, up to permutations inside classes, by the vector ``P`` of
its distances to ``v0`` on each class, and ball membership becomes the linear
system ``A P <= e``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional

from .combinatorics import LogProb, mp, stirling2
from .errors import DomainError, FormatError, NearcolError, ResourceError

DEFAULT_BUDGET = 10**8


class InvariantError(NearcolError, AssertionError):
    """An internal invariant that the construction guarantees did not hold."""


@dataclass(frozen=True)
class TemplateDatabase:
    n: int
    templates: tuple
    distinct: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n={self.n} must be >= 1")
        object.__setattr__(self, "templates", tuple(int(t) for t in self.templates))
        if not self.templates:
            raise DomainError("database is empty")
        for t in self.templates:
            if t < 0 or t >> self.n:
                raise DomainError(f"template {t:#x} does not fit in {self.n} bits")
        if self.distinct and len(set(self.templates)) != len(self.templates):
            raise DomainError("database flagged distinct contains duplicates")

    @property
    def size(self) -> int:
        return len(self.templates)

    def bit(self, template: int, coordinate: int) -> int:
        """Value of coordinate ``coordinate`` (0-based, 0 = most significant)."""
        return (template >> (self.n - 1 - coordinate)) & 1

    def column(self, coordinate: int) -> int:
        """Column as an int whose bit ``i`` is template ``i``'s value."""
        out = 0
        for i, t in enumerate(self.templates):
            out |= self.bit(t, coordinate) << i
        return out

    def mask(self, coordinates: Iterable[int]) -> int:
        m = 0
        for k in coordinates:
            m |= 1 << (self.n - 1 - k)
        return m


def read_database(text: str) -> TemplateDatabase:
    """Parse the text format: ``n=<int> N=<int>`` then one hex template per line."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty database file")
    header = dict(part.split("=", 1) for part in lines[0].split() if "=" in part)
    try:
        n, size = int(header["n"]), int(header["N"])
    except (KeyError, ValueError):
        raise FormatError(f"bad header line {lines[0]!r}; expected 'n=<int> N=<int>'") from None
    body = lines[1:]
    if len(body) != size:
        raise FormatError(f"header announces N={size} templates, found {len(body)}")
    width = (n + 7) // 8
    pad = 8 * width - n
    templates = []
    for number, line in enumerate(body, start=2):
        if len(line) != 2 * width:
            raise FormatError(f"line {number}: expected {2 * width} hex digits, got {len(line)}")
        try:
            value = int(line, 16)
        except ValueError:
            raise FormatError(f"line {number}: not a hex string") from None
        if value & ((1 << pad) - 1):
            raise FormatError(f"line {number}: padding bits must be zero")
        templates.append(value >> pad)
    return TemplateDatabase(n, tuple(templates))


def write_database(db: TemplateDatabase) -> str:
    width = (db.n + 7) // 8
    pad = 8 * width - db.n
    lines = [f"n={db.n} N={db.size}"]
    lines += [format(t << pad, f"0{2 * width}x") for t in db.templates]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PartitionSystem:
    classes: tuple
    sign_matrix: Optional[tuple] = None
    slack: Optional[tuple] = None
    reference_index: int = 0
    caps: Optional[tuple] = None
    masks: tuple = field(default=(), repr=False)

    @property
    def sizes(self) -> tuple:
        return tuple(len(c) for c in self.classes)

    @property
    def search_space_size(self) -> int:
        """``|P|``, the number of candidate distance vectors."""
        return math.prod(c + 1 for c in self.caps)


def column_partition(db: TemplateDatabase) -> PartitionSystem:
    """Finest partition of the coordinates into equal-or-complementary column classes."""
    full = (1 << db.size) - 1
    groups: dict = {}
    for k in range(db.n):
        col = db.column(k)
        key = col ^ full if col & 1 else col  # normalise so template 0 reads 0
        groups.setdefault(key, []).append(k)
    return PartitionSystem(tuple(tuple(g) for g in groups.values()))


def build_linear_system(db: TemplateDatabase, epsilon: int, v0_index: int = 0) -> PartitionSystem:
    if not 0 <= v0_index < db.size:
        raise DomainError(f"reference index {v0_index} outside [0, {db.size})")
    if epsilon < 0:
        raise DomainError(f"negative radius {epsilon}")
    classes = column_partition(db).classes
    masks = tuple(db.mask(c) for c in classes)
    v0 = db.templates[v0_index]
    signs, slack = [], []
    for v in db.templates:
        row = []
        for cls, m in zip(classes, masks):
            d = ((v ^ v0) & m).bit_count()
            if d == 0:
                row.append(1)
            elif d == len(cls):
                row.append(-1)
            else:
                raise InvariantError("template neither equal nor complementary to v0 on a class")
        signs.append(tuple(row))
        slack.append(epsilon - (v ^ v0).bit_count())
    caps = tuple(min(epsilon, len(c)) for c in classes)
    return PartitionSystem(classes, tuple(signs), tuple(slack), v0_index, caps, masks)


def _check_budget(system: PartitionSystem, budget: int) -> None:
    size = system.search_space_size
    if size > budget:
        raise ResourceError(f"|P| = {size} exceeds the enumeration budget {budget}")


def _solutions(system: PartitionSystem, first: Optional[int] = None) -> Iterator[tuple]:
    """Depth-first walk over ``P`` with pruning on the remaining slack."""
    signs, slack, caps = system.sign_matrix, system.slack, system.caps
    rows, depth = len(signs), len(caps)
    # least possible contribution of classes k.. to each row
    floor_rest = [[0] * rows for _ in range(depth + 1)]
    for k in range(depth - 1, -1, -1):
        for i in range(rows):
            floor_rest[k][i] = floor_rest[k + 1][i] + (-caps[k] if signs[i][k] < 0 else 0)

    partial = [0] * rows
    chosen = [0] * depth

    def walk(k: int):
        if k == depth:
            yield tuple(chosen)
            return
        values = range(caps[k] + 1) if (k > 0 or first is None) else (first,)
        for value in values:
            ok = True
            for i in range(rows):
                if partial[i] + signs[i][k] * value + floor_rest[k + 1][i] > slack[i]:
                    ok = False
                    break
            if not ok:
                continue
            for i in range(rows):
                partial[i] += signs[i][k] * value
            chosen[k] = value
            yield from walk(k + 1)
            for i in range(rows):
                partial[i] -= signs[i][k] * value

    if any(floor_rest[0][i] > slack[i] for i in range(rows)):
        return
    yield from walk(0)


def _count_branch(system: PartitionSystem, first: Optional[int]) -> int:
    sizes = system.sizes
    total = 0
    for sol in _solutions(system, first):
        total += math.prod(math.comb(s, v) for s, v in zip(sizes, sol))
    return total


def intersection_cardinality(db: TemplateDatabase, epsilon: int, budget: int = DEFAULT_BUDGET,
                             workers: int = 1, v0_index: int = 0) -> int:
    """``|B_eps(v_1) ∩ ... ∩ B_eps(v_N)|`` as a sum of products of binomials over ``A P <= e``.

    With ``workers > 1`` the first class's values are split across
    processes; partial counts are exact integers so the result does not
    depend on the split.
    """
    system = build_linear_system(db, epsilon, v0_index)
    _check_budget(system, budget)
    if workers <= 1 or system.caps[0] == 0:
        return _count_branch(system, None)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_count_branch, itertools.repeat(system), range(system.caps[0] + 1))
        return sum(parts)


def enumerate_intersection(db: TemplateDatabase, epsilon: int, budget: int = DEFAULT_BUDGET) -> Iterator[int]:
    """Yield every template within ``epsilon`` of all database templates."""
    system = build_linear_system(db, epsilon)
    _check_budget(system, budget)
    v0 = db.templates[system.reference_index]
    bit_lists = [[1 << (db.n - 1 - k) for k in cls] for cls in system.classes]
    for sol in _solutions(system):
        choices = [itertools.combinations(bits, v) for bits, v in zip(bit_lists, sol)]
        for combo in itertools.product(*choices):
            flip = 0
            for part in combo:
                for b in part:
                    flip |= b
            yield v0 ^ flip


def cardinal_reduction_ratio(partition: PartitionSystem) -> LogProb:
    """Lower bound ``prod_k 2^|I_k| / (|I_k| + 1)`` on ``2^n / |P|``."""
    log2 = mp.fsum(s - mp.log(s + 1, 2) for s in partition.sizes)
    return LogProb(log2)


def _grow_probability(j: int, size: int) -> Fraction:
    return 1 - Fraction(j, 1 << (size - 1))


def partition_size_pmf(n: int, size: int) -> list:
    """Exact ``P(|I| = i)`` for ``i = 1..n`` (list index ``i - 1``).

    Columns are appended one at a time; with ``j`` classes so far a new
    column joins an existing class with probability ``j / 2^(N-1)``.
    """
    if n < 1 or size < 1:
        raise DomainError("need n >= 1 and N >= 1")
    dist = [Fraction(0)] * (n + 2)
    dist[1] = Fraction(1)
    for _ in range(n - 1):
        nxt = [Fraction(0)] * (n + 2)
        for j in range(1, n + 1):
            if dist[j]:
                grow = max(_grow_probability(j, size), Fraction(0))
                nxt[j] += dist[j] * (1 - grow)
                nxt[j + 1] += dist[j] * grow
        dist = nxt
    return dist[1:n + 1]


def _compositions(total: int, parts: int) -> Iterator[tuple]:
    """All ``(n_1..n_parts)`` with nonnegative entries summing to ``total``."""
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut + (total + parts - 1,):
            out.append(c - prev - 1)
            prev = c
        yield tuple(out)


def partition_size_simplex(n: int, size: int, i: int, factor: str = "statement") -> Fraction:
    """Simplex-sum expression for ``P(|I| = i)`` (small ``n`` only).

    ``factor="statement"`` uses ``prod_{j<=i} (1 - (j-1)/2^(N-1))``;
    ``factor="proof"`` uses ``prod_{j<=i} (1 - j/2^(N-1))``.
    """
    if not 1 <= i <= n:
        raise DomainError(f"i={i} outside [1, {n}]")
    shift = 0 if factor == "proof" else 1
    if factor not in ("statement", "proof"):
        raise DomainError(f"unknown factor {factor!r}")
    growth = math.prod(_grow_probability(j - shift, size) for j in range(1, i + 1))
    weight = sum(math.prod(j ** e for j, e in enumerate(comp, start=1)) for comp in _compositions(n - i, i))
    return Fraction(weight, 1 << ((size - 1) * (n - i))) * growth


def partition_size_bounds(n: int, size: int, i: int) -> tuple[LogProb, LogProb]:
    """Stirling-number bounds on ``P(|I| = i)``; the upper carries an extra ``i^(n-i)``."""
    if not 1 <= i <= n:
        raise DomainError(f"i={i} outside [1, {n}]")
    growth = math.prod(_grow_probability(j - 1, size) for j in range(1, i + 1))
    if growth <= 0:
        return LogProb.zero(), LogProb.zero()
    base = Fraction(stirling2(n, i), 1 << ((size - 1) * (n - i))) * growth
    return LogProb.from_fraction(base), LogProb.from_fraction(base * i ** (n - i))


def brute_force_cardinality(db: TemplateDatabase, epsilon: int) -> int:
    """Count over all ``2^n`` points; only for tiny ``n``."""
    if db.n > 24:
        raise ResourceError("brute force limited to n <= 24")
    return sum(1 for p in range(1 << db.n) if all((p ^ v).bit_count() <= epsilon for v in db.templates))


def column_partition_pairwise(db: TemplateDatabase) -> list:
    """Quadratic reference partition by comparing every pair of columns."""
    full = (1 << db.size) - 1
    cols = [db.column(k) for k in range(db.n)]
    assigned = [-1] * db.n
    classes: list = []
    for k in range(db.n):
        if assigned[k] >= 0:
            continue
        assigned[k] = len(classes)
        cls = [k]
        for j in range(k + 1, db.n):
            if assigned[j] < 0 and (cols[j] == cols[k] or cols[j] == cols[k] ^ full):
                assigned[j] = assigned[k]
                cls.append(j)
        classes.append(tuple(cls))
    return classes


def membership_by_system(system: PartitionSystem, point: int, v0: int) -> bool:
    """``A P(point) <= e`` for one point."""
    dists = [((point ^ v0) & m).bit_count() for m in system.masks]
    return all(sum(a * d for a, d in zip(row, dists)) <= e for row, e in zip(system.sign_matrix, system.slack))

