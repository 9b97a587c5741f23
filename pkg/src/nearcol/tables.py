"""Regenerate the published tables from the golden fixtures and diff each cell."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, Optional

from .accuracy import max_database_size, near_collision_probability_fmr, outsider_trials_uniform
from .adaptive import cdf_ratio
from .combinatorics import binary_entropy
from .metric import SystemParams, insider_bounds, outsider_bounds, robustness_threshold, security_scores
from .sentinels import Sentinel


@dataclass(frozen=True)
class Cell:
    table: str
    key: str
    expected: Any
    computed: Any
    tolerance: float
    source: str = ""

    @property
    def ok(self) -> bool:
        if self.expected is None:
            return True
        if isinstance(self.computed, Sentinel) or self.computed is None:
            return False
        return abs(self.computed - self.expected) <= self.tolerance + 1e-12

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(self.computed, Sentinel):
            out["computed"] = self.computed.value
        out["ok"] = self.ok
        return out


@lru_cache(maxsize=1)
def golden() -> dict:
    return json.loads(resources.files("nearcol").joinpath("data/golden.json").read_text())


def _truncate(x: float, digits: int) -> float:
    scale = 10 ** digits
    return math.floor(x * scale + 1e-9) / scale


def table1() -> list[Cell]:
    fixture = golden()["table1"]
    tol, lam = fixture["tolerance"], fixture["lambda"]
    cells = []
    for row in fixture["rows"]:
        name, fmr, users = row["system"], row["fmr"], row["users"]
        bound = outsider_trials_uniform(fmr, users)
        lower, upper = max(bound.lower_log2, 0.0), max(bound.upper_log2, 0.0)
        if row["cells"] == "integer":
            lower, upper = math.floor(lower), math.floor(upper)
        t = tol[row["cells"]]
        nc = _truncate(100 * float(near_collision_probability_fmr(fmr, users)), 3)
        cells += [
            Cell("table1", f"{name}/lower", row["lower"], lower, t, row["source"]),
            Cell("table1", f"{name}/upper", row["upper"], upper, t, row["source"]),
            Cell("table1", f"{name}/nc_percent", row["nc_percent"], nc, tol["nc_percent"], row["source"]),
            Cell("table1", f"{name}/max_n", row["max_n"], max_database_size(fmr, lam), tol["max_n"], row["source"]),
        ]
    return cells


def table2() -> list[Cell]:
    fixture = golden()["table2"]
    family, tol = fixture["family"], fixture["tolerance"]
    cells = []
    for col in fixture["columns"]:
        p = SystemParams(col["n"], 10 ** col["log10_users"], col["epsilon"])
        key = f"n={p.n},N=1e{col['log10_users']},eps={p.epsilon}"
        out = outsider_bounds(p, family).rounded()
        ins = insider_bounds(p, family).rounded()
        src = col["source"]
        cells += [
            Cell("table2", f"{key}/entropy", col["entropy"], round(binary_entropy(p.ratio), 1), 0.0, src),
            Cell("table2", f"{key}/outsider_lower", col["outsider"][0], out[0], tol, src),
            Cell("table2", f"{key}/outsider_upper", col["outsider"][1], out[1], tol, src),
            Cell("table2", f"{key}/insider_lower", col["insider"][0], ins[0], tol, src),
            Cell("table2", f"{key}/insider_upper", col["insider"][1], ins[1], tol, src),
        ]
    return cells


def table3(form: Optional[str] = None) -> list[Cell]:
    fixture = golden()["table3"]
    form = form or fixture["form"]
    cells = []
    for c in fixture["cells"]:
        ratio = cdf_ratio(c["n"], c["epsilon"], 10 ** c["log10_users"], 1 << c["log2_kappa"],
                          10 ** c["log10_trials"], form=form, orientation=fixture["orientation"])
        key = (f"n={c['n']},eps={c['epsilon']},N=1e{c['log10_users']},"
               f"a=1e{c['log10_trials']},kappa=2^{c['log2_kappa']}")
        cells.append(Cell("table3", key, c["ratio"], ratio, fixture["tolerance"], c["source"]))
    return cells


def section5() -> list[Cell]:
    fixture = golden()["section5"]
    cells = []
    for s in fixture["passive_score"]:
        p = SystemParams(s["n"], s["users"], s["epsilon"])
        cells.append(Cell("section5", f"S1(n={p.n},N={p.N},eps={p.epsilon})", s["value"],
                          security_scores(p).s1, s["tolerance"], "passive score example"))
    for s in fixture["active_scores"]:
        p = SystemParams(s["n"], s["users"], s["epsilon"])
        out = outsider_bounds(p, s["family"]).rounded()[0]
        ins = insider_bounds(p, s["family"]).rounded()[0]
        key = f"(n={p.n},N={p.N},eps={p.epsilon})"
        cells += [Cell("section5", f"S2{key}", s["s2"], out - 128, 0, "active score example"),
                  Cell("section5", f"S3{key}", s["s3"], ins - 128, 0, "active score example")]
    for s in fixture["thresholds"]:
        fixed = {k: s[k] for k in ("n", "epsilon") if k in s}
        if "users" in s:
            fixed["N"] = s["users"]
        value = robustness_threshold(s["free"], **fixed)
        key = f"threshold[{s['free']}]({','.join(f'{k}={v}' for k, v in fixed.items())})"
        cells.append(Cell("section5", key, s["value"], value, 0, "robustness threshold example"))
    return cells


TABLES = {"table1": table1, "table2": table2, "table3": table3, "section5": section5}
