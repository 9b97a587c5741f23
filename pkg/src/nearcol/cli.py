"""Command-line entry point: ``nearcol {bounds,reproduce,recommend,audit,simulate}``.

Every command builds a JSON-serialisable result; ``--format csv`` and
``--format markdown`` render its ``rows``. Exit status: 0 when all checks
pass, 1 when a check fails, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import secrets
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import networkx as nx

from . import __version__
from .accuracy import (max_database_size, max_database_size_asymptotic, near_collision_probability_fmr,
                       outsider_trials_far, outsider_trials_fmr, outsider_trials_fpir, outsider_trials_uniform)
from .adaptive import (AttackerConfig, adaptive_cdf, adaptive_pmf, cdf_ratio, median_trials_adaptive,
                       table_success_probability)
from .ball_solver import enumerate_intersection, intersection_cardinality, read_database, TemplateDatabase
from .combinatorics import ball_size, ball_volume, one_minus_power
from .errors import NearcolError
from .metric import (FAMILIES, SystemParams, insider_bounds, insider_bounds_subset, insider_round_probability_bounds,
                     outsider_bounds, outsider_bounds_distinct, robustness_threshold, security_scores,
                     weak_nc_probability_bounds)
from .sentinels import Sentinel
from .simulate import (brute_force_weak_nc, default_workers, near_graph, simulate_adaptive, simulate_insider,
                       simulate_outsider, simulate_weak_nc, wilson_interval)
from .tables import TABLES

MAX_LISTED = 16


class UsageError(Exception):
    pass


_POWER = re.compile(r"^\s*(\d+)\s*\^\s*(\d+)\s*$")


def parse_number(text: str):
    """``"1e4"``, ``"10^8"``, ``"2^47"`` and plain decimals; integral values come back as int."""
    m = _POWER.match(text)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return int(value) if value.denominator == 1 else float(value)


def count(text: str) -> int:
    value = parse_number(text)
    if not isinstance(value, int):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return value


def real(text: str) -> float:
    return float(parse_number(text))


def real_list(text: str) -> list:
    return [real(t) for t in text.split(",") if t.strip()]


def _jsonable(x):
    if isinstance(x, Sentinel):
        return x.value
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def render(result: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(result), sort_keys=True, indent=2)
    rows = _jsonable(result.get("rows", []))
    keys = list(dict.fromkeys(k for r in rows for k in r))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    lines = ["| " + " | ".join(keys) + " |", "|" + "---|" * len(keys)]
    for r in rows:
        lines.append("| " + " | ".join(str(r.get(k, "")) for k in keys) + " |")
    return "\n".join(lines)


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required parameter(s) {', '.join(missing)} for '{args.kind}'")


def _params(args) -> SystemParams:
    _need(args, "n", "users", "eps")
    if 2 * args.eps > args.n:
        raise UsageError(f"precondition eps/n <= 1/2 violated: eps={args.eps}, n={args.n}")
    return SystemParams(args.n, args.users, args.eps, alpha=args.alpha, ell=args.ell)


def _trial_row(label: str, bound) -> dict:
    if isinstance(bound, Sentinel):
        return {"bound": label, "lower_log2": bound, "upper_log2": bound, "display": bound.value}
    lo, up = bound.rounded()
    row = {"bound": label, "lower_log2": bound.lower_log2, "upper_log2": bound.upper_log2, "lower_rounded": lo, "upper_rounded": up,
           "display": f"{lo} / {up if up is not None else 'n/a'}"}
    if hasattr(bound, "validity"):
        row["valid"] = all(bound.validity.values())
    return row


def _probability_row(label: str, bounds) -> dict:
    return {"bound": label, "lower": float(bounds.lower), "upper": float(bounds.upper),
            "lower_log2": bounds.lower.log2, "upper_log2": bounds.upper.log2,
            "display": f"{float(bounds.lower):.6g} / {float(bounds.upper):.6g}"}


def cmd_bounds(args) -> dict:
    kind = args.kind
    validity = {}
    if kind in ("outsider", "outsider-distinct", "insider", "insider-subset"):
        p = _params(args)
        if kind == "outsider":
            b = outsider_bounds(p, args.family)
        elif kind == "outsider-distinct":
            b = outsider_bounds_distinct(p, args.family)
        elif kind == "insider":
            b = insider_bounds(p, args.family)
        else:
            _need(args, "ell")
            b = insider_bounds_subset(p, args.family)
        validity = b.validity
        rows = [_trial_row(kind, b)]
    elif kind == "fmr":
        _need(args, "fmr")
        if len(args.fmr) == 1:
            _need(args, "users")
            b = outsider_trials_uniform(args.fmr[0], args.users)
        else:
            b = outsider_trials_fmr(args.fmr)
        rows = [_trial_row(kind, b)]
        if not isinstance(b, Sentinel):
            rows[0]["median_bracket_log2"] = list(b.median_bracket())
    elif kind == "fpir":
        _need(args, "fpir")
        rows = [_trial_row(kind, outsider_trials_fpir(args.fpir))]
    elif kind == "far":
        _need(args, "far", "fta")
        fta = args.fta if len(args.fta) == len(args.far) else args.fta * len(args.far)
        rows = [_trial_row(kind, outsider_trials_far(args.far, fta))]
    elif kind == "weak-nc":
        _need(args, "n", "users", "eps")
        p = SystemParams(args.n, args.users, args.eps)
        b = weak_nc_probability_bounds(p)
        validity = b.validity
        rows = [_probability_row(kind, b)]
    elif kind == "nc-fmr":
        _need(args, "fmr", "users")
        prob = near_collision_probability_fmr(args.fmr[0], args.users)
        rows = [{"bound": kind, "probability": float(prob), "percent": 100 * float(prob),
                 "max_users": max_database_size(args.fmr[0], args.lam),
                 "max_users_asymptotic": max_database_size_asymptotic(args.fmr[0], args.lam)}]
    elif kind == "adaptive":
        _need(args, "n", "kappa", "a")
        if args.p is not None:
            success = Fraction(args.p)
        else:
            _need(args, "eps", "users")
            success = table_success_probability(args.n, args.eps, args.users)
        config = AttackerConfig(success, args.kappa, args.n)
        naive = AttackerConfig(success, 0, args.n)
        a = min(args.a, config.horizon)
        rows = [{"bound": kind, "p": float(success), "a": a, "pmf": float(adaptive_pmf(config, a)),
                 "cdf": float(adaptive_cdf(config, a)), "cdf_naive": float(adaptive_cdf(naive, a)),
                 "cdf_ratio": float(adaptive_cdf(config, a)) / float(adaptive_cdf(naive, a)),
                 "median_trials": median_trials_adaptive(config),
                 "median_trials_naive": median_trials_adaptive(naive)}]
        if args.p is None:
            rows[0]["cdf_ratio_displayed"] = cdf_ratio(args.n, args.eps, args.users, args.kappa, a, form="displayed")
    else:
        raise UsageError(f"unknown bound kind {kind!r}")
    return {"command": "bounds", "kind": kind, "rows": rows, "validity": validity, "ok": True}


def cmd_reproduce(args) -> dict:
    names = list(TABLES) if args.table == "all" else [args.table]
    cells = [c for name in names for c in TABLES[name]()]
    rows = [c.to_dict() for c in cells]
    failures = [r for r in rows if not r["ok"]]
    return {"command": "reproduce", "table": args.table, "rows": rows, "failures": failures,
            "ok": not failures, "summary": f"{len(rows) - len(failures)}/{len(rows)} cells within tolerance"}


def cmd_recommend(args) -> dict:
    rows = []
    if args.fmr is not None:
        size = max_database_size(args.fmr[0], args.lam)
        rows.append({"parameter": "N", "relation": "<=", "value": size, "lambda": args.lam,
                     "near_collision_probability": None if isinstance(size, Sentinel)
                     else float(near_collision_probability_fmr(args.fmr[0], size))})
    else:
        given = {k: v for k, v in (("n", args.n), ("N", args.users), ("epsilon", args.eps)) if v is not None}
        if len(given) != 2:
            raise UsageError("recommend needs --fmr, or exactly two of --n, --N, --eps")
        free = ({"n", "N", "epsilon"} - set(given)).pop()
        value = robustness_threshold(free, **given)
        row = {"parameter": free, "relation": ">=" if free == "n" else "<=", "value": value}
        if isinstance(value, Sentinel):
            row["message"] = f"no {free} keeps the passive score at 1/2 or more"
        else:
            p = SystemParams(**{**given, free: value})
            scores = security_scores(p)
            row.update(s1=scores.s1, s2=scores.s2, s3=scores.s3)
        rows.append(row)
    feasible = not any(isinstance(r["value"], Sentinel) for r in rows)
    return {"command": "recommend", "rows": rows, "ok": feasible}


def cmd_audit(args) -> dict:
    db = read_database(Path(args.db).read_text())
    eps = args.eps
    _, pairs = brute_force_weak_nc(db, eps)
    rows = [{"finding": "near_collision", "templates": [i, j],
             "distance": (db.templates[i] ^ db.templates[j]).bit_count()} for i, j in pairs]
    if db.size == 1:
        rows.append({"finding": "ball_size", "templates": [0], "size": ball_size(db.n, eps)})
    clusters = []
    if pairs:
        cliques = sorted((sorted(c) for c in nx.find_cliques(near_graph(db, eps)) if len(c) >= 2),
                         key=lambda c: (-len(c), c))
        for c in cliques[:MAX_LISTED]:
            sub = TemplateDatabase(db.n, tuple(db.templates[i] for i in c))
            size = intersection_cardinality(sub, eps, budget=args.budget)
            masters = []
            if size:
                for t in enumerate_intersection(sub, eps, budget=args.budget):
                    masters.append(format(t, "x"))
                    if len(masters) >= MAX_LISTED:
                        break
            clusters.append({"finding": "cluster", "templates": c, "size": len(c),
                             "common_ball_points": size, "master_templates": masters})
    rows += clusters
    largest = max((c["size"] for c in clusters), default=1 if db.size else 0)
    return {"command": "audit", "n": db.n, "N": db.size, "epsilon": eps, "weak_near_collision": bool(pairs),
            "strong_near_collision_users": sorted({i for p in pairs for i in p}),
            "largest_multi_collision": largest, "rows": rows, "ok": True}


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(64)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def cmd_simulate(args) -> dict:
    seed = _seed(args)
    workers = args.workers
    checks = []
    if args.kind == "outsider":
        p = _params(args)
        report = simulate_outsider(p.n, p.N, p.epsilon, seed, args.replicas, args.max_trials, workers)
        b = outsider_bounds(p)
        checks.append({"check": "median_within_bounds", "lower": 2 ** b.lower_log2, "upper": 2 ** b.upper_log2,
                       "median_interval": report.median_interval(),
                       "ok": report.median_consistent(2 ** b.lower_log2, 2 ** b.upper_log2)})
        target = float(one_minus_power(ball_volume(p.n, p.epsilon).exact, p.N))
        lo, hi = wilson_interval(report.extra["first_trial_successes"], report.replicas)
        checks.append({"check": "per_trial_frequency", "expected": target, "interval": [lo, hi],
                       "ok": lo <= target <= hi})
    elif args.kind == "insider":
        p = _params(args)
        ell = args.ell or p.N
        report = simulate_insider(p.n, p.N, p.epsilon, ell, seed, args.replicas, args.max_trials, args.mode, workers)
        weak = weak_nc_probability_bounds(p)
        lo, hi = wilson_interval(report.extra["round0_successes"], report.replicas)
        checks.append({"check": "round0_within_weak_nc_bounds", "interval": [lo, hi],
                       "bounds": [float(weak.lower), float(weak.upper)],
                       "ok": hi >= float(weak.lower) and lo <= float(weak.upper)})
        if report.exposures:
            rb = insider_round_probability_bounds(p, ell)
            lo, hi = report.frequency_interval()
            checks.append({"check": "round_frequency_within_bounds", "interval": [lo, hi],
                           "bounds": [float(rb.lower), float(rb.upper)],
                           "ok": hi >= float(rb.lower) and lo <= float(rb.upper)})
    elif args.kind == "adaptive":
        _need(args, "n", "success_states", "kappa")
        report = simulate_adaptive(args.n, args.success_states, args.kappa, seed, args.replicas,
                                   args.max_trials, workers)
        median = median_trials_adaptive(AttackerConfig(Fraction(args.success_states, 1 << args.n),
                                                        args.kappa, args.n))
        ok = not isinstance(median, Sentinel) and report.median_consistent(median, median)
        checks.append({"check": "median_matches_law", "expected": median,
                       "median_interval": report.median_interval(), "ok": ok})
    elif args.kind == "weak-nc":
        _need(args, "n", "users", "eps")
        p = SystemParams(args.n, args.users, args.eps)
        report = simulate_weak_nc(p.n, p.N, p.epsilon, seed, args.replicas, workers)
        b = weak_nc_probability_bounds(p)
        lo, hi = report.frequency_interval()
        checks.append({"check": "frequency_within_weak_nc_bounds", "interval": [lo, hi],
                       "bounds": [float(b.lower), float(b.upper)],
                       "ok": hi >= float(b.lower) and lo <= float(b.upper)})
    else:
        raise UsageError(f"unknown simulation {args.kind!r}")
    failures = [c for c in checks if not c["ok"]]
    rows = [{"replica": i, "outcome": o, "censored": c}
            for i, (o, c) in enumerate(zip(report.outcomes, report.censored))]
    return {"command": "simulate", "kind": args.kind, "report": report.to_dict(), "checks": checks,
            "failures": failures, "rows": rows, "ok": not failures}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="json")


def _system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=count)
    p.add_argument("--N", "--users", dest="users", type=count)
    p.add_argument("--eps", type=count)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nearcol", description="Near-collision analysis of template databases.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="attack-complexity and collision bounds")
    b.add_argument("kind", choices=("outsider", "outsider-distinct", "insider", "insider-subset", "fmr", "fpir",
                                    "far", "weak-nc", "nc-fmr", "adaptive"))
    _system_args(b)
    b.add_argument("--family", choices=FAMILIES, default="asymptotic")
    b.add_argument("--alpha", type=real)
    b.add_argument("--ell", type=count)
    b.add_argument("--fmr", type=real_list, help="one FMR, or a comma-separated list per user")
    b.add_argument("--fpir", type=real)
    b.add_argument("--far", type=real_list)
    b.add_argument("--fta", type=real_list)
    b.add_argument("--lambda", dest="lam", type=count, default=100)
    b.add_argument("--kappa", type=count)
    b.add_argument("--a", type=count)
    b.add_argument("--p", type=real, help="per-trial success probability (adaptive)")
    _common(b)
    b.set_defaults(func=cmd_bounds)

    r = sub.add_parser("reproduce", help="regenerate a published table and diff it")
    r.add_argument("table", choices=(*TABLES, "all"))
    _common(r)
    r.set_defaults(func=cmd_reproduce)

    c = sub.add_parser("recommend", help="largest safe database or robustness threshold")
    _system_args(c)
    c.add_argument("--fmr", type=real_list)
    c.add_argument("--lambda", dest="lam", type=count, default=100)
    _common(c)
    c.set_defaults(func=cmd_recommend)

    a = sub.add_parser("audit", help="inspect a template database file")
    a.add_argument("db")
    a.add_argument("--eps", type=count, required=True)
    a.add_argument("--budget", type=count, default=10**7)
    _common(a)
    a.set_defaults(func=cmd_audit)

    s = sub.add_parser("simulate", help="Monte Carlo attack simulation with a bound check")
    s.add_argument("kind", choices=("outsider", "insider", "adaptive", "weak-nc"))
    _system_args(s)
    s.add_argument("--ell", type=count)
    s.add_argument("--alpha", type=real)
    s.add_argument("--kappa", type=count, default=0)
    s.add_argument("--success-states", type=count)
    s.add_argument("--mode", choices=("redraw", "fixed-db"), default="redraw")
    s.add_argument("--replicas", type=count, default=1000)
    s.add_argument("--max-trials", type=count, default=10**6)
    s.add_argument("--seed", type=count)
    s.add_argument("--workers", type=count, default=None,
                   help=f"worker processes (default from NEARCOL_WORKERS, now {default_workers()})")
    _common(s)
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except (UsageError, NearcolError, ValueError) as exc:
        print(json.dumps({"ok": False, "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    print(render(result, args.format))
    return 0 if result.get("ok", True) else 1


if __name__ == "__main__":
    sys.exit(main())
