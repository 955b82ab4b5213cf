"""Batch experiment driver: single runs, parameter sweeps, verify suites.

Exit codes: 0 = treasure found (or coverage target met), 2 = budget
exhausted, 1 = configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

from .engine import default_engine, make_world
from .explorers import ALGORITHMS, algorithm_extras, build_config
from .grid import PortLabeling
from .handrail import lifted_config
from .metrics import canonical_model, cost_of, covered_radius, fit_scaling
from .runtime import write_trace
from .scheduler import ALIASES as POLICY_ALIASES

CSV_COLUMNS = ["algorithm", "model", "n", "D", "seed", "policy", "cost",
               "ticks", "moves", "max_excursion", "s_max", "covered_radius",
               "states_total"]


def _parse_treasure(text, n):
    if text in (None, "", "none"):
        return None
    parts = [int(x) for x in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"treasure needs {n} coordinates, got {len(parts)}")
    return tuple(parts)


def _parse_labeling(text, n):
    if text in (None, "", "oriented"):
        return None
    if text.startswith("unoriented"):
        seed = int(text.split(":", 1)[1]) if ":" in text else 1
        return PortLabeling(seed, n)
    raise ValueError(f"bad labeling spec {text!r}")


def load_run_spec(args) -> dict:
    """Merge a config file (if any) with command-line flags; flags win."""
    spec = {}
    if args.config:
        with open(args.config) as f:
            spec.update(json.load(f))
    for key in ("algo", "model", "n", "treasure", "p", "policy", "fairness_b",
                "seed", "labeling", "budget_ticks", "budget_moves",
                "budget_excursion", "cover_radius", "engine"):
        v = getattr(args, key, None)
        if v is not None:
            spec[key] = v
    spec.setdefault("algo", "explore3d")
    spec.setdefault("model", "semisync")
    spec.setdefault("n", 3)
    spec.setdefault("p", 0.25)
    spec.setdefault("policy", "rr")
    spec.setdefault("fairness_b", 10)
    spec.setdefault("seed", int(os.environ.get("GRIDSCOUT_SEED", "0")))
    return spec


def execute_run(spec: dict):
    """Run one episode; returns (report, world, spec)."""
    from .scheduler import ActivationPolicy

    n = int(spec["n"])
    model = canonical_model(spec["model"])
    algo = spec["algo"]
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    pol_kind = POLICY_ALIASES.get(spec["policy"], spec["policy"])
    if model == "synchronous":
        pol_kind = "synchronous"
    policy = ActivationPolicy(pol_kind, seed=int(spec["seed"]),
                              fairness_bound=int(spec["fairness_b"]))
    treasure = spec.get("treasure")
    if isinstance(treasure, str) or treasure is None:
        treasure = _parse_treasure(treasure, n)
    labeling = spec.get("labeling")
    if isinstance(labeling, str) or labeling is None:
        labeling = _parse_labeling(labeling, n)
    cfg = build_config(
        algo, model, n, treasure=treasure, p=float(spec["p"]), policy=policy,
        seed=int(spec["seed"]),
        max_ticks=spec.get("budget_ticks"), max_moves=spec.get("budget_moves"),
        max_excursion=spec.get("budget_excursion"),
        stop_covered_radius=spec.get("cover_radius"),
        trace=bool(spec.get("trace")),
    )
    if labeling is not None:
        cfg = lifted_config(cfg, labeling)
    w = make_world(cfg, spec.get("engine"))
    rep = w.run()
    rep.extras = algorithm_extras(algo, model, w, rep)
    return rep, w, spec


def report_doc(rep, spec) -> dict:
    model = canonical_model(spec["model"])
    doc = {
        "config": {k: v for k, v in spec.items() if k != "trace_path"},
        "termination": rep.termination,
        "treasure_found": rep.treasure_found,
        "found_tick": rep.found_tick,
        "found_by": rep.found_by,
        "ticks": rep.ticks,
        "total_moves": rep.total_moves,
        "moves_per_agent": list(rep.moves_per_agent),
        "cost": cost_of(rep, model),
        "max_excursion": rep.max_excursion,
        "s_max": rep.s_max,
        "visited_size": rep.visited_size or len(rep.visited),
        "covered_radius": covered_radius(rep) if rep.visited else 0,
        "census": {role: len(toks) for role, toks in sorted(rep.census.items())},
        "states_total": sum(len(t) for t in rep.census.values()),
        "clamp_events": len(rep.clamp_events),
        "orientation_faults": rep.orientation_faults,
        "markers": rep.marker_count,
        "checksum": f"{rep.checksum:016x}",
        "extras": getattr(rep, "extras", {}),
    }
    return doc


def atomic_write(path: str, data: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".gridscout-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def cmd_run(args) -> int:
    try:
        spec = load_run_spec(args)
        if args.trace:
            spec["trace"] = True
        rep, w, spec = execute_run(spec)
    except (ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    doc = report_doc(rep, spec)
    out = json.dumps(doc, indent=2, default=str)
    if args.report:
        atomic_write(args.report, out)
    else:
        print(out)
    if args.trace:
        if not hasattr(w, "trace_events"):
            print("trace requires the python engine", file=sys.stderr)
            return 1
        write_trace(w.trace_events, args.trace)
    if rep.treasure_found or rep.termination in ("covered", "program_halt",
                                                 "marker_budget"):
        return 0
    return 2


def _sweep_one(job):
    spec, d, seed = job
    spec = dict(spec)
    spec["seed"] = seed
    tre = spec.get("treasure_at_d")
    if tre:
        spec["treasure"] = ",".join(str(d if i == 0 else 0)
                                    for i in range(int(spec["n"])))
    rep, w, spec = execute_run(spec)
    model = canonical_model(spec["model"])
    return {
        "algorithm": spec["algo"], "model": model, "n": spec["n"], "D": d,
        "seed": seed, "policy": spec["policy"], "cost": cost_of(rep, model),
        "ticks": rep.ticks, "moves": rep.total_moves,
        "max_excursion": rep.max_excursion, "s_max": rep.s_max,
        "covered_radius": covered_radius(rep) if rep.visited else 0,
        "states_total": sum(len(t) for t in rep.census.values()),
    }


def cmd_sweep(args) -> int:
    try:
        spec = load_run_spec(args)
        ds = [int(x) for x in args.D.split(",")]
        seeds = [int(x) for x in args.seeds.split(",")]
        if not ds or not seeds:
            raise ValueError("need at least one D and one seed")
    except (ValueError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    spec.setdefault("treasure_at_d", not spec.get("cover_radius"))
    jobs = []
    for d in ds:
        for seed in seeds:
            s = dict(spec)
            if s.get("cover_radius") is None and s.get("treasure") is None:
                s["cover_radius"] = d
                s["treasure_at_d"] = False
            jobs.append((s, d, seed))
    rows = []
    if args.workers and args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for row in pool.map(_sweep_one, jobs):
                rows.append(row)
    else:
        for job in jobs:
            try:
                rows.append(_sweep_one(job))
            except Exception as e:  # partial failures stay in the summary
                rows.append({"algorithm": job[0]["algo"], "model": job[0]["model"],
                             "n": job[0]["n"], "D": job[1], "seed": job[2],
                             "policy": job[0]["policy"], "cost": "error",
                             "ticks": str(e), "moves": "", "max_excursion": "",
                             "s_max": "", "covered_radius": "", "states_total": ""})
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    wr.writeheader()
    for row in rows:
        wr.writerow(row)
    good = [(r["D"], r["cost"]) for r in rows
            if isinstance(r["cost"], int) and r["cost"] > 0]
    if len({d for d, _ in good}) >= 3:
        fit = fit_scaling(good)
        buf.write(f"# loglog_slope,{fit.slope:.4f}\n")
    out = buf.getvalue()
    if args.out:
        atomic_write(args.out, out)
    else:
        print(out, end="")
    return 0


def cmd_verify(args) -> int:
    from . import verify

    suites = {
        "stack-oracle": verify.stack_oracle_suite,
        "coverage": verify.coverage_suite,
        "handrail": verify.handrail_suite,
        "fairness": verify.fairness_suite,
        "census": verify.census_suite,
    }
    if args.suite not in suites:
        print(f"unknown suite {args.suite!r}; pick one of {sorted(suites)}",
              file=sys.stderr)
        return 1
    results = suites[args.suite](engine=args.engine)
    ok = True
    for res in results:
        print(f"[{'PASS' if res.ok else 'FAIL'}] {res.name}: {res.detail}")
        ok &= res.ok
    return 0 if ok else 1


def _join_negative_values(argv):
    """Fold `--treasure -1,2,0` into `--treasure=-1,2,0` so argparse does
    not mistake negative coordinates for option names."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--treasure" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    import sys as _sys

    argv = _join_negative_values(_sys.argv[1:] if argv is None else list(argv))
    ap = argparse.ArgumentParser(prog="gridscout",
                                 description="FSM treasure hunts on infinite grids")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add_common(p):
        p.add_argument("--algo", choices=ALGORITHMS)
        p.add_argument("--model", choices=["sync", "semisync"])
        p.add_argument("--n", type=int)
        p.add_argument("--treasure", help="x,y,... or 'none'")
        p.add_argument("--p", type=float)
        p.add_argument("--policy", choices=["sync", "rr", "rand", "greedy"])
        p.add_argument("--fairness-B", dest="fairness_b", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--labeling", help="oriented | unoriented:SEED")
        p.add_argument("--budget-ticks", dest="budget_ticks", type=int)
        p.add_argument("--budget-moves", dest="budget_moves", type=int)
        p.add_argument("--budget-excursion", dest="budget_excursion", type=int)
        p.add_argument("--cover-radius", dest="cover_radius", type=int,
                       help="stop once the ball of this radius is covered")
        p.add_argument("--config", help="JSON config file (flags override)")
        p.add_argument("--engine", choices=["py", "c"],
                       default=None, help=f"default: {default_engine()}")

    rp = sub.add_parser("run", help="run one episode")
    add_common(rp)
    rp.add_argument("--trace", help="write a JSONL trace here (python engine)")
    rp.add_argument("--report", help="write the JSON report here")
    rp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("sweep", help="sweep over D and seeds, emit CSV")
    add_common(sp)
    sp.add_argument("--D", required=True, help="comma list of radii")
    sp.add_argument("--seeds", default="0", help="comma list of seeds")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="CSV path (atomic)")
    sp.set_defaults(fn=cmd_sweep)

    vp = sub.add_parser("verify", help="run a pinned verification suite")
    vp.add_argument("suite", help="stack-oracle|coverage|handrail|fairness|census")
    vp.add_argument("--engine", choices=["py", "c"], default=None)
    vp.set_defaults(fn=cmd_verify)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
