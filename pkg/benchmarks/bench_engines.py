#!/usr/bin/env python3
"""Compare the compiled kernel against the pure-Python reference engine.

Runs identical workloads on both, checks the checksums agree, and reports
wall time and speedup. The kernel memoizes controller transitions, so a
second pass over the same protocol runs almost entirely in C.
"""

import time

from gridscout.engine import HAVE_KERNEL, make_world
from gridscout.explorers import build_config
from gridscout.verify import stack_differential_suite


def timed(fn):
    t0 = time.time()
    out = fn()
    return time.time() - t0, out


def bench_explore3d(engine):
    cfg = build_config("explore3d", "semisync", 3, stop_covered_radius=12,
                       max_ticks=10**8)
    w = make_world(cfg, engine)
    rep = w.run()
    return rep.checksum, rep.total_moves


def bench_stack(engine):
    res = stack_differential_suite(sequences_per_variant=60, seed=42,
                                   engine=engine)
    return res.stats["moves"]


def bench_randomized(engine):
    from gridscout.explorers import run_algorithm

    total = 0
    for seed in range(10):
        rep = run_algorithm("random", "sync", 3, treasure=(1, 1, 0), seed=seed,
                            max_ticks=10**7, engine=engine)
        total += rep.ticks
    return total


def main():
    if not HAVE_KERNEL:
        print("compiled kernel not built; run `python setup.py build_ext --inplace`")
        return
    rows = []
    for name, fn in [("explore3d D=12 sweep", bench_explore3d),
                     ("stack differential x240", bench_stack),
                     ("randomized sync x10", bench_randomized)]:
        t_py, out_py = timed(lambda: fn("py"))
        t_c, out_c = timed(lambda: fn("c"))
        assert out_py == out_c, f"{name}: engines disagree ({out_py} vs {out_c})"
        rows.append((name, t_py, t_c))
    print(f"{'workload':<28} {'python':>9} {'kernel':>9} {'speedup':>8}")
    for name, t_py, t_c in rows:
        print(f"{name:<28} {t_py:>8.2f}s {t_c:>8.2f}s {t_py / max(t_c, 1e-9):>7.1f}x")


if __name__ == "__main__":
    main()
