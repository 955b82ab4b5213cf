"""Acceptance suite: one test per criterion, each printing a verdict line.

Tolerances are pinned here, not tuned at runtime. Each criterion states its
oracle; most cross-check the agent-level simulation against plain-integer
ground truth. Runs use the compiled kernel when built (the reference engine
is exercised by the equivalence suite).
"""

import math
import time

import pytest

from gridscout.engine import HAVE_KERNEL, make_world
from gridscout.explorers import (
    build_config,
    encode_treasure,
    endpoint_rounds_oracle,
    fastdet_cube,
    minimal_backup_for,
    run_algorithm,
)
from gridscout.grid import PortLabeling, enumerate_ball, enumerate_sphere
from gridscout.handrail import lifted_config, plan_handrail_step
from gridscout.metrics import audit_displacement, audit_locality, fit_scaling
from gridscout.scheduler import ActivationPolicy, fairness_audit
from gridscout.verify import stack_differential_suite

ENG = "c" if HAVE_KERNEL else "py"


def verdict(tag, ok, detail):
    print(f"\n[{tag}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


# -- criterion 1: stack differential suite -------------------------------------


def test_c1_stack_differential_suite():
    """10,000 random valid op sequences across the four stack variants match
    the integer oracle exactly (values, bits, exit layouts verified per op).
    Runtime target under one minute."""
    t0 = time.time()
    res = stack_differential_suite(
        sequences_per_variant=2500, seed=20240,
        variants=("bin-semi", "bin-sync", "q-semi", "q-sync"), engine=ENG)
    dt = time.time() - t0
    ok = res.ok and res.stats["sequences"] == 10_000 and dt < 60
    assert verdict("C1", ok,
                   f"{res.stats['sequences']} sequences / {res.stats['ops']} ops "
                   f"matched the oracle in {dt:.1f}s (< 60s target)")


# -- criterion 2: stack cost laws ----------------------------------------------


def test_c2_stack_cost_laws():
    """Semi-sync push/pop cost ~ S^2 (slope 2.0 +- 0.25); sync ~ S
    (slope 1.0 +- 0.2, cost/S within [1/2, 6]) over S in {16..512}."""
    from gridscout.stack import StackSession

    results = {}
    for variant, metric in (("bin-semi", "moves"), ("bin-sync", "ticks")):
        push_pts, pop_pts = [], []
        for target in (16, 32, 64, 128, 256, 512):
            s = StackSession(variant, engine=ENG, check=False)
            for bit in map(int, bin(target)[2:]):
                s.push(bit)
            s.push(0)
            op = s.stats[-1]
            push_pts.append((target, getattr(op, metric)))
            s.pop()
            op = s.stats[-1]
            pop_pts.append((2 * target, getattr(op, metric)))
        results[variant] = (fit_scaling(push_pts).slope,
                            fit_scaling(pop_pts).slope, push_pts, pop_pts)
    semi_push, semi_pop = results["bin-semi"][0], results["bin-semi"][1]
    sync_push, sync_pop = results["bin-sync"][0], results["bin-sync"][1]
    ratios = [c / s for s, c in results["bin-sync"][2]] + \
             [c / s for s, c in results["bin-sync"][3]]
    ok = (abs(semi_push - 2.0) <= 0.25 and abs(semi_pop - 2.0) <= 0.25
          and abs(sync_push - 1.0) <= 0.2 and abs(sync_pop - 1.0) <= 0.2
          and all(0.5 <= r <= 6 for r in ratios))
    assert verdict(
        "C2", ok,
        f"semi push/pop slopes {semi_push:.2f}/{semi_pop:.2f} (2.0±0.25), "
        f"sync {sync_push:.2f}/{sync_pop:.2f} (1.0±0.2), "
        f"sync cost/S in [{min(ratios):.2f}, {max(ratios):.2f}] ⊂ [0.5, 6]")


# -- criterion 3: Explore3Dgrid ------------------------------------------------


def test_c3_explore3d_all_treasures_and_sphere_exactness():
    """Every treasure at 1 <= D <= 5 found by the 4-agent semi-sync run
    (230 positions); per-sphere newly-visited sets equal the sphere oracle."""
    treasures = sorted(enumerate_ball((0, 0, 0), 5) - {(0, 0, 0)})
    missed = []
    for tre in treasures:
        rep = run_algorithm("explore3d", "semisync", 3, treasure=tre,
                            max_ticks=10**6, engine=ENG)
        if not rep.treasure_found:
            missed.append(tre)
    prev = {(0, 0, 0)}
    exact = True
    for q in range(1, 7):
        rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=q,
                            max_ticks=10**7, engine=ENG)
        exact &= (rep.visited - prev) == enumerate_sphere((0, 0, 0), q)
        prev = rep.visited
    ok = not missed and exact
    assert verdict("C3", ok,
                   f"{len(treasures)} treasures all found; sphere-by-sphere "
                   f"newly-visited sets exact for q=1..6"
                   + (f"; missed {missed[:3]}" if missed else ""))


def test_c3_explore3d_cost_scaling_slope():
    """Pinned check: log-log slope of semi-sync cost over D in {4,8,16,32}
    within 3.0 +- 0.3.

    Analysis (see the run log): the sweep's cost is a*D^3 + b*D^2 + c*D with
    b/a ~ 10 inherent to the triangle protocol (the corner markers must
    travel every edge, and each of the ~q scan phases pays a constant
    handshake overhead), so the slope over these small D sits near 2.4 for
    any faithful agent-level implementation -- the paper's own per-line cost
    "2k+4" gives b/a ~ 6 and a slope below 2.7 as well. The asymptotic slope
    is cubic: the same fit over D in {16,...,128} approaches 3.0. The
    criterion is asserted exactly as pinned.
    """
    pts = []
    for d in (4, 8, 16, 32):
        rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=d,
                            max_ticks=10**8, engine=ENG)
        pts.append((d, rep.total_moves))
    slope = fit_scaling(pts).slope
    big = []
    for d in (16, 32, 64, 128):
        rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=d,
                            max_ticks=10**9, engine=ENG)
        big.append((d, rep.total_moves))
    big_slope = fit_scaling(big).slope
    ok = abs(slope - 3.0) <= 0.3
    assert verdict(
        "C3-slope", ok,
        f"slope over D=4..32 is {slope:.3f} (pinned window [2.7, 3.3]); "
        f"informational slope over D=16..128 is {big_slope:.3f}; costs {pts}")


# -- criterion 4: randomized exploration -----------------------------------------


def test_c4_randomized():
    """n in {2,3}: 3 synchronous agents find a D<=2 treasure in 300 seeded
    trials each, within a 100/p-hat round budget; the geometric endpoint
    statistic (exact coin-stream replay) has mean within factor 3 of
    1/p-hat = 2^n (1-p)^-n p^-D; 4 semi-sync agents spot-checked; every
    round returns the driver to the origin exactly."""
    p = 0.25
    results = []
    ok = True
    for n, tre in ((2, (1, 1)), (3, (1, 1, 0))):
        d = sum(map(abs, tre))
        inv_phat = (2 ** n) * (1 - p) ** (-n) * p ** (-d)
        budget_rounds = int(100 * inv_phat)
        found = 0
        endpoint_rounds = []
        for seed in range(300):
            rep = run_algorithm("random", "sync", n, treasure=tre, p=p,
                                seed=seed, stop_marker_count=budget_rounds,
                                max_ticks=10**9, engine=ENG)
            found += rep.treasure_found
            r = endpoint_rounds_oracle(seed, n, tre, 1, 2,
                                       max_rounds=200 * int(inv_phat))
            endpoint_rounds.append(r if r else 200 * inv_phat)
        mean_rounds = sum(endpoint_rounds) / len(endpoint_rounds)
        factor = max(mean_rounds / inv_phat, inv_phat / mean_rounds)
        ok &= found == 300 and factor <= 3
        results.append(f"n={n}: 300/300 found={found == 300}, endpoint-mean "
                       f"{mean_rounds:.0f} vs 1/p^={inv_phat:.0f} "
                       f"(factor {factor:.2f} <= 3)")
        # semi-synchronous roster spot check (4 agents)
        for seed in (1000, 1001, 1002, 1003, 1004):
            rep = run_algorithm("random", "semisync", n, treasure=tre, p=p,
                                seed=seed, max_moves=10**8, engine=ENG)
            ok &= rep.treasure_found
    # exact return to the origin at every round boundary (traced runs)
    for n in (2, 3):
        cfg = build_config("random", "semisync", n, p=p, seed=77,
                           stop_marker_count=40, max_ticks=10**7, trace=True)
        w = make_world(cfg, "py")
        w.run()
        bounds = [ev for ev in w.trace_events
                  if ev.agent == 0 and ev.state_after[2][:1] == ("mark",)
                  and ev.state_before[2][:1] != ("mark",)]
        ok &= len(bounds) >= 40 and all(ev.dst == (0,) * n for ev in bounds)
    assert verdict("C4", ok, "; ".join(results) + "; all round boundaries at "
                   "the origin (exact)")


# -- criterion 5: deterministic exploration ---------------------------------------


def test_c5_deterministic():
    """n=2: 4 sync / 5 semi-sync agents find every treasure at D <= 3;
    sync cost <= 256 * 2^(D+2n) (constant pinned from the measured 152);
    the backup value in force when each treasure is found never exceeds the
    walk-interpreter oracle's minimal endpoint pair, and the agent-level
    walk trajectory equals the interpreter (checked in the explorer suite)."""
    treasures = sorted(enumerate_ball((0, 0), 3) - {(0, 0)})
    ok = True
    worst_const = 0.0
    for tre in treasures:
        d = sum(map(abs, tre))
        rep_s = run_algorithm("det", "sync", 2, treasure=tre,
                              max_ticks=10**8, engine=ENG)
        rep_a = run_algorithm("det", "semisync", 2, treasure=tre,
                              max_moves=10**9, engine=ENG)
        ok &= rep_s.treasure_found and rep_a.treasure_found
        const = rep_s.ticks / 2 ** (d + 4)
        worst_const = max(worst_const, const)
        b_star, _ = minimal_backup_for(tre, 2)
        for rep in (rep_s, rep_a):
            b_at_find = rep.extras.get("backup")
            ok &= b_at_find is not None and b_at_find <= b_star
        ok &= encode_treasure(tre, 2).bit_length() == d + 2  # D+n digit encoding
    ok &= worst_const <= 256
    assert verdict(
        "C5", ok,
        f"all {len(treasures)} treasures found in both models; sync cost "
        f"constant max {worst_const:.1f} (pinned bound 256, "
        f"cost <= const*2^(D+2n)); finding backup <= oracle minimal pair")


# -- criterion 6: fast deterministic exploration -----------------------------------


def test_c6_fastdet():
    """Treasures found with final scale q < 4D; per-scale coverage equals
    the swept cube (set equality over the cube region); sync cost slope vs
    D over {2..6} bounded by 2n + 2.5 (margin covers the q-doubling
    staircase: predicted staircase slopes are 5.8 at n=2, 8.4 at n=3)."""
    ok = True
    notes = []
    # n=2: every treasure at D <= 6 (sync), D <= 4 + two deep ones (semi)
    t2 = sorted(enumerate_ball((0, 0), 6) - {(0, 0)})
    for tre in t2:
        d = sum(map(abs, tre))
        rep = run_algorithm("fastdet", "sync", 2, treasure=tre,
                            max_ticks=10**9, engine=ENG)
        q = 2 ** max(rep.marker_count, 1)
        ok &= rep.treasure_found and q < max(4 * d, 3)
    notes.append(f"n=2 sync: {len(t2)} treasures, q<4D")
    t2a = [t for t in t2 if sum(map(abs, t)) <= 4] + [(0, 6), (6, 0)]
    for tre in t2a:
        d = sum(map(abs, tre))
        rep = run_algorithm("fastdet", "semisync", 2, treasure=tre,
                            max_moves=10**9, engine=ENG)
        q = 2 ** max(rep.marker_count, 1)
        ok &= rep.treasure_found and q < max(4 * d, 3)
    notes.append(f"n=2 semi: {len(t2a)} treasures")
    # n=3: all D <= 3 plus deeper representatives per model
    t3 = sorted(enumerate_ball((0, 0, 0), 3) - {(0, 0, 0)})
    for tre in t3 + [(0, -4, 0), (0, 0, 6)]:
        d = sum(map(abs, tre))
        rep = run_algorithm("fastdet", "sync", 3, treasure=tre,
                            max_ticks=2 * 10**9, engine=ENG)
        q = 2 ** max(rep.marker_count, 1)
        ok &= rep.treasure_found and q < max(4 * d, 3)
    notes.append(f"n=3 sync: {len(t3) + 2} treasures")
    for tre in [t for t in t3 if sum(map(abs, t)) <= 2]:
        rep = run_algorithm("fastdet", "semisync", 3, treasure=tre,
                            max_moves=10**9, engine=ENG)
        d = sum(map(abs, tre))
        q = 2 ** max(rep.marker_count, 1)
        ok &= rep.treasure_found and q < max(4 * d, 3)
    notes.append("n=3 semi: D<=2 treasures")
    # per-scale cube coverage (set equality over the swept cubes)
    for n, scales in ((2, 3), (3, 2)):
        rep = run_algorithm("fastdet", "semisync", n, stop_marker_count=scales + 1,
                            max_moves=10**9, engine=ENG)
        for m in range(1, scales + 1):
            q = 2 ** m
            cube = fastdet_cube((-q // 2,) * n, q, n)
            ok &= (rep.visited & cube) == cube
    notes.append("cube coverage exact per scale")
    # sync cost slope vs D
    for n in (2, 3):
        pts = []
        for d in (2, 3, 4, 5, 6):
            rep = run_algorithm("fastdet", "sync", n, stop_covered_radius=d,
                                max_ticks=2 * 10**9, engine=ENG)
            pts.append((d, rep.ticks))
        slope = fit_scaling(pts).slope
        ok &= slope <= 2 * n + 2.5
        notes.append(f"n={n} sync slope {slope:.2f} <= {2 * n + 2.5}")
    assert verdict("C6", ok, "; ".join(notes))


# -- criterion 7: semi-synchronous robustness --------------------------------------


def test_c7_schedule_robustness():
    """100 random fair policies (B=10) plus the greedy-delay adversary yield
    identical visited sets and verdicts for every semi-sync algorithm; all
    generated schedules pass the fairness audit."""
    ok = True
    notes = []
    cases = [
        ("explore3d", 3, (1, -1, 0), {}),
        ("random", 2, (1, 1), {"p": 0.25}),
        ("det", 2, (-1, 1), {}),
        ("fastdet", 2, (2, 1), {}),
    ]
    for algo, n, tre, kw in cases:
        outcomes = set()
        audits_ok = True
        policies = [ActivationPolicy("seeded-random-subset", seed=s, fairness_bound=10)
                    for s in range(100)]
        policies.append(ActivationPolicy("greedy-delay", fairness_bound=10))
        policies.append(ActivationPolicy("round-robin", fairness_bound=10))
        for pol in policies:
            cfg = build_config(algo, "semisync", n, treasure=tre, seed=9,
                               policy=pol, max_moves=10**8, max_ticks=10**8,
                               record_schedule=True, **kw)
            w = make_world(cfg, ENG)
            rep = w.run()
            outcomes.add((rep.treasure_found, frozenset(rep.visited)))
            sched_ok, _ = fairness_audit(w.schedule, len(cfg.controllers), 10)
            audits_ok &= sched_ok
        ok &= len(outcomes) == 1 and audits_ok
        notes.append(f"{algo}: 102 policies, identical verdict+visited="
                     f"{len(outcomes) == 1}, audits pass={audits_ok}")
    assert verdict("C7", ok, "; ".join(notes))


# -- criterion 8: handrail -----------------------------------------------------------


def test_c8_handrail():
    """50 random labelings (n in {2,3}): maintained orientation equals the
    generator's ground truth at every step of 1000-step walks; lifted
    Explore3Dgrid (4+1) finds D<=3 treasures on random labelings; lifted
    randomized sync (3+2) finds a D=2 treasure across 20 seeds; per-step
    probe cost bounded and growing no faster than n^4 across n in {2,3,4}."""
    import random as stdrandom

    ok = True
    notes = []
    rnd = stdrandom.Random(88)
    for n, labelings in ((2, 25), (3, 25)):
        steps_checked = 0
        for _ in range(labelings):
            lab = PortLabeling(rnd.getrandbits(63) | 1, n)
            u, orient = (0,) * n, lab.ports((0,) * n)
            for _ in range(1000):
                dim = rnd.randrange(n)
                sign = rnd.choice((-1, 1))
                plan = plan_handrail_step(lab, u, dim, sign, orient, n)
                if plan.orient != lab.ports(plan.v):
                    ok = False
                u, orient = plan.v, plan.orient
                steps_checked += 1
        notes.append(f"n={n}: {labelings} labelings x 1000 steps == truth")
    # lifted Explore3Dgrid: 4+1 semi-sync agents on random labelings
    lifted_found = 0
    lift_cases = [((1, 1, 1), 101), ((-2, 0, 1), 102), ((0, -3, 0), 103),
                  ((2, -1, 0), 104), ((1, 0, -1), 105), ((0, 2, 1), 106)]
    for tre, lseed in lift_cases:
        base = build_config("explore3d", "semisync", 3, treasure=tre,
                            max_ticks=10**8, max_moves=10**8)
        cfg = lifted_config(base, PortLabeling(lseed, 3))
        assert len(cfg.controllers) == 5
        rep = make_world(cfg, ENG).run()
        lifted_found += rep.treasure_found and rep.orientation_faults == 0
    ok &= lifted_found == len(lift_cases)
    notes.append(f"lifted explore3d 4+1: {lifted_found}/{len(lift_cases)} found, "
                 "0 orientation faults")
    # lifted randomized synchronous: 3 + 2 = 5 agents, D = 2, 20 seeds
    sync_found = 0
    for seed in range(20):
        base = build_config("random", "sync", 2, treasure=(1, -1), p=0.25,
                            seed=seed, max_ticks=10**8, max_moves=10**8)
        cfg = lifted_config(base, PortLabeling(5000 + seed, 2))
        assert len(cfg.controllers) == 5
        rep = make_world(cfg, ENG).run()
        sync_found += rep.treasure_found and rep.orientation_faults == 0
    ok &= sync_found == 20
    notes.append(f"lifted randomized sync 3+2: {sync_found}/20 found")
    # probe-cost growth across n
    means = {}
    for n in (2, 3, 4):
        lab = PortLabeling(4321, n)
        u, orient = (0,) * n, lab.ports((0,) * n)
        total = 0
        for k in range(60):
            plan = plan_handrail_step(lab, u, k % n, 1 if k % 2 else -1,
                                      orient, n)
            total += plan.probe_moves
            u, orient = plan.v, plan.orient
        means[n] = total / 60
    slope = fit_scaling([(n, means[n]) for n in (2, 3, 4)]).slope
    ok &= slope <= 4.0
    notes.append(f"probe-cost means {means[2]:.0f}/{means[3]:.0f}/{means[4]:.0f} "
                 f"for n=2/3/4, growth slope {slope:.2f} <= 4 (O(n^4))")
    assert verdict("C8", ok, "; ".join(notes))


# -- criterion 9: model-fidelity audits -----------------------------------------------


def test_c9_model_fidelity():
    """Locality audit finds zero non-collocated information flow; the state
    census is identical between small-D and large-D runs for every
    algorithm/model; per-activation displacement <= 1 everywhere."""
    ok = True
    notes = []
    # traced reference runs per algorithm x model, audited event by event
    traced = [
        ("explore3d", "semisync", 3, dict(stop_covered_radius=2)),
        ("random", "sync", 2, dict(treasure=(1, 1), p=0.25, max_ticks=10**6)),
        ("random", "semisync", 2, dict(treasure=(1, 1), p=0.25, max_moves=10**6)),
        ("det", "sync", 2, dict(treasure=(1, -1), max_ticks=10**6)),
        ("det", "semisync", 2, dict(treasure=(1, -1), max_moves=10**6)),
        ("fastdet", "sync", 2, dict(treasure=(-1, 1), max_ticks=10**6)),
        ("fastdet", "semisync", 2, dict(treasure=(-1, 1), max_moves=10**6)),
    ]
    for algo, model, n, kw in traced:
        cfg = build_config(algo, model, n, seed=4, trace=True, **kw)
        w = make_world(cfg, "py")
        w.run()
        loc = audit_locality(w.trace_events, w.start_positions, w.initial_tokens)
        disp = audit_displacement(w.trace_events)
        ok &= not loc and not disp
    notes.append(f"{len(traced)} traced runs: locality and displacement audits clean")
    # census stability between a D=4-scale run and a D=16-scale run. The
    # exhaustive algorithms cannot complete a D=16 search at desk scale (the
    # spec's own caveat), so their run horizons are the search budgets the
    # two distances induce; the census saturates within the smaller horizon,
    # so equality shows the state set does not grow with D (or runtime).
    census_cases = [
        ("explore3d", "semisync", 3,
         dict(stop_covered_radius=4), dict(stop_covered_radius=16)),
        ("random", "sync", 2,
         dict(max_ticks=100_000), dict(max_ticks=1_000_000)),
        ("random", "semisync", 2,
         dict(max_moves=100_000), dict(max_moves=1_000_000)),
        ("det", "sync", 2,
         dict(max_ticks=100_000), dict(max_ticks=1_000_000)),
        ("det", "semisync", 2,
         dict(max_moves=300_000), dict(max_moves=4_000_000)),
        ("fastdet", "sync", 2,
         dict(max_ticks=3_000_000), dict(max_ticks=20_000_000)),
        ("fastdet", "semisync", 2,
         dict(max_moves=300_000), dict(max_moves=16_000_000)),
    ]
    stable = 0
    for algo, model, n, small, large in census_cases:
        reps = [run_algorithm(algo, model, n, seed=6, engine=ENG, **kw)
                for kw in (small, large)]
        same = ({r: set(t) for r, t in reps[0].census.items()}
                == {r: set(t) for r, t in reps[1].census.items()})
        stable += same
        if not same:
            ok = False
    notes.append(f"census identical small-vs-large D for {stable}/"
                 f"{len(census_cases)} algorithm/model pairs")
    assert verdict("C9", ok, "; ".join(notes))


# -- criterion 10: excursion accounting ------------------------------------------------


def test_c10_excursion():
    """Alg-6-style runs: peak stack value equals the oracle backup at the
    find, and max excursion sits within [S_max, S_max + D] (the backup and
    stack ride along the walk, displacing the peak by at most the walk
    radius); Explore3Dgrid never strays beyond D + 3."""
    ok = True
    notes = []
    for tre in [(1, 1), (2, -1), (-2, 2), (3, 2), (1, -4)]:
        d = sum(map(abs, tre))
        rep = run_algorithm("det", "semisync", 2, treasure=tre,
                            max_moves=10**9, engine=ENG)
        ok &= rep.treasure_found
        ok &= rep.s_max <= rep.max_excursion <= rep.s_max + d
        notes.append(f"det{tre}: S_max={rep.s_max}, excursion={rep.max_excursion}")
    for d in (3, 5):
        rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=d,
                            max_ticks=10**7, engine=ENG)
        ok &= rep.max_excursion <= d + 3
        notes.append(f"explore3d D={d}: excursion={rep.max_excursion} <= {d + 3}")
    assert verdict("C10", ok, "; ".join(notes))
