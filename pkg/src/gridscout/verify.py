"""Pinned verification suites, shared by the CLI `verify` subcommand, the
test suite, and the acceptance harness.

The stack differential suite drives random valid op sequences through the
agent-level machine while the StackSession mirrors every op on the integer
oracle and checks values, returned bits and exit layouts. Sequence caps are
stratified: most sequences stay shallow, a slice exercises deep stacks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .stack import VARIANTS, StackSession


@dataclass
class SuiteResult:
    name: str
    ok: bool
    detail: str
    stats: dict = field(default_factory=dict)


def _rand_sequence(rnd: random.Random, variant: str, q: int, cap: int, max_len: int):
    """A random valid op sequence, value-capped at `cap`."""
    v = VARIANTS[variant]
    s = 0
    backup = 0
    seq = []
    length = rnd.randint(3, max_len)
    while len(seq) < length:
        choices = []
        if v.qary:
            if s * q <= cap:
                choices += [("push_q",)] * 3
            if s >= 1 and s % q == 0:
                choices += [("pop_q",)] * 3
            if s + 1 <= cap:
                choices += [("increment",)] * 2
            choices += [("is_divisible",)]
        else:
            for bit in (0, 1):
                if 2 * s + bit <= cap:
                    choices += [("push", bit)] * 2
            if s >= 1:
                choices += [("pop",)] * 3
            choices += [("is_empty",)]
        if v.backup:
            if backup < 12:
                choices.append(("inc_backup",))
            if s == 0 and backup >= 1 and backup <= cap:
                choices.append(("restore",))
        choices.append(("move", rnd.randrange(2), rnd.choice((-1, 1))))
        op = rnd.choice(choices)
        seq.append(op)
        if op[0] == "push":
            s = 2 * s + op[1]
        elif op[0] == "pop":
            s >>= 1
        elif op[0] == "push_q":
            s *= q
        elif op[0] == "pop_q":
            s //= q
        elif op[0] == "increment":
            s += 1
        elif op[0] == "inc_backup":
            backup += 1
        elif op[0] == "restore":
            s = backup
    return seq


def _apply(session: StackSession, op):
    name = op[0]
    if name == "push":
        session.push(op[1])
    elif name == "pop":
        session.pop()
    elif name == "push_q":
        session.push_q()
    elif name == "pop_q":
        session.pop_q()
    elif name == "increment":
        session.increment()
    elif name == "is_divisible":
        session.is_divisible()
    elif name == "is_empty":
        session.is_empty()
    elif name == "move":
        session.move(op[1], op[2])
    elif name == "inc_backup":
        session.inc_backup()
    elif name == "restore":
        session.restore()
    else:
        raise ValueError(name)


# cap strata: (cap, max_len, weight); deep stacks are rarer and shorter
_STRATA = {
    "semi-synchronous": [(8, 30, 0.72), (64, 30, 0.23), (512, 12, 0.05)],
    "synchronous": [(8, 30, 0.60), (64, 30, 0.25), (512, 30, 0.15)],
}


def stack_differential_suite(sequences_per_variant: int = 100, seed: int = 2024,
                             engine: str | None = None,
                             variants: tuple = ("bin-semi", "bin-sync", "det-semi",
                                                "det-sync", "q-semi", "q-sync"),
                             qs: tuple = (2, 3, 4, 8)) -> SuiteResult:
    rnd = random.Random(seed)
    total_ops = 0
    total_moves = 0
    total_seqs = 0
    for variant in variants:
        v = VARIANTS[variant]
        strata = _STRATA[v.model]
        for i in range(sequences_per_variant):
            u, acc = rnd.random(), 0.0
            for cap, max_len, wt in strata:
                acc += wt
                if u <= acc:
                    break
            if v.qary:
                q = rnd.choice([x for x in qs
                                if not (v.model == "synchronous" and x & (x - 1))])
            else:
                q = 2
            seq = _rand_sequence(rnd, variant, q, cap, max_len)
            session = StackSession(variant, q=q, engine=engine,
                                   seed=rnd.getrandbits(32))
            for op in seq:
                _apply(session, op)  # raises on any divergence
                total_ops += 1
            total_moves += session.w.report.total_moves
            total_seqs += 1
    return SuiteResult(
        "stack-oracle", True,
        f"{total_seqs} sequences, {total_ops} ops, {total_moves} agent moves "
        f"matched the integer oracle",
        {"sequences": total_seqs, "ops": total_ops, "moves": total_moves},
    )


# ---------------------------------------------------------------------------
# CLI verify suites (pinned desk-scale parameters)
# ---------------------------------------------------------------------------


def stack_oracle_suite(engine=None):
    try:
        res = stack_differential_suite(sequences_per_variant=120, seed=11,
                                       engine=engine)
        return [res]
    except Exception as e:
        return [SuiteResult("stack-oracle", False, f"divergence: {e}")]


def coverage_suite(engine=None):
    from .explorers import fastdet_cube, run_algorithm
    from .grid import enumerate_ball, enumerate_sphere

    out = []
    prev = {(0, 0, 0)}
    ok = True
    detail = []
    for q in range(1, 7):
        rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=q,
                            max_ticks=10**8, engine=engine)
        new = rep.visited - prev
        good = new == enumerate_sphere((0, 0, 0), q)
        ok &= good and rep.termination == "covered"
        detail.append(f"q={q}:{'ok' if good else 'MISMATCH'}")
        prev = rep.visited
    out.append(SuiteResult("explore3d-sphere-exactness", ok, " ".join(detail)))

    rep = run_algorithm("fastdet", "semisync", 2, stop_marker_count=3,
                        max_ticks=10**8, max_moves=10**8, engine=engine)
    ok = True
    for q in (2, 4):
        cube = fastdet_cube((-q // 2,) * 2, q, 2)
        ok &= cube <= rep.visited
    out.append(SuiteResult("fastdet-cube-coverage", ok,
                           "cubes q=2,4 covered" if ok else "cube missing cells"))
    return out


def handrail_suite(engine=None):
    import random

    from .engine import make_world
    from .explorers import build_config
    from .grid import PortLabeling
    from .handrail import lifted_config, plan_handrail_step

    out = []
    rnd = random.Random(99)
    checked = 0
    ok = True
    for n in (2, 3):
        for _ in range(5):
            lab = PortLabeling(rnd.getrandbits(63) | 1, n)
            u, orient = (0,) * n, lab.ports((0,) * n)
            for _ in range(200):
                dim = rnd.randrange(n)
                sign = rnd.choice((-1, 1))
                plan = plan_handrail_step(lab, u, dim, sign, orient, n)
                ok &= plan.orient == lab.ports(plan.v)
                u, orient = plan.v, plan.orient
                checked += 1
    out.append(SuiteResult("handrail-ground-truth", ok,
                           f"{checked} steps matched the generator"))

    base = build_config("explore3d", "semisync", 3, treasure=(1, -1, 1),
                        max_ticks=10**7, max_moves=10**7)
    rep = make_world(lifted_config(base, PortLabeling(17, 3)), engine).run()
    out.append(SuiteResult(
        "lifted-explore3d", rep.treasure_found and rep.orientation_faults == 0,
        f"found={rep.treasure_found} faults={rep.orientation_faults}"))
    return out


def fairness_suite(engine=None):
    from .scheduler import ActivationPolicy, PolicyDriver, fairness_audit

    out = []
    for kind, b in [("synchronous", 3), ("round-robin", 4),
                    ("seeded-random-subset", 5), ("greedy-delay", 7)]:
        drv = PolicyDriver(ActivationPolicy(kind, seed=31, fairness_bound=b), 4)
        eff = [0] * 4
        sched = [drv.select(t, eff) for t in range(1, 5001)]
        ok, worst = fairness_audit(sched, 4, b)
        out.append(SuiteResult(f"fairness-{kind}", ok,
                               f"worst gaps {worst} with B={b}"))
    return out


def census_suite(engine=None, include_negative_control=True):
    from .engine import make_world
    from .explorers import build_config
    from .metrics import census_signature
    from .runtime import Controller, RunConfig
    from .scheduler import ActivationPolicy

    out = []
    for algo, model in [("explore3d", "semisync"), ("random", "sync")]:
        reps = []
        for d in (4, 16):
            if algo == "explore3d":
                cfg = build_config(algo, model, 3, seed=5,
                                   stop_covered_radius=d)
            else:
                # search horizons standing in for D (census saturates early)
                cfg = build_config(algo, model, 2, seed=5,
                                   max_ticks=d * 25_000)
            reps.append(make_world(cfg, engine).run())
        same = {r: set(t) for r, t in reps[0].census.items()} == \
               {r: set(t) for r, t in reps[1].census.items()}
        out.append(SuiteResult(
            f"census-{algo}-{model}", same,
            f"D=4 vs D=16 census {'identical' if same else 'DIFFERS'}: "
            f"{census_signature(reps[0].census)}"))

    if include_negative_control:
        class TickCounter(Controller):
            """Deliberately not finite-state: embeds a step counter."""

            def initial(self):
                return ("w", 0)

            def step(self, state, obs, rand, arrival):
                return ("w", state[1] + 1), ("move", 0, 1)

        censuses = []
        for budget in (4, 16):
            cfg = RunConfig(n=2, controllers=[TickCounter()],
                            policy=ActivationPolicy("synchronous"),
                            max_ticks=budget)
            censuses.append(make_world(cfg, engine).run().census)
        grows = censuses[0]["w"] != censuses[1]["w"]
        out.append(SuiteResult(
            "census-negative-control", grows,
            "step-counter controller correctly flagged (census grows with D)"
            if grows else "negative control FAILED to grow"))
    return out
