"""Handrail: orientation carried across unoriented grids.

Ground truth is always available from the labeling generator, so every
maintained orientation is checked against an independent oracle.
"""

import random

import pytest

from gridscout.engine import HAVE_KERNEL, make_world
from gridscout.explorers import build_config, run_algorithm
from gridscout.grid import Direction, PortLabeling, direction_index
from gridscout.handrail import (
    OrientationFault,
    execute_lifted_move,
    lifted_config,
    plan_handrail_step,
    walker_config,
)

ENG = "c" if HAVE_KERNEL else "py"


def random_walk_directions(rnd, n, k):
    return [(rnd.randrange(n), rnd.choice((-1, 1))) for _ in range(k)]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_plan_matches_ground_truth(n):
    rnd = random.Random(100 + n)
    for _ in range(6):
        lab = PortLabeling(rnd.getrandbits(63) | 1, n)
        u = (0,) * n
        orient = lab.ports(u)
        for dim, sign in random_walk_directions(rnd, n, 60):
            plan = plan_handrail_step(lab, u, dim, sign, orient, n)
            assert plan.orient == lab.ports(plan.v)
            u, orient = plan.v, plan.orient


def test_plan_identity_labeling():
    lab = PortLabeling(0, 3)
    plan = plan_handrail_step(lab, (4, -1, 2), 1, 1, lab.ports((4, -1, 2)), 3)
    assert plan.orient == (0, 1, 2, 3, 4, 5)
    assert plan.moves[0] == (1, 1)


def test_plan_probe_walks_stay_local():
    lab = PortLabeling(777, 2)
    u = (0, 0)
    pos = list(u)
    far = 0
    plan = plan_handrail_step(lab, u, 0, 1, lab.ports(u), 2)
    for dim, sign in plan.moves:
        pos[dim] += sign
        far = max(far, max(abs(pos[0] - 1), abs(pos[1])))
    assert far <= 4  # probes stay within L-inf 4 of the new node


def test_plan_cost_bound_n4():
    # per-step probe walks grow no faster than (2n)^3 full probes
    for n in (2, 3, 4):
        lab = PortLabeling(991, n)
        plan = plan_handrail_step(lab, (0,) * n, 0, 1, lab.ports((0,) * n), n)
        assert plan.probes_run <= (2 * n) ** 3
        assert plan.probe_moves <= 9 * (2 * n) ** 3


def test_plan_rejects_wrong_orientation():
    lab = PortLabeling(12345, 2)
    bad = tuple(reversed(lab.ports((0, 0))))
    if bad == lab.ports((0, 0)):
        pytest.skip("palindromic permutation")
    with pytest.raises(OrientationFault):
        plan_handrail_step(lab, (0, 0), 0, 1, bad, 2)


def test_fsm_walker_agrees_with_plan_and_truth():
    """The finite-state walker's maintained orientation equals ground truth
    at every completed step, and its move count matches the pure plan."""
    for n, seed in [(2, 5), (3, 6)]:
        lab = PortLabeling(seed * 1009 + 7, n)
        steps = 25
        cfg = walker_config(lab, n, steps, seed=seed, trace=True)
        w = make_world(cfg, "py")
        rep = w.run()
        assert rep.termination == "program_halt"
        assert rep.marker_count == steps + 1
        # replay: at each hstep marker the walker's stored orientation must
        # equal the truth at its position
        checked = 0
        for ev in w.trace_events:
            if (ev.agent == 0 and ev.state_after[2][:1] == ("mark",)
                    and ev.state_before[2][:1] != ("mark",)):
                frames = ev.state_after[1]
                orient = frames[-1][2][0]
                assert tuple(orient) == lab.ports(ev.dst)
                checked += 1
        assert checked == steps + 1


def test_fsm_walker_move_parity_with_plan():
    """Drive one handrail step through the FSM and compare its move list
    with the pure plan (same labeling, same start, same direction)."""
    n = 2
    lab = PortLabeling(4242, n)
    u = (0,) * n
    orient = lab.ports(u)
    plan = plan_handrail_step(lab, u, 0, 1, orient, n)

    from gridscout.handrail import HT, AuxFollower, HandrailWalker
    from gridscout.runtime import RunConfig
    from gridscout.scheduler import ActivationPolicy

    class OneStep(HandrailWalker):
        main = "one"

    HT.setdefault("one", {})
    HT["one"]["entry"] = lambda s, l, r: ("call", "hstep", (s.o0, 0), "done", ())
    HT["one"]["done"] = lambda s, l, r: ("halt", r)

    drv = OneStep(n, orient)
    cfg = RunConfig(
        n=n, controllers=[drv, AuxFollower()], labeling=lab,
        policy=ActivationPolicy("round-robin"), trace=True,
        stop_fn=lambda tok: tok[:1] == ("a",) and len(tok) == 3
        and tok[2][:1] == ("halt",))
    w = make_world(cfg, "py")
    rep = w.run()
    assert rep.termination == "program_halt"
    assert w.state_of(0)[2][1] == plan.orient
    walker_moves = [(ev.dst[0] - ev.src[0], ev.dst[1] - ev.src[1])
                    for ev in w.trace_events if ev.agent == 0 and ev.src != ev.dst]
    plan_moves = [tuple(s * e for e in ((1, 0) if d == 0 else (0, 1)))
                  for d, s in plan.moves]
    assert walker_moves == plan_moves


# -- lifted runs ---------------------------------------------------------------


def test_lifted_explore3d_identity_labeling():
    base = build_config("explore3d", "semisync", 3, treasure=(0, -2, 1),
                        max_ticks=10**6)
    cfg = lifted_config(base, PortLabeling(0, 3))
    assert len(cfg.controllers) == 5  # 4 + 1 aux
    w = make_world(cfg, ENG)
    rep = w.run()
    assert rep.treasure_found
    assert rep.orientation_faults == 0


def test_lifted_explore3d_random_labelings():
    for seed in (11, 22, 33):
        base = build_config("explore3d", "semisync", 3, treasure=(1, 1, -1),
                            max_ticks=10**7, max_moves=10**7)
        cfg = lifted_config(base, PortLabeling(seed, 3))
        w = make_world(cfg, ENG)
        rep = w.run()
        assert rep.treasure_found, seed
        assert rep.orientation_faults == 0


def test_lifted_visited_superset_of_oriented():
    base = build_config("explore3d", "semisync", 3, stop_covered_radius=2,
                        max_ticks=10**6)
    oriented = make_world(base, ENG).run()
    base2 = build_config("explore3d", "semisync", 3, stop_covered_radius=2,
                         max_ticks=10**7, max_moves=10**7)
    lifted = make_world(lifted_config(base2, PortLabeling(5, 3)), ENG).run()
    assert oriented.visited <= lifted.visited
    assert lifted.total_moves > oriented.total_moves  # probes cost moves


def test_lifted_randomized_sync_agents_and_find():
    base = build_config("random", "sync", 2, treasure=(1, -1), p=0.25, seed=9,
                        max_ticks=10**7, max_moves=10**7)
    cfg = lifted_config(base, PortLabeling(77, 2))
    assert len(cfg.controllers) == 5  # 3 + 2 aux
    rep = make_world(cfg, ENG).run()
    assert rep.treasure_found
    assert rep.orientation_faults == 0


def test_lift_engines_agree():
    if not HAVE_KERNEL:
        pytest.skip("kernel not built")
    outs = []
    for eng in ("py", "c"):
        base = build_config("explore3d", "semisync", 3, treasure=(2, 0, -1),
                            max_ticks=10**6)
        cfg = lifted_config(base, PortLabeling(321, 3))
        rep = make_world(cfg, eng).run()
        outs.append((rep.treasure_found, rep.found_tick, rep.total_moves,
                     rep.ticks, sorted(rep.moves_per_agent), rep.checksum))
    assert outs[0] == outs[1]
