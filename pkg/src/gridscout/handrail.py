"""Orientation maintenance on unoriented grids.

A mover that knows the direction-to-port map O_u at its node can carry that
knowledge across a move: it walks to the neighbour v, drops its auxiliary
agent there, and probes 4-step port walks. A probe that returns to v without
ever backtracking, whose final hop leaves u through the known port of the
travel direction, identifies one direction at v; the walk shape j, -i, -j, i
passes back through u, which is what pins j. The remaining port after all
probes is the travel direction's own.

The probe plan is a pure function shared by three consumers: the
finite-state reference walker (HandrailWalker), the world-level lift
executor both engines use for lifted algorithm runs, and the verification
suites that compare maintained orientation against the generator's ground
truth. Probes whose final hop cannot satisfy the acceptance test are skipped
outright, which keeps the step cost at O(n^3) walks without changing the
accepted set.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grid import (
    Direction,
    PortLabeling,
    direction_index,
    index_direction,
    reverse_index,
    step,
)
from .protocol import Driver, roles_of
from .runtime import Controller, RunConfig


class OrientationFault(RuntimeError):
    """The maintained orientation contradicts the probe evidence."""


@dataclass
class StepPlan:
    v: tuple                 # destination node
    orient: tuple            # O_v: direction index -> port
    moves: list              # mover moves [(dim, sign), ...], first is u -> v
    probes_run: int
    probe_moves: int


def plan_handrail_step(labeling: PortLabeling, u, dim, sign, orient, n) -> StepPlan:
    """Simulate one orientation-carrying step from u toward (dim, sign).

    `orient` maps global direction indices to port labels at u. The returned
    move list is exactly what the finite-state walker executes.
    """
    m = 2 * n
    g = dim if sign > 0 else dim + n
    i_u = orient[g]
    ports_cache = {}
    lab_ports = labeling.ports

    def ports_at(node):
        p = ports_cache.get(node)
        if p is None:
            p = lab_ports(node)
            ports_cache[node] = p
        return p

    # per-node port -> (direction index, neighbour); built lazily
    nbr_cache = {}

    def hop(node, port):
        tab = nbr_cache.get(node)
        if tab is None:
            p = ports_at(node)
            tab = {}
            for di in range(m):
                w = list(node)
                if di < n:
                    w[di] += 1
                else:
                    w[di - n] -= 1
                tab[p[di]] = (di, tuple(w))
            nbr_cache[node] = tab
        return tab[port]

    if ports_at(u)[g] != i_u:
        raise OrientationFault(f"orientation wrong at {u} before moving")
    rev_g = (g + n) % m
    gi, nxt = hop(u, i_u)
    v = nxt
    moves = [(dim, sign)]
    beta0 = ports_at(v)[rev_g]
    o_v = [None] * m
    o_v[rev_g] = beta0

    probes = 0
    probe_moves = 0
    known_j = 0
    need_j = m - 2

    for code in range(m ** 3):
        if known_j == need_j:
            break
        alpha = (code // (m * m), (code // m) % m, code % m, i_u)
        probes += 1
        node = v
        betas = []
        aborted = False
        for j4 in range(4):
            port = alpha[j4]
            if betas and port == betas[-1]:
                aborted = True  # backtracking: unwind and skip
                break
            di, node = hop(node, port)
            moves.append((di, 1) if di < n else (di - n, -1))
            probe_moves += 1
            betas.append(ports_at(node)[(di + n) % m])
        if not aborted and node == v:
            if betas[3] == beta0:
                # came back through the travel direction: the third stop was
                # u itself, so betas[2] names j at u
                try:
                    j_dir = orient.index(betas[2])
                except ValueError:
                    j_dir = -1
                if j_dir not in (-1, g, rev_g):
                    if o_v[j_dir] is None:
                        o_v[j_dir] = alpha[0]
                        known_j += 1
                    elif o_v[j_dir] != alpha[0]:
                        raise OrientationFault(f"conflicting probes at {v}")
            continue  # finished at v: nothing to unwind
        # unwind through the recorded arrival ports, newest first
        for port in reversed(betas):
            di, node = hop(node, port)
            moves.append((di, 1) if di < n else (di - n, -1))
            probe_moves += 1
        if node != v:
            raise OrientationFault("unwind failed to return")

    # the travel direction's own port is the only one left unused
    used = {p for p in o_v if p is not None}
    left = [p for p in range(m) if p not in used]
    if len(left) != 1 or None in o_v[:g] + o_v[g + 1:]:
        raise OrientationFault(f"incomplete orientation at {v}: {o_v}")
    o_v[g] = left[0]
    return StepPlan(v, tuple(o_v), moves, probes, probe_moves)


# ---------------------------------------------------------------------------
# World-level lift executor (both engines call this)
# ---------------------------------------------------------------------------


def execute_lifted_move(world, agent: int, dim: int, sign: int):
    """Replace one oriented move by the full handrail sequence."""
    lab = world.cfg.labeling
    u = tuple(world.positions[agent])
    orient = world.lift_orient.get(agent)
    if orient is None:
        orient = lab.ports(u)  # granted at the common starting node
    plan = plan_handrail_step(lab, u, dim, sign, orient, world.cfg.n)
    for pdim, psign in plan.moves:
        world.apply_move(agent, pdim, psign)
    aux = world.cfg.lift[agent]
    world.apply_move(aux, dim, sign)
    world.lift_orient[agent] = plan.orient
    if plan.orient != lab.ports(plan.v):
        world.lift_mismatches += 1
    return world.positions[agent]


def lifted_config(base_cfg: RunConfig, labeling: PortLabeling) -> RunConfig:
    """Wrap an oriented run: auxiliary agents join and every autonomous
    mover's step becomes a handrail step. Semi-synchronous runs have one
    mover (the driver); synchronous runs also lift the distance agent."""
    from .metrics import MODELS

    controllers = list(base_cfg.controllers)
    sync = base_cfg.policy.kind == "synchronous"
    movers = [0]
    if sync:
        for idx, c in enumerate(controllers):
            role = c.initial()[0]
            if role == "d":
                movers.append(idx)
    lift = {}
    for mover in movers:
        lift[mover] = len(controllers)
        controllers.append(AuxToken("aux" if mover == 0 else "aux2"))
    cfg = RunConfig(
        n=base_cfg.n, controllers=controllers, policy=base_cfg.policy,
        seed=base_cfg.seed, treasure=base_cfg.treasure, labeling=labeling,
        max_ticks=base_cfg.max_ticks, max_moves=base_cfg.max_moves,
        max_excursion=base_cfg.max_excursion,
        stop_covered_radius=base_cfg.stop_covered_radius,
        trace=base_cfg.trace, stop_fn=base_cfg.stop_fn,
        marker_fn=base_cfg.marker_fn, collect_visited=base_cfg.collect_visited,
        stop_marker_count=base_cfg.stop_marker_count, lift=lift,
    )
    return cfg


class AuxToken(Controller):
    """The rider: carried along by its mover, never acts on its own."""

    def __init__(self, role="aux"):
        self.role = role

    def initial(self):
        return (self.role, "idle")

    def step(self, state, obs, rand, arrival):
        return state, None


# ---------------------------------------------------------------------------
# Finite-state reference walker: one agent + one aux on an unoriented grid.
# The full orientation, the probe counter and the bounded beta history live
# in the state token, which is what makes the FSM claim literal.
# ---------------------------------------------------------------------------

HT: dict = {}


def hdef(fn, label):
    def reg(h):
        HT.setdefault(fn, {})[label] = h
        return h

    return reg


@hdef("hwalk", "entry")
def _(s, l, r):
    return ("prim", ("mark", "hstep"), "pick", (s.o0, 0))


@hdef("hwalk", "pick")
def _(s, l, r):
    orient, steps = l
    if s.max_steps is not None and steps >= s.max_steps:
        return ("halt", None)
    return ("prim", ("coin", s.dir_bits), "picked", l)


@hdef("hwalk", "picked")
def _(s, l, r):
    orient, steps = l
    g = r % (2 * s.n)
    return ("call", "hstep", (orient, g), "stepped", l)


@hdef("hwalk", "stepped")
def _(s, l, r):
    orient, steps = l
    return ("prim", ("mark", "hstep"), "pick", (r, steps + 1))


# hstep: one handrail step toward global direction g.
# locals evolve: (orient, g) -> (o_v partial, g, i_u, beta0, code, stage data)
@hdef("hstep", "entry")
def _(s, l, r):
    orient, g = l
    i_u = orient[g]
    return ("prim", ("pushport", "aux", i_u), "aux_sent", (orient, g))


@hdef("hstep", "aux_sent")
def _(s, l, r):
    orient, g = l
    return ("prim", ("pstep", orient[g]), "arrived", l)


@hdef("hstep", "arrived")
def _(s, l, r):
    # r is unused; the arrival port came with the move
    orient, g = l
    return ("prim", ("readport",), "beta0", l)


@hdef("hstep", "beta0")
def _(s, l, r):
    orient, g = l
    m = 2 * s.n
    o_v = [None] * m
    o_v[(g + s.n) % m] = r
    return ("goto", "probe", (tuple(o_v), g, orient[g], r, 0, orient))


def _alpha(code, m, i_u):
    return (code // (m * m), (code // m) % m, code % m, i_u)


@hdef("hstep", "probe")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u = l
    m = 2 * s.n
    if code == m ** 3 or None not in (o_v[:g] + o_v[g + 1:]):
        return ("goto", "fill", l)
    return ("goto", "walk", (o_v, g, i_u, beta0, code, o_u, (), 0))


@hdef("hstep", "walk")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    m = 2 * s.n
    alpha = _alpha(code, m, i_u)
    if j4 == 4:
        return ("goto", "judge", l)
    port = alpha[j4]
    if betas and port == betas[-1]:
        return ("goto", "unwind", l)  # backtracking probe: bail out
    return ("prim", ("pstep", port), "walked", l)


@hdef("hstep", "walked")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    return ("prim", ("readport",), "beta_in", l)


@hdef("hstep", "beta_in")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    return ("goto", "walk", (o_v, g, i_u, beta0, code, o_u, betas + (r,), j4 + 1))


@hdef("hstep", "judge")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    return ("prim", ("sense",), "judged", l)


@hdef("hstep", "judged")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    m = 2 * s.n
    alpha = _alpha(code, m, i_u)
    if "aux" not in r:  # did not return to v: unwind via the arrival ports
        return ("goto", "unwind", l)
    if betas[3] == beta0:
        if betas[2] in o_u:
            j_dir = o_u.index(betas[2])
            if j_dir not in (g, (g + s.n) % m) and o_v[j_dir] is None:
                o_v = o_v[:j_dir] + (alpha[0],) + o_v[j_dir + 1:]
    return ("goto", "probe", (o_v, g, i_u, beta0, code + 1, o_u))


@hdef("hstep", "unwind")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    if not betas:
        return ("goto", "probe", (o_v, g, i_u, beta0, code + 1, o_u))
    return ("prim", ("pstep", betas[-1]), "unwound", l)


@hdef("hstep", "unwound")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u, betas, j4 = l
    return ("goto", "unwind", (o_v, g, i_u, beta0, code, o_u, betas[:-1], j4))


@hdef("hstep", "fill")
def _(s, l, r):
    o_v, g, i_u, beta0, code, o_u = l
    m = 2 * s.n
    used = {p for p in o_v if p is not None}
    left = [p for p in range(m) if p not in used]
    o_v = o_v[:g] + (left[0],) + o_v[g + 1:]
    return ("ret", tuple(o_v))


class HandrailWalker(Driver):
    """Random orientation-carrying walk; the state carries O, alpha and beta."""

    tables = HT
    main = "hwalk"

    def __init__(self, n: int, o0: tuple, max_steps=None):
        self.n = n
        self.o0 = tuple(o0)
        self.max_steps = max_steps
        bits = 1
        while (1 << bits) < 2 * n:
            bits += 1
        self.dir_bits = bits


# extra prims for port-based walking


from .protocol import prim


@prim("pstep")
def _p_pstep(p, obs, rand, arrival):
    return ("done", None, ("port", p[1]))


@prim("readport")
def _p_readport(p, obs, rand, arrival):
    return ("done", arrival, None)


@prim("pushport")
def _p_pushport(p, obs, rand, arrival):
    # ("pushport", target, port): a collocated reactive agent leaves via port
    _, tgt, port = p
    if tgt in roles_of(obs):
        return ("wait",)
    return ("done", None, None)


def _aux_reactive_step(state, obs, rand, arrival):
    """Port-command handling for the aux rider."""
    from .protocol import driver_prim

    for t in obs:
        pr = driver_prim(t)
        if pr is not None and pr[0] == "pushport" and pr[1] == state[0]:
            return state, ("port", pr[2])
    return state, None


class AuxFollower(Controller):
    """Aux agent for the reference walker: obeys port commands."""

    def __init__(self, role="aux"):
        self.role = role

    def initial(self):
        return (self.role, "idle")

    def step(self, state, obs, rand, arrival):
        return _aux_reactive_step(state, obs, rand, arrival)


def walker_config(labeling: PortLabeling, n: int, steps: int, seed: int = 0,
                  policy=None, trace=False) -> RunConfig:
    from .scheduler import ActivationPolicy

    o0 = labeling.ports((0,) * n)
    walker = HandrailWalker(n, o0, max_steps=steps)
    return RunConfig(
        n=n, controllers=[walker, AuxFollower("aux")],
        policy=policy or ActivationPolicy("round-robin"),
        seed=seed, labeling=labeling, trace=trace,
        stop_fn=lambda tok: tok[:1] == ("a",) and len(tok) == 3
        and tok[2][:1] == ("halt",),
        marker_fn=lambda tok: tok[:1] == ("a",) and len(tok) == 3
        and tok[2][:1] == ("mark",),
    )
