"""The look-compute-move execution core.

Agents are finite controllers stepped by a scheduler-driven tick loop:
every active agent first looks (sees the state tokens of agents sharing its
cell, nothing else), then computes a transition, and transitions are applied
in id order. A run is a pure function of (controllers, policy, seed), so
traces replay bit-identically.

Controllers must be pure: ``step(state, obs, rand, arrival)`` may depend only
on its arguments. The engine memoizes transitions on that assumption, which
is also what makes the compiled kernel exact rather than approximate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .grid import Direction, PortLabeling, manhattan_distance, norm1, sphere_size
from .rng import MASK64, Stream, mix2
from .scheduler import ActivationPolicy, PolicyDriver


class ContractViolation(RuntimeError):
    """A controller broke the model contract (e.g. move with dim >= n)."""


class Controller:
    """Base class for agent controllers. Subclasses implement pure steps."""

    def initial(self):
        raise NotImplementedError

    def step(self, state, obs, rand, arrival):
        """Return (new_state, action).

        action is None, ("move", dim, sign) or ("port", p). obs is a tuple of
        the collocated agents' state tokens (the agent's own token excluded).
        """
        raise NotImplementedError

    def rng_bits(self, state) -> int:
        return 0


class Stationary(Controller):
    def __init__(self, role="s"):
        self.role = role

    def initial(self):
        return (self.role, "stay")

    def step(self, state, obs, rand, arrival):
        return state, None


class Walker(Controller):
    """Walks forever in one direction; used by tests and negative controls."""

    def __init__(self, dim=0, sign=1, role="w"):
        self.dim, self.sign, self.role = dim, sign, role

    def initial(self):
        return (self.role, "walk")

    def step(self, state, obs, rand, arrival):
        return state, ("move", self.dim, self.sign)


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    agent: int
    src: tuple
    dst: tuple
    state_before: tuple
    state_after: tuple
    collocated: tuple  # tokens observed during the look

    def to_json(self) -> str:
        return json.dumps(
            {
                "tick": self.tick,
                "agent": self.agent,
                "from": list(self.src),
                "to": list(self.dst),
                "state_before": repr(self.state_before),
                "state_after": repr(self.state_after),
                "collocated": [repr(t) for t in self.collocated],
            },
            separators=(",", ":"),
        )


@dataclass
class RunConfig:
    n: int
    controllers: list  # Controller per agent, index = agent id
    policy: ActivationPolicy
    seed: int = 0
    treasure: Optional[tuple] = None
    labeling: Optional[PortLabeling] = None
    max_ticks: Optional[int] = None
    max_moves: Optional[int] = None
    max_excursion: Optional[int] = None
    stop_covered_radius: Optional[int] = None
    trace: bool = False
    stop_fn: Optional[Callable] = None  # token -> bool: halt when agent 0 enters
    marker_fn: Optional[Callable] = None  # token -> bool: count entries
    start_positions: Optional[list] = None  # default: all at the origin
    collect_visited: bool = True  # sessions that never read it switch it off
    lift: Optional[dict] = None  # mover agent id -> aux agent id (handrail)
    stop_marker_count: Optional[int] = None  # halt once this many markers fired
    record_schedule: bool = False  # keep the per-tick active sets (audits)


@dataclass
class RunReport:
    """Aggregated observables of one run."""

    n: int
    agent_count: int
    ticks: int = 0
    total_moves: int = 0
    moves_per_agent: list = field(default_factory=list)
    visited: set = field(default_factory=set)
    max_excursion: int = 0
    s_max: int = 0
    census: dict = field(default_factory=dict)  # role -> set of tokens
    termination: str = "running"
    treasure_found: bool = False
    found_tick: Optional[int] = None
    found_by: Optional[int] = None
    clamp_events: list = field(default_factory=list)
    marker_count: int = 0
    checksum: int = 0
    visited_size: int = 0
    orientation_faults: int = 0
    final_positions: list = field(default_factory=list)
    final_states: list = field(default_factory=list)

    def cost(self, model: str) -> int:
        from .metrics import cost_of

        return cost_of(self, model)

    def covered_radius(self) -> int:
        from .metrics import covered_radius

        return covered_radius(self)


class World:
    """Pure-Python reference engine."""

    engine_name = "python"

    def __init__(self, config: RunConfig):
        self.cfg = config
        self.k = len(config.controllers)
        if self.k == 0:
            self.positions = []
            self.report = RunReport(n=config.n, agent_count=0, termination="no_agents")
            self._done = True
            return
        self._done = False
        n = config.n
        starts = config.start_positions or [(0,) * n] * self.k
        self.positions = [tuple(p) for p in starts]
        self.start_positions = list(self.positions)
        self.tokens = [c.initial() for c in config.controllers]
        self.initial_tokens = list(self.tokens)
        self.policy = PolicyDriver(config.policy, self.k)
        self.last_effect = [0] * self.k
        self.streams = [Stream(mix2(config.seed, 0x5EED ^ i)) for i in range(self.k)]
        self.arrival = [-1] * self.k
        self.tick = 0
        self.trace_events: list[TraceEvent] = []
        self.memo = {}
        self._sid = {}
        self._sid_info = []  # sid -> (token, role, rng_bits, stop, marker)
        self.state_ids = [self._intern(i, t) for i, t in enumerate(self.tokens)]
        self.role_of_agent = [t[0] for t in self.tokens]
        self.report = RunReport(
            n=n,
            agent_count=self.k,
            moves_per_agent=[0] * self.k,
        )
        for i, p in enumerate(self.positions):
            self.report.visited.add(p)
            self._census_add(self.tokens[i])
        self.lift_orient = {}
        self.lift_mismatches = 0
        self.schedule = [] if config.record_schedule else None
        self._cover_count = 0
        if config.stop_covered_radius is not None:
            r = config.stop_covered_radius
            self._cover_target = sphere_size(n, r)
            for p in self.report.visited:
                if norm1(p) == r:
                    self._cover_count += 1
        self.checksum = 0

    # -- interning ---------------------------------------------------------

    def _intern(self, agent: int, token) -> int:
        sid = self._sid.get(token)
        if sid is None:
            sid = len(self._sid_info)
            self._sid[token] = sid
            ctrl = self.cfg.controllers[agent]
            self._sid_info.append(
                (
                    token,
                    token[0],
                    ctrl.rng_bits(token),
                    bool(self.cfg.stop_fn(token)) if self.cfg.stop_fn else False,
                    bool(self.cfg.marker_fn(token)) if self.cfg.marker_fn else False,
                )
            )
        return sid

    def _census_add(self, token):
        self.report.census.setdefault(token[0], set()).add(token)

    # -- accessors used by sessions and tests ------------------------------

    @property
    def moves_total(self) -> int:
        return self.report.total_moves

    def state_of(self, agent: int):
        return self.tokens[agent]

    def position_of(self, agent: int) -> tuple:
        return self.positions[agent]

    def set_state(self, agent: int, token):
        """Reinitialize one agent's controller state (session-level surgery)."""
        self.tokens[agent] = token
        self.state_ids[agent] = self._intern(agent, token)
        self.role_of_agent[agent] = token[0]
        self._census_add(token)

    def set_position(self, agent: int, pos: tuple):
        """Teleport an agent (session layout setup only, never mid-protocol)."""
        self.positions[agent] = tuple(pos)
        self.start_positions[agent] = tuple(pos)
        self.report.visited.add(tuple(pos))
        exc = norm1(pos)
        if exc > self.report.max_excursion:
            self.report.max_excursion = exc

    def position_of_role(self, role: str):
        for i, r in enumerate(self.role_of_agent):
            if r == role:
                return self.positions[i]
        return None

    # -- core loop ---------------------------------------------------------

    def _observe(self, agent: int) -> tuple:
        p = self.positions[agent]
        ids = sorted(
            self.state_ids[j]
            for j in range(self.k)
            if j != agent and self.positions[j] == p
        )
        return tuple(ids)

    def apply_move(self, i: int, dim: int, sign: int) -> tuple:
        """Move agent i one step, updating every run observable."""
        cfg = self.cfg
        rep = self.report
        src = self.positions[i]
        dst = list(src)
        dst[dim] += sign
        dst = tuple(dst)
        self.positions[i] = dst
        rep.total_moves += 1
        rep.moves_per_agent[i] += 1
        if dst not in rep.visited:
            rep.visited.add(dst)
            if (
                cfg.stop_covered_radius is not None
                and norm1(dst) == cfg.stop_covered_radius
            ):
                self._cover_count += 1
        exc = norm1(dst)
        if exc > rep.max_excursion:
            rep.max_excursion = exc
        if cfg.treasure is not None and dst == cfg.treasure:
            if not rep.treasure_found:
                rep.treasure_found = True
                rep.found_tick = self.tick
                rep.found_by = i
        return dst

    def step_tick(self, active: list[int]):
        """Execute one tick for the given active set (looks before moves)."""
        cfg = self.cfg
        self.tick += 1
        t = self.tick
        if self.schedule is not None:
            self.schedule.append(list(active))
        looks = [(i, self._observe(i)) for i in active]
        planned = []
        for i, obs_ids in looks:
            sid = self.state_ids[i]
            info = self._sid_info[sid]
            bits = info[2]
            rand = self.streams[i].next_word() & ((1 << bits) - 1) if bits else 0
            key = (i, sid, obs_ids, rand, self.arrival[i])
            hit = self.memo.get(key)
            if hit is None:
                obs = tuple(self._sid_info[s][0] for s in obs_ids)
                new_token, action = cfg.controllers[i].step(
                    info[0], obs, rand, self.arrival[i]
                )
                hit = (self._intern(i, new_token), action)
                self.memo[key] = hit
            planned.append((i, obs_ids, sid, hit[0], hit[1]))

        labeling = cfg.labeling
        rep = self.report
        for i, obs_ids, old_sid, new_sid, action in planned:
            src = self.positions[i]
            changed = new_sid != old_sid
            if changed:
                tok = self._sid_info[new_sid][0]
                self.tokens[i] = tok
                self.state_ids[i] = new_sid
                self.role_of_agent[i] = tok[0]
                self._census_add(tok)
                if self._sid_info[new_sid][4]:
                    rep.marker_count += 1
            dst = src
            if action is not None:
                kind = action[0]
                if kind == "move" and cfg.lift and i in cfg.lift:
                    from .handrail import execute_lifted_move

                    dst = execute_lifted_move(self, i, action[1], action[2])
                else:
                    if kind == "move":
                        _, dim, sign = action
                        if dim >= cfg.n:
                            raise ContractViolation(
                                f"agent {i} moved in dim {dim} >= n={cfg.n}"
                            )
                        d = Direction(dim, sign)
                        if labeling is not None:
                            self.arrival[i] = labeling.arrival_port(src, d)
                    else:  # port move
                        if labeling is None:
                            raise ContractViolation("port move without a labeling")
                        d = labeling.direction_of_port(src, action[1])
                        self.arrival[i] = labeling.arrival_port(src, d)
                    dst = self.apply_move(i, d.dim, d.sign)
            if changed or dst != src:
                self.last_effect[i] = t
            self.checksum = mix2(
                self.checksum, ((t & 0xFFFFFFF) << 28) ^ (i << 20) ^ new_sid
            )
            if cfg.trace:
                self.trace_events.append(
                    TraceEvent(
                        t,
                        i,
                        src,
                        dst,
                        self._sid_info[old_sid][0],
                        self._sid_info[new_sid][0],
                        tuple(self._sid_info[s][0] for s in obs_ids),
                    )
                )
        # peak stack value: distance between the b and d roles, when present
        pb = self.position_of_role("b")
        pd = self.position_of_role("d")
        if pb is not None and pd is not None:
            s = manhattan_distance(pb, pd)
            if s > rep.s_max:
                rep.s_max = s

    def activate(self, agent: int) -> TraceEvent:
        """Run a singleton tick activating only `agent`; returns its event."""
        was = self.cfg.trace
        self.cfg.trace = True
        self.policy.last_active[agent] = self.tick + 1
        self.step_tick([agent])
        self.cfg.trace = was
        ev = self.trace_events[-1]
        if not was:
            self.trace_events.clear()
        return ev

    def _finish(self, cause: str) -> RunReport:
        rep = self.report
        rep.ticks = self.tick
        rep.termination = cause
        rep.clamp_events = list(self.policy.clamp_events)
        rep.checksum = self.checksum
        rep.visited_size = len(rep.visited)
        rep.orientation_faults = self.lift_mismatches
        rep.final_positions = list(self.positions)
        rep.final_states = list(self.tokens)
        self._done = True
        return rep

    def run(self) -> RunReport:
        if self._done:
            return self.report
        cfg = self.cfg
        rep = self.report
        while True:
            if cfg.max_ticks is not None and self.tick >= cfg.max_ticks:
                return self._finish("tick_budget")
            active = self.policy.select(self.tick + 1, self.last_effect)
            self.step_tick(active)
            if rep.treasure_found:
                return self._finish("treasure_found")
            if (
                cfg.stop_covered_radius is not None
                and self._cover_count >= self._cover_target
            ):
                return self._finish("covered")
            if cfg.stop_fn is not None and self._sid_info[self.state_ids[0]][3]:
                return self._finish("program_halt")
            if (cfg.stop_marker_count is not None
                    and rep.marker_count >= cfg.stop_marker_count):
                return self._finish("marker_budget")
            if cfg.max_moves is not None and rep.total_moves >= cfg.max_moves:
                return self._finish("move_budget")
            if (
                cfg.max_excursion is not None
                and rep.max_excursion > cfg.max_excursion
            ):
                return self._finish("excursion_budget")

    # continue an already-configured world after session surgery
    def resume(self) -> RunReport:
        self._done = False
        self.report.termination = "running"
        return self.run()


def write_trace(events, path: str):
    with open(path, "w") as f:
        for ev in events:
            f.write(ev.to_json() + "\n")
