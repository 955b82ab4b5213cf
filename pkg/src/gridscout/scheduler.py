"""Activation policies: the synchronous scheduler and adversarial
semi-synchronous schedulers satisfying the bounded-fairness contract.

A policy selects a nonempty subset of agent ids every tick. Every policy
clamps starvation: an agent left inactive for B consecutive ticks is
force-included and the clamp is logged. The paper-style adversary is
unbounded ("infinitely often"); finite runs get the concrete bound B.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rng import mix2

KINDS = ("synchronous", "round-robin", "seeded-random-subset", "greedy-delay")

# short aliases accepted by the CLI
ALIASES = {
    "sync": "synchronous",
    "rr": "round-robin",
    "rand": "seeded-random-subset",
    "greedy": "greedy-delay",
}


@dataclass(frozen=True)
class ActivationPolicy:
    kind: str
    seed: int = 0
    fairness_bound: int = 10

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.fairness_bound < 1:
            raise ValueError("fairness bound must be a positive integer")


class PolicyDriver:
    """Stateful per-run selector. Deterministic in (policy, seed, history)."""

    def __init__(self, policy: ActivationPolicy, agent_count: int):
        if agent_count < 1:
            raise ValueError("agent_count must be >= 1")
        self.policy = policy
        self.k = agent_count
        self.last_active = [0] * agent_count
        self.clamp_events: list[tuple[int, int]] = []  # (tick, agent)

    def select(self, tick: int, last_effect: list[int]) -> list[int]:
        """Active ids for this tick, ascending. `last_effect[i]` is the last
        tick agent i moved or changed state (adversary-observable)."""
        pol, k, B = self.policy, self.k, self.policy.fairness_bound
        if pol.kind == "synchronous":
            chosen = set(range(k))
        elif pol.kind == "round-robin":
            chosen = {(tick - 1) % k}
        elif pol.kind == "seeded-random-subset":
            word = mix2(pol.seed, tick)
            chosen = {i for i in range(k) if (word >> (i % 48)) & 1}
            if not chosen:
                chosen = {(word >> 48) % k}
        else:  # greedy-delay: activate only agents at their fairness deadline;
            # when nobody is forced, activate the most recently effective agent
            # (the likely protocol driver), starving whoever is being awaited.
            chosen = set()

        forced = {i for i in range(k) if tick - self.last_active[i] >= B}
        if pol.kind != "greedy-delay":  # deadline activations are its policy
            for i in sorted(forced - chosen):
                self.clamp_events.append((tick, i))
        chosen |= forced
        if not chosen:
            best = max(range(k), key=lambda i: (last_effect[i], -i))
            chosen = {best}
        for i in chosen:
            self.last_active[i] = tick
        return sorted(chosen)


def fairness_audit(schedule: list[list[int]], agent_count: int, bound: int):
    """Max inactivity gap per agent over a finite schedule prefix.

    The gap for an agent is the largest distance between consecutive
    activations, counting tick 0 and the end of the prefix as endpoints.
    Passes iff every gap is <= bound.
    """
    t_end = len(schedule)
    last = [0] * agent_count
    worst = [0] * agent_count
    for t, active in enumerate(schedule, start=1):
        for i in active:
            worst[i] = max(worst[i], t - last[i])
            last[i] = t
    for i in range(agent_count):
        worst[i] = max(worst[i], t_end - last[i])
    return all(g <= bound for g in worst), worst
