"""Coverage verification, cost accounting, scaling fits, and model audits."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .grid import BallSpec, enumerate_ball, enumerate_sphere, norm1

MODELS = ("synchronous", "semi-synchronous")

MODEL_ALIASES = {"sync": "synchronous", "semisync": "semi-synchronous"}


def canonical_model(model: str) -> str:
    model = MODEL_ALIASES.get(model, model)
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    return model


def cost_of(report, model: str) -> int:
    """Exploration cost: elapsed ticks (sync) or total moves (semi-sync)."""
    model = canonical_model(model)
    return report.ticks if model == "synchronous" else report.total_moves


def covered_radius(report) -> int:
    """Largest r such that the whole ball of radius r was visited."""
    r = 0
    while report.visited >= enumerate_sphere((0,) * report.n, r + 1):
        r += 1
    return r


def verify_coverage(report, ball: BallSpec):
    """Pass iff every point of the ball was visited; lists what is missing."""
    missing = sorted(enumerate_ball(ball.center, ball.radius) - report.visited)
    return len(missing) == 0, missing


@dataclass
class ScalingFit:
    samples: list
    slope: float
    intercept: float
    residual: float


def fit_scaling(samples) -> ScalingFit:
    """Least-squares slope of log(cost) against log(D).

    Needs at least 3 samples with distinct D; every sample must be positive.
    """
    pts = sorted(set(samples))
    if any(d <= 0 or c <= 0 for d, c in pts):
        raise ValueError("samples must be positive")
    if len({d for d, _ in pts}) < 3:
        raise ValueError("need >= 3 samples with distinct D")
    xs = [math.log(d) for d, _ in pts]
    ys = [math.log(c) for _, c in pts]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    residual = math.sqrt(
        sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys)) / n
    )
    return ScalingFit(pts, slope, intercept, residual)


def state_census(trace):
    """Map role -> set of distinct controller tokens, read from a trace."""
    out: dict = {}
    for ev in trace:
        for tok in (ev.state_before, ev.state_after):
            out.setdefault(tok[0], set()).add(tok)
    return out


def census_signature(census: dict) -> dict:
    """Stable per-role summary usable for cross-run comparisons."""
    return {role: len(toks) for role, toks in sorted(census.items())}


# ---------------------------------------------------------------------------
# Trace audits (model fidelity)
# ---------------------------------------------------------------------------


def audit_locality(trace, start_positions, start_states):
    """Check every observation equals exactly the collocated agents' tokens.

    Replays the trace, reconstructing all positions/states, and recomputes
    what each look should have seen. Returns a list of violations.
    """
    pos = {i: tuple(p) for i, p in enumerate(start_positions)}
    state = {i: tok for i, tok in enumerate(start_states)}
    violations = []
    events_by_tick: dict = {}
    for ev in trace:
        events_by_tick.setdefault(ev.tick, []).append(ev)
    for t in sorted(events_by_tick):
        evs = events_by_tick[t]
        for ev in evs:  # looks against pre-tick world
            expected = sorted(
                repr(state[j]) for j in pos
                if j != ev.agent and pos[j] == pos[ev.agent]
            )
            got = sorted(repr(tok) for tok in ev.collocated)
            if got != expected:
                violations.append((t, ev.agent, expected, got))
        for ev in evs:
            if pos[ev.agent] != ev.src:
                violations.append((t, ev.agent, "position desync", ev.src))
            pos[ev.agent] = ev.dst
            state[ev.agent] = ev.state_after
    return violations


def audit_displacement(trace):
    """Per-activation displacement must be <= 1 in L1."""
    bad = []
    for ev in trace:
        d = sum(abs(a - b) for a, b in zip(ev.src, ev.dst))
        if d > 1:
            bad.append(ev)
    return bad


def max_excursion_of_trace(trace) -> int:
    m = 0
    for ev in trace:
        m = max(m, norm1(ev.dst))
    return m


# ---------------------------------------------------------------------------
# Configurations (relative views)
# ---------------------------------------------------------------------------


def relative_configuration(positions, states):
    """Shift the origin to agent 0: translation-invariant view of a config."""
    if not positions:
        raise ValueError("need at least one agent")
    base = positions[0]
    offsets = [tuple(c - b for c, b in zip(p, base)) for p in positions]
    return offsets, list(states)
