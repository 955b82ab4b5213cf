"""gridscout: finite-state agents hunting a treasure on infinite grids."""

from .engine import HAVE_KERNEL, default_engine, make_world
from .grid import (
    BallSpec,
    Direction,
    PortLabeling,
    ball_volume,
    enumerate_ball,
    enumerate_sphere,
    manhattan_distance,
    step,
)
from .metrics import cost_of, covered_radius, fit_scaling, verify_coverage
from .runtime import Controller, RunConfig, RunReport, World
from .scheduler import ActivationPolicy, fairness_audit
from .stack import StackSession, SymbolicStack, symbolic_oracle
from .explorers import build_config, run_algorithm

__all__ = [
    "ActivationPolicy", "BallSpec", "Controller", "Direction", "HAVE_KERNEL",
    "PortLabeling", "RunConfig", "RunReport", "StackSession", "SymbolicStack",
    "World", "ball_volume", "build_config", "cost_of", "covered_radius",
    "default_engine", "enumerate_ball", "enumerate_sphere", "fairness_audit",
    "fit_scaling", "make_world", "manhattan_distance", "run_algorithm",
    "step", "symbolic_oracle", "verify_coverage",
]
