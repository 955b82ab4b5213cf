"""Geometry of the infinite n-dimensional integer grid under the L1 metric.

Grid points are plain tuples of ints; nothing here ever materializes the
grid itself. Port labelings for unoriented grids are pure functions of
(seed, node) so they can be replayed and queried anywhere without storage.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

from .rng import mix2, splitmix64

GridPoint = tuple  # tuple of ints, length n


class DimensionMismatch(ValueError):
    """Raised when two points of different dimension meet an operation."""


@dataclass(frozen=True)
class Direction:
    """A unit move: one dimension index and a sign."""

    dim: int
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError(f"sign must be +-1, got {self.sign}")
        if self.dim < 0:
            raise ValueError(f"dim must be >= 0, got {self.dim}")

    def opposite(self) -> "Direction":
        return Direction(self.dim, -self.sign)


def origin(n: int) -> GridPoint:
    return (0,) * n


def manhattan_distance(a: GridPoint, b: GridPoint) -> int:
    if len(a) != len(b):
        raise DimensionMismatch(f"dimension mismatch: {len(a)} vs {len(b)}")
    return sum(abs(x - y) for x, y in zip(a, b))


def norm1(p: GridPoint) -> int:
    return sum(abs(x) for x in p)


def step(p: GridPoint, d: Direction) -> GridPoint:
    if d.dim >= len(p):
        raise DimensionMismatch(f"direction dim {d.dim} out of range for n={len(p)}")
    q = list(p)
    q[d.dim] += d.sign
    return tuple(q)


def add(p: GridPoint, q: GridPoint) -> GridPoint:
    return tuple(x + y for x, y in zip(p, q))


def unit(n: int, dim: int, sign: int = 1) -> GridPoint:
    e = [0] * n
    e[dim] = sign
    return tuple(e)


def enumerate_sphere(center: GridPoint, q: int) -> set:
    """All points at L1 distance exactly q from center.

    Built by distributing the distance budget over dimensions; for n=3 and
    q >= 1 the count is 4q^2 + 2.
    """
    if q < 0:
        raise ValueError("radius must be >= 0")
    n = len(center)
    out = set()

    def rec(i: int, rem: int, acc: list):
        if i == n - 1:
            for v in (rem, -rem) if rem else (0,):
                out.add(tuple(a + c for a, c in zip(acc + [v], center)))
            return
        for r in range(rem + 1):
            for v in (r, -r) if r else (0,):
                rec(i + 1, rem - r, acc + [v])

    rec(0, q, [])
    return out


def enumerate_ball(center: GridPoint, radius: int) -> set:
    """All points at L1 distance <= radius from center."""
    out = set()
    for q in range(radius + 1):
        out |= enumerate_sphere(center, q)
    return out


@lru_cache(maxsize=None)
def sphere_size(n: int, q: int) -> int:
    if q == 0:
        return 1
    return ball_volume(n, q) - ball_volume(n, q - 1)


@lru_cache(maxsize=None)
def ball_volume(n: int, radius: int) -> int:
    """Exact number of lattice points with L1 norm <= radius.

    Sum over the number i of nonzero coordinates; asymptotically
    (2^n / n!) * radius^n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return sum((1 << i) * comb(n, i) * comb(radius, i) for i in range(0, min(n, radius) + 1))


@dataclass(frozen=True)
class BallSpec:
    radius: int
    center: GridPoint

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


# ---------------------------------------------------------------------------
# Port labelings for unoriented grids.
#
# Global direction indices follow the convention: i in [0, n) means +1 along
# dimension i, and i+n means -1 along dimension i. reverse(i) = i xor'd by
# adding n mod 2n.
# ---------------------------------------------------------------------------

IDENTITY_SEED = 0


def direction_index(d: Direction, n: int) -> int:
    return d.dim if d.sign > 0 else d.dim + n


def index_direction(i: int, n: int) -> Direction:
    return Direction(i, 1) if i < n else Direction(i - n, -1)


def reverse_index(i: int, n: int) -> int:
    return (i + n) % (2 * n)


@dataclass(frozen=True)
class PortLabeling:
    """A per-node permutation of the 2n edge-end labels, derived from a seed.

    Seed 0 is reserved for the identity labeling, where the port of global
    direction i is i itself at every node (the oriented grid embedded as a
    labeling).
    """

    seed: int
    n: int

    def ports(self, u: GridPoint) -> tuple:
        """ports(u)[i] = port label at u of the edge leaving in direction i."""
        m = 2 * self.n
        if self.seed == IDENTITY_SEED:
            return tuple(range(m))
        h = splitmix64(self.seed & ((1 << 64) - 1))
        for c in u:
            h = mix2(h, c & ((1 << 64) - 1))
        perm = list(range(m))
        x = h
        for i in range(m - 1, 0, -1):
            x = splitmix64(x)
            j = x % (i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return tuple(perm)

    def port_of(self, u: GridPoint, d: Direction) -> int:
        return self.ports(u)[direction_index(d, self.n)]

    def direction_of_port(self, u: GridPoint, port: int) -> Direction:
        return index_direction(self.ports(u).index(port), self.n)

    def arrival_port(self, u: GridPoint, d: Direction) -> int:
        """Port observed on arrival at step(u, d) having travelled along d."""
        v = step(u, d)
        return self.ports(v)[reverse_index(direction_index(d, self.n), self.n)]
