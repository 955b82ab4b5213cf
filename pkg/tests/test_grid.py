"""Grid geometry tests, checked against brute-force cube scans."""

import itertools
import random

import pytest
from hypothesis import given, strategies as st

from gridscout.grid import (
    BallSpec,
    DimensionMismatch,
    Direction,
    PortLabeling,
    ball_volume,
    enumerate_ball,
    enumerate_sphere,
    manhattan_distance,
    origin,
    sphere_size,
    step,
)


def cube_scan_sphere(n, q):
    """Independent oracle: scan the cube [-q, q]^n and filter by distance."""
    out = set()
    for p in itertools.product(range(-q, q + 1), repeat=n):
        if sum(abs(c) for c in p) == q:
            out.add(p)
    return out


def cube_scan_ball(n, radius):
    out = set()
    for p in itertools.product(range(-radius, radius + 1), repeat=n):
        if sum(abs(c) for c in p) <= radius:
            out.add(p)
    return out


def test_manhattan_basics():
    assert manhattan_distance((0, 0, 0), (0, 0, 0)) == 0
    assert manhattan_distance((0, 0, 0), (1, -2, 3)) == 6
    assert manhattan_distance((2, 2), (-1, 5)) == 6


def test_manhattan_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        manhattan_distance((0, 0), (0, 0, 0))


@given(
    st.integers(1, 5).flatmap(
        lambda n: st.tuples(
            st.tuples(*[st.integers(-50, 50)] * n),
            st.tuples(*[st.integers(-50, 50)] * n),
            st.tuples(*[st.integers(-50, 50)] * n),
        )
    )
)
def test_manhattan_metric_properties(pts):
    a, b, c = pts
    assert manhattan_distance(a, b) == manhattan_distance(b, a) >= 0
    assert (manhattan_distance(a, b) == 0) == (a == b)
    assert manhattan_distance(a, c) <= manhattan_distance(a, b) + manhattan_distance(b, c)


def test_step():
    assert step((0, 0, 0), Direction(0, 1)) == (1, 0, 0)
    assert step((5, -3), Direction(1, -1)) == (5, -4)


@given(
    st.integers(1, 5).flatmap(
        lambda n: st.tuples(
            st.tuples(*[st.integers(-20, 20)] * n),
            st.integers(0, n - 1),
            st.sampled_from([-1, 1]),
        )
    )
)
def test_step_inverse(args):
    p, dim, sign = args
    d = Direction(dim, sign)
    assert step(step(p, d), d.opposite()) == p
    assert manhattan_distance(step(p, d), p) == 1


def test_sphere_small():
    assert enumerate_sphere((0, 0, 0), 0) == {(0, 0, 0)}
    assert enumerate_sphere((0, 0, 0), 1) == {
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
    }
    # frozen from the cube-scan oracle
    assert len(enumerate_sphere((0, 0, 0), 4)) == 66


def test_sphere_against_cube_scan():
    for n in (1, 2, 3, 4):
        for q in range(0, 6):
            assert enumerate_sphere(origin(n), q) == cube_scan_sphere(n, q)


def test_sphere_counts_3d_formula():
    for q in range(1, 21):
        assert sphere_size(3, q) == 4 * q * q + 2
        assert len(enumerate_sphere(origin(3), q)) == 4 * q * q + 2


def test_sphere_offcenter():
    c = (3, -1, 2)
    assert enumerate_sphere(c, 2) == {tuple(a + b for a, b in zip(p, c))
                                      for p in cube_scan_sphere(3, 2)}


def test_ball_volume_frozen():
    assert ball_volume(1, 3) == 7
    assert ball_volume(3, 2) == 25  # 1 + 6 + 18, cube scan
    assert ball_volume(2, 4) == 41  # cube scan


def test_ball_volume_against_scan_and_spheres():
    for n in (1, 2, 3, 4):
        for radius in range(0, 9):
            assert ball_volume(n, radius) == len(cube_scan_ball(n, radius))
            assert ball_volume(n, radius) == sum(
                len(enumerate_sphere(origin(n), q)) for q in range(radius + 1)
            )


def test_enumerate_ball():
    assert enumerate_ball((0, 0), 2) == cube_scan_ball(2, 2)


def test_ballspec_validation():
    with pytest.raises(ValueError):
        BallSpec(-1, (0, 0))


def test_identity_labeling():
    lab = PortLabeling(0, 3)
    for u in [(0, 0, 0), (5, -2, 7), (-100, 3, 9)]:
        assert lab.ports(u) == (0, 1, 2, 3, 4, 5)
        assert lab.port_of(u, Direction(1, 1)) == 1
        assert lab.port_of(u, Direction(1, -1)) == 4  # i + n for negative sign


def test_labeling_is_permutation_and_deterministic():
    rnd = random.Random(12345)
    for n in (2, 3, 5):
        for _ in range(333):
            seed = rnd.getrandbits(64) or 1
            u = tuple(rnd.randint(-10**6, 10**6) for _ in range(n))
            lab = PortLabeling(seed, n)
            ports = lab.ports(u)
            assert sorted(ports) == list(range(2 * n))
            assert lab.ports(u) == ports  # determinism


def test_labeling_round_trip():
    lab = PortLabeling(987654321, 3)
    u = (4, -2, 9)
    for i in range(6):
        from gridscout.grid import index_direction
        d = index_direction(i, 3)
        p = lab.port_of(u, d)
        assert lab.direction_of_port(u, p) == d
