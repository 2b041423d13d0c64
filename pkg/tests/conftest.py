import math

import numpy as np
import pytest

from sphere_steiner.geometry import NORTH_POLE, GeodesicBall, random_points_in_ball
from sphere_steiner.solver import TWO_PI_3, vertex_angles

ACCEPTANCE_LINES = []


def equilateral_terminals(polar=0.3):
    return [
        np.array([math.sin(polar) * math.cos(a), math.sin(polar) * math.sin(a), math.cos(polar)])
        for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)
    ]


def random_configs(rng, ball, n, degenerate=False, max_angle=None, min_side=0.05):
    """Terminal triples in ``ball`` sorted by the 120-degree criterion."""
    out = []
    while len(out) < n:
        pts = list(random_points_in_ball(rng, ball, 3))
        angles = vertex_angles(*pts)
        sides = [np.arccos(np.clip(pts[i] @ pts[(i + 1) % 3], -1, 1)) for i in range(3)]
        if min(sides) < min_side:
            continue
        if degenerate != (max(angles) >= TWO_PI_3):
            continue
        if max_angle is not None and max(angles) > max_angle:
            continue
        out.append(pts)
    return out


@pytest.fixture
def eq_terminals():
    return equilateral_terminals()


@pytest.fixture
def eq_ball():
    return GeodesicBall(NORTH_POLE, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
