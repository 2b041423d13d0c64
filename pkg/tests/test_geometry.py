import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphere_steiner.geometry import (
    NORTH_POLE,
    GeodesicArc,
    GeodesicBall,
    GeometryError,
    arc_point,
    cap_area,
    exp_map,
    geodesic_distance,
    is_admissible,
    log_map,
    max_admissible_radius,
    random_rotation,
    sphere_point,
    spherical_angle,
    unit_tangent_toward,
)

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])


def random_pairs(rng, n):
    p = rng.standard_normal((n, 3))
    q = rng.standard_normal((n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    keep = np.einsum("ij,ij->i", p, q) > -1 + 1e-6
    return p[keep], q[keep]


unit_vectors = st.tuples(*[st.floats(-1, 1)] * 3).map(np.array).filter(
    lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: v / np.linalg.norm(v))


def test_sphere_point_normalizes_and_rejects():
    p = sphere_point([0, 0, 1 + 1e-12])
    assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(GeometryError):
        sphere_point([0, 0, 1.1])


def test_distance_examples():
    assert geodesic_distance(NORTH_POLE, NORTH_POLE) == 0.0
    assert geodesic_distance(NORTH_POLE, X) == pytest.approx(math.pi / 2, abs=1e-15)
    assert geodesic_distance(X, -X) == pytest.approx(math.pi, abs=1e-15)


def test_exp_examples():
    np.testing.assert_array_equal(exp_map(X, np.zeros(3)), X)
    np.testing.assert_allclose(exp_map(NORTH_POLE, [math.pi / 2, 0, 0]), X, atol=1e-15)
    with pytest.raises(GeometryError, match="injectivity"):
        exp_map(NORTH_POLE, [math.pi, 0, 0])


def test_log_examples():
    assert np.all(log_map(X, X).vec == 0)
    v = log_map(NORTH_POLE, X)
    np.testing.assert_allclose(v.vec, [math.pi / 2, 0, 0], atol=1e-15)
    np.testing.assert_array_equal(v.base, NORTH_POLE)
    with pytest.raises(GeometryError, match="cut locus"):
        log_map(X, -X)


def test_exp_log_round_trip_and_norm(rng):
    p, q = random_pairs(rng, 1000)
    for a, b in zip(p, q):
        v = log_map(a, b)
        assert abs(np.dot(a, v.vec)) < 1e-12
        np.testing.assert_allclose(exp_map(a, v), b, atol=1e-12)
        assert v.norm == pytest.approx(geodesic_distance(a, b), abs=1e-12)


def test_unit_tangent(rng):
    t = unit_tangent_toward(NORTH_POLE, X)
    np.testing.assert_allclose(t.vec, X, atol=1e-15)
    with pytest.raises(GeometryError, match="undefined"):
        unit_tangent_toward(X, X)
    p, q = random_pairs(rng, 1000)
    for a, b in zip(p, q):
        w = b - np.dot(a, b) * a
        np.testing.assert_allclose(unit_tangent_toward(a, b).vec, w / np.linalg.norm(w), atol=1e-12)


def test_arc_point():
    arc = GeodesicArc(X, Y)
    np.testing.assert_array_equal(arc_point(arc, 0.0), X)
    np.testing.assert_allclose(arc_point(arc, 1.0), Y, atol=1e-12)
    np.testing.assert_allclose(arc_point(arc, 0.5), [1 / math.sqrt(2), 1 / math.sqrt(2), 0], atol=1e-15)
    with pytest.raises(GeometryError):
        arc_point(arc, 1.5)
    with pytest.raises(GeometryError):
        GeodesicArc(X, -X)


def test_arc_constant_speed(rng):
    p, q = random_pairs(rng, 50)
    h = 1e-3
    for a, b in zip(p, q):
        arc = GeodesicArc(a, b)
        for t in rng.uniform(0, 1 - h, 5):
            d = geodesic_distance(arc_point(arc, t), arc_point(arc, t + h))
            assert d == pytest.approx(h * arc.length, abs=1e-10)


def test_spherical_angle_examples():
    assert spherical_angle(NORTH_POLE, X, Y) == pytest.approx(math.pi / 2, abs=1e-15)
    c, s = math.cos(1e-3), math.sin(1e-3)
    b = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]) @ -X
    # tangents at the pole toward equator points are the points themselves
    oracle = math.acos(np.dot(X, b))
    assert spherical_angle(NORTH_POLE, X, b) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(math.pi - 1e-3, abs=1e-12)


def test_equilateral_angles_by_law_of_cosines():
    pol = 0.3
    pts = [np.array([math.sin(pol) * math.cos(a), math.sin(pol) * math.sin(a), math.cos(pol)])
           for a in (0, 2 * math.pi / 3, 4 * math.pi / 3)]
    cos_side = math.cos(pol) ** 2 + math.sin(pol) ** 2 * math.cos(2 * math.pi / 3)
    expected = math.acos(cos_side / (1 + cos_side))
    angles = [spherical_angle(pts[i], pts[(i + 1) % 3], pts[(i + 2) % 3]) for i in range(3)]
    for a in angles:
        assert a == pytest.approx(expected, abs=1e-12)
        assert a > math.pi / 3


def test_law_of_cosines_closure(rng):
    n = 0
    while n < 500:
        P = rng.standard_normal((3, 3))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
        a, b, c = P
        ab, ac, bc = geodesic_distance(a, b), geodesic_distance(a, c), geodesic_distance(b, c)
        if max(ab, ac, bc) >= math.pi / 2 or min(ab, ac, bc) < 1e-3:
            continue
        C = spherical_angle(a, b, c)
        rebuilt = math.acos(math.cos(ab) * math.cos(ac) + math.sin(ab) * math.sin(ac) * math.cos(C))
        assert rebuilt == pytest.approx(bc, abs=1e-10)
        n += 1


def test_triangle_inequality(rng):
    P = rng.standard_normal((3000, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    for a, b, c in P.reshape(-1, 3, 3):
        assert geodesic_distance(a, c) <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-12


@settings(max_examples=200, deadline=None)
@given(unit_vectors, unit_vectors, st.integers(0, 2**32 - 1))
def test_rotation_equivariance(p, q, seed):
    R = random_rotation(np.random.default_rng(seed))
    assert geodesic_distance(R @ p, R @ q) == pytest.approx(geodesic_distance(p, q), abs=1e-12)
    if np.dot(p, q) > -1 + 1e-6:
        v = log_map(p, q).vec * 0.7
        np.testing.assert_allclose(R @ exp_map(p, v), exp_map(R @ p, R @ v), atol=1e-12)


def test_admissible_radius():
    R = max_admissible_radius()
    assert R == pytest.approx(0.5856855, abs=1e-7)
    assert cap_area(R) == pytest.approx(math.pi / 3, abs=1e-14)
    assert is_admissible(0.5)
    assert not is_admissible(0.6)
    assert GeodesicBall(NORTH_POLE, 0.5).admissible
    assert not GeodesicBall(NORTH_POLE, 0.6).admissible
    with pytest.raises(GeometryError):
        GeodesicBall(NORTH_POLE, 1.6)
