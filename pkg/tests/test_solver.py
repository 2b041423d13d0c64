import math

import numpy as np
import pytest

from conftest import random_configs
from sphere_steiner.geometry import (
    NORTH_POLE,
    GeodesicBall,
    GeometryError,
    exp_map,
    geodesic_distance,
    project_tangent,
    random_points_in_ball,
    random_rotation,
    tangent_basis,
)
from sphere_steiner.harness import oracle_global_check, planar_grid_oracle
from sphere_steiner.network import validate_minimal_network
from sphere_steiner.solver import (
    TWO_PI_3,
    InadmissibleBallError,
    SolverConfig,
    SolverError,
    certify_junction,
    distance_sum,
    distance_sum_gradient,
    solve,
    solve_planar,
    solve_spherical,
    vertex_angles,
)

R3 = math.sqrt(3) / 2
EQ = [np.array([1.0, 0.0]), np.array([-0.5, R3]), np.array([-0.5, -R3])]


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(grad_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(backtrack=1.0)


def test_distance_sum_examples(eq_terminals):
    A, B, C = EQ
    assert distance_sum(A, A, B, C) == pytest.approx(2 * math.sqrt(3), abs=1e-14)
    assert distance_sum(np.zeros(2), *EQ) == pytest.approx(3.0, abs=1e-15)
    assert distance_sum(NORTH_POLE, *eq_terminals) == pytest.approx(0.9, abs=1e-15)
    with pytest.raises(GeometryError):
        distance_sum(-eq_terminals[0], *eq_terminals)


def test_gradient_examples(eq_terminals):
    np.testing.assert_allclose(distance_sum_gradient(np.zeros(2), *EQ), 0.0, atol=1e-15)
    np.testing.assert_allclose(distance_sum_gradient(NORTH_POLE, *eq_terminals), 0.0, atol=1e-15)
    with pytest.raises(GeometryError, match="nonsmooth"):
        distance_sum_gradient(EQ[0], *EQ)


def test_planar_gradient_finite_differences(rng):
    h = 1e-6
    for _ in range(100):
        P = rng.standard_normal((3, 2))
        x = rng.standard_normal(2)
        g = distance_sum_gradient(x, *P)
        fd = np.array([(distance_sum(x + h * e, *P) - distance_sum(x - h * e, *P)) / (2 * h) for e in np.eye(2)])
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-3)


def test_spherical_gradient_finite_differences(rng, eq_ball):
    h = 1e-6
    for A, B, C in random_configs(rng, eq_ball, 100):
        x = random_points_in_ball(rng, eq_ball, 1)[0]
        g = distance_sum_gradient(x, A, B, C)
        e1, e2 = tangent_basis(x)
        fd = sum(e * (distance_sum(exp_map(x, h * e), A, B, C) - distance_sum(exp_map(x, -h * e), A, B, C)) / (2 * h)
                 for e in (e1, e2))
        assert abs(np.dot(g, x)) < 1e-12
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-3)


def test_planar_equilateral():
    res = solve_planar(*EQ)
    assert res.converged and res.degenerate_at is None
    np.testing.assert_allclose(res.junction, 0.0, atol=1e-12)
    assert res.length == pytest.approx(3.0, abs=1e-12)
    assert validate_minimal_network(res.network).passed


def test_planar_degenerate_obtuse():
    A, B, C = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([-0.5, 0.1])
    ang = math.degrees(vertex_angles(A, B, C)[0])
    assert ang == pytest.approx(168.69, abs=0.01)
    res = solve_planar(A, B, C)
    assert res.degenerate_at == "A"
    np.testing.assert_array_equal(res.junction, A)
    assert sorted(res.network.edges) == [("A", "B"), ("A", "C")]
    grid, _ = planar_grid_oracle(A, B, C)
    assert np.linalg.norm(grid - A) < 1e-6


def test_planar_collinear_is_degenerate():
    res = solve_planar([0, 0], [1, 0], [3, 0])
    assert res.degenerate_at == "B"
    assert res.length == pytest.approx(3.0, abs=1e-15)


def test_planar_grid_oracle():
    P = [np.array([0.0, 0.0]), np.array([4.0, 0.0]), np.array([2.0, 3.0])]
    res = solve_planar(*P)
    w, _ = planar_grid_oracle(*P)
    assert np.linalg.norm(res.junction - w) < 1e-6
    np.testing.assert_allclose(res.junction, [2.0, 2 / math.sqrt(3)], atol=1e-9)
    assert res.tangent_residual < 1e-8


def test_planar_rejects_coincident():
    with pytest.raises(SolverError):
        solve_planar([0, 0], [0, 0], [1, 1])


def test_spherical_equilateral(eq_terminals, eq_ball):
    res = solve_spherical(*eq_terminals, eq_ball)
    assert res.converged
    assert geodesic_distance(res.junction, NORTH_POLE) < 1e-8
    assert res.length == pytest.approx(0.9, abs=1e-10)
    cert = certify_junction(res.junction, *eq_terminals)
    assert cert.passed
    assert all(a == pytest.approx(TWO_PI_3, abs=1e-8) for a in cert.angles)


def test_spherical_admissibility(eq_terminals):
    with pytest.raises(InadmissibleBallError):
        solve_spherical(*eq_terminals, GeodesicBall(NORTH_POLE, 0.6))
    res = solve_spherical(*eq_terminals, GeodesicBall(NORTH_POLE, 0.6), strict=False)
    assert res.converged
    with pytest.raises(SolverError, match="outside"):
        solve_spherical(*eq_terminals, GeodesicBall(NORTH_POLE, 0.2))
    with pytest.raises(SolverError):
        solve(*eq_terminals)


def test_spherical_random_invariants(rng, eq_ball):
    samples = random_points_in_ball(rng, eq_ball, 10000)
    for A, B, C in random_configs(rng, eq_ball, 10):
        res = solve_spherical(A, B, C, eq_ball)
        assert res.converged and res.tangent_residual < 1e-8
        cert = certify_junction(res.junction, A, B, C)
        assert cert.passed
        assert all(abs(a - TWO_PI_3) < 1e-7 for a in cert.angles)
        h = res.length
        assert h <= min(distance_sum(p, A, B, C) for p in (A, B, C))
        hs = sum(np.arccos(np.clip(samples @ p, -1, 1)) for p in (A, B, C))
        assert h <= hs.min() + 1e-12
        # exact h decreases; computed values may jitter by a few ulps once the
        # decrease |grad|^2 drops below machine precision
        assert np.all(np.diff(res.history) <= 8 * np.finfo(float).eps * h)
        assert validate_minimal_network(res.network).passed


def test_spherical_vs_grid_oracle(rng, eq_ball):
    for A, B, C in random_configs(rng, eq_ball, 3):
        res = solve_spherical(A, B, C, eq_ball)
        rep = oracle_global_check(A, B, C, eq_ball, resolution=100, solver_result=res)
        assert rep["solver"]["refined_junction_distance"] < 1e-5
        assert abs(rep["solver"]["length_difference"]) < 1e-9


def test_spherical_degenerate(rng, eq_ball):
    for A, B, C in random_configs(rng, eq_ball, 3, degenerate=True):
        res = solve_spherical(A, B, C, eq_ball)
        k = int(np.argmax(vertex_angles(A, B, C)))
        assert res.degenerate_at == "ABC"[k]
        rep = oracle_global_check(A, B, C, eq_ball, resolution=100, solver_result=res)
        assert rep["best"]["vertex"] == "ABC"[k]
        cert = certify_junction(res.junction, A, B, C)
        assert cert.degenerate and cert.passed


def test_spherical_rotation_equivariance(rng, eq_terminals, eq_ball):
    A, B, C = random_configs(rng, eq_ball, 1)[0]
    base = solve_spherical(A, B, C, eq_ball)
    for _ in range(5):
        R = random_rotation(rng)
        ball = GeodesicBall(R @ eq_ball.center, eq_ball.radius)
        res = solve_spherical(R @ A, R @ B, R @ C, ball)
        assert geodesic_distance(res.junction, R @ base.junction) < 1e-7


def test_certify_examples():
    cert = certify_junction(np.zeros(2), *EQ)
    assert cert.residual == pytest.approx(0.0, abs=1e-15)
    assert all(a == pytest.approx(TWO_PI_3, abs=1e-15) for a in cert.angles)
    assert cert.passed

    S = 1e-3 * EQ[0]
    cert = certify_junction(S, *EQ)
    assert cert.residual > 1e-4 and not cert.passed

    A, B, C = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([-0.5, 0.1])
    cert = certify_junction(A, A, B, C)
    theta = math.acos(np.dot(B, C) / np.linalg.norm(C))
    assert cert.degenerate and cert.passed
    assert cert.angles == pytest.approx([theta, 2 * math.pi - theta], abs=1e-12)
    cert = certify_junction(B, A, B, C)
    assert cert.degenerate and not cert.passed


def test_certify_spherical_vertex(eq_terminals):
    cert = certify_junction(eq_terminals[0], *eq_terminals)
    assert cert.degenerate and not cert.passed


def test_tangent_projection_helper_consistent():
    # the gradient is expressed in ambient coordinates tangent to the sphere
    x = NORTH_POLE
    v = np.array([0.3, -0.2, 5.0])
    np.testing.assert_allclose(project_tangent(x, v), [0.3, -0.2, 0.0], atol=1e-15)
