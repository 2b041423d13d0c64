"""Three-terminal Steiner (Fermat) points in the plane and on the sphere.

The junction minimises the distance sum h(x) = d(x,A) + d(x,B) + d(x,C).
Planar problems use Weiszfeld's fixed-point iteration; spherical problems use
Riemannian gradient descent along great circles with Armijo backtracking.
When one interior angle of the terminal triangle is at least 120 degrees
the minimum sits on that vertex and the network collapses to two edges.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ANTIPODAL_TOL,
    GeodesicBall,
    GeometryError,
    exp_map,
    geodesic_distance,
    log_map,
    max_admissible_radius,
    project_tangent,
    spherical_angle,
    unit_tangent_toward,
)
from .network import EmbeddedNetwork, network_length

log = logging.getLogger(__name__)

TWO_PI_3 = 2.0 * math.pi / 3.0
DEGENERATE_TOL = 1e-12
LABELS = ("A", "B", "C")


class SolverError(RuntimeError):
    pass


class InadmissibleBallError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    grad_tol: float = 1e-10
    max_iters: int = 10000
    step_init: float = 1.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if min(self.grad_tol, self.max_iters, self.step_init, self.armijo_c) <= 0:
            raise ValueError("solver settings must be positive")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass
class SteinerResult:
    junction: np.ndarray
    degenerate_at: str | None
    network: EmbeddedNetwork
    tangent_residual: float
    iterations: int
    converged: bool
    boundary_case: bool = False
    history: list = field(default_factory=list, repr=False)

    @property
    def length(self) -> float:
        return network_length(self.network)

    def to_dict(self) -> dict:
        return {
            "junction": [float(x) for x in self.junction],
            "degenerate_at": self.degenerate_at,
            "tangent_residual": self.tangent_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "boundary_case": self.boundary_case,
            "length": self.length,
        }


def _space_of(x) -> str:
    return "sphere" if np.asarray(x).shape == (3,) else "plane"


def _distance(space: str, x, p) -> float:
    if space == "sphere":
        if float(np.dot(x, p)) <= -1.0 + ANTIPODAL_TOL:
            raise GeometryError("distance sum undefined at an antipode")
        return geodesic_distance(x, p)
    return float(np.linalg.norm(np.asarray(x, dtype=float) - p))


def distance_sum(x, A, B, C) -> float:
    space = _space_of(x)
    return math.fsum(_distance(space, x, p) for p in (A, B, C))


def distance_sum_gradient(x, A, B, C) -> np.ndarray:
    """Riemannian gradient of h: minus the sum of unit directions to the terminals."""
    x = np.asarray(x, dtype=float)
    space = _space_of(x)
    g = np.zeros_like(x)
    for p in (A, B, C):
        if space == "sphere":
            if geodesic_distance(x, p) < 1e-12:
                raise GeometryError("nonsmooth point")
            g -= unit_tangent_toward(x, p).vec
        else:
            d = np.asarray(p, dtype=float) - x
            n = float(np.linalg.norm(d))
            if n < 1e-12:
                raise GeometryError("nonsmooth point")
            g -= d / n
    return g


def _angle_between(u, v) -> float:
    if u.size == 2:
        cross = abs(u[0] * v[1] - u[1] * v[0])
    else:
        cross = float(np.linalg.norm(np.cross(u, v)))
    return math.atan2(cross, float(np.dot(u, v)))


def _plane_angle(vertex, a, b) -> float:
    u, v = a - vertex, b - vertex
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(np.dot(u, v)))


def vertex_angles(A, B, C) -> list[float]:
    """Interior angles of triangle ABC at A, B and C."""
    pts = [np.asarray(p, dtype=float) for p in (A, B, C)]
    angle = spherical_angle if _space_of(pts[0]) == "sphere" else _plane_angle
    return [angle(pts[i], pts[(i + 1) % 3], pts[(i + 2) % 3]) for i in range(3)]


def _networks(space, pts, junction, degenerate_at):
    verts = dict(zip(LABELS, pts))
    if degenerate_at is None:
        verts["S"] = junction
        return EmbeddedNetwork(space, verts, [("S", l) for l in LABELS], LABELS, ("S",))
    others = [l for l in LABELS if l != degenerate_at]
    return EmbeddedNetwork(space, verts, [(degenerate_at, o) for o in others], LABELS, ())


def _degenerate_result(space, pts, k, angles) -> SteinerResult:
    label = LABELS[k]
    boundary = abs(angles[k] - TWO_PI_3) <= DEGENERATE_TOL
    return SteinerResult(
        junction=np.array(pts[k], dtype=float),
        degenerate_at=label,
        network=_networks(space, pts, None, label),
        tangent_residual=0.0,
        iterations=0,
        converged=True,
        boundary_case=boundary,
    )


def _degenerate_vertex(angles) -> int | None:
    k = int(np.argmax(angles))
    return k if angles[k] >= TWO_PI_3 - DEGENERATE_TOL else None


def _check_distinct(space, pts):
    for i in range(3):
        for j in range(i + 1, 3):
            if _distance(space, pts[i], pts[j]) < 1e-12:
                raise SolverError("terminals must be pairwise distinct")


def solve_planar(A, B, C, cfg: SolverConfig | None = None) -> SteinerResult:
    cfg = cfg or SolverConfig()
    pts = [np.asarray(p, dtype=float).reshape(2) for p in (A, B, C)]
    _check_distinct("plane", pts)
    angles = vertex_angles(*pts)
    k = _degenerate_vertex(angles)
    if k is not None:
        return _degenerate_result("plane", pts, k, angles)

    P = np.stack(pts)
    x = P.mean(axis=0)
    history = [distance_sum(x, *pts)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        d = np.linalg.norm(P - x, axis=1)
        near = int(np.argmin(d))
        if d[near] < 1e-9:
            # iterate hit a terminal; it is not optimal there (angles < 120), so step off it
            x = x + 1e-6 * (P.mean(axis=0) - x)
            continue
        w = 1.0 / d
        x_new = (w[:, None] * P).sum(axis=0) / w.sum()
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        history.append(distance_sum(x, *pts))
        if step < cfg.grad_tol:
            converged = True
            break
    residual = float(np.linalg.norm(distance_sum_gradient(x, *pts)))
    if not converged:
        log.warning("Weiszfeld stopped after %d iterations (residual %.3e)", it, residual)
    return SteinerResult(x, None, _networks("plane", pts, x, None), residual, it, converged,
                         history=history)


def solve_spherical(
    A, B, C, ball: GeodesicBall, cfg: SolverConfig | None = None, strict: bool = True
) -> SteinerResult:
    cfg = cfg or SolverConfig()
    if strict and not ball.admissible:
        raise InadmissibleBallError(
            f"ball radius {ball.radius:.6f} exceeds the admissible bound "
            f"arccos(5/6) = {max_admissible_radius():.7f}"
        )
    pts = [np.asarray(p, dtype=float).reshape(3) for p in (A, B, C)]
    for label, p in zip(LABELS, pts):
        if not ball.contains(p, tol=1e-12):
            raise SolverError(f"terminal {label} lies outside the geodesic ball")
    _check_distinct("sphere", pts)
    angles = vertex_angles(*pts)
    k = _degenerate_vertex(angles)
    if k is not None:
        return _degenerate_result("sphere", pts, k, angles)

    x = sum(pts)
    x = x / np.linalg.norm(x)
    h = distance_sum(x, *pts)
    history = [h]
    g = distance_sum_gradient(x, *pts)
    gnorm = float(np.linalg.norm(g))
    converged = gnorm < cfg.grad_tol
    it = 0
    s_prev = y_prev = None
    while not converged and it < cfg.max_iters:
        it += 1
        # Barzilai-Borwein trial step, falling back to the Weiszfeld step length
        # (the Hessian of h is bounded by sum cot(d_i) <= sum 1/d_i)
        t = 1.0 / sum(1.0 / geodesic_distance(x, p) for p in pts)
        if s_prev is not None:
            sy = float(np.dot(s_prev, y_prev))
            if sy > 0:
                t = float(np.dot(s_prev, s_prev)) / sy
        t = min(cfg.step_init, t)
        while True:
            x_new = exp_map(x, -t * g)
            if not ball.contains(x_new, tol=1e-12):
                # a long trial step may overshoot the ball; the minimiser is interior
                t *= cfg.backtrack
                continue
            h_new = distance_sum(x_new, *pts)
            if h_new <= h - cfg.armijo_c * t * gnorm * gnorm:
                break
            # below roundoff the Armijo test is undecidable; accept a step that
            # leaves h unchanged to within a few ulps and shrinks the gradient
            if h_new - h <= 8 * np.finfo(float).eps * h:
                g_try = distance_sum_gradient(x_new, *pts)
                if np.linalg.norm(g_try) < gnorm:
                    break
            t *= cfg.backtrack
            if t < 1e-16:
                raise SolverError("line search failed to find a descent step")
        x_old, g_old = x, g
        x, h = x_new, min(h_new, h)
        if not ball.contains(x, tol=1e-12):
            raise SolverError("left geodesic ball")
        history.append(h_new)
        g = distance_sum_gradient(x, *pts)
        # secant pair expressed in T_x (curvature corrections are higher order)
        s_prev = -log_map(x, x_old).vec
        y_prev = g - project_tangent(x, g_old)
        gnorm = float(np.linalg.norm(g))
        converged = gnorm < cfg.grad_tol
    if not converged:
        log.warning("spherical descent stopped after %d iterations (|grad| %.3e)", it, gnorm)
    return SteinerResult(x, None, _networks("sphere", pts, x, None), gnorm, it, converged,
                         history=history)


def solve(A, B, C, ball: GeodesicBall | None = None, cfg: SolverConfig | None = None,
          strict: bool = True) -> SteinerResult:
    if _space_of(A) == "sphere":
        if ball is None:
            raise SolverError("spherical problems need a geodesic ball")
        return solve_spherical(A, B, C, ball, cfg, strict)
    return solve_planar(A, B, C, cfg)


@dataclass
class Certification:
    residual: float
    angles: list
    passed: bool
    degenerate: bool = False
    boundary_case: bool = False

    def to_dict(self) -> dict:
        return {
            "tangent_residual": self.residual,
            "angles": list(self.angles),
            "passed": self.passed,
            "degenerate": self.degenerate,
            "boundary_case": self.boundary_case,
        }


def certify_junction(S, A, B, C, tol: float = 1e-8) -> Certification:
    """Check the 120-degree condition at S, or the vertex condition if S is a terminal."""
    S = np.asarray(S, dtype=float)
    space = _space_of(S)
    pts = [np.asarray(p, dtype=float) for p in (A, B, C)]
    dists = [_distance(space, S, p) for p in pts]
    k = int(np.argmin(dists))
    if dists[k] < 1e-12:
        V, P, Q = pts[k], pts[(k + 1) % 3], pts[(k + 2) % 3]
        theta = spherical_angle(V, P, Q) if space == "sphere" else _plane_angle(V, P, Q)
        both = [theta, 2.0 * math.pi - theta]
        ok = all(a >= TWO_PI_3 - tol for a in both)
        return Certification(0.0, both, ok, degenerate=True,
                             boundary_case=abs(theta - TWO_PI_3) <= DEGENERATE_TOL)
    if space == "sphere":
        taus = [unit_tangent_toward(S, p).vec for p in pts]
    else:
        taus = [(p - S) / np.linalg.norm(p - S) for p in pts]
    residual = float(np.linalg.norm(sum(taus)))
    angles = [_angle_between(taus[i], taus[j]) for i, j in ((0, 1), (1, 2), (2, 0))]
    ok = residual < tol and all(abs(a - TWO_PI_3) <= tol for a in angles)
    return Certification(residual, angles, ok)
