"""Spherical geometry on the unit sphere S^2 embedded in R^3.

Points are plain ``numpy`` arrays of shape ``(3,)`` with unit norm; tangent
vectors are arrays orthogonal to their base point.  Every routine here is a
closed formula built from inner products, so there are no pole singularities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ANTIPODAL_TOL = 1e-9
ZERO_TOL = 1e-12
UNIT_TOL = 1e-9
NORTH_POLE = np.array([0.0, 0.0, 1.0])


class GeometryError(ValueError):
    """Raised when a spherical construction is undefined."""


def sphere_point(coords) -> np.ndarray:
    """Validate and normalize ``coords`` into a point of S^2."""
    x = np.asarray(coords, dtype=float).reshape(3)
    n = np.linalg.norm(x)
    if abs(n - 1.0) > UNIT_TOL:
        raise GeometryError(f"not a unit vector (norm {float(n)!r})")
    return x / n


def from_lonlat(lon_deg: float, lat_deg: float) -> np.ndarray:
    lon, lat = math.radians(lon_deg), math.radians(lat_deg)
    return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])


class TangentVec(NamedTuple):
    base: np.ndarray
    vec: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


def _vec(v) -> np.ndarray:
    if isinstance(v, TangentVec):
        return np.asarray(v.vec, dtype=float)
    return np.asarray(v, dtype=float)


def project_tangent(p: np.ndarray, v) -> np.ndarray:
    """Orthogonal projection of an ambient vector onto T_p S^2."""
    v = _vec(v)
    return v - np.dot(p, v) * p


def geodesic_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Great-circle distance in radians.

    Evaluated as ``atan2(|p x q|, <p, q>)``, which equals ``arccos(<p, q>)``
    but keeps full relative precision for nearly coincident points.
    """
    return float(math.atan2(np.linalg.norm(np.cross(p, q)), np.dot(p, q)))


def geodesic_distances(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorized distance from each row of ``points`` to ``q``."""
    points = np.asarray(points, dtype=float)
    return np.arctan2(np.linalg.norm(np.cross(points, q), axis=-1), points @ q)


def exp_map(p: np.ndarray, v) -> np.ndarray:
    v = _vec(v)
    t = float(np.linalg.norm(v))
    if t >= math.pi:
        raise GeometryError("outside injectivity radius")
    if t == 0.0:
        return np.array(p, dtype=float)
    x = math.cos(t) * p + math.sin(t) * (v / t)
    return x / np.linalg.norm(x)


def exp_map_many(p: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Exponential map of many tangent vectors ``vs`` (rows) at one base point."""
    vs = np.asarray(vs, dtype=float)
    t = np.linalg.norm(vs, axis=-1, keepdims=True)
    safe = np.where(t > 0, t, 1.0)
    x = np.cos(t) * p + np.sin(t) * vs / safe
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def log_map(p: np.ndarray, q: np.ndarray) -> TangentVec:
    c = float(np.dot(p, q))
    if c <= -1.0 + ANTIPODAL_TOL:
        raise GeometryError("log map undefined at cut locus")
    w = q - c * p
    s = float(np.linalg.norm(w))
    if s == 0.0:
        return TangentVec(p, np.zeros(3))
    return TangentVec(p, math.atan2(s, c) * w / s)


def log_map_many(p: np.ndarray, qs: np.ndarray) -> np.ndarray:
    """Rows of ``log_p(q)`` for each row ``q``; antipodes are not checked."""
    qs = np.asarray(qs, dtype=float)
    c = qs @ p
    w = qs - c[:, None] * p
    s = np.linalg.norm(w, axis=1)
    safe = np.where(s > 0, s, 1.0)
    return (np.arctan2(s, c) / safe)[:, None] * w


def unit_tangent_toward(p: np.ndarray, q: np.ndarray) -> TangentVec:
    c = float(np.dot(p, q))
    if c <= -1.0 + ANTIPODAL_TOL:
        raise GeometryError("direction undefined at cut locus")
    w = q - c * p
    s = float(np.linalg.norm(w))
    if s < ZERO_TOL:
        raise GeometryError("direction undefined")
    return TangentVec(p, w / s)


def unit_tangents_toward(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Rows of the unit tangent at each point toward ``q`` (no degeneracy checks)."""
    points = np.asarray(points, dtype=float)
    w = q - (points @ q)[:, None] * points
    return w / np.linalg.norm(w, axis=1, keepdims=True)


@dataclass(frozen=True)
class GeodesicArc:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        if float(np.dot(self.start, self.end)) <= -1.0 + ANTIPODAL_TOL:
            raise GeometryError("arc endpoints are antipodal")

    @property
    def length(self) -> float:
        return geodesic_distance(self.start, self.end)

    def _frame(self):
        c = float(np.dot(self.start, self.end))
        w = self.end - c * self.start
        s = float(np.linalg.norm(w))
        u = w / s if s > 0 else np.zeros(3)
        return u, math.atan2(s, c)

    def point(self, t: float) -> np.ndarray:
        return arc_point(self, t)

    def points(self, ts) -> np.ndarray:
        """Points at arc-length fractions ``ts`` (vectorized, no range check)."""
        u, L = self._frame()
        s = np.asarray(ts, dtype=float)[:, None] * L
        x = np.cos(s) * self.start + np.sin(s) * u
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def tangents(self, ts) -> np.ndarray:
        """Unit velocity of the constant-speed parametrization at ``ts``."""
        u, L = self._frame()
        s = np.asarray(ts, dtype=float)[:, None] * L
        return -np.sin(s) * self.start + np.cos(s) * u


def arc_point(arc: GeodesicArc, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise GeometryError(f"arc parameter {t} outside [0, 1]")
    if t == 0.0:
        return np.array(arc.start)
    if t == 1.0:
        return np.array(arc.end)
    v = log_map(arc.start, arc.end).vec
    return exp_map(arc.start, t * v)


def spherical_angle(vertex: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Interior angle at ``vertex`` of the geodesic hinge toward ``a`` and ``b``."""
    ta = unit_tangent_toward(vertex, a).vec
    tb = unit_tangent_toward(vertex, b).vec
    return float(math.atan2(np.linalg.norm(np.cross(ta, tb)), np.dot(ta, tb)))


def max_admissible_radius() -> float:
    """Largest radius whose cap area 2*pi*(1 - cos R) stays below pi/3."""
    return math.acos(5.0 / 6.0)


def cap_area(radius: float) -> float:
    return 2.0 * math.pi * (1.0 - math.cos(radius))


def is_admissible(radius: float) -> bool:
    return 0.0 < radius < math.pi / 2 and cap_area(radius) < math.pi / 3


@dataclass(frozen=True)
class GeodesicBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius < math.pi / 2:
            raise GeometryError(f"ball radius {self.radius} must lie in (0, pi/2)")

    @property
    def admissible(self) -> bool:
        return is_admissible(self.radius)

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        return geodesic_distance(self.center, x) <= self.radius + tol

    def contains_many(self, xs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return geodesic_distances(xs, self.center) <= self.radius + tol


def tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """A right-handed orthonormal basis (e1, e2) of T_p S^2."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - np.dot(helper, p) * p
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return e1, e2


def normal_coords(p: np.ndarray, q: np.ndarray, basis=None) -> np.ndarray:
    """Coordinates of ``log_p(q)`` in an orthonormal tangent basis at ``p``."""
    e1, e2 = basis if basis is not None else tangent_basis(p)
    v = log_map(p, q).vec
    return np.array([np.dot(v, e1), np.dot(v, e2)])


def from_normal_coords(p: np.ndarray, w, basis=None) -> np.ndarray:
    e1, e2 = basis if basis is not None else tangent_basis(p)
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        return exp_map(p, w[0] * e1 + w[1] * e2)
    return exp_map_many(p, w[:, :1] * e1 + w[:, 1:2] * e2)


def random_points_in_ball(rng: np.random.Generator, ball: GeodesicBall, n: int) -> np.ndarray:
    """Area-uniform samples from a geodesic ball (uniform in cos of the polar angle)."""
    cos_r = math.cos(ball.radius)
    z = rng.uniform(cos_r, 1.0, size=n)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    rho = np.arccos(np.clip(z, -1.0, 1.0))
    e1, e2 = tangent_basis(ball.center)
    vs = (rho * np.cos(phi))[:, None] * e1 + (rho * np.sin(phi))[:, None] * e2
    return exp_map_many(ball.center, vs)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
