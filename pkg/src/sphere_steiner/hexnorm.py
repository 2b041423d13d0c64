"""The triangular lattice G in R^2, its hexagonal norm, and the matching comass.

The generators g1, g2, g3 are unit vectors at mutual 120 degrees.  The norm
has the regular hexagon with vertices +-g1, +-g2, +-g3 as its unit ball, so
lattice elements carry integer norms (the hexagonal lattice distance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT3_2 = math.sqrt(3.0) / 2.0
_SECTOR = math.pi / 3.0
_SIN_SECTOR = SQRT3_2


@dataclass(frozen=True)
class Generators:
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray

    def __iter__(self):
        return iter((self.g1, self.g2, self.g3))


def generators() -> Generators:
    return Generators(
        np.array([1.0, 0.0]),
        np.array([-0.5, SQRT3_2]),
        np.array([-0.5, -SQRT3_2]),
    )


_G = generators()


@dataclass(frozen=True, order=True)
class GroupElement:
    """Lattice element m*g1 + n*g2 with exact integer coordinates."""

    m: int = 0
    n: int = 0

    def __post_init__(self):
        if not (isinstance(self.m, (int, np.integer)) and isinstance(self.n, (int, np.integer))):
            raise TypeError("GroupElement coordinates must be integers")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.m + other.m, self.n + other.n)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.m - other.m, self.n - other.n)

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.m, -self.n)

    def __mul__(self, k: int) -> "GroupElement":
        return GroupElement(k * self.m, k * self.n)

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return self.m != 0 or self.n != 0

    @property
    def vector(self) -> np.ndarray:
        return self.m * _G.g1 + self.n * _G.g2

    def to_list(self) -> list[int]:
        return [self.m, self.n]


ZERO = GroupElement(0, 0)
G1 = GroupElement(1, 0)
G2 = GroupElement(0, 1)
G3 = GroupElement(-1, -1)
UNIT_ELEMENTS = (G1, G2, G3, -G1, -G2, -G3)


def _vertex(k: int) -> np.ndarray:
    a = k * _SECTOR
    return np.array([math.cos(a), math.sin(a)])


_VERTICES = [_vertex(k) for k in range(7)]


def hex_norm(v) -> float:
    """Minkowski functional of the hexagon with vertices at multiples of 60 degrees.

    ``v`` is split into its two adjacent vertex directions; the norm is the
    sum of the (non-negative) coefficients.
    """
    x, y = float(v[0]), float(v[1])
    if x == 0.0 and y == 0.0:
        return 0.0
    theta = math.atan2(y, x) % (2.0 * math.pi)
    k = min(int(theta // _SECTOR), 5)
    u, w = _VERTICES[k], _VERTICES[k + 1]
    a = (x * w[1] - y * w[0]) / _SIN_SECTOR
    b = (u[0] * y - u[1] * x) / _SIN_SECTOR
    return a + b


def hex_norm_many(vs) -> np.ndarray:
    """Vectorized hex norm: (2/sqrt 3) times the largest projection on an edge normal."""
    vs = np.asarray(vs, dtype=float)
    angles = _SECTOR * (np.arange(6) + 0.5)
    normals = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return np.max(vs @ normals.T, axis=-1) / SQRT3_2


def group_norm(e: GroupElement) -> float:
    return hex_norm(e.vector)


@dataclass(frozen=True)
class MatrixForm:
    """A constant R^2-valued 1-form on the plane, omega(nu) = entries @ nu."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float).reshape(2, 2))

    @classmethod
    def identity(cls) -> "MatrixForm":
        return cls(np.eye(2))

    def __call__(self, points, tangents):
        return np.asarray(tangents, dtype=float) @ self.entries.T

    # constant coefficients
    exterior_derivative_zero = True


def dual_pairing(omega: MatrixForm, nu, e: GroupElement) -> float:
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError("pairing direction must be a unit vector")
    return float(np.dot(omega.entries @ nu, e.vector))


def comass(omega: MatrixForm) -> float:
    """Dual norm of a constant form against the six unit lattice elements.

    For fixed g the supremum of |<omega nu, g>| over unit nu is |omega^T g|,
    attained at nu = omega^T g / |omega^T g|.
    """
    M = omega.entries
    return max(float(np.linalg.norm(M.T @ g.vector)) for g in UNIT_ELEMENTS)


def comass_sampled(omega: MatrixForm, n_angles: int = 3600) -> float:
    """Brute-force comass over a discretized unit circle, refined locally."""
    gens = np.stack([g.vector for g in UNIT_ELEMENTS], axis=1)
    alphas = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    nus = np.stack([np.cos(alphas), np.sin(alphas)], axis=1)
    values = np.abs(nus @ omega.entries.T @ gens)
    i, _ = np.unravel_index(np.argmax(values), values.shape)
    best, best_alpha = float(values.max()), float(alphas[i])
    step = 2.0 * math.pi / n_angles
    for _ in range(40):
        local = best_alpha + np.linspace(-step, step, 21)
        nus = np.stack([np.cos(local), np.sin(local)], axis=1)
        vals = np.abs(nus @ omega.entries.T @ gens).max(axis=1)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best = float(vals[j])
        best_alpha = float(local[j])
        step /= 5.0
    return best


def element_from_vector(v, tol: float = 1e-9) -> GroupElement:
    """Exact lattice element whose vector is ``v``; raises if ``v`` is off-lattice."""
    v = np.asarray(v, dtype=float)
    # v = m g1 + n g2  =>  n = y / (sqrt3/2), m = x + n/2
    n = v[1] / SQRT3_2
    m = v[0] + 0.5 * n
    mi, ni = round(m), round(n)
    if abs(m - mi) > tol or abs(n - ni) > tol:
        raise ValueError(f"{v!r} is not a lattice vector")
    return GroupElement(mi, ni)
