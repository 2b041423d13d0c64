"""Networks embedded in the plane or on S^2, and 1-rectifiable currents on them.

A network is a finite graph whose edges are straight segments (plane) or
minor great-circle arcs (sphere).  Decorating every edge with an orientation
and a lattice multiplicity in G gives a rectifiable current with piecewise
constant coefficients; mass, boundary and pairing with 1-forms are computed
directly from that representation.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import (
    GeodesicArc,
    from_lonlat,
    geodesic_distance,
    sphere_point,
    unit_tangent_toward,
)
from .hexnorm import ZERO, GroupElement, group_norm

SPACES = ("sphere", "plane")
POINT_MERGE_TOL = 1e-10


class NetworkError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# abstract graphs


@dataclass(frozen=True)
class AbstractGraph:
    """Edges 0..N-1 with endpoints (0, i) and (1, i) glued into vertex classes."""

    edge_count: int
    vertex_classes: tuple[frozenset, ...]

    def __post_init__(self):
        if self.edge_count < 1:
            raise NetworkError("a graph needs at least one edge")
        endpoints = [(s, i) for i in range(self.edge_count) for s in (0, 1)]
        seen = [p for cls in self.vertex_classes for p in cls]
        if sorted(seen) != sorted(endpoints):
            raise NetworkError("vertex classes must partition the 2N edge endpoints")
        if not self.connected():
            raise NetworkError("graph is not connected")

    def class_of(self, endpoint: tuple[int, int]) -> int:
        for k, cls in enumerate(self.vertex_classes):
            if endpoint in cls:
                return k
        raise KeyError(endpoint)

    def connected(self) -> bool:
        adj: dict[int, set[int]] = {k: set() for k in range(len(self.vertex_classes))}
        for i in range(self.edge_count):
            a, b = self.class_of((0, i)), self.class_of((1, i))
            adj[a].add(b)
            adj[b].add(a)
        seen, todo = {0}, deque([0])
        while todo:
            for nb in adj[todo.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    todo.append(nb)
        return len(seen) == len(adj)

    def order(self, k: int) -> int:
        return len(self.vertex_classes[k])


# ---------------------------------------------------------------------------
# edge curves


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    end: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def point(self, t: float) -> np.ndarray:
        return self.start + t * (self.end - self.start)

    def points(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)[:, None]
        return self.start + ts * (self.end - self.start)

    def tangents(self, ts) -> np.ndarray:
        d = (self.end - self.start) / self.length
        return np.broadcast_to(d, (len(np.atleast_1d(ts)), d.size)).copy()


def make_curve(space: str, start: np.ndarray, end: np.ndarray):
    return GeodesicArc(start, end) if space == "sphere" else Segment(start, end)


def point_distance(space: str, p: np.ndarray, q: np.ndarray) -> float:
    if space == "sphere":
        return geodesic_distance(p, q)
    return float(np.linalg.norm(np.asarray(p) - np.asarray(q)))


def inward_tangent(space: str, at: np.ndarray, toward: np.ndarray) -> np.ndarray:
    """Unit tangent at ``at`` of the edge running to ``toward``."""
    if space == "sphere":
        return unit_tangent_toward(at, toward).vec
    d = np.asarray(toward, dtype=float) - at
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise NetworkError("direction undefined")
    return d / n


# ---------------------------------------------------------------------------
# embedded networks


def _parse_coords(space: str, raw) -> np.ndarray:
    if isinstance(raw, dict):
        if space != "sphere":
            raise NetworkError("lon/lat coordinates are only meaningful on the sphere")
        return from_lonlat(float(raw["lon"]), float(raw["lat"]))
    x = np.asarray(raw, dtype=float)
    if space == "sphere":
        if x.shape != (3,):
            raise NetworkError(f"sphere coordinates must be 3-vectors, got {raw!r}")
        return sphere_point(x)
    if x.shape != (2,):
        raise NetworkError(f"plane coordinates must be 2-vectors, got {raw!r}")
    return x


@dataclass(frozen=True)
class EmbeddedNetwork:
    space: str
    vertices: dict
    edges: tuple
    terminals: tuple = ()
    junctions: tuple = ()

    def __post_init__(self):
        if self.space not in SPACES:
            raise NetworkError(f"unknown space {self.space!r}")
        verts = {str(k): _parse_coords(self.space, v) for k, v in dict(self.vertices).items()}
        object.__setattr__(self, "vertices", verts)
        edges = tuple((str(a), str(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "terminals", tuple(str(t) for t in self.terminals))
        object.__setattr__(self, "junctions", tuple(str(j) for j in self.junctions))
        for a, b in edges:
            if a not in verts or b not in verts:
                raise NetworkError(f"edge ({a}, {b}) references an unknown vertex")
            if a == b:
                raise NetworkError(f"edge ({a}, {b}) is a loop")
        for v in self.terminals + self.junctions:
            if v not in verts:
                raise NetworkError(f"unknown vertex id {v!r}")

    @cached_property
    def curves(self) -> list:
        return [make_curve(self.space, self.vertices[a], self.vertices[b]) for a, b in self.edges]

    @property
    def ambient_dim(self) -> int:
        return 3 if self.space == "sphere" else 2

    def degree(self, vid: str) -> int:
        return sum((a == vid) + (b == vid) for a, b in self.edges)

    def incident(self, vid: str) -> list[tuple[int, str]]:
        """(edge index, other endpoint id) for every edge touching ``vid``."""
        out = []
        for i, (a, b) in enumerate(self.edges):
            if a == vid:
                out.append((i, b))
            if b == vid:
                out.append((i, a))
        return out

    def interior_vertices(self) -> list[str]:
        return [v for v in self.vertices if v not in self.terminals]

    def graph(self) -> AbstractGraph:
        used = [v for v in self.vertices if self.degree(v) > 0]
        classes = []
        for v in used:
            cls = frozenset(
                [(0, i) for i, (a, _) in enumerate(self.edges) if a == v]
                + [(1, i) for i, (_, b) in enumerate(self.edges) if b == v]
            )
            classes.append(cls)
        return AbstractGraph(len(self.edges), tuple(classes))

    def to_dict(self) -> dict:
        return {
            "space": self.space,
            "vertices": [{"id": k, "coords": [float(c) for c in v]} for k, v in self.vertices.items()],
            "edges": [{"from": a, "to": b} for a, b in self.edges],
            "terminals": list(self.terminals),
            "junctions": list(self.junctions),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "EmbeddedNetwork":
        try:
            space = data["space"]
            vertices = {v["id"]: v["coords"] for v in data["vertices"]}
            edges = [(e["from"], e["to"]) for e in data.get("edges", [])]
        except (KeyError, TypeError) as exc:
            raise NetworkError(f"malformed network JSON: {exc}") from exc
        return cls(space, vertices, edges, data.get("terminals", []), data.get("junctions", []))


def network_length(net: EmbeddedNetwork) -> float:
    return math.fsum(c.length for c in net.curves)


# ---------------------------------------------------------------------------
# minimal network conditions


@dataclass
class MinimalNetworkReport:
    geodesic_edges: bool
    disjoint_interiors: bool
    distinct_endpoints: bool
    triple_junctions: bool
    balanced_junctions: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(
            (self.geodesic_edges, self.disjoint_interiors, self.distinct_endpoints,
             self.triple_junctions, self.balanced_junctions)
        )

    def to_dict(self) -> dict:
        return {
            "a_geodesic_edges": self.geodesic_edges,
            "b_disjoint_interiors": self.disjoint_interiors,
            "c_distinct_endpoints": self.distinct_endpoints,
            "d_triple_junctions": self.triple_junctions,
            "e_balanced_junctions": self.balanced_junctions,
            "passed": self.passed,
            "details": self.details,
        }


def _closest_approach(c1, c2, lo1, hi1, lo2, hi2, resolution: float) -> float:
    """Minimum ambient distance between c1([lo1,hi1]) and c2([lo2,hi2])."""
    n1 = max(8, int(math.ceil(c1.length * (hi1 - lo1) / resolution)) + 1)
    n2 = max(8, int(math.ceil(c2.length * (hi2 - lo2) / resolution)) + 1)
    t1 = np.linspace(lo1, hi1, n1)
    t2 = np.linspace(lo2, hi2, n2)
    p1, p2 = c1.points(t1), c2.points(t2)
    d2 = (p1 * p1).sum(1)[:, None] + (p2 * p2).sum(1)[None, :] - 2.0 * p1 @ p2.T
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    s, t = t1[i], t2[j]
    h1, h2 = (hi1 - lo1) / (n1 - 1), (hi2 - lo2) / (n2 - 1)
    best = float(np.linalg.norm(p1[i] - p2[j]))
    for _ in range(40):
        a = np.clip(s + np.linspace(-h1, h1, 11), lo1, hi1)
        b = np.clip(t + np.linspace(-h2, h2, 11), lo2, hi2)
        q1, q2 = c1.points(a), c2.points(b)
        d = np.linalg.norm(q1[:, None, :] - q2[None, :, :], axis=2)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        s, t = a[i], b[j]
        best = min(best, float(d[i, j]))
        h1, h2 = h1 / 4.0, h2 / 4.0
    return best


def validate_minimal_network(
    net: EmbeddedNetwork, tol: float = 1e-8, resolution: float = 1e-3, disjoint_tol: float = 1e-8
) -> MinimalNetworkReport:
    details: dict = {}
    lengths = [c.length for c in net.curves]

    geodesic = all(L > 1e-12 for L in lengths)
    if net.space == "sphere":
        geodesic = geodesic and all(
            float(np.dot(c.start, c.end)) > -1.0 + 1e-9 for c in net.curves
        )
    details["edge_lengths"] = lengths

    endpoints_ok = all(
        point_distance(net.space, net.vertices[a], net.vertices[b]) > POINT_MERGE_TOL
        for a, b in net.edges
    )

    min_gap = math.inf
    for i in range(len(net.edges)):
        for j in range(i + 1, len(net.edges)):
            (a1, b1), (a2, b2) = net.edges[i], net.edges[j]
            c1, c2 = net.curves[i], net.curves[j]
            shared = {a1, b1} & {a2, b2}
            # keep sampled parameters clear of a shared endpoint
            e1 = 2.0 * resolution / max(c1.length, resolution)
            e2 = 2.0 * resolution / max(c2.length, resolution)
            lo1 = e1 if a1 in shared else 0.0
            hi1 = 1.0 - e1 if b1 in shared else 1.0
            lo2 = e2 if a2 in shared else 0.0
            hi2 = 1.0 - e2 if b2 in shared else 1.0
            if lo1 >= hi1 or lo2 >= hi2:
                continue
            gap = _closest_approach(c1, c2, lo1, hi1, lo2, hi2, resolution)
            min_gap = min(min_gap, gap)
    disjoint = min_gap > disjoint_tol
    details["min_interior_gap"] = None if math.isinf(min_gap) else min_gap

    orders = {v: net.degree(v) for v in net.interior_vertices()}
    triple = all(d == 3 for d in orders.values())
    details["junction_orders"] = orders

    residuals = {}
    for v, d in orders.items():
        if d != 3:
            continue
        here = net.vertices[v]
        try:
            s = sum(inward_tangent(net.space, here, net.vertices[o]) for _, o in net.incident(v))
            residuals[v] = float(np.linalg.norm(s))
        except (NetworkError, ValueError):
            residuals[v] = math.inf
    balanced = triple and all(r < tol for r in residuals.values())
    details["tangent_residuals"] = residuals

    return MinimalNetworkReport(geodesic, disjoint, endpoints_ok, triple, balanced, details)


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=8)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre_nodes(panels: int, nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Composite nodes/weights on [0, 1]; endpoints of panels are never nodes."""
    x, w = _gauss_legendre(nodes)
    edges = np.arange(panels)[:, None] / panels
    ts = (edges + x[None, :] / panels).ravel()
    ws = np.tile(w / panels, panels)
    return ts, ws


def integrate_unit_interval(
    fun: Callable[[np.ndarray], np.ndarray],
    nodes: int = 32,
    rtol: float = 1e-10,
    scale: float = 1.0,
    max_doublings: int = 16,
) -> float:
    """Composite Gauss-Legendre on [0,1], doubling panels until two estimates agree.

    Convergence is declared when successive estimates differ by less than
    ``rtol * max(|I|, scale)``.
    """
    panels = 1
    ts, ws = gauss_legendre_nodes(panels, nodes)
    prev = float(np.dot(ws, fun(ts)))
    for _ in range(max_doublings):
        panels *= 2
        ts, ws = gauss_legendre_nodes(panels, nodes)
        cur = float(np.dot(ws, fun(ts)))
        if abs(cur - prev) <= rtol * max(abs(cur), scale):
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not converge after {max_doublings} doublings "
        f"({panels} panels x {nodes} nodes, last change {abs(cur - prev):.3e})"
    )


# ---------------------------------------------------------------------------
# currents


@dataclass(frozen=True)
class RigidMotion:
    """x -> R(angle) @ (x - center)."""

    angle: float
    center: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply(self, x) -> np.ndarray:
        return self.matrix @ (np.asarray(x, dtype=float) - self.center)

    def inverse(self, y) -> np.ndarray:
        return self.matrix.T @ np.asarray(y, dtype=float) + self.center


@dataclass(frozen=True)
class RectifiableCurrent:
    network: EmbeddedNetwork
    orientation: tuple
    multiplicity: tuple
    motion: RigidMotion | None = None

    def __post_init__(self):
        n = len(self.network.edges)
        if len(self.orientation) != n or len(self.multiplicity) != n:
            raise NetworkError("orientation and multiplicity need one entry per edge")
        for g in self.multiplicity:
            if not isinstance(g, GroupElement):
                raise TypeError("multiplicities must be GroupElements")
        object.__setattr__(self, "orientation", tuple(bool(o) for o in self.orientation))
        object.__setattr__(self, "multiplicity", tuple(self.multiplicity))

    @classmethod
    def along_edges(cls, net: EmbeddedNetwork, multiplicity: Sequence[GroupElement], motion=None):
        """Current with every edge oriented from its first to its second vertex."""
        return cls(net, (True,) * len(net.edges), tuple(multiplicity), motion)

    def oriented_edges(self) -> Iterable[tuple[str, str, GroupElement]]:
        for (a, b), o, g in zip(self.network.edges, self.orientation, self.multiplicity):
            yield (a, b, g) if o else (b, a, g)


@dataclass
class BoundaryChain:
    """Finite sum of point masses with lattice coefficients."""

    space: str
    atoms: list = field(default_factory=list)

    def add(self, point, coeff: GroupElement) -> None:
        point = np.asarray(point, dtype=float)
        for k, (p, c) in enumerate(self.atoms):
            if point_distance(self.space, p, point) <= POINT_MERGE_TOL:
                self.atoms[k] = (p, c + coeff)
                break
        else:
            self.atoms.append((point, coeff))

    def prune(self) -> "BoundaryChain":
        self.atoms = [(p, c) for p, c in self.atoms if c]
        return self

    def coefficient_at(self, point) -> GroupElement:
        for p, c in self.atoms:
            if point_distance(self.space, p, np.asarray(point, dtype=float)) <= POINT_MERGE_TOL:
                return c
        return ZERO

    def __len__(self) -> int:
        return len(self.atoms)

    def same_as(self, other: "BoundaryChain") -> bool:
        """Exact lattice equality of the two chains (points merged at 1e-10)."""
        if len(self) != len(other):
            return False
        return all(other.coefficient_at(p) == c for p, c in self.atoms)

    def to_list(self) -> list:
        return [{"point": [float(x) for x in p], "coefficient": c.to_list()} for p, c in self.atoms]


def current_mass(T: RectifiableCurrent) -> float:
    return math.fsum(group_norm(g) * c.length for g, c in zip(T.multiplicity, T.network.curves))


def current_boundary(T: RectifiableCurrent) -> BoundaryChain:
    chain = BoundaryChain(T.network.space)
    verts = T.network.vertices
    for tail, head, g in T.oriented_edges():
        if not g:
            continue
        chain.add(verts[head], g)
        chain.add(verts[tail], -g)
    return chain.prune()


def evaluate_current(
    T: RectifiableCurrent, form, nodes: int = 32, rtol: float = 1e-10, max_doublings: int = 16
) -> float:
    """Pair an R^2-valued 1-form with the current: sum_e int <form(tau), theta> ds.

    ``form(points, tangents)`` must be vectorized and return one R^2 value
    per row.
    """
    total = []
    for curve, forward, g in zip(T.network.curves, T.orientation, T.multiplicity):
        if not g:
            continue
        theta = g.vector
        sign = 1.0 if forward else -1.0
        L = curve.length

        def integrand(ts, curve=curve, theta=theta, sign=sign):
            vals = np.asarray(form(curve.points(ts), sign * curve.tangents(ts)), dtype=float)
            return vals @ theta

        total.append(L * integrate_unit_interval(integrand, nodes, rtol, max_doublings=max_doublings))
    return math.fsum(total)


def build_steiner_current(net: EmbeddedNetwork, align_tol: float = 1e-9) -> RectifiableCurrent:
    """Rigidly move a planar Y-network onto the generator directions and decorate it.

    The junction goes to the origin and each edge, oriented from the junction
    to its terminal, is rotated onto g1, g2 or g3; that generator becomes its
    multiplicity.  The smallest rotation (in (-60, 60] degrees) is used.
    """
    from .hexnorm import G1, G2, G3, generators

    if net.space != "plane":
        raise NetworkError("build_steiner_current needs a planar network")
    interior = net.interior_vertices()
    if len(interior) != 1 or len(net.edges) != 3 or net.degree(interior[0]) != 3:
        raise NetworkError("not a minimal network: expected a 3-terminal Y topology")
    sid = interior[0]
    S = net.vertices[sid]
    others = [o for _, o in net.incident(sid)]
    dirs = [inward_tangent("plane", S, net.vertices[o]) for o in others]

    sector = 2.0 * math.pi / 3.0
    phi0 = math.atan2(dirs[0][1], dirs[0][0])
    angle = (-phi0 + math.pi / 3.0) % sector - math.pi / 3.0
    if angle <= -math.pi / 3.0:
        angle += sector
    motion = RigidMotion(angle, np.array(S, dtype=float))
    gens = list(generators())
    elements = [G1, G2, G3]
    rot = motion.matrix

    assigned = []
    for d in dirs:
        rd = rot @ d
        k = int(np.argmin([np.linalg.norm(rd - g) for g in gens]))
        if np.linalg.norm(rd - gens[k]) > align_tol:
            raise NetworkError("not a minimal network: edges are not mutually at 120 degrees")
        assigned.append(k)
    if sorted(assigned) != [0, 1, 2]:
        raise NetworkError("not a minimal network: two edges share a direction")

    moved = {k: motion.apply(v) for k, v in net.vertices.items()}
    edges = [(sid, o) for o in others]
    moved_net = EmbeddedNetwork("plane", moved, edges, net.terminals, (sid,))
    return RectifiableCurrent.along_edges(moved_net, [elements[k] for k in assigned], motion)


def solve_tree_multiplicities(
    net: EmbeddedNetwork, boundary: dict[str, GroupElement]
) -> tuple[GroupElement, ...]:
    """Exact lattice multiplicities (edges oriented first->second) realising ``boundary``.

    The network must be a tree; leaves are peeled off one at a time so every
    multiplicity is a finite integer combination of the boundary data.
    """
    total = ZERO
    for g in boundary.values():
        total = total + g
    if total:
        raise NetworkError("boundary coefficients must sum to zero")
    if len(net.edges) != len([v for v in net.vertices if net.degree(v) > 0]) - 1:
        raise NetworkError("multiplicity solve requires a tree")
    need = {v: boundary.get(v, ZERO) for v in net.vertices if net.degree(v) > 0}
    remaining = set(range(len(net.edges)))
    mult: dict[int, GroupElement] = {}
    degree = {v: net.degree(v) for v in need}
    while remaining:
        leaf = next(v for v, d in degree.items() if d == 1)
        i = next(i for i, _ in net.incident(leaf) if i in remaining)
        a, b = net.edges[i]
        other = b if a == leaf else a
        # boundary at a head is +theta, at a tail -theta
        theta = need[leaf] if b == leaf else -need[leaf]
        mult[i] = theta
        need[other] = need[other] - (theta if b == other else -theta)
        need[leaf] = ZERO
        remaining.discard(i)
        degree[leaf] -= 1
        degree[other] -= 1
    if any(need.values()):
        raise NetworkError("inconsistent boundary data")
    return tuple(mult[i] for i in range(len(net.edges)))
