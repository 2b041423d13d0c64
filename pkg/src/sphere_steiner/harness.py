"""Empirical minimality certification: competitor networks, Stokes chains, grid oracles."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .geometry import (
    GeodesicBall,
    exp_map,
    exp_map_many,
    geodesic_distance,
    geodesic_distances,
    log_map,
    random_points_in_ball,
    tangent_basis,
)
from .hexnorm import GroupElement, MatrixForm, comass
from .network import (
    EmbeddedNetwork,
    NetworkError,
    RectifiableCurrent,
    current_boundary,
    current_mass,
    evaluate_current,
    network_length,
    solve_tree_multiplicities,
)
from .solver import LABELS, SteinerResult, distance_sum, solve_spherical

KINDS = ("perturbed-junction", "random-junction", "path-topology", "two-junction-tree", "polyline")
PATH_ORDERS = ("ABC", "BAC", "ACB")
VIOLATION_TOL = 1e-9


class NotACompetitor(ValueError):
    pass


@dataclass(frozen=True)
class CompetitorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown competitor kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": int(self.seed)}


def _random_tangent(rng, p, norm):
    e1, e2 = tangent_basis(p)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return norm * (math.cos(phi) * e1 + math.sin(phi) * e2)


def _inside(net: EmbeddedNetwork, ball: GeodesicBall, per_edge: int = 100) -> bool:
    ts = np.linspace(0.0, 1.0, per_edge)
    return all(bool(np.all(ball.contains_many(c.points(ts)))) for c in net.curves)


def _y_network(pts, J):
    verts = dict(zip(LABELS, pts))
    verts["S"] = J
    return EmbeddedNetwork("sphere", verts, [("S", l) for l in LABELS], LABELS, ("S",))


def _build(spec: CompetitorSpec, pts, ball, junction, rng) -> EmbeddedNetwork:
    p = spec.params
    if spec.kind == "perturbed-junction":
        radius = float(p.get("radius", 0.05))
        if "angle" in p:
            e1, e2 = tangent_basis(junction)
            a = float(p["angle"])
            v = radius * (math.cos(a) * e1 + math.sin(a) * e2)
        else:
            norm = radius if p.get("exact") else radius * math.sqrt(rng.uniform())
            v = _random_tangent(rng, junction, norm)
        return _y_network(pts, exp_map(junction, v))
    if spec.kind == "random-junction":
        return _y_network(pts, random_points_in_ball(rng, ball, 1)[0])
    if spec.kind == "path-topology":
        order = p.get("order") or PATH_ORDERS[int(rng.integers(0, 3))]
        x, y, z = order
        return EmbeddedNetwork("sphere", dict(zip(LABELS, pts)), [(x, y), (y, z)], LABELS, ())
    if spec.kind == "two-junction-tree":
        J1, J2 = random_points_in_ball(rng, ball, 2)
        z = LABELS[int(rng.integers(0, 3))]
        x, y = [l for l in LABELS if l != z]
        verts = dict(zip(LABELS, pts))
        verts.update(J1=J1, J2=J2)
        edges = [("J1", x), ("J1", y), ("J1", "J2"), ("J2", z)]
        return EmbeddedNetwork("sphere", verts, edges, LABELS, ("J1", "J2"))
    # polyline: every edge of the optimal Y bent through perturbed knots
    k = int(p.get("segments", 3))
    amplitude = float(p.get("amplitude", 0.02))
    verts = dict(zip(LABELS, pts))
    verts["S"] = junction
    edges = []
    for label, P in zip(LABELS, pts):
        prev = "S"
        for j in range(1, k):
            t = j / k
            base = _slerp(junction, P, t)
            knot = exp_map(base, _random_tangent(rng, base, amplitude * rng.uniform()))
            vid = f"{label}{j}"
            verts[vid] = knot
            edges.append((prev, vid))
            prev = vid
        edges.append((prev, label))
    return EmbeddedNetwork("sphere", verts, edges, LABELS, ("S",))


def _slerp(p, q, t):
    return exp_map(p, t * log_map(p, q).vec)


def generate_competitor(
    spec: CompetitorSpec, A, B, C, ball: GeodesicBall, junction=None, attempts: int = 1000
) -> EmbeddedNetwork:
    """Deterministic competitor network with terminals {A, B, C} inside ``ball``."""
    pts = [np.asarray(x, dtype=float) for x in (A, B, C)]
    if junction is None and spec.kind in ("perturbed-junction", "polyline"):
        junction = solve_spherical(*pts, ball, strict=False).junction
    rng = np.random.default_rng(spec.seed)
    for _ in range(attempts):
        net = _build(spec, pts, ball, junction, rng)
        if _inside(net, ball):
            return net
    raise RuntimeError(f"could not keep a {spec.kind} competitor inside the ball")


def mixed_specs(n: int, seed: int = 42, radius: float = 0.05, amplitude: float = 0.02,
                kinds=KINDS) -> list[CompetitorSpec]:
    """``n`` competitor specs cycling through ``kinds`` with seeds drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**62, size=n)
    specs = []
    for i in range(n):
        kind = kinds[i % len(kinds)]
        params = {}
        if kind == "perturbed-junction":
            params = {"radius": radius}
        elif kind == "path-topology":
            params = {"order": PATH_ORDERS[(i // len(kinds)) % 3]}
        elif kind == "polyline":
            params = {"segments": 2 + (i // len(kinds)) % 4, "amplitude": amplitude}
        specs.append(CompetitorSpec(kind, params, int(seeds[i])))
    return specs


# ---------------------------------------------------------------------------
# length comparison


@dataclass
class ComparisonReport:
    reference_length: float
    competitors_tested: int
    min_competitor_length: float
    violations: list
    margin_histogram: dict
    per_kind: dict = field(default_factory=dict)
    path_topologies: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def histogram_csv(self) -> str:
        rows = ["bin_lo,bin_hi,count"]
        edges, counts = self.margin_histogram["edges"], self.margin_histogram["counts"]
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append(f"{float(lo)!r},{float(hi)!r},{int(c)}")
        return "\n".join(rows) + "\n"


def _chord_length(net: EmbeddedNetwork) -> float:
    """Length via 2*asin(chord/2), independent of the atan2 distance formula."""
    parts = []
    for c in net.curves:
        chord = float(np.linalg.norm(c.end - c.start))
        parts.append(2.0 * math.asin(min(1.0, chord / 2.0)))
    return math.fsum(parts)


def terminals_of(net: EmbeddedNetwork) -> list[np.ndarray]:
    return [net.vertices[t] for t in net.terminals]


def compare_lengths(
    reference: EmbeddedNetwork, specs: list, ball: GeodesicBall, tol: float = VIOLATION_TOL,
    bins: int = 20,
) -> ComparisonReport:
    pts = terminals_of(reference)
    junction = reference.vertices.get("S")
    ref = network_length(reference)
    margins, violations = [], []
    per_kind: dict = {}
    paths: dict = {}
    for spec in specs:
        net = generate_competitor(spec, *pts, ball, junction=junction)
        L = network_length(net)
        if L < ref - tol and _chord_length(net) < ref - tol:
            violations.append({"spec": spec.to_dict(), "length": L, "reference_length": ref,
                               "network": net.to_dict()})
        margin = L - ref
        margins.append(margin)
        s = per_kind.setdefault(spec.kind, {"count": 0, "min_length": math.inf, "min_margin": math.inf})
        s["count"] += 1
        s["min_length"] = min(s["min_length"], L)
        s["min_margin"] = min(s["min_margin"], margin)
        if spec.kind == "path-topology":
            (x, y), (_, z) = net.edges
            paths[x + y + z] = L
    margins_arr = np.asarray(margins) if margins else np.zeros(1)
    counts, edges = np.histogram(margins_arr, bins=bins)
    return ComparisonReport(
        reference_length=ref,
        competitors_tested=len(specs),
        min_competitor_length=float(min(ref + m for m in margins)) if margins else math.inf,
        violations=violations,
        margin_histogram={"edges": edges.tolist(), "counts": counts.tolist()},
        per_kind=per_kind,
        path_topologies=paths,
        config={"tolerance": tol, "bins": bins, "radius": ball.radius,
                "center": [float(c) for c in ball.center]},
    )


def junction_excess(A, B, C, S, eps: float, angle: float) -> float:
    """Length excess of the Y-network whose junction is moved by ``eps`` along ``angle``."""
    e1, e2 = tangent_basis(S)
    J = exp_map(S, eps * (math.cos(angle) * e1 + math.sin(angle) * e2))
    return distance_sum(J, A, B, C) - distance_sum(S, A, B, C)


def excess_ratio(A, B, C, S, eps: float, angle: float) -> float:
    """excess(eps) / excess(eps/2); close to 4 at a nondegenerate optimum."""
    return junction_excess(A, B, C, S, eps, angle) / junction_excess(A, B, C, S, eps / 2.0, angle)


# ---------------------------------------------------------------------------
# the planar Stokes chain


def verify_prop41_planar(T: RectifiableCurrent, omega: MatrixForm, competitors: list,
                         stokes_tol: float = 1e-9, mass_tol: float = 2e-9) -> dict:
    """Check M(T) = T(omega) = S(omega) <= M(S) for competitors with the boundary of T."""
    bT = current_boundary(T)
    for k, S in enumerate(competitors):
        if not current_boundary(S).same_as(bT):
            raise NotACompetitor(f"not a competitor: competitor {k} has a different boundary")
    c = comass(omega)
    mT = current_mass(T)
    tT = evaluate_current(T, omega)
    rows = []
    for S in competitors:
        mS = current_mass(S)
        tS = evaluate_current(S, omega)
        rows.append({
            "mass": mS,
            "pairing": tS,
            "stokes_gap": abs(tS - tT),
            "duality_ok": tS <= mS * c + 1e-9,
            "mass_ok": mT <= mS + mass_tol,
        })
    calibrated = abs(tT - mT) <= 1e-10
    stokes = all(r["stokes_gap"] <= stokes_tol for r in rows)
    duality = all(r["duality_ok"] for r in rows)
    minimal = all(r["mass_ok"] for r in rows)
    return {
        "mass_T": mT,
        "pairing_T": tT,
        "comass": c,
        "competitors": len(rows),
        "calibrated": calibrated,
        "stokes_identity": stokes,
        "duality": duality,
        "minimal": minimal,
        "max_stokes_gap": max((r["stokes_gap"] for r in rows), default=0.0),
        "min_mass_excess": min((r["mass"] - mT for r in rows), default=0.0),
        "passed": calibrated and stokes and duality and minimal,
        "rows": rows,
    }


def _plane_net(verts, edges, junctions=()):
    return EmbeddedNetwork("plane", verts, edges, LABELS, junctions)


def planar_competitor_currents(T: RectifiableCurrent, n: int, seed: int = 0) -> list[RectifiableCurrent]:
    """Planar currents with exactly the boundary of ``T`` (a solved Y current).

    Multiplicities are solved in exact lattice arithmetic on tree competitors;
    some competitors additionally carry a closed loop of arbitrary multiplicity.
    """
    rng = np.random.default_rng(seed)
    net = T.network
    pts = {l: net.vertices[l] for l in LABELS}
    bT = current_boundary(T)
    boundary = {l: bT.coefficient_at(pts[l]) for l in LABELS}
    S = net.vertices[[v for v in net.vertices if v not in LABELS][0]]
    scale = max(np.linalg.norm(p - S) for p in pts.values())
    out = []
    i = 0
    while len(out) < n:
        kind = i % 6
        i += 1
        verts = dict(pts)
        if kind == 0:  # moved junction
            verts["J"] = S + scale * rng.uniform(-0.5, 0.5, 2)
            edges = [("J", l) for l in LABELS]
        elif kind == 1:  # path topology
            x, y, z = PATH_ORDERS[int(rng.integers(0, 3))]
            edges = [(x, y), (y, z)]
        elif kind == 2:  # two junctions
            verts["J1"] = S + scale * rng.uniform(-0.7, 0.7, 2)
            verts["J2"] = S + scale * rng.uniform(-0.7, 0.7, 2)
            z = LABELS[int(rng.integers(0, 3))]
            x, y = [l for l in LABELS if l != z]
            edges = [(x, "J1"), ("J1", y), ("J2", "J1"), (z, "J2")]
        elif kind == 3:  # one edge of T rerouted through an extra point
            verts["S"] = S
            label = LABELS[int(rng.integers(0, 3))]
            verts["R"] = 0.5 * (S + pts[label]) + 0.3 * scale * rng.standard_normal(2)
            edges = [("S", l) for l in LABELS if l != label] + [("S", "R"), ("R", label)]
        elif kind == 4:  # random bent Y
            verts["J"] = S + 0.3 * scale * rng.standard_normal(2)
            edges = []
            for l in LABELS:
                verts[l + "k"] = 0.5 * (verts["J"] + pts[l]) + 0.2 * scale * rng.standard_normal(2)
                edges += [("J", l + "k"), (l + "k", l)]
        else:  # moved junction plus a detached closed loop
            verts["J"] = S + scale * rng.uniform(-0.5, 0.5, 2)
            edges = [("J", l) for l in LABELS]
        try:
            tree = _plane_net(verts, edges)
            mult = list(solve_tree_multiplicities(tree, boundary))
        except NetworkError:
            continue
        if kind == 5:
            c = S + scale * rng.uniform(-1.0, 1.0, 2)
            loop_pts = [c + 0.3 * scale * rng.standard_normal(2) for _ in range(3)]
            for j, q in enumerate(loop_pts):
                verts[f"L{j}"] = q
            edges = edges + [("L0", "L1"), ("L1", "L2"), ("L2", "L0")]
            g = GroupElement(int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))
            mult += [g, g, g]
        full = _plane_net(verts, edges)
        if any(c.length < 1e-9 for c in full.curves):
            continue
        out.append(RectifiableCurrent.along_edges(full, mult))
    return out


# ---------------------------------------------------------------------------
# grid oracles


def _powell(fun, w0, xtol=1e-12):
    res = minimize(fun, np.asarray(w0, dtype=float), method="Powell",
                   options={"xtol": xtol, "ftol": 1e-16, "maxiter": 20000, "maxfev": 200000})
    return np.asarray(res.x), float(res.fun)


def spherical_grid_junction(A, B, C, ball: GeodesicBall, resolution: int = 200):
    """Best single junction from a grid over the ball in normal coordinates, then refined.

    Returns (grid point, refined point, cell diameter).  The grid lives in
    the exponential chart at the ball centre; refinement runs Powell's
    derivative-free line searches on h in the same chart.
    """
    p0 = ball.center
    e1, e2 = tangent_basis(p0)
    R = ball.radius
    u = np.linspace(-R, R, resolution)
    W = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1).reshape(-1, 2)
    W = W[np.linalg.norm(W, axis=1) <= R]
    X = exp_map_many(p0, W[:, :1] * e1 + W[:, 1:] * e2)
    h = sum(geodesic_distances(X, np.asarray(p, dtype=float)) for p in (A, B, C))
    k = int(np.argmin(h))
    cell = math.sqrt(2.0) * (u[1] - u[0])

    def obj(w):
        x = exp_map(p0, w[0] * e1 + w[1] * e2)
        return distance_sum(x, A, B, C)

    w_best, _ = _powell(obj, W[k])
    return X[k], exp_map(p0, w_best[0] * e1 + w_best[1] * e2), cell


def oracle_global_check(A, B, C, ball: GeodesicBall, resolution: int = 200,
                        solver_result: SteinerResult | None = None, tol: float = 1e-9) -> dict:
    pts = [np.asarray(p, dtype=float) for p in (A, B, C)]
    grid_pt, refined, cell = spherical_grid_junction(*pts, ball, resolution)
    refined_len = distance_sum(refined, *pts)
    paths = {}
    for order in PATH_ORDERS:
        x, y, z = (pts[LABELS.index(c)] for c in order)
        paths[order] = geodesic_distance(x, y) + geodesic_distance(y, z)
    best_order = min(paths, key=paths.get)
    if paths[best_order] <= refined_len + 1e-12:
        best = {"kind": "path", "order": best_order, "length": paths[best_order],
                "junction": pts[LABELS.index(best_order[1])].tolist(), "vertex": best_order[1]}
    else:
        best = {"kind": "junction", "length": refined_len, "junction": refined.tolist(), "vertex": None}
    report = {
        "resolution": resolution,
        "cell_diameter": cell,
        "grid_junction": grid_pt.tolist(),
        "grid_length": distance_sum(grid_pt, *pts),
        "refined_junction": refined.tolist(),
        "refined_length": refined_len,
        "path_lengths": paths,
        "best": best,
    }
    if solver_result is not None:
        sol_len = solver_result.length
        jd = geodesic_distance(np.asarray(best["junction"]), solver_result.junction)
        report["solver"] = {
            "length": sol_len,
            "degenerate_at": solver_result.degenerate_at,
            "junction_distance": jd,
            "refined_junction_distance": geodesic_distance(refined, solver_result.junction),
            "length_difference": best["length"] - sol_len,
            "agrees": bool(best["length"] >= sol_len - tol and jd <= 2.0 * cell),
        }
    return report


def planar_grid_oracle(A, B, C, resolution: int = 400, margin: float = 0.1):
    """Grid minimisation of the planar distance sum over the terminals' bounding box, refined."""
    P = np.stack([np.asarray(p, dtype=float) for p in (A, B, C)])
    lo, hi = P.min(0), P.max(0)
    pad = margin * float(np.max(hi - lo))
    xs = np.linspace(lo[0] - pad, hi[0] + pad, resolution)
    ys = np.linspace(lo[1] - pad, hi[1] + pad, resolution)
    G = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    h = np.linalg.norm(G[:, None, :] - P[None, :, :], axis=2).sum(1)
    k = int(np.argmin(h))
    w, fval = _powell(lambda x: float(np.linalg.norm(P - x, axis=1).sum()), G[k])
    return w, fval
