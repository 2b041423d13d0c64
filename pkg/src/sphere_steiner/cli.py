"""Command line front end: ``sphere-steiner solve|verify|compare|oracle|export``.

Exit codes: 0 success, 1 error, 2 degenerate (vertex) solution, 3 ball rejected
by the admissibility bound.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .calibration import BranchCalibration, verify_axioms_spherical, verify_planar_id_calibration
from .geometry import GeodesicBall, exp_map_many, max_admissible_radius, sphere_point, tangent_basis
from .harness import (
    compare_lengths,
    mixed_specs,
    oracle_global_check,
    planar_competitor_currents,
    planar_grid_oracle,
    verify_prop41_planar,
)
from .hexnorm import MatrixForm
from .network import EmbeddedNetwork, NetworkError, _parse_coords, build_steiner_current
from .solver import InadmissibleBallError, SolverConfig, certify_junction, solve

log = logging.getLogger("sphere_steiner")

EXIT_OK, EXIT_ERROR, EXIT_DEGENERATE, EXIT_INADMISSIBLE = 0, 1, 2, 3


class CliError(RuntimeError):
    pass


def _setup_logging():
    level = os.environ.get("STEINER_LOG", "info").lower()
    levels = {"debug": logging.DEBUG, "info": logging.INFO, "quiet": logging.ERROR}
    logging.basicConfig(level=levels.get(level, logging.INFO), format="%(levelname)s %(message)s")


def write_atomic(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, target)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def load_input(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"input is not valid JSON: {exc}") from exc


def _ball(data: dict) -> GeodesicBall | None:
    b = data.get("ball")
    if b is None:
        return None
    center = _parse_coords("sphere", b["center"])
    return GeodesicBall(sphere_point(center), float(b["radius"]))


def _terminals(net: EmbeddedNetwork):
    if len(net.terminals) != 3:
        raise CliError("exactly three terminals are required")
    return [net.vertices[t] for t in net.terminals]


def _junction(net: EmbeddedNetwork):
    """Junction point of a solved network, or the degree-2 terminal of a degenerate one."""
    if net.junctions:
        return net.vertices[net.junctions[0]], None
    for t in net.terminals:
        if net.degree(t) == 2:
            return net.vertices[t], t
    raise CliError("input is not a solved network (no junction or degenerate vertex)")


def resolved_config(args, with_output: bool = True) -> dict:
    """Every setting that determines a run; reports omit the output path."""
    cfg = {
        "command": args.command,
        "input": args.input,
        "seed": args.seed,
        "samples": args.samples,
        "tol": args.tol,
        "strict_radius": args.strict_radius,
        "competitors": args.competitors,
        "grid": args.grid,
        "format": args.format,
        "max_admissible_radius": max_admissible_radius(),
    }
    if with_output:
        cfg["output"] = args.output
    return cfg


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args, data) -> int:
    net = EmbeddedNetwork.from_dict(data)
    A, B, C = _terminals(net)
    ball = _ball(data)
    if net.space == "sphere" and ball is None:
        raise CliError("spherical input needs a 'ball' with center and radius")
    try:
        result = solve(A, B, C, ball, SolverConfig(), strict=args.strict_radius)
    except InadmissibleBallError as exc:
        log.error("%s", exc)
        return EXIT_INADMISSIBLE
    cert = certify_junction(result.junction, A, B, C, tol=1e-8)
    out = result.network.to_dict()
    out["solver"] = result.to_dict()
    out["certification"] = cert.to_dict()
    if ball is not None:
        out["ball"] = {"center": ball.center.tolist(), "radius": ball.radius}
    out["config"] = resolved_config(args, with_output=False)
    write_atomic(args.output, _dumps(out))
    if not result.converged or not cert.passed:
        log.error("solver did not produce a certified network")
        return EXIT_ERROR
    return EXIT_DEGENERATE if result.degenerate_at else EXIT_OK


def cmd_verify(args, data) -> int:
    net = EmbeddedNetwork.from_dict(data)
    if net.space == "plane":
        if not net.junctions:
            S, vertex = _junction(net)
            cert = certify_junction(S, *_terminals(net), tol=args.tol)
            report = {"kind": "plane-degenerate", "vertex": vertex, "junction_balance": cert.to_dict(),
                      "passed": cert.passed, "failing": [] if cert.passed else ["junction_balance"]}
        else:
            T = build_steiner_current(net)
            rep = verify_planar_id_calibration(T, tol=1e-12)
            report = rep.to_dict()
            report["rigid_motion"] = {"angle": T.motion.angle, "center": T.motion.center.tolist()}
    else:
        ball = _ball(data)
        if ball is None:
            raise CliError("spherical verification needs the 'ball' of the solved problem")
        S, _ = _junction(net)
        A, B, C = _terminals(net)
        cal = BranchCalibration.from_junction(A, B, C, S)
        report = verify_axioms_spherical(cal, net, ball, samples=args.samples, tol=args.tol,
                                         seed=args.seed).to_dict()
    report["run_config"] = resolved_config(args, with_output=False)
    write_atomic(args.output, _dumps(report))
    if not report["passed"]:
        log.error("calibration check failed: %s", ", ".join(report["failing"]))
        return EXIT_ERROR
    return EXIT_OK


def cmd_compare(args, data) -> int:
    net = EmbeddedNetwork.from_dict(data)
    if net.space == "plane":
        T = build_steiner_current(net)
        comps = planar_competitor_currents(T, args.competitors, seed=args.seed)
        rep = verify_prop41_planar(T, MatrixForm.identity(), comps)
        rep["run_config"] = resolved_config(args, with_output=False)
        write_atomic(args.output, _dumps(rep))
        return EXIT_OK if rep["passed"] else EXIT_ERROR
    ball = _ball(data)
    if ball is None:
        raise CliError("spherical comparison needs the 'ball' of the solved problem")
    _junction(net)
    specs = mixed_specs(args.competitors, seed=args.seed)
    rep = compare_lengths(net, specs, ball, tol=args.tol)
    rep.config.update(resolved_config(args, with_output=False))
    if args.format == "csv":
        write_atomic(args.output, rep.histogram_csv())
    else:
        write_atomic(args.output, _dumps(rep.to_dict()))
    return EXIT_OK if rep.passed else EXIT_ERROR


def cmd_oracle(args, data) -> int:
    net = EmbeddedNetwork.from_dict(data)
    A, B, C = _terminals(net)
    if net.space == "plane":
        result = solve(A, B, C)
        w, fval = planar_grid_oracle(A, B, C, resolution=args.grid)
        rep = {"oracle_junction": w.tolist(), "oracle_length": fval, "solver_length": result.length,
               "solver_junction": result.junction.tolist(),
               "agrees": bool(fval >= result.length - args.tol)}
    else:
        ball = _ball(data)
        if ball is None:
            raise CliError("spherical oracle needs a 'ball'")
        result = solve(A, B, C, ball, strict=args.strict_radius)
        rep = oracle_global_check(A, B, C, ball, args.grid, result, tol=args.tol)
        rep["agrees"] = rep["solver"]["agrees"]
    rep["run_config"] = resolved_config(args, with_output=False)
    write_atomic(args.output, _dumps(rep))
    return EXIT_OK if rep["agrees"] else EXIT_ERROR


# ---------------------------------------------------------------------------
# export


def _edge_polylines(net: EmbeddedNetwork, n: int = 64):
    ts = np.linspace(0.0, 1.0, n)
    return [c.points(ts) for c in net.curves]


def render_svg(net: EmbeddedNetwork, ball: GeodesicBall | None = None, size: int = 600) -> str:
    """Orthographic view of the network (sphere) or a plain 2-D drawing (plane)."""
    polys = _edge_polylines(net)
    extra = []
    if net.space == "sphere":
        center = ball.center if ball is not None else sum(net.vertices.values())
        center = center / np.linalg.norm(center)
        e1, e2 = tangent_basis(center)
        proj = lambda X: np.stack([X @ e1, X @ e2], axis=-1)  # noqa: E731
        if ball is not None:
            phis = np.linspace(0.0, 2.0 * math.pi, 181)
            r = ball.radius
            circle = (math.cos(r) * center[None, :]
                      + math.sin(r) * (np.cos(phis)[:, None] * e1 + np.sin(phis)[:, None] * e2))
            extra.append(("ball", proj(circle)))
        view = max(ball.radius if ball is not None else 0.0,
                   max(float(np.max(np.abs(proj(p)))) for p in polys)) * 1.15
        lo, hi = np.array([-view, -view]), np.array([view, view])
    else:
        proj = lambda X: np.asarray(X)  # noqa: E731
        allpts = np.concatenate(polys)
        lo, hi = allpts.min(0), allpts.max(0)
        pad = 0.1 * float(np.max(hi - lo) or 1.0)
        lo, hi = lo - pad, hi + pad
    span = float(np.max(hi - lo))

    def to_px(P):
        P = np.atleast_2d(P)
        x = (P[:, 0] - lo[0]) / span * size
        y = size - (P[:, 1] - lo[1]) / span * size
        return np.stack([x, y], axis=1)

    def path(P):
        return " ".join(f"{x:.3f},{y:.3f}" for x, y in to_px(P))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if net.space == "sphere":
        limb = np.stack([np.cos(np.linspace(0, 2 * math.pi, 361)), np.sin(np.linspace(0, 2 * math.pi, 361))], 1)
        parts.append(f'<polyline class="limb" points="{path(limb)}" fill="none" stroke="#bbb"/>')
    for name, P in extra:
        parts.append(f'<polyline class="{name}" points="{path(P)}" fill="none" stroke="#88a" '
                     'stroke-dasharray="6,4"/>')
    for (a, b), P in zip(net.edges, polys):
        parts.append(f'<polyline class="edge" data-from="{escape(a)}" data-to="{escape(b)}" '
                     f'points="{path(proj(P))}" fill="none" stroke="black" stroke-width="2"/>')
    for vid, X in net.vertices.items():
        (x, y), = to_px(proj(X[None, :]))
        kind = "terminal" if vid in net.terminals else ("junction" if vid in net.junctions else "knot")
        colour = {"terminal": "#c33", "junction": "#33c", "knot": "#999"}[kind]
        parts.append(f'<circle class="{kind}" cx="{x:.3f}" cy="{y:.3f}" r="5" fill="{colour}"/>')
        parts.append(f'<text x="{x + 7:.3f}" y="{y - 7:.3f}" font-size="14">{escape(vid)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_csv(net: EmbeddedNetwork, ball: GeodesicBall | None = None, grid: int = 101,
               levels=(-0.1, -0.05, 0.0, 0.05, 0.1)) -> str:
    """Edge polylines, then grid samples within one grid spacing of each level of f."""
    rows = ["section,index,t,x,y,z,level,f"]
    ts = np.linspace(0.0, 1.0, 64)
    for i, c in enumerate(net.curves):
        for t, P in zip(ts, c.points(ts)):
            z = P[2] if P.size == 3 else 0.0
            rows.append(f"edge,{i},{float(t)!r},{float(P[0])!r},{float(P[1])!r},{float(z)!r},,")
    if net.space == "sphere" and ball is not None and len(net.terminals) == 3:
        S, _ = _junction(net)
        cal = BranchCalibration.from_junction(*_terminals(net), S)
        e1, e2 = tangent_basis(ball.center)
        u = np.linspace(-ball.radius, ball.radius, grid)
        W = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1).reshape(-1, 2)
        W = W[np.linalg.norm(W, axis=1) <= ball.radius]
        X = exp_map_many(ball.center, W[:, :1] * e1 + W[:, 1:] * e2)
        fvals = cal.evaluate(X)[0]
        h = u[1] - u[0]
        for level in levels:
            for k in np.nonzero(np.abs(fvals - level) <= h)[0]:
                P = X[k]
                x, y, z = (float(c) for c in P)
                rows.append(f"level,{k},,{x!r},{y!r},{z!r},{float(level)!r},{float(fvals[k])!r}")
    return "\n".join(rows) + "\n"


def cmd_export(args, data) -> int:
    net = EmbeddedNetwork.from_dict(data)
    ball = _ball(data) if net.space == "sphere" else None
    fmt = args.format or "svg"
    if fmt == "svg":
        text = render_svg(net, ball)
    elif fmt == "csv":
        text = export_csv(net, ball)
    else:
        text = _dumps(net.to_dict())
    write_atomic(args.output, text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "compare": cmd_compare,
            "oracle": cmd_oracle, "export": cmd_export}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sphere-steiner",
                                     description="3-terminal minimal networks and calibration checks")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--input", required=False, help="input JSON file")
    parser.add_argument("--output", default=None, help="output file (default stdout)")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--samples", type=int, default=10000)
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--strict-radius", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--competitors", type=int, default=1000)
    parser.add_argument("--grid", type=int, default=200)
    parser.add_argument("--format", choices=("svg", "csv", "json"), default=None)
    parser.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.dump_config:
        sys.stdout.write(_dumps(resolved_config(args)))
        return EXIT_OK
    try:
        if args.tol <= 0 or args.samples <= 0:
            raise CliError("--tol and --samples must be positive")
        if not args.input:
            raise CliError("--input is required")
        data = load_input(args.input)
        return COMMANDS[args.command](args, data)
    except (CliError, NetworkError, ValueError, RuntimeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
