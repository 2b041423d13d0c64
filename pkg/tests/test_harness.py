import math

import numpy as np
import pytest

from conftest import random_configs
from sphere_steiner.geometry import NORTH_POLE, geodesic_distance
from sphere_steiner.harness import (
    KINDS,
    PATH_ORDERS,
    CompetitorSpec,
    NotACompetitor,
    compare_lengths,
    excess_ratio,
    generate_competitor,
    mixed_specs,
    oracle_global_check,
    planar_competitor_currents,
    spherical_grid_junction,
    verify_prop41_planar,
)
from sphere_steiner.hexnorm import G1, MatrixForm
from sphere_steiner.network import (
    EmbeddedNetwork,
    RectifiableCurrent,
    build_steiner_current,
    current_boundary,
    current_mass,
    network_length,
    solve_tree_multiplicities,
)
from sphere_steiner.solver import solve_spherical

R3 = math.sqrt(3) / 2
TERMS = {"A": np.array([1.0, 0.0]), "B": np.array([-0.5, R3]), "C": np.array([-0.5, -R3])}


@pytest.fixture
def planar_T():
    verts = dict(TERMS, S=np.zeros(2))
    net = EmbeddedNetwork("plane", verts, [("S", l) for l in "ABC"], "ABC", ("S",))
    return build_steiner_current(net)


@pytest.fixture
def eq_solution(eq_terminals, eq_ball):
    return solve_spherical(*eq_terminals, eq_ball)


def test_spec_validation():
    with pytest.raises(ValueError):
        CompetitorSpec("spiral", {}, 0)


@pytest.mark.parametrize("kind", KINDS)
def test_competitors_share_terminals_and_stay_inside(kind, eq_terminals, eq_ball):
    for seed in range(5):
        net = generate_competitor(CompetitorSpec(kind, {}, seed), *eq_terminals, eq_ball)
        assert net.terminals == ("A", "B", "C")
        for l, p in zip("ABC", eq_terminals):
            np.testing.assert_allclose(net.vertices[l], p, atol=1e-15)
        for c in net.curves:
            assert all(eq_ball.contains(q) for q in c.points(np.linspace(0, 1, 100)))
        net.graph()  # connected


def test_two_junction_tree_shape(eq_terminals, eq_ball):
    net = generate_competitor(CompetitorSpec("two-junction-tree", {}, 1), *eq_terminals, eq_ball)
    assert len(net.edges) == 4
    assert net.degree("J1") == 3 and net.degree("J2") == 2


def test_zero_perturbation_reproduces_solution(eq_terminals, eq_ball, eq_solution):
    spec = CompetitorSpec("perturbed-junction", {"radius": 0.0}, 7)
    net = generate_competitor(spec, *eq_terminals, eq_ball, junction=eq_solution.junction)
    assert net.to_json() == eq_solution.network.to_json()


def test_path_topology_length(eq_terminals, eq_ball):
    A, B, C = eq_terminals
    net = generate_competitor(CompetitorSpec("path-topology", {"order": "ABC"}, 0), A, B, C, eq_ball)
    assert network_length(net) == pytest.approx(geodesic_distance(A, B) + geodesic_distance(B, C), abs=1e-15)
    assert network_length(net) > 0.9


def test_determinism(eq_terminals, eq_ball):
    specs = mixed_specs(10, seed=42)
    assert specs == mixed_specs(10, seed=42)
    for spec in specs:
        a = generate_competitor(spec, *eq_terminals, eq_ball).to_json()
        b = generate_competitor(spec, *eq_terminals, eq_ball).to_json()
        assert a == b


def test_inside_failure_raises(eq_terminals, eq_ball, eq_solution):
    spec = CompetitorSpec("perturbed-junction", {"radius": 3.0, "exact": True}, 0)
    with pytest.raises(RuntimeError):
        generate_competitor(spec, *eq_terminals, eq_ball, junction=eq_solution.junction, attempts=20)


def test_compare_lengths_equilateral(eq_ball, eq_solution):
    rep = compare_lengths(eq_solution.network, mixed_specs(250), eq_ball)
    assert rep.passed
    assert rep.competitors_tested == 250
    assert rep.min_competitor_length >= 0.9 - 1e-9
    assert set(rep.per_kind) == set(KINDS)
    assert set(rep.path_topologies) == set(PATH_ORDERS)
    assert all(L > 0.9 for L in rep.path_topologies.values())
    assert sum(rep.margin_histogram["counts"]) == 250
    assert rep.histogram_csv().startswith("bin_lo,bin_hi,count\n")


def test_compare_lengths_flags_shorter_competitor(eq_terminals, eq_ball):
    # the path A-B-C is not minimal; Y competitors around the optimum beat it
    path = generate_competitor(CompetitorSpec("path-topology", {"order": "ABC"}, 0), *eq_terminals, eq_ball)
    specs = mixed_specs(20, kinds=("perturbed-junction",), radius=0.01)
    rep = compare_lengths(path, specs, eq_ball)
    assert not rep.passed
    assert len(rep.violations) == 20
    assert all(v["length"] < v["reference_length"] - 1e-9 for v in rep.violations)


def test_quadratic_excess(eq_ball, rng):
    for A, B, C in random_configs(rng, eq_ball, 5, max_angle=1.8):
        S = solve_spherical(A, B, C, eq_ball).junction
        for angle in rng.uniform(0, 2 * math.pi, 3):
            for eps in (1e-2, 5e-3):
                assert 3.5 <= excess_ratio(A, B, C, S, eps, angle) <= 4.5


def test_prop41_examples(planar_T):
    omega = MatrixForm.identity()
    net = planar_T.network
    bT = current_boundary(planar_T)
    boundary = {l: bT.coefficient_at(net.vertices[l]) for l in "ABC"}
    path = EmbeddedNetwork("plane", dict(TERMS), [("A", "B"), ("B", "C")], "ABC")
    S_path = RectifiableCurrent.along_edges(path, solve_tree_multiplicities(path, boundary))
    rep = verify_prop41_planar(planar_T, omega, [S_path, planar_T])
    assert rep["passed"]
    assert rep["rows"][0]["mass"] > rep["mass_T"]
    assert rep["rows"][1]["stokes_gap"] <= 1e-12
    assert rep["rows"][1]["mass"] == pytest.approx(rep["mass_T"], abs=1e-12)
    assert rep["pairing_T"] == pytest.approx(rep["mass_T"], abs=1e-10)


def test_prop41_reroute(planar_T):
    net = planar_T.network
    # reroute the edge to A through an extra point, keeping its multiplicity
    verts = dict(net.vertices)
    verts["R"] = np.array([0.5, 0.2])
    k = [i for i, e in enumerate(net.edges) if "A" in e][0]
    edges = [e for i, e in enumerate(net.edges) if i != k]
    a, b = net.edges[k]
    mult = [g for i, g in enumerate(planar_T.multiplicity) if i != k]
    g = planar_T.multiplicity[k]
    rerouted = EmbeddedNetwork("plane", verts, edges + [(a, "R"), ("R", b)], net.terminals, net.junctions)
    S = RectifiableCurrent.along_edges(rerouted, mult + [g, g])
    rep = verify_prop41_planar(planar_T, MatrixForm.identity(), [S])
    assert rep["stokes_identity"] and rep["passed"]
    assert rep["min_mass_excess"] > 0


def test_prop41_boundary_mismatch(planar_T):
    seg = EmbeddedNetwork("plane", {"A": TERMS["A"], "B": TERMS["B"]}, [("A", "B")])
    with pytest.raises(NotACompetitor, match="not a competitor"):
        verify_prop41_planar(planar_T, MatrixForm.identity(), [RectifiableCurrent.along_edges(seg, [G1])])


def test_prop41_random_competitors(planar_T):
    comps = planar_competitor_currents(planar_T, 60, seed=5)
    bT = current_boundary(planar_T)
    assert all(current_boundary(S).same_as(bT) for S in comps)
    rep = verify_prop41_planar(planar_T, MatrixForm.identity(), comps)
    assert rep["passed"], rep["max_stokes_gap"]
    assert all(current_mass(S) >= current_mass(planar_T) - 2e-9 for S in comps)


def test_oracle_equilateral(eq_terminals, eq_ball, eq_solution):
    grid, refined, cell = spherical_grid_junction(*eq_terminals, eq_ball, 200)
    assert geodesic_distance(grid, NORTH_POLE) < 1e-2
    assert geodesic_distance(refined, NORTH_POLE) < 1e-5
    rep = oracle_global_check(*eq_terminals, eq_ball, 200, solver_result=eq_solution)
    assert rep["best"]["kind"] == "junction"
    assert rep["solver"]["agrees"]
    assert rep["best"]["length"] >= eq_solution.length - 1e-9


def test_oracle_degenerate(eq_ball, rng):
    A, B, C = random_configs(rng, eq_ball, 1, degenerate=True)[0]
    res = solve_spherical(A, B, C, eq_ball)
    rep = oracle_global_check(A, B, C, eq_ball, 100, solver_result=res)
    assert rep["best"]["kind"] == "path"
    assert rep["best"]["vertex"] == res.degenerate_at
    assert rep["solver"]["agrees"]
