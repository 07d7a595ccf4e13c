import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blumecapel.crossing import (DUAL, PRIMAL, SPIN, CrossingSpec, GridMap, H, P_SELFDUAL,
                                 SamplingPlan, V, balanced_statistic, classify_quadrichotomy,
                                 decay_fit, decide, detect_circuit, detect_crossing,
                                 estimate_event, sample_events, strip_density_proxy)
from blumecapel.lattice import Rect, box_region, rect_region
from blumecapel.model import BoundaryCondition, ModelParams
from blumecapel.stats import Estimate

FREE, WIRED = BoundaryCondition.free(), BoundaryCondition.wired()
REG = box_region(4, 2)
GM = GridMap(REG)


def edge_index(region, p, q):
    g = region.graph
    i, j = region.index(p), region.index(q)
    for e, (u, v) in enumerate(g.edges.tolist()):
        if {u, v} == {i, j}:
            return e
    raise KeyError((p, q))


def omega_of(region, pairs):
    om = np.zeros(region.graph.n_edge_vars, dtype=np.uint8)
    for p, q in pairs:
        om[edge_index(region, p, q)] = 1
    return om


def test_trivial_crossings():
    full = np.ones(REG.graph.n_edge_vars, dtype=np.uint8)
    empty = np.zeros_like(full)
    assert detect_crossing(full, H(3), GM)
    assert not detect_crossing(empty, H(3), GM)
    assert detect_crossing(empty, H(3, DUAL), GM)
    assert not detect_crossing(full, H(3, DUAL), GM)


def test_single_path_and_its_edges():
    path = [((x, 1), (x + 1, 1)) for x in range(-3, 3)]
    om = omega_of(REG, path)
    assert detect_crossing(om, H(3), GM)
    assert not detect_crossing(om, V(3), GM)
    for k in range(len(path)):
        assert not detect_crossing(omega_of(REG, path[:k] + path[k + 1:]), H(3), GM)


def test_rectangle_outside_region():
    with pytest.raises(ValueError):
        detect_crossing(np.zeros(REG.graph.n_edge_vars, dtype=np.uint8), H(5), GM)
    with pytest.raises(ValueError):
        detect_circuit(np.zeros(REG.graph.n_edge_vars, dtype=np.uint8), 3, PRIMAL, GM)


def test_spin_crossings():
    s = np.zeros(REG.graph.n, dtype=np.int64)
    assert detect_crossing(s, H(3, SPIN, {0, -1}), GM)
    assert not detect_crossing(s, H(3, SPIN, {1}), GM)
    # a diagonal staircase of plus spins is a *-crossing but not a plain one
    for x in range(-3, 4):
        s[REG.index((x, x))] = 1
    plain = H(3, SPIN, {1})
    star = CrossingSpec(Rect.box(3), "horizontal", SPIN, frozenset({1}), star=True)
    assert not detect_crossing(s, plain, GM)
    assert detect_crossing(s, star, GM)
    with pytest.raises(ValueError):
        CrossingSpec(Rect.box(3), mode=PRIMAL, spins={1})


def test_trivial_circuits():
    full = np.ones(REG.graph.n_edge_vars, dtype=np.uint8)
    empty = np.zeros_like(full)
    assert detect_circuit(full, 2, PRIMAL, GM) and not detect_circuit(full, 2, DUAL, GM)
    assert detect_circuit(empty, 2, DUAL, GM) and not detect_circuit(empty, 2, PRIMAL, GM)


def test_explicit_ring():
    ring = []
    for t in range(-3, 3):
        ring += [((t, -3), (t + 1, -3)), ((t, 3), (t + 1, 3)), ((-3, t), (-3, t + 1)), ((3, t), (3, t + 1))]
    om = omega_of(REG, ring)
    assert detect_circuit(om, 2, PRIMAL, GM)
    assert not detect_circuit(omega_of(REG, ring[1:]), 2, PRIMAL, GM)


def _annulus_oracle(region, om, n):
    """Brute force on the open annulus graph: primal circuit via cycle parity, dual via connectivity."""
    g = region.graph
    V = region.vertices
    norm = np.abs(V).max(axis=1)
    A = nx.Graph()
    box = nx.Graph()
    box.add_nodes_from(np.nonzero(norm <= 2 * n)[0].tolist())
    for e, (u, v) in enumerate(g.edges.tolist()):
        if not om[e]:
            continue
        if norm[u] <= 2 * n and norm[v] <= 2 * n:
            box.add_edge(u, v)
        if n < norm[u] <= 2 * n and n < norm[v] <= 2 * n:
            A.add_edge(u, v)
    # a cycle surrounds (1/2, 1/2) iff it crosses the ray y = 1/2, x > 1/2 an odd number of times
    surrounding = False
    for cyc in nx.cycle_basis(A):
        crossings = 0
        for u, v in zip(cyc, cyc[1:] + cyc[:1]):
            (x1, y1), (x2, y2) = V[u], V[v]
            if x1 == x2 and x1 > 0 and {y1, y2} == {0, 1}:
                crossings += 1
        surrounding |= crossings % 2 == 1
    inner = np.nonzero(norm <= n)[0]
    outer = set(np.nonzero(norm == 2 * n)[0].tolist())
    joined = any(outer & nx.node_connected_component(box, int(x)) for x in inner)
    return surrounding, not joined


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.3, 0.8))
def test_circuits_against_brute_force(seed, p):
    region = box_region(3, 2)
    gm = GridMap(region)
    om = (np.random.default_rng(seed).random(region.graph.n_edge_vars) < p).astype(np.uint8)
    prim, dual = _annulus_oracle(region, om, 1)
    assert detect_circuit(om, 1, PRIMAL, gm) == prim
    assert detect_circuit(om, 1, DUAL, gm) == dual


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.2, 0.8))
def test_primal_dual_duality(seed, p):
    om = (np.random.default_rng(seed).random(REG.graph.n_edge_vars) < p).astype(np.uint8)
    rect = Rect(-3, 2, -2, 3)
    v = detect_crossing(om, CrossingSpec(rect, "vertical"), GM)
    h_dual = detect_crossing(om, CrossingSpec(rect, "horizontal", DUAL), GM)
    assert v != h_dual


def test_estimates_in_dense_and_sparse_regimes():
    plan = SamplingPlan(400, burn_in=100, seed=3)
    dense = estimate_event(ModelParams.rc(0.99, 1.0), WIRED, "H", 8, plan, warn=False)
    assert dense.mean >= 0.99
    sparse = estimate_event(ModelParams.rc(0.01, 0.5), WIRED, "H", 8, plan, warn=False)
    assert sparse.mean <= 0.01


def test_symmetry_and_boundary_monotonicity():
    prm = ModelParams.rc(0.6, 1.0)
    region = box_region(8, 2)
    plan = SamplingPlan(3000, burn_in=200, seed=5)
    w = sample_events(region, WIRED, prm, {"H": H(4), "V": V(4)}, plan, warn=False)
    f = sample_events(region, FREE, prm, {"H": H(4)}, plan, warn=False)
    se = math.hypot(w["H"].stderr, w["V"].stderr)
    assert abs(w["H"].mean - w["V"].mean) <= 3 * se
    assert f["H"].mean <= w["H"].mean + 3 * math.hypot(f["H"].stderr, w["H"].stderr)


def test_strip_proxies_at_p_near_one():
    prm = ModelParams.rc(0.97, 1.0)
    plan = SamplingPlan(200, burn_in=50, seed=1)
    pn = strip_density_proxy(prm, 2, 2, "p_n", plan, warn=False)
    qn = strip_density_proxy(prm, 2, 2, "q_n", plan, warn=False)
    assert pn.value > 0.9 and pn.label == "proxy"
    assert qn.value < 0.1
    with pytest.raises(ValueError):
        strip_density_proxy(prm, 2, 3, "p_n")


def test_balanced_statistic():
    assert balanced_statistic(P_SELFDUAL) == pytest.approx(0.5, abs=1e-15)
    assert balanced_statistic(0.0) == 0.0 and balanced_statistic(1.0) == 1.0


def _est(m, n=4000):
    return Estimate(m, math.sqrt(max(m * (1 - m), 1e-4) / n), n)


def test_decision_rules():
    scales = [8, 16, 32, 64]
    sub_w = [_est(m) for m in (0.3, 0.08, 0.005, 0.0)]
    sub_f = [_est(m) for m in (0.1, 0.01, 0.0, 0.0)]
    fits = {"wired_crossing": decay_fit(scales, sub_w), "free_crossing": decay_fit(scales, sub_f),
            "wired_noncrossing": decay_fit(scales, sub_w, complement=True),
            "free_noncrossing": decay_fit(scales, sub_f, complement=True)}
    assert fits["wired_crossing"]["rate"] > 0
    assert decide(fits, sub_w, sub_f)[0] == "SubCrit"
    crit = [_est(m) for m in (0.5, 0.5, 0.5, 0.5)]
    fits = {k: decay_fit(scales, crit, complement=k.endswith("noncrossing")) for k in
            ("wired_crossing", "free_crossing", "wired_noncrossing", "free_noncrossing")}
    assert decide(fits, crit, crit) == ("ContCrit", ["ContCrit"])
    with pytest.raises(ValueError):
        classify_quadrichotomy(ModelParams.rc(0.5, 1.0), [8, 16, 24])
