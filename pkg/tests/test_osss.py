import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blumecapel.exact import InstanceTooLarge
from blumecapel.lattice import Graph, box_region, rect_region
from blumecapel.model import BoundaryCondition, ModelParams
from blumecapel.osss import (AdmissibilityError, DecisionTree, Domain, all_open_function,
                             check_weak_monotonicity, classical_osss_product,
                             cluster_exploration_tree, connection_function, coordinate_function,
                             derivative_identities, estimate_revealment, exploration_tree,
                             function_table, is_increasing, lexicographic_tree,
                             osss_inequality_check, product_measure, random_admissible_tree,
                             random_monotone_table, rc_measure, revealments, run_decision_tree,
                             sharp_threshold_check, threshold_diagnostic,
                             weak_monotonicity_threshold)

FREE, WIRED = BoundaryCondition.free(), BoundaryCondition.wired()
R12 = rect_region(0, 1, 0, 0)


def static_order(tree):
    hist, vals = (), ()
    while len(hist) < tree.domain.size:
        hist += (tree.next_query(hist, vals),)
        vals += (0,)
    return list(hist)


def test_domain_layout():
    dom = Domain.of(R12)
    assert (dom.n_vertices, dom.size) == (2, 2 + 1 + 6)
    assert dom.endpoints(2) == (0, 1)
    assert all(len(dom.endpoints(d)) == 1 for d in range(3, dom.size))
    assert dom.label(0) == "v0" and dom.label(2) == "e0"
    assert dom.in_S([0, 1, 2]) and not dom.in_S([0, 2, 1]) and not dom.in_S([0, 0])
    brute = [s for k in range(dom.size + 1) for s in itertools.combinations(range(dom.size), k)
             if dom.in_U(s)]
    assert sorted(dom.closed_subsets()) == sorted(brute)


def test_admissibility_is_enforced():
    dom = Domain.of(R12)
    with pytest.raises(AdmissibilityError):
        DecisionTree(dom, 2, lambda h, v: 0)
    with pytest.raises(AdmissibilityError):
        DecisionTree.from_order(dom, [0, 2, 1] + list(range(3, dom.size)))
    bad = DecisionTree(dom, 0, lambda h, v: 2)
    with pytest.raises(AdmissibilityError):
        bad.next_query((0,), (1,))
    rep = DecisionTree(dom, 0, lambda h, v: 0)
    with pytest.raises(AdmissibilityError):
        rep.next_query((0,), (1,))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_trees_are_admissible(seed):
    dom = Domain.of(box_region(1, 2))
    order = static_order(random_admissible_tree(dom, np.random.default_rng(seed)))
    assert dom.is_vertex(order[0]) and dom.in_S(order) and sorted(order) == list(range(dom.size))


def test_run_tree_trivial_cases():
    dom = Domain.of(R12)
    t = lexicographic_tree(dom)
    eta = np.zeros(dom.size, dtype=np.uint8)
    assert run_decision_tree(t, eta, lambda X: np.zeros(len(np.atleast_2d(X))))["tau"] == 1
    assert run_decision_tree(t, eta, coordinate_function(0))["tau"] == 1


def test_exploration_tree_on_lambda2():
    reg = box_region(2, 2)
    dom = Domain.of(reg)
    sup = reg.sup_norm()
    o = int(np.argmin(sup))
    outer = np.nonzero(sup == 2)[0]
    ring = set(np.nonzero(sup == 1)[0].tolist())
    f = connection_function(dom, [o], outer)
    t = exploration_tree(reg, 1)
    assert t.first in ring
    # all closed: only inner-ring vertices are queried, and the run ends by the
    # time all of them are seen closed (earlier once the origin's four
    # neighbours are closed)
    res = run_decision_tree(t, np.zeros(dom.size, dtype=np.uint8), f)
    queried = [d for d, _ in res["transcript"]]
    assert set(queried) <= ring and res["tau"] <= len(ring)
    nbrs = {u for e in reg.graph.edges.tolist() if o in e for u in e if u != o}
    assert nbrs <= set(queried)
    # an open ring at radius 1 with everything else closed: determined early
    eta = np.zeros(dom.size, dtype=np.uint8)
    eta[list(ring)] = 1
    for e, (u, v) in enumerate(reg.graph.edges.tolist()):
        if u in ring and v in ring:
            eta[dom.n_vertices + e] = 1
    res = run_decision_tree(t, eta, f)
    assert res["value"] == 0.0 and res["tau"] < dom.size
    with pytest.raises(ValueError):
        exploration_tree(reg, 3)
    with pytest.raises(ValueError):
        exploration_tree(R12, 1)


def test_revealment_bound_on_lambda2_line():
    reg = box_region(2, 1)
    dom = Domain.of(reg)
    mu = rc_measure(reg, WIRED, ModelParams.rc(0.6, 0.5))
    sup = reg.sup_norm()
    o = int(np.argmin(sup))
    ring = np.nonzero(sup == 1)[0].tolist()
    f = connection_function(dom, [o], np.nonzero(sup == 2)[0])
    delta = revealments(mu, f, exploration_tree(reg, 1))
    X = mu.bits()
    reach = {u: float(mu.probs @ connection_function(dom, [u], ring)(X)) for u in range(reg.n)}
    for e, (u, v) in enumerate(reg.graph.edges.tolist()):
        assert delta[dom.n_vertices + e] <= reach[u] + reach[v] + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 0.9), st.floats(0.1, 0.9))
def test_revealment_range_and_first_query(seed, p, a):
    rng = np.random.default_rng(seed)
    mu = rc_measure(R12, WIRED, ModelParams.rc(p, a))
    tab = random_monotone_table(mu.domain.size, rng)
    tree = random_admissible_tree(mu.domain, rng)
    d = revealments(mu, tab, tree)
    assert np.all(d >= -1e-15) and np.all(d <= 1 + 1e-12)
    if tab.min() != tab.max():
        assert d[tree.first] == pytest.approx(1.0, abs=1e-12)


def test_dictator_equality():
    dom = Domain.of(R12)
    mu = product_measure(dom, 0.3)
    res = osss_inequality_check(mu, coordinate_function(0), lexicographic_tree(dom))
    assert res.var == pytest.approx(0.21, abs=1e-15)
    assert res.rhs == pytest.approx(res.var, abs=1e-15) and res.holds


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_product_measure_cross_check(seed):
    rng = np.random.default_rng(seed)
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    dom = Domain.of(g)
    q = rng.uniform(0.1, 0.9, dom.size)
    tab = random_monotone_table(dom.size, rng, n_terms=3, max_size=3, n_average=2)
    tree = random_admissible_tree(dom, rng)
    res = osss_inequality_check(product_measure(dom, q), tab, tree)
    var, rhs = classical_osss_product(q, tab, static_order(tree))
    assert res.var == pytest.approx(var, abs=1e-14)
    assert res.rhs == pytest.approx(rhs, abs=1e-14)
    assert res.holds and var <= rhs + 1e-12


def test_osss_examples():
    mu = rc_measure(R12, WIRED, ModelParams.rc(0.5, 0.5))
    res = osss_inequality_check(mu, all_open_function([0, 1]), cluster_exploration_tree(mu.domain, [0]))
    assert res.holds
    reg = box_region(1, 1)
    p = 0.5
    mu = rc_measure(reg, WIRED, ModelParams.rc(p, 0.5, weak_monotonicity_threshold(p)))
    sup = reg.sup_norm()
    f = connection_function(mu.domain, [int(np.argmin(sup))], np.nonzero(sup == 1)[0])
    res = osss_inequality_check(mu, f, exploration_tree(reg, 1))
    assert res.holds and res.margin >= -1e-12
    with pytest.raises(ValueError):
        osss_inequality_check(mu, lambda X: 1.0 - coordinate_function(0)(X), lexicographic_tree(mu.domain))


def test_function_helpers():
    tab = function_table(all_open_function([0, 2]), 3)
    assert tab.tolist() == [0, 0, 0, 0, 0, 1, 0, 1]
    assert is_increasing(tab, 3)
    assert not is_increasing(1 - tab, 3)
    with pytest.raises(InstanceTooLarge):
        Domain.of(box_region(2, 2)).all_configs()


def test_weak_monotonicity_examples():
    p = 0.5
    assert weak_monotonicity_threshold(p) == pytest.approx(2 / 3)
    rep = check_weak_monotonicity(R12, p, 0.5, 2 / 3)
    assert rep.passed and rep.detail["r_meets_threshold"]
    assert math.sqrt(1 - p) >= weak_monotonicity_threshold(p)
    low = check_weak_monotonicity(R12, p, 0.5, 0.05)
    assert not low.detail["r_meets_threshold"]
    if low.violations:
        w = low.witness
        assert w["p1"] > w["p2"] and set(w) == {"U", "eta1", "eta2", "d0", "p1", "p2"}
    with pytest.raises(InstanceTooLarge):
        check_weak_monotonicity(rect_region(0, 1, 0, 1), p, 0.5, 2 / 3)


def test_sharp_threshold_on_lines():
    for n in (1, 2):
        rep = sharp_threshold_check(n, 1, 0.5, 0.5, 2 / 3)
        assert rep.passed, rep.detail
        assert rep.detail["Q_n"] == pytest.approx(rep.detail["Q_n_second_pass"], abs=1e-12)
        assert rep.detail["slack_measured"] >= 0
    with pytest.raises(ValueError):
        sharp_threshold_check(1, 1, 0.5, 0.5, bc=BoundaryCondition.delta_wired(0.5))


def test_sharp_threshold_exact_cap():
    with pytest.raises(InstanceTooLarge):
        sharp_threshold_check(2, 2, 0.5, 0.5, 2 / 3, derivatives=False)


def test_sharp_threshold_mc_mode():
    from blumecapel.crossing import SamplingPlan
    rep = sharp_threshold_check(3, 1, 0.5, 0.5, 2 / 3, mode="mc", plan=SamplingPlan(4000, burn_in=200))
    assert rep.passed
    exact = sharp_threshold_check(3, 1, 0.5, 0.5, 2 / 3, derivatives=False)
    assert abs(rep.detail["theta"] - exact.detail["theta"]) <= 5 * rep.detail["theta_stderr"] + 1e-3


@pytest.mark.parametrize("bc", [FREE, WIRED], ids=["free", "wired"])
def test_single_site_derivatives(bc):
    rows = derivative_identities(Graph.from_edges(1, []), bc, 0.4, 0.3, math.sqrt(0.6),
                                 {"psi": ([0], [0])})
    assert rows[0]["passed"]
    a = 0.3
    # for one isolated site P(ψ=1) = 2a/(1+a) in the free case
    if bc == FREE:
        assert rows[0]["prob"] == pytest.approx(2 * a / (1 + a), abs=1e-14)
        assert rows[0]["da_formula"] == pytest.approx(2 / (1 + a) ** 2, abs=1e-10)


def test_threshold_diagnostic_derivatives():
    for row in threshold_diagnostic(0.5, 0.5, ns=(1, 2)):
        assert abs(row["dtheta_formula"] - row["dtheta_fd"]) <= 1e-6
        assert row["theta"] > 0


def test_estimated_revealment_agrees_with_exact():
    mu = rc_measure(R12, WIRED, ModelParams.rc(0.5, 0.5))
    f = all_open_function([0, 1])
    tree = lexicographic_tree(mu.domain)
    exact = revealments(mu, f, tree)
    rng = np.random.default_rng(0)
    idx = rng.choice(len(mu.keys), size=3000, p=mu.probs / mu.probs.sum())
    est = estimate_revealment(tree, mu.bits()[idx], f)
    assert np.all(np.abs(est - exact) <= 5 * np.sqrt(exact * (1 - exact) / 3000) + 1e-12)
