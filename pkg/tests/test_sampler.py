import math

import numpy as np
import pytest

from blumecapel._util import set_workers
from blumecapel.exact import exact_expectation, rc_ensemble, spin_ensemble
from blumecapel.lattice import Graph, box_region, rect_region
from blumecapel.model import BoundaryCondition, ModelParams
from blumecapel.sampler import (ChainSpec, RcTarget, SpinTarget, advance, collect_states,
                                es_sweep, rc_glauber_sweep, rc_state, record, run_chain,
                                site_heatbath_sweep, spin_state)
from helpers import chi2_state_test, state_index

FREE, WIRED = BoundaryCondition.free(), BoundaryCondition.wired()


def test_es_sweep_without_bonds_resigns_sites_independently():
    st = spin_state(Graph.from_edges(2, [(0, 1)]), FREE, 0.0, 0.0, seed=3)
    st.spins[:] = [1, 1]
    seen = set()
    for _ in range(200):
        es_sweep(st)
        assert st.om_int.sum() == 0
        seen.add(tuple(st.spins))
    assert seen == {(1, 1), (1, -1), (-1, 1), (-1, -1)}


def test_es_sweep_on_zero_spins_is_identity():
    st = spin_state(rect_region(0, 1, 0, 1), FREE, 0.7, 0.0, seed=1, init="zero")
    for _ in range(20):
        es_sweep(st)
    assert np.all(st.spins == 0)
    assert st.sweeps == 20


def test_es_sweep_single_cluster_flips_together():
    # β = ∞ in effect: p = 1 - e^{-2β} ≈ 1
    st = spin_state(rect_region(0, 1, 0, 1), FREE, 40.0, 0.0, seed=2)
    n_plus = 0
    for _ in range(2000):
        es_sweep(st)
        assert abs(st.spins.sum()) == 4
        n_plus += st.spins[0] == 1
    assert abs(n_plus / 2000 - 0.5) < 4 * math.sqrt(0.25 / 2000)


def test_heatbath_isolated_site_marginal():
    delta = -0.4
    st = spin_state(Graph.from_edges(1, []), FREE, 0.5, delta, seed=4)
    zeros = 0
    n = 20000
    for _ in range(n):
        site_heatbath_sweep(st)
        zeros += st.spins[0] == 0
    want = 1 / (1 + 2 * math.exp(delta))
    assert abs(zeros / n - want) < 4 * math.sqrt(want * (1 - want) / n)


def test_heatbath_flat_and_very_negative_delta():
    st = spin_state(Graph.from_edges(1, []), FREE, 0.0, 0.0, seed=5)
    counts = np.zeros(3)
    for _ in range(9000):
        site_heatbath_sweep(st)
        counts[st.spins[0] + 1] += 1
    assert np.all(np.abs(counts / 9000 - 1 / 3) < 4 * math.sqrt(2 / 9 / 9000))
    st = spin_state(Graph.from_edges(1, []), FREE, 0.0, -60.0, seed=5)
    for _ in range(100):
        site_heatbath_sweep(st)
        assert st.spins[0] == 0


def test_wired_boundary_is_plus_and_rc_stays_compatible():
    reg = box_region(2, 2)
    spec = ChainSpec(SpinTarget(reg, WIRED, 0.6, 0.0), ("mag",), 500, 50, seed=9)
    rec = collect_states(spec)[0]
    assert rec.spins.shape == (500, reg.graph.n)
    st = rc_state(rect_region(0, 2, 0, 1), WIRED, ModelParams.rc(0.5, 0.6), seed=8)
    for _ in range(200):
        rc_glauber_sweep(st)
        st.check()


def test_rc_rejects_degenerate_p():
    with pytest.raises(ValueError):
        rc_state(Graph.from_edges(1, []), FREE, ModelParams.rc(1.0, 0.5))


def test_rc_single_site_stationary_law():
    a = 0.35
    st = rc_state(Graph.from_edges(1, []), FREE, ModelParams.rc(0.5, a), seed=6)
    rec = record(st, 40000, roots=False)
    want = 2 * a / (1 + a)
    # uncorrelated heat-bath on one coordinate
    assert abs(rec.psi.mean() - want) < 4 * math.sqrt(want * (1 - want) / 40000)


def test_rc_glauber_matches_exact_edge_density():
    reg = rect_region(0, 1, 0, 0)
    prm = ModelParams.rc(0.55, 0.6)
    ens = rc_ensemble(reg.graph, WIRED, prm)
    ob = ens.omega_bits()
    pr = ens.probs()
    spec = ChainSpec(RcTarget(reg, WIRED, prm), ("psi[0]", "omega[0]", "connb[0]"), 40000, 200,
                     n_chains=2, seed=12)
    est = run_chain(spec, warn=False)
    exact = {"psi[0]": float(pr @ ens.psi_bits()[:, 0]), "omega[0]": float(pr @ ob[:, 0]),
             "connb[0]": float(pr @ ens.boundary_connections()[:, 0])}
    for k, v in exact.items():
        assert abs(est[k].mean - v) <= 4 * est[k].stderr, (k, est[k], v)


def test_hybrid_kernel_state_frequencies():
    reg = rect_region(0, 1, 0, 0)
    beta, delta = 0.5, -0.3
    ens = spin_ensemble(reg.graph, WIRED, beta, delta)
    spec = ChainSpec(SpinTarget(reg, WIRED, beta, delta), ("mag",), 50000, 100, n_chains=2, seed=21)
    recs = collect_states(spec)
    res = chi2_state_test([state_index(r.spins) for r in recs], ens.probs())
    assert res["p_value"] > 1e-3, res


def test_run_chain_matches_exact_and_is_deterministic():
    g = Graph.from_edges(2, [(0, 1)])
    beta, delta = 0.6, -0.2
    spec = ChainSpec(SpinTarget(g, FREE, beta, delta), ("sigmasq[0]", "sigmaxy[0;1]"), 30000, 100,
                     seed=4)
    est = run_chain(spec, warn=False)
    want2 = exact_expectation("BlumeCapel", g, FREE, (beta, delta), lambda e: e.states[:, 0] ** 2)
    wantxy = exact_expectation("BlumeCapel", g, FREE, (beta, delta),
                               lambda e: e.states[:, 0] * e.states[:, 1])
    assert abs(est["sigmasq[0]"].mean - want2) <= 4 * est["sigmasq[0]"].stderr
    assert abs(est["sigmaxy[0;1]"].mean - wantxy) <= 4 * est["sigmaxy[0;1]"].stderr
    assert run_chain(spec, warn=False) == est


def test_chains_are_independent_of_worker_count():
    spec = ChainSpec(SpinTarget(box_region(1, 2), WIRED, 0.4, 0.0), ("mag", "density"), 2000, 100,
                     n_chains=3, seed=5)
    one = run_chain(spec, warn=False)
    set_workers(4)
    try:
        assert run_chain(spec, warn=False) == one
    finally:
        set_workers(1)


def test_unknown_observable():
    with pytest.raises(ValueError):
        run_chain(ChainSpec(SpinTarget(Graph.from_edges(1, []), FREE, 0.1, 0.0), ("bogus",), 100, 0))
