"""One test per acceptance criterion, each at its stated tolerance."""

import json
import math
import time

import numpy as np
import pytest

from blumecapel.cli import run
from blumecapel.crossing import SamplingPlan
from blumecapel.exact import (resolved_convention, spin_ensemble, verify_es_coupling,
                              verify_ising_mapping, verify_order_properties)
from blumecapel.lattice import (Graph, box_region, fixed_polyominoes, polyomino_region, rect_region,
                               small_graphs)
from blumecapel.leeyang import (LOG4, SiteClass, cone_scan, site_factor,
                                verify_site_factor_identity)
from blumecapel.model import BoundaryCondition, Convention, ModelParams
from blumecapel.osss import (Domain, check_weak_monotonicity, cluster_exploration_tree,
                             connection_function, exploration_tree, osss_inequality_check,
                             random_admissible_tree, random_monotone_table, rc_measure,
                             sharp_threshold_check, weak_monotonicity_threshold)
from blumecapel.phase import decay_fits, find_pc, truncated_two_point
from blumecapel.sampler import ChainSpec, SpinTarget, collect_states, origin_index
from blumecapel.stats import estimate
from helpers import chi2_state_test, state_index

FREE, WIRED = BoundaryCondition.free(), BoundaryCondition.wired()
P_FK = math.sqrt(2.0) / (1.0 + math.sqrt(2.0))
PC_PLAN = SamplingPlan(10_000, seed=11)
_PC: dict = {}


def pc(a: float):
    if a not in _PC:
        _PC[a] = find_pc(a, n=32, tol=0.01, plan=PC_PLAN)
    return _PC[a]


def polyominoes():
    return [polyomino_region(c) for c in fixed_polyominoes(5)]


def test_criterion_01_es_coupling(verdict):
    t0 = time.perf_counter()
    conv = resolved_convention()
    worst, bad, count = 0.0, 0, 0
    for reg in polyominoes():
        for bc in (FREE, WIRED):
            for rep in verify_es_coupling(reg, bc, 0.5, -0.3, conv):
                count += 1
                worst = max(worst, rep.max_abs_err)
                bad += not rep.passed
    other = Convention.PAPER_A if conv == Convention.ACTIVITY_E else Convention.ACTIVITY_E
    sig = [r for r in verify_es_coupling(Graph.from_edges(1, []), FREE, 0.5, -0.3, other)
           if r.check == "es_sigma_marginal"][0]
    rejected = (not sig.passed) and math.isfinite(sig.max_abs_err) and sig.max_abs_err > 0
    dt = time.perf_counter() - t0
    ok = bad == 0 and worst <= 1e-12 and rejected and dt <= 60
    verdict(1, ok, f"{count} identities, max abs err {worst:.2e}, rejected convention err "
                   f"{sig.max_abs_err:.3g}, {dt:.1f}s")
    assert ok


def test_criterion_02_ising_mapping(verdict):
    t0 = time.perf_counter()
    worst, bad, count = 0.0, 0, 0
    for _, g in small_graphs(4):
        for beta in (0.2, 0.5, 1.0):
            for delta in (-1.5, -0.693, 0.0, 1.0):
                for xi in ("free", "plus", "minus"):
                    for rep in verify_ising_mapping(g, beta, delta, xi, tol=1e-10):
                        count += 1
                        worst = max(worst, rep.max_rel_err if rep.max_rel_err else rep.max_abs_err)
                        bad += not rep.passed
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt <= 120
    verdict(2, ok, f"{count} checks, {bad} failing, worst err {worst:.2e}, {dt:.1f}s")
    assert ok


def test_criterion_03_order_properties(verdict):
    t0 = time.perf_counter()
    grid = [(p, a) for p in (0.3, 0.5, 0.7) for a in (0.3, 0.5, 0.7)]
    reps = verify_order_properties(grid, regions=("1x2", "2x2"), slack=1e-12)
    bad = [r.record() for r in reps if not r.passed]
    kinds = sorted({r.check.split("[")[0] for r in reps})
    dt = time.perf_counter() - t0
    ok = not bad and dt <= 600
    verdict(3, ok, f"{len(reps)} reports over {len(kinds)} properties, {len(bad)} with violations, {dt:.1f}s")
    assert ok, bad[:3]


def test_criterion_04_lee_yang(verdict):
    t0 = time.perf_counter()
    reps = verify_site_factor_identity(8, (-LOG4, -1.0, 0.0, 1.0), tol=1e-12)
    viol = sum(r.violations for r in reps)
    zero = site_factor(4, 0, -LOG4, SiteClass.BC) == 0
    worst = math.inf
    for _, g in small_graphs(5):
        for delta in (-LOG4, 0.0):
            for A in ((), tuple(range(g.n))):
                worst = min(worst, cone_scan(g, 0.5, delta, A, keep_records=False).min_normalised)
    dt = time.perf_counter() - t0
    ok = viol == 0 and zero and worst > 1e-9 and dt <= 300
    verdict(4, ok, f"site-factor violations {viol}, exact zero {zero}, min normalised |Z| {worst:.3g}, {dt:.1f}s")
    assert ok


def _triples(region, bc, params, n_triples, rng):
    dom = Domain.of(region)
    mu = rc_measure(dom, bc, params)
    out = []
    sup = region.sup_norm()
    o = int(np.argmin(sup))
    is_box = (region.shape or {}).get("shape") == "box"
    for i in range(n_triples):
        kind = i % 3
        if kind == 0:
            f = connection_function(dom, [o], np.nonzero(sup == sup.max())[0])
            tree = exploration_tree(region, int(sup.max())) if is_box else cluster_exploration_tree(dom, [o])
        else:
            f = random_monotone_table(dom.size, rng, n_average=1 + i % 3)
            tree = random_admissible_tree(dom, rng) if kind == 1 else \
                cluster_exploration_tree(dom, [int(rng.integers(dom.n_vertices))])
        out.append(osss_inequality_check(mu, f, tree))
    return out


def test_criterion_05_osss(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    p, a = 0.5, 0.5
    thr = weak_monotonicity_threshold(p)
    r12, r22, lam1 = rect_region(0, 1, 0, 0), rect_region(0, 1, 0, 1), box_region(1, 1)
    results = []
    results += _triples(r12, WIRED, ModelParams.rc(p, a), 10, rng)
    results += _triples(r12, WIRED, ModelParams.rc(p, a, thr), 10, rng)
    results += _triples(r22, WIRED, ModelParams.rc(p, a), 12, rng)
    results += _triples(r22, FREE, ModelParams.rc(0.6, 0.4, weak_monotonicity_threshold(0.6)), 12, rng)
    results += _triples(lam1, WIRED, ModelParams.rc(p, a, thr), 12, rng)
    results += _triples(lam1, FREE, ModelParams.rc(0.3, 0.7), 9, rng)
    held = sum(r.holds for r in results)
    wm = [check_weak_monotonicity(reg, p, a, thr) for reg in (r12, lam1)]
    wm_ok = all(r.passed for r in wm)
    sharp = [sharp_threshold_check(1, 1, p, a, thr), sharp_threshold_check(2, 1, p, a, thr),
             sharp_threshold_check(1, 2, p, a, thr)]
    sharp_ok = all(r.passed for r in sharp)
    deriv = [row for r in sharp for row in r.detail["derivatives"]]
    dmax = max(max(row["dp_err"], row["da_err"]) for row in deriv)
    dt = time.perf_counter() - t0
    ok = len(results) >= 50 and held == len(results) and wm_ok and sharp_ok and dmax <= 1e-6 and dt <= 600
    verdict(5, ok, f"OSSS {held}/{len(results)} triples hold, weak monotonicity at threshold {wm_ok}, "
                   f"sharp-threshold bound {sharp_ok} (min slack "
                   f"{min(r.detail['slack_measured'] for r in sharp):.3g}), derivative err {dmax:.1e}, {dt:.0f}s")
    assert ok


def test_criterion_06_sampler(verdict):
    t0 = time.perf_counter()
    beta, delta = 0.5, -0.3
    n_obs = bad_obs = 0
    pvals = []
    worst = 0.0
    for i, reg in enumerate(polyominoes()):
        g = reg.graph
        o = origin_index(reg)
        pair = tuple(g.edges[0]) if g.n_edges else None
        for j, bc in enumerate((FREE, WIRED)):
            ens = spin_ensemble(g, bc, beta, delta)
            pr = ens.probs()
            spec = ChainSpec(SpinTarget(reg, bc, beta, delta), ("mag",), 100_000, 1000,
                             seed=1000 * i + j)
            rec = collect_states(spec, burn_in=1000)[0]
            s = rec.spins.astype(float)
            obs = {"s0": (s[:, o], ens.states[:, o]), "s0sq": (s[:, o] ** 2, ens.states[:, o] ** 2)}
            if pair:
                x, y = pair
                obs["sxy"] = (s[:, x] * s[:, y], ens.states[:, x] * ens.states[:, y])
            for series, exact_vals in obs.values():
                est = estimate(series, warn=False)
                exact = float(pr @ exact_vals)
                n_obs += 1
                z = abs(est.mean - exact) / est.stderr if est.stderr > 0 else (0.0 if est.mean == exact else math.inf)
                worst = max(worst, z)
                bad_obs += z > 4
            pvals.append(chi2_state_test([state_index(rec.spins)], pr)["p_value"])
    n_chi = len(pvals)
    bad_chi = sum(p < 1e-3 for p in pvals)
    dt = time.perf_counter() - t0
    ok = bad_obs == 0 and bad_chi == 0 and dt <= 600
    verdict(6, ok, f"{n_obs} observables, max |z| {worst:.2f} (limit 4); chi2 min p {min(pvals):.2e} "
                   f"over {n_chi} instances; {dt:.0f}s")
    assert ok


def test_criterion_07_critical_point(verdict):
    t0 = time.perf_counter()
    e = pc(1.0)
    dt = time.perf_counter() - t0
    ok = e.width <= 0.02 and e.contains(P_FK) and dt <= 1800
    verdict(7, ok, f"bracket [{e.p_lo:.5f}, {e.p_hi:.5f}] width {e.width:.4f}, contains {P_FK:.5f}: "
                   f"{e.contains(P_FK)}, {dt:.0f}s")
    assert ok


def test_criterion_08_quadrichotomy(verdict, tmp_path):
    t0 = time.perf_counter()
    want = {0.45: "SubCrit", 0.70: "SupCrit", 0.58579: "ContCrit"}
    got = {}
    for p in want:
        out = tmp_path / f"quad_{p}.jsonl"
        code = run(["quad", "--a", "1.0", "--p", str(p), "--scales", "8,16,32,64", "--seed", "7",
                    "--out", str(out)])
        got[p] = json.loads(out.read_text().splitlines()[0])["label"] if code == 0 else f"exit {code}"
    dt = time.perf_counter() - t0
    ok = got == want and dt <= 3600
    verdict(8, ok, ", ".join(f"p={p}: {got[p]}" for p in want) + f", {dt:.0f}s")
    assert ok


def test_criterion_09_exponential_decay(verdict):
    t0 = time.perf_counter()
    beta_c = pc(0.5).beta_hat
    res = truncated_two_point(0.7 * beta_c, 0.0, 40, list(range(2, 17)), plan=SamplingPlan(100_000, seed=5),
                              warn=False)
    rows = res["rows"]
    rs = [r["r"] for r in rows]
    fits = {}
    for key in ("corr_rc", "corr"):
        fits[key] = decay_fits(rs, [r[key].mean for r in rows], [r[key].stderr for r in rows])
    dt = time.perf_counter() - t0

    def good(f):
        return f is not None and f["rate"] > 0 and f["t"] >= 3 and f["preferred"] == "exponential"
    ok = all(good(f) for f in fits.values()) and dt <= 1800
    verdict(9, ok, f"beta_hat_c={beta_c:.4f}; " + "; ".join(
        f"{k}: rate {f['rate']:.3f} t {f['t']:.1f} AIC exp {f['exponential']['aic']:.1f} vs power "
        f"{f['power']['aic']:.1f}" if f else f"{k}: no fit" for k, f in fits.items()) + f"; {dt:.0f}s")
    assert ok


def test_criterion_10_critical_line_monotone(verdict):
    t0 = time.perf_counter()
    avals = (0.3, 0.5, 0.7, 0.9, 1.0)
    ests = [pc(a) for a in avals]
    ok = all(lo.p_lo > hi.p_hi for lo, hi in zip(ests, ests[1:]))
    dt = time.perf_counter() - t0
    ok = ok and dt <= 7200
    verdict(10, ok, "; ".join(f"a={a}: [{e.p_lo:.4f}, {e.p_hi:.4f}]" for a, e in zip(avals, ests)) + f"; {dt:.0f}s")
    assert ok


CLI_RUNS = {
    "exact-verify": ["--suite", "es-coupling", "--max-vertices", "3"],
    "sample": ["--instance", "box:3:2", "--beta", "0.4", "--delta", "0", "--samples", "2000",
               "--chains", "3"],
    "crossing": ["--p", "0.6", "--a", "0.8", "--scale", "4", "--samples", "400", "--chains", "3",
                 "--events", "H,V,C"],
    "quad": ["--p", "0.6", "--a", "1.0", "--scales", "4,8,16,32", "--samples", "100", "--chains", "2"],
    "phase-scan": ["--a-values", "1.0", "--n", "16", "--tol", "0.1", "--samples", "300"],
    "weak-plus": ["--beta", "0.4", "--delta", "0", "--eps", "0,0.4", "--ns", "1,2", "--samples", "2000",
                  "--chains", "2"],
    "leeyang": ["--graph", "path4", "--grid", "31", "--site-factors"],
    "osss-verify": ["--checks", "weak-monotonicity,osss,sharp-threshold", "--triples", "4"],
}


def test_criterion_11_reproducibility(verdict, tmp_path):
    t0 = time.perf_counter()
    fails = []
    for cmd, extra in CLI_RUNS.items():
        for ext in (".jsonl", ".csv"):
            out = tmp_path / f"{cmd}{ext}"
            code = run([cmd, *extra, "--seed", "3", "--out", str(out)])
            if code != 0:
                fails.append(f"{cmd}: exit {code}")
                continue
            man = str(out) + ".manifest.json"
            for threads in ("1", "8"):
                again = tmp_path / f"{cmd}.t{threads}{ext}"
                if run(["replay", man, "--out", str(again), "--threads", threads]) != 0 or \
                        again.read_bytes() != out.read_bytes():
                    fails.append(f"{cmd}{ext} threads={threads}")
    dt = time.perf_counter() - t0
    ok = not fails
    verdict(11, ok, f"{len(CLI_RUNS)} commands x 2 formats replayed at 1 and 8 threads, "
                    f"{len(fails)} mismatches {fails[:3]}; {dt:.0f}s")
    assert ok
