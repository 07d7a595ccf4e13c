"""Phase-diagram exploration: critical points, magnetization and two-point profiles.

The critical-point locator bisects in p on the self-dual strip statistic of
the crossing module. Parameter conversions between (p, a) and (β, Δ) go
through the model module.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._util import ordered_map
from .crossing import SamplingPlan, selfdual_crossing
from .exact import spin_ensemble
from .lattice import box_region
from .model import BoundaryCondition, ModelParams, a_from_delta, delta_from_a, rc_to_bc_params
from .sampler import ChainSpec, SpinTarget, origin_index, run_series
from .stats import Estimate, estimate, jackknife, weighted_linear_fit

Z_MIN = 2.0
LANDMARKS = (-math.log(4.0), -math.log(2.0))


@dataclass
class CriticalPointEstimate:
    """Bracket [p_lo, p_hi] for p_c(a) at a finite scale, with the bisection trace."""

    a: float
    p_lo: float
    p_hi: float
    n: int
    n_samples: int
    seed: int
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.p_lo <= self.p_hi < 1.0:
            raise ValueError("bracket endpoints must lie in (0, 1)")

    @property
    def p_hat(self) -> float:
        return 0.5 * (self.p_lo + self.p_hi)

    @property
    def width(self) -> float:
        return self.p_hi - self.p_lo

    def contains(self, p: float) -> bool:
        return self.p_lo <= p <= self.p_hi

    def beta_bracket(self) -> tuple[float, float]:
        """The bracket mapped to β by p = 1 - exp(-2β)."""
        return -0.5 * math.log1p(-self.p_lo), -0.5 * math.log1p(-self.p_hi)

    @property
    def beta_hat(self) -> float:
        return -0.5 * math.log1p(-self.p_hat)

    @property
    def delta(self) -> float:
        return delta_from_a(self.a)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(p_hat=self.p_hat, beta_lo=self.beta_bracket()[0], beta_hi=self.beta_bracket()[1])
        return d


def _balanced(p: float, a: float, n: int, n_samples: int, seed: int, plan: SamplingPlan) -> Estimate:
    pl = SamplingPlan(n_samples, plan.burn_in, plan.thinning, plan.n_chains, seed)
    return selfdual_crossing(ModelParams.rc(p, a), n, pl, warn=False)["balanced"]


def find_pc(a: float, n: int = 32, tol: float = 0.01, plan: SamplingPlan = SamplingPlan(10_000),
            bracket: tuple[float, float] = (0.3, 0.99), z_min: float = Z_MIN,
            max_refine: int = 2) -> CriticalPointEstimate:
    """Bisection in p of the balanced self-dual strip statistic against 1/2.

    A midpoint whose estimate is within z_min standard errors of 1/2, or out
    of order with the bracket endpoints, is resampled with 4x the samples (up
    to max_refine times); the side is then chosen by the sign of the
    estimate and the step is flagged in the trace.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    if n < 16:
        raise ValueError("n must be at least 16")
    lo, hi = bracket
    if not 0.0 < lo < hi < 1.0:
        raise ValueError("bracket must satisfy 0 < lo < hi < 1")
    trace = []
    step = 0

    def evaluate(p, lower=None, upper=None):
        nonlocal step
        m = plan.n_samples
        for r in range(max_refine + 1):
            e = _balanced(p, a, n, m, plan.seed + step, plan)
            step += 1
            z = (e.mean - 0.5) / e.stderr if e.stderr > 0 else math.copysign(math.inf, e.mean - 0.5)
            ordered = ((lower is None or e.mean >= lower.mean - 2 * lower.stderr - 2 * e.stderr)
                       and (upper is None or e.mean <= upper.mean + 2 * upper.stderr + 2 * e.stderr))
            if abs(z) >= z_min and ordered:
                break
            m *= 4
        trace.append({"p": p, "stat": e.mean, "stderr": e.stderr, "z": z, "n_samples": m,
                      "resolved": bool(abs(z) >= z_min and ordered)})
        return e

    e_lo = evaluate(lo)
    while e_lo.mean > 0.5 and lo > 1e-3:
        hi, lo = lo, lo / 2
        e_lo = evaluate(lo)
    e_hi = evaluate(hi)
    while e_hi.mean < 0.5 and hi < 1 - 1e-4:
        lo, e_lo = hi, e_hi
        hi = 1 - (1 - hi) / 2
        e_hi = evaluate(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        e = evaluate(mid, e_lo, e_hi)
        if e.mean > 0.5:
            hi, e_hi = mid, e
        else:
            lo, e_lo = mid, e
    return CriticalPointEstimate(float(a), float(lo), float(hi), n, plan.n_samples, plan.seed, trace)


def delta_grid(start: float = -2.0, stop: float = 1.0, step: float = 0.25,
               landmarks: bool = True) -> list[float]:
    """Uniform Δ grid, with -log 4 and -log 2 inserted when in range."""
    k = int(round((stop - start) / step))
    grid = [round(start + i * step, 12) for i in range(k + 1)]
    if landmarks:
        grid += [x for x in LANDMARKS if start <= x <= stop]
    return sorted(set(grid))


def phase_scan(a_values, n: int = 32, tol: float = 0.01, plan: SamplingPlan = SamplingPlan(10_000),
               bracket: tuple[float, float] = (0.3, 0.99)) -> list[CriticalPointEstimate]:
    """find_pc over a grid of a; grid points run as independent jobs."""
    def one(i_a):
        i, a = i_a
        pl = SamplingPlan(plan.n_samples, plan.burn_in, plan.thinning, plan.n_chains,
                          plan.seed + 100_003 * i)
        return find_pc(a, n, tol, pl, bracket)
    return ordered_map(one, list(enumerate(a_values)))


def beta_c_hat(delta: float, n: int = 32, tol: float = 0.01,
               plan: SamplingPlan = SamplingPlan(10_000)) -> tuple[float, CriticalPointEstimate]:
    """Point estimate of β_c(Δ) (bracket midpoint mapped to β) and the underlying bracket."""
    est = find_pc(a_from_delta(delta), n, tol, plan)
    return est.beta_hat, est


# ---------------------------------------------------------------------------
# magnetization and correlations
# ---------------------------------------------------------------------------

def _origin_name(d: int) -> str:
    return ":".join("0" for _ in range(d))


def _spec(n: int, d: int, bc: BoundaryCondition, beta: float, delta: float, obs, plan: SamplingPlan,
          init: str = "auto") -> ChainSpec:
    return ChainSpec(SpinTarget(box_region(n, d), bc, beta, delta), tuple(obs), plan.n_samples,
                     plan.burn_in, plan.thinning, plan.n_chains, plan.seed, init)


def magnetization_profile(beta: float, delta: float, ns, bc: str = "plus", d: int = 2,
                          plan: SamplingPlan = SamplingPlan(10_000), warn: bool = True) -> list[dict]:
    """⟨σ_0⟩ on Λ_n by the spin average and by the boundary-connection probability.

    Under the plus condition the second route is φ¹[0 ↔ ∂Λ_n]; under the
    free condition the origin is never joined to the boundary and both
    routes estimate 0.
    """
    if bc not in ("plus", "free"):
        raise ValueError("bc must be plus or free")
    cond = BoundaryCondition.wired() if bc == "plus" else BoundaryCondition.free()
    rows = []
    for i, n in enumerate(ns):
        o = _origin_name(d)
        pl = SamplingPlan(plan.n_samples, plan.burn_in, plan.thinning, plan.n_chains, plan.seed + i)
        series, burn = run_series(_spec(n, d, cond, beta, delta, ("sigma0", f"connb[{o}]"), pl))
        rows.append({"n": int(n), "bc": bc,
                     "spin": estimate(series["sigma0"], burn, pl.seed, warn),
                     "rc": estimate(series[f"connb[{o}]"], burn, pl.seed, warn)})
    return rows


def _axis_points(r: int, d: int) -> list[str]:
    pts = []
    for j in range(d):
        for s in (1, -1):
            c = [0] * d
            c[j] = s * r
            pts.append(":".join(str(v) for v in c))
    return pts


def truncated_two_point(beta: float, delta: float, n: int, xs, bc: str = "plus", d: int = 2,
                        plan: SamplingPlan = SamplingPlan(10_000), warn: bool = True) -> dict:
    """⟨σ_0σ_x⟩ and ⟨σ_0;σ_x⟩ for x along the axes at sup-distances xs, averaged over the 2d directions.

    ⟨σ_0σ_x⟩ is estimated twice: by the spin product and by the cluster
    connection of 0 and x (exact under plus and free conditions). The
    truncated function uses jackknife errors over the joint series.
    """
    xs = [int(x) for x in xs]
    if any(x < 0 or x > n // 2 for x in xs):
        raise ValueError("distances must lie in [0, n/2]")
    cond = BoundaryCondition.wired() if bc == "plus" else BoundaryCondition.parse(bc)
    o = _origin_name(d)
    names = ["sigma0"]
    for r in xs:
        for x in _axis_points(r, d):
            names += [f"sigma[{x}]", f"sigmaxy[{o};{x}]", f"conn[{o};{x}]"]
    names = list(dict.fromkeys(names))
    series, burn = run_series(_spec(n, d, cond, beta, delta, names, plan))
    n_chains = len(series["sigma0"])

    def avg(fmt, pts):
        return [np.mean([series[fmt.format(x)][c] for x in pts], axis=0) for c in range(n_chains)]

    s0 = np.concatenate(series["sigma0"])
    rows = []
    for r in xs:
        pts = _axis_points(r, d)
        sx, sxy = avg("sigma[{}]", pts), avg("sigmaxy[%s;{}]" % o, pts)
        corr = estimate(sxy, burn, plan.seed, warn)
        rc = estimate(avg("conn[%s;{}]" % o, pts), burn, plan.seed, warn)
        tr, tr_err = jackknife(lambda m: m[2] - m[0] * m[1], [s0, np.concatenate(sx), np.concatenate(sxy)])
        rows.append({"r": r, "corr": corr, "corr_rc": rc, "truncated": tr, "truncated_stderr": tr_err})
    return {"n": n, "beta": beta, "delta": delta, "bc": bc, "burn_in": burn, "rows": rows}


def _fit(x, y, s) -> dict:
    f = weighted_linear_fit(x, y, s)
    c1, se = float(f["coef"][1]), float(math.sqrt(f["cov"][1, 1]))
    return {"intercept": float(f["coef"][0]), "slope": c1, "stderr": se, "chi2": f["chi2"],
            "aic": f["chi2"] + 4.0, "n": f["n"]}


def decay_fits(rs, values, stderrs, z_pos: float = 3.0) -> dict | None:
    """Exponential and power-law fits of positive correlation values.

    Only points at least z_pos standard errors above 0 enter. Both models are
    straight lines (log y against r, or against log r) with two parameters,
    so the AIC difference is the χ² difference. Returns None with fewer than
    three usable points.
    """
    rs, v, s = (np.asarray(a, dtype=float) for a in (rs, values, stderrs))
    keep = (v > z_pos * s) & (s > 0) & (rs > 0)
    if keep.sum() < 3:
        return None
    r, y, sy = rs[keep], np.log(v[keep]), s[keep] / v[keep]
    exp_fit = _fit(r, y, sy)
    pow_fit = _fit(np.log(r), y, sy)
    rate, se = -exp_fit["slope"], exp_fit["stderr"]
    return {"points": r.tolist(), "rate": rate, "rate_stderr": se, "t": rate / se if se > 0 else math.inf,
            "exponential": exp_fit, "power": pow_fit,
            "preferred": "exponential" if exp_fit["aic"] < pow_fit["aic"] else "power"}


# ---------------------------------------------------------------------------
# weak plus boundary
# ---------------------------------------------------------------------------

def exact_w(beta: float, delta: float, eps: float, n: int = 1, d: int = 2) -> float:
    """W^ε = Z^{+,ε}[σ_0=-1] / Z^{+,ε}[σ_0=+1] on Λ_n by enumeration."""
    reg = box_region(n, d)
    ens = spin_ensemble(reg.graph, BoundaryCondition.eps_field(eps), beta, delta)
    pr = ens.probs()
    s0 = ens.states[:, origin_index(reg)]
    return float(pr[s0 == -1].sum() / pr[s0 == 1].sum())


def _conditional(s0_series):
    """μ[σ_0 | σ_0 ≠ 0] = ⟨σ_0⟩/⟨σ_0²⟩ with a jackknife error and the effective sample size."""
    s = np.concatenate(s0_series)
    val, err = jackknife(lambda m: m[0] / m[1] if m[1] > 0 else 0.0, [s, s * s])
    return val, err, int(np.count_nonzero(s))


def weak_plus_probe(beta: float, delta: float, eps_list, ns, d: int = 2,
                    plan: SamplingPlan = SamplingPlan(10_000), warn: bool = True) -> list[dict]:
    """μ^{+,ε}[σ_0 | σ_0≠0] against the plus reference μ⁺[σ_0 | σ_0≠0], per (ε, n).

    Also reports the Monte Carlo ratio P(σ_0=-1)/P(σ_0=+1) under the ε
    condition, and its exact value when n = 1.
    """
    rows = []
    for i, n in enumerate(ns):
        pl = SamplingPlan(plan.n_samples, plan.burn_in, plan.thinning, plan.n_chains, plan.seed + 7919 * i)
        ref_series, _ = run_series(_spec(n, d, BoundaryCondition.wired(), beta, delta, ("sigma0",), pl))
        ref, ref_err, _ = _conditional(ref_series["sigma0"])
        for j, eps in enumerate(eps_list):
            if eps < 0:
                raise ValueError("eps must be non-negative")
            plj = SamplingPlan(pl.n_samples, pl.burn_in, pl.thinning, pl.n_chains, pl.seed + j + 1)
            init = "plus" if eps > 0 else "random"
            ser, _ = run_series(_spec(n, d, BoundaryCondition.eps_field(eps), beta, delta, ("sigma0",),
                                       plj, init))
            val, err, n_eff = _conditional(ser["sigma0"])
            s = np.concatenate(ser["sigma0"])
            w, w_err = jackknife(lambda m: m[0] / m[1] if m[1] > 0 else math.inf,
                                 [(s == -1).astype(float), (s == 1).astype(float)])
            rows.append({"eps": float(eps), "n": int(n), "conditional": val, "conditional_stderr": err,
                         "reference": ref, "reference_stderr": ref_err, "gap": ref - val,
                         "stderr": math.hypot(err, ref_err), "n_eff": n_eff, "w_mc": w,
                         "w_mc_stderr": w_err,
                         "w_exact": exact_w(beta, delta, eps, n, d) if n == 1 else None})
    return rows


def check_conversion(beta: float, delta: float) -> tuple[float, float]:
    """(β, Δ) after a round trip through (p, a)."""
    p = ModelParams.spin(beta, delta)
    return rc_to_bc_params(p.p, p.a)
