"""Crossing and circuit events on Z^2 and their Monte Carlo estimation.

Configurations are read on an offset grid that covers a region and its outer
boundary. Primal searches walk open edges between vertices; dual searches
walk between faces, where a face is labelled by its lower-left corner and a
dual step is open when the primal edge it crosses is closed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._util import ordered_map
from .lattice import Rect, Region, box_region, rect_region
from .model import BoundaryCondition, ModelParams, RcConfig, SpinConfig
from .sampler import (ChainSpec, Observable, SpinTarget, advance, auto_burn_in, chunk_size,
                      record, spin_state)
from .stats import Estimate, binomial_interval, binomial_loglinear_fit, estimate

PRIMAL = "PrimalOpen"
DUAL = "DualOpen"
SPIN = "SpinSet"
MODES = (PRIMAL, DUAL, SPIN)

TAU = 0.02
T_MIN = 3.0
LABELS = ("SubCrit", "SupCrit", "ContCrit", "DiscontCrit", "Undecided")

# P_tog of the self-dual strip at the a=1 self-dual point, for every size
P_SELFDUAL = math.sqrt(2.0) / (1.0 + math.sqrt(2.0))


@dataclass(frozen=True)
class CrossingSpec:
    """Crossing of a rectangle by open edges, dual-open edges or spins in S.

    ``star`` switches SpinSet connectivity to sup-norm neighbours.
    """

    rect: Rect
    direction: str = "horizontal"
    mode: str = PRIMAL
    spins: frozenset | None = None
    star: bool = False

    def __post_init__(self):
        if self.direction not in ("horizontal", "vertical"):
            raise ValueError("direction must be horizontal or vertical")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == SPIN:
            if not self.spins or not set(self.spins) <= {-1, 0, 1}:
                raise ValueError("SpinSet needs a non-empty subset of {-1, 0, 1}")
            object.__setattr__(self, "spins", frozenset(int(s) for s in self.spins))
        elif self.spins is not None or self.star:
            raise ValueError("spins and star only apply to SpinSet")

    @property
    def label(self) -> str:
        r = self.rect
        head = "H" if self.direction == "horizontal" else "V"
        tag = {PRIMAL: "", DUAL: "*", SPIN: "^{" + ",".join(str(s) for s in sorted(self.spins)) + "}"}
        return f"{head}{tag[self.mode]}[{r.a},{r.b}]x[{r.c},{r.d}]"


def H(n: int, mode: str = PRIMAL, spins=None) -> CrossingSpec:
    """Horizontal crossing of Λ_n."""
    return CrossingSpec(Rect.box(n), "horizontal", mode, spins)


def V(n: int, mode: str = PRIMAL, spins=None) -> CrossingSpec:
    return CrossingSpec(Rect.box(n), "vertical", mode, spins)


class GridMap:
    """Index grids of a planar region including its outer boundary vertices.

    hidx[x, y] is the edge variable of {(x,y),(x+1,y)} and vidx[x, y] that of
    {(x,y),(x,y+1)}, in grid coordinates, with -1 for absent edges. The dual
    grids dh and dv give the primal edge crossed by the dual steps
    (x,y)->(x+1,y) and (x,y)->(x,y+1) between faces.
    """

    def __init__(self, region: Region):
        if region.dim != 2:
            raise ValueError("crossing events need a planar region")
        self.region = region
        g = region.graph
        allv = np.concatenate([region.vertices, region.boundary]) if len(region.boundary) else region.vertices
        self.ox, self.oy = int(allv[:, 0].min()), int(allv[:, 1].min())
        self.W = int(allv[:, 0].max()) - self.ox + 1
        self.H = int(allv[:, 1].max()) - self.oy + 1
        W, Hh = self.W, self.H
        self.vid = np.full((W, Hh), -1, dtype=np.int64)
        gx, gy = self._g(region.vertices)
        self.vid[gx, gy] = np.arange(region.n)
        self.inside = self.vid >= 0
        self.hidx = np.full((W, Hh), -1, dtype=np.int64)
        self.vidx = np.full((W, Hh), -1, dtype=np.int64)
        ends = [(region.vertices[g.edges[:, 0]], region.vertices[g.edges[:, 1]],
                 np.arange(g.n_edges))]
        if g.n_boundary:
            be = g.boundary_edges
            ends.append((region.vertices[be[:, 0]], region.boundary[be[:, 1]],
                         g.n_edges + np.arange(len(be))))
        for p, q, idx in ends:
            lo = np.minimum(p, q)
            horiz = p[:, 1] == q[:, 1]
            lx, ly = self._g(lo)
            self.hidx[lx[horiz], ly[horiz]] = idx[horiz]
            self.vidx[lx[~horiz], ly[~horiz]] = idx[~horiz]
        self.dh = np.full((W, Hh), -1, dtype=np.int64)
        self.dv = np.full((W, Hh), -1, dtype=np.int64)
        self.dh[:-1, :] = self.vidx[1:, :]
        self.dv[:, :-1] = self.hidx[:, 1:]
        self.mark = np.zeros((W, Hh), dtype=np.uint8)
        self.queue = np.zeros((W * Hh, 2), dtype=np.int64)
        self._masks: dict = {}

    def _g(self, coords) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        return c[:, 0] - self.ox, c[:, 1] - self.oy

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Lattice coordinates of every grid point, as two (W, H) arrays."""
        return np.meshgrid(np.arange(self.W) + self.ox, np.arange(self.H) + self.oy, indexing="ij")

    def covers(self, rect: Rect) -> bool:
        x0, y0 = rect.a - self.ox, rect.c - self.oy
        x1, y1 = rect.b - self.ox, rect.d - self.oy
        if x0 < 0 or y0 < 0 or x1 >= self.W or y1 >= self.H:
            return False
        return bool(self.inside[x0:x1 + 1, y0:y1 + 1].all())

    def cached(self, key, build):
        if key not in self._masks:
            self._masks[key] = build()
        return self._masks[key]


def _grid_of(where) -> GridMap:
    if isinstance(where, GridMap):
        return where
    if isinstance(where, Region):
        return GridMap(where)
    raise TypeError("pass the Region or a GridMap built from it")


def _window(gm: GridMap, spec: CrossingSpec):
    """Search window, source and target masks for a crossing spec."""
    r = spec.rect
    hor = spec.direction == "horizontal"

    def build():
        X, Y = gm.coords()
        if spec.mode == DUAL:
            # faces strictly inside the rectangle plus one column (row) of
            # faces beyond each short side, where dual paths start and end
            if hor:
                win = (r.a - 1, r.b, r.c, r.d - 1)
                src, tgt = X == r.a - 1, X == r.b
            else:
                win = (r.a, r.b - 1, r.c - 1, r.d)
                src, tgt = Y == r.c - 1, Y == r.d
        else:
            win = (r.a, r.b, r.c, r.d)
            src, tgt = (X == r.a, X == r.b) if hor else (Y == r.c, Y == r.d)
        x0, x1, y0, y1 = win[0] - gm.ox, win[1] - gm.ox, win[2] - gm.oy, win[3] - gm.oy
        return (x0, x1, y0, y1), np.ascontiguousarray(src), np.ascontiguousarray(tgt)

    return gm.cached(("win", spec.rect, spec.direction, spec.mode), build)


def _crossing(omega: np.ndarray | None, spins: np.ndarray | None, gm: GridMap,
              spec: CrossingSpec) -> bool:
    (x0, x1, y0, y1), src, tgt = _window(gm, spec)
    if x1 < x0 or y1 < y0:
        return False
    if spec.mode == PRIMAL:
        return bool(K.grid_reach(omega, gm.hidx, gm.vidx, x0, x1, y0, y1, src, tgt, gm.mark, gm.queue))
    if spec.mode == DUAL:
        dual = (1 - omega).astype(np.uint8)
        return bool(K.grid_reach(dual, gm.dh, gm.dv, x0, x1, y0, y1, src, tgt, gm.mark, gm.queue))
    grid = np.zeros((gm.W, gm.H), dtype=np.int64)
    grid[gm.inside] = spins[gm.vid[gm.inside]]
    ok = np.isin(grid, list(spec.spins)) & gm.inside
    return bool(K.site_reach(ok, x0, x1, y0, y1, src, tgt, spec.star, gm.mark, gm.queue))


def detect_crossing(config, spec: CrossingSpec, where) -> bool:
    """Whether config crosses spec.rect in the given direction.

    config is an RcConfig for the edge modes and a SpinConfig (or interior
    spin vector) for SpinSet. where is the Region of config or its GridMap.
    """
    gm = _grid_of(where)
    if not gm.covers(spec.rect):
        raise ValueError(f"rectangle {spec.rect} exceeds the configured region")
    if spec.mode == SPIN:
        if isinstance(config, RcConfig):
            raise TypeError("SpinSet crossings need a spin configuration")
        s = config.interior if isinstance(config, SpinConfig) else np.asarray(config)
        return _crossing(None, np.asarray(s, dtype=np.int64), gm, spec)
    if isinstance(config, SpinConfig):
        raise TypeError("edge crossings need an RcConfig")
    om = config.omega if isinstance(config, RcConfig) else np.asarray(config, dtype=np.uint8)
    return _crossing(np.ascontiguousarray(om, dtype=np.uint8), None, gm, spec)


def _annulus_grids(gm: GridMap, n: int):
    """Dual index grids where only open edges inside Λ_2n minus Λ_n block."""
    def build():
        X, Y = gm.coords()
        norm = np.maximum(np.abs(X), np.abs(Y))
        inA = (norm > n) & (norm <= 2 * n)
        hA = np.zeros_like(inA)
        vA = np.zeros_like(inA)
        hA[:-1, :] = inA[:-1, :] & inA[1:, :]
        vA[:, :-1] = inA[:, :-1] & inA[:, 1:]
        h = np.where(hA & (gm.hidx >= 0), gm.hidx, -2)
        v = np.where(vA & (gm.vidx >= 0), gm.vidx, -2)
        dh = np.full_like(h, -1)
        dv = np.full_like(v, -1)
        dh[:-1, :] = v[1:, :]
        dv[:, :-1] = h[:, 1:]
        inner = (np.maximum(X, Y) <= n - 1) & (np.minimum(X, Y) >= -n)
        outer = (np.maximum(X, Y) == 2 * n) | (np.minimum(X, Y) == -2 * n - 1)
        return dh, dv, np.ascontiguousarray(inner), np.ascontiguousarray(outer)
    return gm.cached(("annulus", n), build)


def detect_circuit(config, n: int, mode: str, where) -> bool:
    """Open (PrimalOpen) or dual-open (DualOpen) circuit in Λ_2n minus Λ_n around Λ_n."""
    gm = _grid_of(where)
    if n < 1:
        raise ValueError("n must be positive")
    if not gm.covers(Rect.box(2 * n)):
        raise ValueError(f"n = {n} is too large for the region")
    om = config.omega if isinstance(config, RcConfig) else np.asarray(config, dtype=np.uint8)
    om = np.ascontiguousarray(om, dtype=np.uint8)
    lo, hi = -2 * n - gm.ox, 2 * n - gm.ox
    loy, hiy = -2 * n - gm.oy, 2 * n - gm.oy
    if mode == PRIMAL:
        dh, dv, inner, outer = _annulus_grids(gm, n)
        # an open circuit exists iff no dual path escapes from the inner faces
        dual = (1 - om).astype(np.uint8)
        return not K.grid_reach(dual, dh, dv, lo - 1, hi, loy - 1, hiy, inner, outer, gm.mark, gm.queue)
    if mode == DUAL:
        def build():
            X, Y = gm.coords()
            norm = np.maximum(np.abs(X), np.abs(Y))
            return np.ascontiguousarray(norm <= n), np.ascontiguousarray(norm == 2 * n)
        src, tgt = gm.cached(("primal-annulus", n), build)
        return not K.grid_reach(om, gm.hidx, gm.vidx, lo, hi, loy, hiy, src, tgt, gm.mark, gm.queue)
    raise ValueError("circuit mode must be PrimalOpen or DualOpen")


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    n_samples: int = 2000
    burn_in: int | None = None
    thinning: int = 1
    n_chains: int = 1
    seed: int = 0


def event_fn(event, gm: GridMap):
    """Per-sample predicate f(omega, spins) reading configurations through gm.

    event is a CrossingSpec, ('circuit', n, mode), ('not', event) or a
    factory gm -> predicate (each chain builds its own search buffers).
    """
    if isinstance(event, CrossingSpec):
        if not gm.covers(event.rect):
            raise ValueError(f"rectangle {event.rect} exceeds the configured region")
        return lambda om, sp: _crossing(om, sp, gm, event)
    if callable(event):
        return event(gm)
    if event[0] == "not":
        f = event_fn(event[1], gm)
        return lambda om, sp: not f(om, sp)
    if event[0] == "circuit":
        _, n, mode = event
        return lambda om, sp: detect_circuit(om, n, mode, gm)
    raise ValueError(f"unknown event {event!r}")


def sample_events(region: Region, bc: BoundaryCondition, params: ModelParams, events: dict,
                  plan: SamplingPlan = SamplingPlan(), warn: bool = True) -> dict[str, Estimate]:
    """Estimate several events of the dilute RC measure from one set of chains.

    events maps names to anything event_fn accepts. The RC configuration of each sample is the bond
    configuration of the Edwards-Sokal step of the spin chain.
    """
    beta, delta = params.spin_params()
    target = SpinTarget(region, bc, beta, delta)
    names = list(events)
    if plan.burn_in is None:
        obs = [Observable("edges", region), Observable("density", region)]
        burn = auto_burn_in(ChainSpec(target, ("edges", "density"), plan.n_samples, None,
                                      plan.thinning, 1, plan.seed), obs)
    else:
        burn = int(plan.burn_in)

    def one(c):
        gm = GridMap(region)
        fns = [event_fn(events[k], gm) for k in names]
        st = spin_state(region, bc, beta, delta, plan.seed, c)
        advance(st, burn)
        out = np.zeros((len(names), plan.n_samples))
        chunk = chunk_size(st.graph)
        done = 0
        while done < plan.n_samples:
            m = min(chunk, plan.n_samples - done)
            rec = record(st, m, plan.thinning, roots=False)
            for t in range(m):
                om = rec.omega[t]
                sp = rec.spins[t].astype(np.int64)
                for i, f in enumerate(fns):
                    out[i, done + t] = f(om, sp)
            done += m
        return out

    rows = ordered_map(one, range(plan.n_chains))
    return {k: estimate([r[i] for r in rows], burn, plan.seed, warn) for i, k in enumerate(names)}


def estimate_event(params: ModelParams, bc: BoundaryCondition, event, scale: int,
                   plan: SamplingPlan = SamplingPlan(), warn: bool = True) -> Estimate:
    """Probability of event under the dilute RC measure on Λ_{2·scale}.

    event is a CrossingSpec, a circuit tuple ('circuit', n, mode), or one of
    the names H, V, H*, V*, C, C* for the events at the given scale.
    """
    if isinstance(event, str):
        named = {"H": H(scale), "V": V(scale), "H*": H(scale, DUAL), "V*": V(scale, DUAL),
                 "C": ("circuit", scale, PRIMAL), "C*": ("circuit", scale, DUAL)}
        if event not in named:
            raise ValueError(f"unknown event name {event!r}")
        event = named[event]
    region = box_region(2 * scale, 2)
    return sample_events(region, bc, params, {"e": event}, plan, warn)["e"]


def effective_counts(est: Estimate) -> tuple[float, float]:
    """(successes, trials) of a binary estimate, deflated by its inefficiency."""
    n_eff = est.n_samples / max(1.0, est.inefficiency)
    return est.mean * n_eff, n_eff


@dataclass(frozen=True)
class ProxyEstimate:
    """Finite-α strip density proxy; bounds are one-sided when the crossing estimate is 0 or 1."""

    which: str
    n: int
    alpha: int
    value: float
    stderr: float
    lower: float
    upper: float
    crossing: Estimate
    label: str = "proxy"

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("which", "n", "alpha", "value", "stderr", "lower", "upper", "label")}
        d["crossing"] = self.crossing.to_dict()
        return d


def strip_density_proxy(params: ModelParams, n: int, alpha: int, which: str,
                        plan: SamplingPlan = SamplingPlan(), warn: bool = True,
                        max_sites: int = 1 << 20) -> ProxyEstimate:
    """(φ⁰[H])^{1/α} or (φ¹[not V])^{1/α} for the rectangle [0,αn]x[0,n] inside [0,αn]x[-n,2n]."""
    if alpha not in (2, 4, 8):
        raise ValueError("alpha must be 2, 4 or 8")
    if which not in ("p_n", "q_n"):
        raise ValueError("which must be p_n or q_n")
    if n < 1 or (alpha * n + 1) * (3 * n + 1) > max_sites:
        raise ValueError("n * alpha outside the memory budget")
    region = rect_region(0, alpha * n, -n, 2 * n)
    rect = Rect(0, alpha * n, 0, n)
    if which == "p_n":
        bc, ev = BoundaryCondition.free(), CrossingSpec(rect, "horizontal")
    else:
        bc, ev = BoundaryCondition.wired(), ("not", CrossingSpec(rect, "vertical"))
    est = sample_events(region, bc, params, {"e": ev}, plan, warn)["e"]
    P = est.mean
    k, N = effective_counts(est)
    lo, hi = binomial_interval(int(round(k)), max(1, int(round(N))))
    if 0.0 < P < 1.0:
        val = P ** (1.0 / alpha)
        se = est.stderr * P ** (1.0 / alpha - 1.0) / alpha
        lower, upper = max(0.0, val - 2 * se), min(1.0, val + 2 * se)
    else:
        val, se = float(P), math.nan
        lower, upper = lo ** (1.0 / alpha), hi ** (1.0 / alpha)
        if P == 0.0:
            lower = 0.0
        else:
            upper = 1.0
    return ProxyEstimate(which, n, alpha, float(val), float(se), float(lower), float(upper), est)


# ---------------------------------------------------------------------------
# self-dual strip statistic
# ---------------------------------------------------------------------------

def selfdual_setup(n: int) -> tuple[Region, BoundaryCondition, callable]:
    """The interior [1,2n]x[0,2n] with plus spins on the columns x=0 and x=2n+1.

    The other boundary vertices carry spin 0. The returned event factory
    detects the connection of the two plus columns through the interior.
    """
    k = 2 * n
    region = rect_region(1, k, 0, k)
    bx = region.boundary[:, 0]
    bc = BoundaryCondition.explicit_spins(np.where((bx == 0) | (bx == k + 1), 1, 0))

    def joined(gm: GridMap):
        X, Y = gm.coords()
        src = np.ascontiguousarray((X == 0) & (Y >= 0) & (Y <= k))
        tgt = np.ascontiguousarray((X == k + 1) & (Y >= 0) & (Y <= k))
        x0, x1, y0, y1 = -gm.ox, k + 1 - gm.ox, -gm.oy, k - gm.oy
        return lambda om, sp: bool(K.grid_reach(om, gm.hidx, gm.vidx, x0, x1, y0, y1, src, tgt,
                                                gm.mark, gm.queue))
    return region, bc, joined


def balanced_statistic(p_tog: float) -> float:
    """Average of the joined probability with both plus columns in one class
    and its counterpart with the two columns in separate classes."""
    return 0.5 * (p_tog + p_tog / (2.0 - p_tog))


def selfdual_crossing(params: ModelParams, n: int, plan: SamplingPlan = SamplingPlan(),
                      warn: bool = True) -> dict:
    """Joined probability of the self-dual strip and its balanced statistic.

    At a=1 and p=√2/(1+√2) the joined probability is exactly P_SELFDUAL and
    the balanced statistic exactly 1/2, at every n.
    """
    region, bc, joined = selfdual_setup(n)
    est = sample_events(region, bc, params, {"tog": joined}, plan, warn)["tog"]
    P = est.mean
    slope = 0.5 * (1.0 + 2.0 / (2.0 - P) ** 2)
    bal = Estimate(balanced_statistic(P), slope * est.stderr, est.n_samples, est.n_chains,
                   est.burn_in, est.seed, est.bin_level, est.inefficiency, est.converged)
    return {"tog": est, "balanced": bal}


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------

@dataclass
class QuadrichotomyVerdict:
    label: str
    scales: list
    wired: list
    free: list
    fits: dict = field(default_factory=dict)
    fired: list = field(default_factory=list)
    tau: float = TAU
    t_min: float = T_MIN

    def to_dict(self) -> dict:
        return {"label": self.label, "scales": list(self.scales),
                "wired": [e.to_dict() for e in self.wired], "free": [e.to_dict() for e in self.free],
                "fits": self.fits, "fired": list(self.fired), "tau": self.tau, "t_min": self.t_min}


def decay_fit(scales, ests: list[Estimate], complement: bool = False, tau: float = TAU,
              t_min: float = T_MIN) -> dict:
    """Decay diagnostics for P(n) (or 1-P(n)) across scales.

    ``t_trend`` is the signed root of the likelihood ratio of a binomial
    log-linear fit against a constant (positive for decay) and ``rate`` the
    fitted -slope; both are None when every count is 0 or every count is
    full. ``t_tau`` is the one-sided score statistic for the value at the
    largest scale lying below tau. ``rate_lower`` is the one-sided bound on c
    in P(n) <= exp(-c n) from the Wilson upper bound at the largest scale.
    """
    ks, Ns = [], []
    for e in ests:
        k, N = effective_counts(e)
        ks.append(N - k if complement else k)
        Ns.append(N)
    ks, Ns = np.asarray(ks), np.asarray(Ns)
    out = {"rate": None, "stderr": None, "ci": None, "t_trend": None}
    if np.any(ks > 0.5) and np.any(Ns - ks > 0.5):
        f = binomial_loglinear_fit(scales, ks, Ns)
        rate = -f["slope"]
        out.update(rate=rate, stderr=f["stderr"], t_trend=f["z"],
                   ci=[rate - 2 * f["stderr"], rate + 2 * f["stderr"]])
    last, N = ks[-1] / Ns[-1], Ns[-1]
    ub = binomial_interval(int(round(ks[-1])), max(1, int(round(N))), t_min)[1]
    out["last"] = float(last)
    out["t_tau"] = float((tau - last) * math.sqrt(N / (tau * (1.0 - tau))))
    out["rate_lower"] = float(-math.log(ub) / scales[-1]) if ub > 0 else math.inf
    return out


def decide(fits: dict, wired: list[Estimate], free: list[Estimate], tau: float = TAU,
           t_min: float = T_MIN) -> tuple[str, list]:
    """Apply the decision rules; several firing rules give Undecided.

    A quantity decays when it is below tau at the largest scale at level
    t_min and its log-linear trend is not significantly increasing.
    """
    def decays(name):
        f = fits[name]
        rising = f["t_trend"] is not None and f["t_trend"] <= -t_min
        return f["t_tau"] >= t_min and not rising

    rules = {
        "SubCrit": decays("wired_crossing"),
        "SupCrit": decays("free_noncrossing"),
        "DiscontCrit": decays("free_crossing") and decays("wired_noncrossing"),
        "ContCrit": all(tau <= e.mean <= 1.0 - tau for e in wired + free),
    }
    fired = [k for k, v in rules.items() if v]
    return (fired[0] if len(fired) == 1 else "Undecided"), fired


def classify_quadrichotomy(params: ModelParams, scales, plan: SamplingPlan = SamplingPlan(),
                           tau: float = TAU, t_min: float = T_MIN, warn: bool = True) -> QuadrichotomyVerdict:
    """Wired and free crossing probabilities of Λ_n in Λ_2n across scales, and the regime they point to."""
    scales = sorted(int(s) for s in scales)
    if len(scales) < 4 or scales[-1] < 32:
        raise ValueError("need at least four scales, the largest at least 32")
    wired, free = [], []
    for i, n in enumerate(scales):
        region = box_region(2 * n, 2)
        for bc, out in ((BoundaryCondition.wired(), wired), (BoundaryCondition.free(), free)):
            pl = SamplingPlan(plan.n_samples, plan.burn_in, plan.thinning, plan.n_chains,
                              plan.seed + 2 * i + (out is free))
            out.append(sample_events(region, bc, params, {"H": H(n)}, pl, warn)["H"])
    fits = {"wired_crossing": decay_fit(scales, wired, False, tau, t_min),
            "free_noncrossing": decay_fit(scales, free, True, tau, t_min),
            "free_crossing": decay_fit(scales, free, False, tau, t_min),
            "wired_noncrossing": decay_fit(scales, wired, True, tau, t_min)}
    label, fired = decide(fits, wired, free, tau, t_min)
    return QuadrichotomyVerdict(label, scales, wired, free, fits, fired, tau, t_min)
