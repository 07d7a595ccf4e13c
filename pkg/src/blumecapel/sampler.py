"""Markov chains for the Blume-Capel measure and the dilute RC measure.

The spin chain alternates a lexicographic heat-bath sweep with an
Edwards-Sokal move; the bonds drawn in the latter give a sample of the RC
measure at no extra cost. The RC chain is a single-coordinate heat-bath with
bidirectional-search connectivity queries, usable for generalized r.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._util import chain_rng, ordered_map
from .exact import _rc_args
from .lattice import Graph, Region
from .model import BoundaryCondition, ModelParams, is_compatible
from .stats import Estimate, binned_stderr, estimate

CHUNK = 4096
CHUNK_BYTES = 1 << 24


def chunk_size(graph: Graph) -> int:
    """Samples per recorded block, capped so a block stays near CHUNK_BYTES."""
    per = 2 * graph.n + graph.n_edge_vars + 8 * (graph.n + graph.n_boundary + 2)
    return int(max(1, min(CHUNK, CHUNK_BYTES // per)))


def _graph(instance) -> Graph:
    return instance.graph if isinstance(instance, Region) else instance


@dataclass(frozen=True)
class SpinTarget:
    """Blume-Capel measure on a region; Δ = +inf gives the Ising model."""

    instance: object
    bc: BoundaryCondition
    beta: float
    delta: float


@dataclass(frozen=True)
class RcTarget:
    """Dilute RC measure (generalized r allowed)."""

    instance: object
    bc: BoundaryCondition
    params: ModelParams


class ChainState:
    """Current configuration, kernel buffers, PRNG and sweep counter of one chain."""

    def __init__(self, target, rng: np.random.Generator, init: str = "auto"):
        self.target = target
        self.graph = _graph(target.instance)
        self.bc = target.bc
        self.rng = rng
        self.sweeps = 0
        g = self.graph
        if isinstance(target, SpinTarget):
            self.kind = "spin"
            self._setup_spin(init)
        elif isinstance(target, RcTarget):
            self.kind = "rc"
            self._setup_rc(init)
        else:
            raise TypeError("target must be a SpinTarget or an RcTarget")
        self.n = g.n

    # -- spin side -------------------------------------------------------------

    def _setup_spin(self, init: str):
        g, t = self.graph, self.target
        if not t.beta >= 0:
            raise ValueError("beta must be non-negative")
        self.ising = t.delta == math.inf
        self.beta = float(t.beta)
        self.delta = 0.0 if self.ising else float(t.delta)
        self.ptr, self.idx = g.csr
        J, eta = self.bc.boundary_couplings(g, t.beta)
        be = g.boundary_edges
        self.bfield = np.zeros(g.n)
        np.add.at(self.bfield, be[:, 0], J * eta)
        self.eu = np.ascontiguousarray(g.edges[:, 0])
        self.ev = np.ascontiguousarray(g.edges[:, 1])
        self.pe = np.full(g.n_edges, -math.expm1(-2.0 * t.beta))
        self.bx = np.ascontiguousarray(be[:, 0])
        self.beta_eta = eta.astype(np.int64)
        self.bp = -np.expm1(-2.0 * J)
        if init == "auto":
            init = "plus"
        if init == "plus":
            s = np.ones(g.n, dtype=np.int64)
        elif init == "minus":
            s = -np.ones(g.n, dtype=np.int64)
        elif init == "zero":
            if self.ising:
                raise ValueError("the Ising model has no zero spins")
            s = np.zeros(g.n, dtype=np.int64)
        elif init == "random":
            vals = np.array([-1, 1]) if self.ising else np.array([-1, 0, 1])
            s = self.rng.choice(vals, size=g.n).astype(np.int64)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.spins = s
        self.parent = np.arange(g.n + 2, dtype=np.int64)
        self.size = np.ones(g.n + 2, dtype=np.int64)
        self.om_int = np.zeros(g.n_edges, dtype=np.int64)
        self.om_bnd = np.zeros(len(be), dtype=np.int64)
        self.sign_buf = np.zeros(g.n + 2, dtype=np.int64)

    # -- RC side ---------------------------------------------------------------

    def _setup_rc(self, init: str):
        g, t = self.graph, self.target
        prm = t.params
        if prm.r <= 0.0 or prm.p >= 1.0:
            raise ValueError("p = 1 (r = 0) is degenerate for the single-coordinate dynamics")
        a = _rc_args(g, self.bc, prm)
        self.rc_args = a
        n, nb, ncls = g.n, g.n_boundary, a["ncls"]
        nn = n + nb + ncls
        self.nn = nn
        psi_all = np.zeros(nn, dtype=np.int64)
        psi_all[n:n + nb] = a["open_b"]
        psi_all[n + nb:] = 1
        lu, lv = [], []
        for b in range(nb):
            if a["open_b"][b] and a["cls_b"][b] >= 0:
                lu.append(n + b)
                lv.append(n + nb + int(a["cls_b"][b]))
        self.link_u = np.asarray(lu, dtype=np.int64)
        self.link_v = np.asarray(lv, dtype=np.int64)
        eu, ev = a["eu"], a["ev"]
        src = np.concatenate([eu, ev, self.link_u, self.link_v])
        dst = np.concatenate([ev, eu, self.link_v, self.link_u])
        eid = np.concatenate([np.arange(len(eu)), np.arange(len(eu)),
                              -np.ones(2 * len(lu), dtype=np.int64)])
        order = np.argsort(src, kind="stable")
        self.adj = dst[order].astype(np.int64)
        self.adj_e = eid[order].astype(np.int64)
        self.aptr = np.zeros(nn + 1, dtype=np.int64)
        np.add.at(self.aptr, src + 1, 1)
        self.aptr = np.cumsum(self.aptr)
        inc_src = np.concatenate([eu, ev[ev < n]])
        inc_e = np.concatenate([np.arange(len(eu)), np.nonzero(ev < n)[0]])
        o = np.argsort(inc_src, kind="stable")
        self.vinc = inc_e[o].astype(np.int64)
        self.vptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.vptr, inc_src + 1, 1)
        self.vptr = np.cumsum(self.vptr)
        omega = np.zeros(len(eu), dtype=np.int64)
        if init in ("auto", "empty"):
            pass
        elif init == "full":
            psi_all[:n] = 1
            ok = (psi_all[eu] == 1) & (psi_all[ev] == 1) & ~a["forced"]
            omega[ok] = 1
        else:
            raise ValueError(f"unknown init {init!r}")
        self.psi_all = psi_all
        self.omega = omega
        self.markA = np.zeros(nn, dtype=np.int64)
        self.markB = np.zeros(nn, dtype=np.int64)
        self.qA = np.zeros(nn, dtype=np.int64)
        self.qB = np.zeros(nn, dtype=np.int64)
        self.stamp = 0
        self.parent = np.arange(nn, dtype=np.int64)
        self.size = np.ones(nn, dtype=np.int64)

    # -- views -----------------------------------------------------------------

    @property
    def psi(self) -> np.ndarray:
        if self.kind == "spin":
            return (self.spins != 0).astype(np.uint8)
        return self.psi_all[:self.n].astype(np.uint8)

    @property
    def rc_omega(self) -> np.ndarray:
        """Edge variables: the current RC state, or the bonds of the last ES move."""
        if self.kind == "spin":
            return np.concatenate([self.om_int, self.om_bnd]).astype(np.uint8)
        return self.omega.astype(np.uint8)

    def check(self) -> None:
        """Debug invariants: compatibility, fixed boundary."""
        if self.kind == "rc":
            if not is_compatible(self.psi, self.rc_omega, self.graph, self.bc):
                raise AssertionError("incompatible RC configuration")
        elif self.ising and np.any(self.spins == 0):
            raise AssertionError("zero spin in the Ising chain")


def spin_state(instance, bc: BoundaryCondition, beta: float, delta: float, seed: int = 0,
               chain: int = 0, init: str = "auto") -> ChainState:
    return ChainState(SpinTarget(instance, bc, beta, delta), chain_rng(seed, chain), init)


def rc_state(instance, bc: BoundaryCondition, params: ModelParams, seed: int = 0, chain: int = 0,
             init: str = "auto") -> ChainState:
    return ChainState(RcTarget(instance, bc, params), chain_rng(seed, chain), init)


def es_sweep(state: ChainState) -> ChainState:
    """Bonds given spins, clusters by union-find, free clusters resigned uniformly."""
    s = state
    K.es_sweep(s.spins, s.eu, s.ev, s.pe, s.bx, s.beta_eta, s.bp, s.rng, s.parent, s.size,
               s.om_int, s.om_bnd, s.sign_buf)
    s.sweeps += 1
    return s


def site_heatbath_sweep(state: ChainState) -> ChainState:
    s = state
    K.heatbath_sweep(s.spins, s.ptr, s.idx, s.bfield, s.beta, s.delta, s.ising, s.rng)
    s.sweeps += 1
    return s


def hybrid_sweep(state: ChainState, n: int = 1) -> ChainState:
    s = state
    K.hybrid_run(s.spins, s.ptr, s.idx, s.bfield, s.beta, s.delta, s.ising, s.eu, s.ev, s.pe, s.bx,
                 s.beta_eta, s.bp, s.rng, s.parent, s.size, s.om_int, s.om_bnd, s.sign_buf, n)
    s.sweeps += n
    return s


def rc_glauber_sweep(state: ChainState, n: int = 1, update_vertices: bool = True) -> ChainState:
    s, a = state, state.rc_args
    s.stamp = K.rc_glauber(s.psi_all, s.omega, s.n, a["eu"], a["ev"], a["lo"], a["lr"], a["forced"],
                           a["la"], s.vptr, s.vinc, s.aptr, s.adj, s.adj_e, s.markA, s.markB, s.qA,
                           s.qB, s.stamp, s.rng, n, update_vertices)
    s.sweeps += n
    return s


def advance(state: ChainState, n: int) -> ChainState:
    if n <= 0:
        return state
    if state.kind == "spin":
        return hybrid_sweep(state, n)
    return rc_glauber_sweep(state, n)


# ---------------------------------------------------------------------------
# recording and observables
# ---------------------------------------------------------------------------

@dataclass
class Record:
    """A block of consecutive samples.

    spins is None for RC chains. roots holds cluster roots over all nodes;
    boundary_roots lists, per sample, the node indices that count as ∂Λ.
    """

    psi: np.ndarray
    omega: np.ndarray
    spins: np.ndarray | None = None
    roots: np.ndarray | None = None
    boundary_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.psi)


def record(state: ChainState, n_samples: int, thinning: int = 1, roots: bool = True) -> Record:
    """Advance the chain, keeping every thinning-th sample."""
    s = state
    skip = max(1, int(thinning)) - 1
    g = s.graph
    if s.kind == "spin":
        ne = g.n_edge_vars
        sp = np.zeros((n_samples, g.n), dtype=np.int8)
        om = np.zeros((n_samples, ne), dtype=np.uint8)
        rt = np.zeros((n_samples, g.n + 2) if roots else (1, 1), dtype=np.int32)
        K.hybrid_record(s.spins, s.ptr, s.idx, s.bfield, s.beta, s.delta, s.ising, s.eu, s.ev, s.pe,
                        s.bx, s.beta_eta, s.bp, s.rng, s.parent, s.size, s.om_int, s.om_bnd,
                        s.sign_buf, n_samples, skip, sp, om, rt, True, roots)
        s.sweeps += n_samples * (skip + 1)
        return Record((sp != 0).astype(np.uint8), om, sp, rt if roots else None,
                      np.array([g.n, g.n + 1], dtype=np.int64))
    a = s.rc_args
    ps = np.zeros((n_samples, g.n), dtype=np.uint8)
    om = np.zeros((n_samples, g.n_edge_vars), dtype=np.uint8)
    rt = np.zeros((n_samples, s.nn) if roots else (1, 1), dtype=np.int64)
    s.stamp = K.rc_glauber_record(s.psi_all, s.omega, s.n, a["eu"], a["ev"], a["lo"], a["lr"],
                                  a["forced"], a["la"], s.vptr, s.vinc, s.aptr, s.adj, s.adj_e,
                                  s.markA, s.markB, s.qA, s.qB, s.stamp, s.rng, n_samples, skip,
                                  True, s.link_u, s.link_v, s.parent, s.size, ps, om, rt, roots)
    s.sweeps += n_samples * (skip + 1)
    cls_nodes = np.arange(g.n + g.n_boundary, s.nn, dtype=np.int64)
    return Record(ps, om, None, rt if roots else None, cls_nodes)


_OBS = re.compile(r"^(sigma|sigmasq|sigmaxy|psi|omega|conn|connb)\[([^\]]*)\]$")
_GLOBAL = ("mag", "density", "sites", "edges", "sigma0", "sigma0sq")


def _parse_index(tok: str, instance) -> int:
    tok = tok.strip()
    if ":" in tok or (isinstance(instance, Region) and tok.startswith("(")):
        coords = [int(c) for c in tok.strip("()").replace(":", ",").split(",")]
        return instance.index(coords)
    return int(tok)


def origin_index(instance) -> int:
    if isinstance(instance, Region) and instance.contains(np.zeros(instance.dim, dtype=np.int64)):
        return instance.index(np.zeros(instance.dim, dtype=np.int64))
    return 0


class Observable:
    """A named per-sample functional of a Record.

    Names: mag, density, sites, edges, sigma0, sigma0sq, sigma[i], sigmasq[i],
    sigmaxy[i;j], psi[i], omega[e], conn[i;j], connb[i]. Indices are vertex
    numbers or coordinates written with ':' (e.g. sigma[1:0]).
    """

    def __init__(self, name: str, instance):
        self.name = name
        if name in _GLOBAL:
            self.kind, self.args = name, ()
            if name in ("sigma0", "sigma0sq"):
                self.kind = "sigma" if name == "sigma0" else "sigmasq"
                self.args = (origin_index(instance),)
            return
        m = _OBS.match(name)
        if not m:
            raise ValueError(f"unknown observable {name!r}")
        self.kind = m.group(1)
        self.args = tuple(_parse_index(t, instance) for t in m.group(2).split(";"))
        want = {"sigmaxy": 2, "conn": 2}.get(self.kind, 1)
        if len(self.args) != want:
            raise ValueError(f"{self.kind} takes {want} index(es)")

    @property
    def needs_spins(self) -> bool:
        return self.kind in ("mag", "sigma", "sigmasq", "sigmaxy")

    def __call__(self, rec: Record) -> np.ndarray:
        k, a = self.kind, self.args
        if self.needs_spins and rec.spins is None:
            raise ValueError(f"{self.name} needs a spin chain")
        s = rec.spins.astype(np.float64) if rec.spins is not None else None
        if k == "mag":
            return s.mean(axis=1)
        if k == "density":
            return rec.psi.mean(axis=1, dtype=np.float64)
        if k == "sites":
            return rec.psi.mean(axis=1, dtype=np.float64)
        if k == "edges":
            return rec.omega.mean(axis=1, dtype=np.float64)
        if k == "sigma":
            return s[:, a[0]]
        if k == "sigmasq":
            return s[:, a[0]] ** 2
        if k == "sigmaxy":
            return s[:, a[0]] * s[:, a[1]]
        if k == "psi":
            return rec.psi[:, a[0]].astype(np.float64)
        if k == "omega":
            return rec.omega[:, a[0]].astype(np.float64)
        if rec.roots is None:
            raise ValueError("connectivity observables need recorded roots")
        if k == "conn":
            x, y = a
            return ((rec.psi[:, x] == 1) & (rec.roots[:, x] == rec.roots[:, y])).astype(np.float64)
        x = a[0]
        hit = np.zeros(len(rec), dtype=bool)
        for b in rec.boundary_nodes:
            hit |= rec.roots[:, x] == rec.roots[:, b]
        return ((rec.psi[:, x] == 1) & hit).astype(np.float64)


# ---------------------------------------------------------------------------
# run_chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainSpec:
    target: object
    observables: tuple = ("mag",)
    n_sweeps: int = 10_000
    burn_in: int | None = None
    thinning: int = 1
    n_chains: int = 1
    seed: int = 0
    init: str = "auto"


def _needs_roots(obs: list[Observable]) -> bool:
    return any(o.kind in ("conn", "connb") for o in obs)


def _series_for_chain(spec: ChainSpec, chain: int, burn_in: int, obs: list[Observable],
                      stream: int = 0, n_sweeps: int | None = None) -> np.ndarray:
    st = ChainState(spec.target, chain_rng(spec.seed, chain, stream), spec.init)
    advance(st, burn_in)
    total = spec.n_sweeps if n_sweeps is None else n_sweeps
    out = np.zeros((len(obs), total))
    roots = _needs_roots(obs)
    done = 0
    chunk = chunk_size(st.graph)
    while done < total:
        m = min(chunk, total - done)
        rec = record(st, m, spec.thinning, roots)
        for i, o in enumerate(obs):
            out[i, done:done + m] = o(rec)
        done += m
    return out


def auto_burn_in(spec: ChainSpec, obs: list[Observable]) -> int:
    """Ten times the binning plateau of a pilot run (its own PRNG stream)."""
    n_pilot = int(min(max(1024, spec.n_sweeps // 4), 1 << 16))
    pilot = _series_for_chain(spec, 0, 0, obs, stream=1, n_sweeps=n_pilot)
    level = 0
    for row in pilot:
        _, lvl, _, _ = binned_stderr([row])
        level = max(level, lvl)
    return int(10 * (1 << level) * max(1, spec.thinning))


def run_series(spec: ChainSpec) -> tuple[dict, int]:
    """Per-observable list of per-chain time series, plus the burn-in used."""
    inst = spec.target.instance
    obs = [Observable(o, inst) for o in spec.observables]
    burn = auto_burn_in(spec, obs) if spec.burn_in is None else int(spec.burn_in)
    rows = ordered_map(lambda c: _series_for_chain(spec, c, burn, obs), range(spec.n_chains))
    return {o.name: [r[i] for r in rows] for i, o in enumerate(obs)}, burn


def run_chain(spec: ChainSpec, warn: bool = True) -> dict[str, Estimate]:
    """One binned Estimate per observable, pooled over independent chains."""
    series, burn = run_series(spec)
    return {k: estimate(v, burn, spec.seed, warn) for k, v in series.items()}


def collect_states(spec: ChainSpec, burn_in: int = 0) -> list[Record]:
    """Raw records for every chain (for state-frequency tests on small instances)."""
    def one(c):
        st = ChainState(spec.target, chain_rng(spec.seed, c), spec.init)
        advance(st, burn_in)
        return record(st, spec.n_sweeps, spec.thinning, roots=False)
    return ordered_map(one, range(spec.n_chains))
