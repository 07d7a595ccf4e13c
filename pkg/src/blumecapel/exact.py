"""Exhaustive enumeration: partition functions, expectations and identity checks.

Spin ensembles enumerate {-1,0,1}^V directly. RC ensembles run ψ in the
outer loop and ω only over the edges whose endpoints are both open, which
keeps 2^|E| down to 2^|E_ψ|. The ψ range is cut into fixed blocks; partial
results are merged in block order, so worker count never changes the output.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from ._util import ordered_map
from .lattice import Graph, Region, lift_graph, rect_region
from .model import (LOG2, BoundaryCondition, ComplexField, Convention, ModelParams,
                    bc_to_rc_params)

MAX_VERTICES = 14
MAX_EDGE_VARS = 26
MAX_DUMP = 1 << 22
N_BLOCKS = 64
PROB_TOL = 1e-12
Z_RTOL = 1e-10


class InstanceTooLarge(ValueError):
    """Raised when an instance exceeds the enumerable ceiling."""

    def __init__(self, msg: str, estimated_states: float):
        super().__init__(f"{msg} (estimated states: {estimated_states:.3g})")
        self.estimated_states = estimated_states


class ZeroPartitionFunction(ZeroDivisionError):
    """The (complex) partition function vanished; the expectation is undefined."""


@dataclass
class ExactReport:
    check: str
    instance: str
    max_abs_err: float
    max_rel_err: float
    violations: int
    witness: object = None
    tol: float = PROB_TOL
    convention: str | None = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self) -> dict:
        return {"check": self.check, "instance": self.instance, "convention": self.convention,
                "max_abs_err": float(self.max_abs_err), "max_rel_err": float(self.max_rel_err),
                "violations": int(self.violations)}


def _report(check, instance, abs_errs, rel_errs=None, tol=PROB_TOL, witnesses=None,
            convention=None, rel_tol=None, **detail) -> ExactReport:
    """Fold error arrays into a report; a violation is an entry above its tolerance."""
    a = np.atleast_1d(np.asarray(abs_errs, dtype=float))
    r = np.atleast_1d(np.asarray(rel_errs if rel_errs is not None else np.zeros(0), dtype=float))
    bad_a = ~(a <= tol)
    bad_r = ~(r <= rel_tol) if rel_tol is not None else np.zeros(len(r), dtype=bool)
    viol = int(bad_a.sum() + bad_r.sum())
    wit = None
    if viol and witnesses is not None:
        i = int(np.argmax(np.where(np.isnan(a), np.inf, a))) if bad_a.any() else \
            int(np.argmax(np.where(np.isnan(r), np.inf, r)))
        wit = witnesses[i] if i < len(witnesses) else None
        if isinstance(wit, np.ndarray):
            wit = wit.tolist()
    conv = Convention(convention).value if convention is not None else None
    return ExactReport(check, instance, float(np.nanmax(a)) if len(a) else 0.0,
                       float(np.nanmax(r)) if len(r) else 0.0, viol, wit, tol, conv, detail)


def _as_graph(instance) -> Graph:
    if isinstance(instance, Region):
        return instance.graph
    if isinstance(instance, Graph):
        return instance
    raise TypeError("instance must be a Region or a Graph")


def _name(instance) -> str:
    if isinstance(instance, Region):
        if instance.shape is not None:
            return repr(instance)
        return "region" + str([tuple(int(c) for c in v) for v in instance.vertices])
    return f"graph(n={instance.n}, edges={instance.edges.tolist()}, nb={instance.n_boundary})"


def _logsumexp(x: np.ndarray):
    if len(x) == 0:
        return -math.inf
    if np.iscomplexobj(x):
        m = float(np.max(x.real))
        return m + np.log(np.sum(np.exp(x - m)))
    m = float(np.max(x))
    if m == -math.inf:
        return -math.inf
    return m + math.log(float(np.sum(np.exp(x - m))))


def _normalise(logw: np.ndarray) -> np.ndarray:
    m = np.max(logw)
    w = np.exp(logw - m)
    return w / w.sum()


# ---------------------------------------------------------------------------
# spin ensembles
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=16)
def spin_states(n: int) -> np.ndarray:
    """All of {-1,0,1}^n, lexicographic, shape (3^n, n)."""
    if n > MAX_VERTICES:
        raise InstanceTooLarge("too many spins", 3.0 ** n)
    s = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8).reshape(-1, n)
    s.setflags(write=False)
    return s


@dataclass
class SpinEnsemble:
    """Every spin configuration of a graph together with its log-weight."""

    graph: Graph
    states: np.ndarray
    logw: np.ndarray

    def probs(self) -> np.ndarray:
        if np.iscomplexobj(self.logw):
            raise ValueError("complex weights have no probability interpretation")
        return _normalise(self.logw)

    def log_partition(self):
        return _logsumexp(self.logw)


def spin_log_weights(graph: Graph, states: np.ndarray, bc: BoundaryCondition, beta: float,
                     delta: float, field=None) -> np.ndarray:
    s = states.astype(np.float64)
    e = graph.edges
    lw = beta * np.sum(s[:, e[:, 0]] * s[:, e[:, 1]], axis=1) if len(e) else np.zeros(len(s))
    if delta == math.inf:
        lw = np.where(np.any(states == 0, axis=1), -np.inf, lw)
    else:
        lw = lw + delta * np.sum(s * s, axis=1)
    if graph.n_boundary:
        J, eta = bc.boundary_couplings(graph, beta)
        be = graph.boundary_edges
        lw = lw + s[:, be[:, 0]] @ (J * eta)
    if field is not None:
        h = field.h if isinstance(field, ComplexField) else np.asarray(field, dtype=complex)
        lw = lw + s @ h
    return lw


def spin_ensemble(graph: Graph, bc: BoundaryCondition, beta: float, delta: float,
                  field=None) -> SpinEnsemble:
    st = spin_states(graph.n)
    return SpinEnsemble(graph, st, spin_log_weights(graph, st, bc, beta, delta, field))


# ---------------------------------------------------------------------------
# RC ensembles
# ---------------------------------------------------------------------------

def _rc_args(graph: Graph, bc: BoundaryCondition, params: ModelParams) -> dict:
    p, a, r = params.p, params.a, params.r
    if not 0.0 < p < 1.0:
        raise ValueError("exact RC enumeration needs p in (0, 1)")
    if not 0.0 < a <= 1.0:
        raise ValueError("exact RC enumeration needs a in (0, 1]")
    if not r > 0.0:
        raise ValueError("exact RC enumeration needs r > 0")
    rb = bc.rc_boundary(graph)
    ne = graph.n_edge_vars
    lo = np.full(ne, math.log(p) - math.log1p(-p))
    lr = np.full(ne, math.log(r))
    if rb.log_odds is not None:
        m = ~np.isnan(rb.log_odds)
        lo[m] = rb.log_odds[m]
        lr[m] = rb.log_r[m]
    ep = graph.endpoints()
    cls = rb.classes.astype(np.int64)
    ncls = int(cls.max()) + 1 if len(cls) and cls.max() >= 0 else 0
    a_one = a == 1.0
    la = 0.0 if a_one else math.log(a) - math.log1p(-a)
    return dict(n=graph.n, nb=graph.n_boundary, open_b=rb.open.astype(np.int64), cls_b=cls,
                ncls=ncls, eu=np.ascontiguousarray(ep[:, 0]), ev=np.ascontiguousarray(ep[:, 1]),
                forced=rb.forced_closed.astype(np.bool_), lo=lo, lr=lr, la=la, a_one=a_one)


def _blocks(n: int) -> list[tuple[int, int]]:
    total = 1 << n
    nb = min(N_BLOCKS, total)
    cuts = [total * i // nb for i in range(nb + 1)]
    return [(cuts[i], cuts[i + 1]) for i in range(nb)]


def _check_size(graph: Graph, args: dict) -> np.ndarray:
    if graph.n > MAX_VERTICES:
        raise InstanceTooLarge("too many vertices", 2.0 ** graph.n * 2.0 ** graph.n_edge_vars)
    counts = K.rc_count(0, 1 << graph.n, args["n"], args["open_b"], args["eu"], args["ev"],
                        args["forced"], args["a_one"])
    mmax = int(np.log2(counts.max())) if counts.max() > 0 else 0
    if mmax > MAX_EDGE_VARS:
        raise InstanceTooLarge("too many edge variables after pruning", float(counts.sum()))
    return counts


def _shift_bound(args: dict) -> float:
    """Upper bound on any log-weight, used as a fixed shift for streaming sums."""
    lo, lr = args["lo"], args["lr"]
    s = args["n"] * max(args["la"], 0.0)
    s += float(np.sum(np.maximum(lr, lr + lo)))
    return s + (args["n"] + args["nb"]) * LOG2


@dataclass
class RcEnsemble:
    """Every compatible (ψ, ω) with log-weight, cluster count and component labels.

    Labels cover interior nodes 0..n-1 then boundary nodes n..n+nb-1; two
    open nodes share a label iff they lie in the same cluster (wiring merged).
    """

    graph: Graph
    bc: BoundaryCondition
    params: ModelParams
    psi: np.ndarray
    omega: np.ndarray
    logw: np.ndarray
    k: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.psi)

    def probs(self) -> np.ndarray:
        return _normalise(self.logw)

    def log_partition(self) -> float:
        return _logsumexp(self.logw)

    def psi_bits(self) -> np.ndarray:
        n = self.graph.n
        return ((self.psi[:, None] >> np.arange(n)) & 1).astype(np.uint8)

    def omega_bits(self) -> np.ndarray:
        ne = self.graph.n_edge_vars
        return ((self.omega[:, None] >> np.arange(ne)) & 1).astype(np.uint8)

    def coords(self, internal_only: bool = False) -> np.ndarray:
        """Configuration as a 0/1 matrix over vertices then edges."""
        om = self.omega_bits()
        if internal_only:
            om = om[:, :self.graph.n_edges]
        return np.concatenate([self.psi_bits(), om], axis=1)

    def keys(self) -> np.ndarray:
        return self.psi | (self.omega << self.graph.n)

    def connected(self, i: int, j: int) -> np.ndarray:
        li, lj = self.labels[:, i], self.labels[:, j]
        return (li >= 0) & (li == lj)

    def connected_to_boundary(self, i: int) -> np.ndarray:
        return self.boundary_connections()[:, i]

    @functools.cached_property
    def _bconn(self) -> np.ndarray:
        n = self.graph.n
        li = self.labels[:, :n]
        bl = self.labels[:, n:]
        hit = np.zeros(li.shape, dtype=bool)
        for b in range(bl.shape[1]):
            hit |= (li >= 0) & (li == bl[:, b:b + 1])
        return hit

    def boundary_connections(self) -> np.ndarray:
        """(states, n) mask of x <-> ∂Λ."""
        return self._bconn


def rc_ensemble(graph: Graph, bc: BoundaryCondition, params: ModelParams) -> RcEnsemble:
    args = _rc_args(graph, bc, params)
    counts = _check_size(graph, args)
    total = int(counts.sum())
    if total > MAX_DUMP:
        raise InstanceTooLarge("too many states to hold in memory; use a streaming check", total)

    def run(blk):
        lo_, hi_ = blk
        t = int(counts[lo_:hi_].sum())
        if t == 0:
            return None
        return K.rc_dump(lo_, hi_, t, args["n"], args["nb"], args["open_b"], args["cls_b"],
                         args["ncls"], args["eu"], args["ev"], args["forced"], args["lo"],
                         args["lr"], args["la"], args["a_one"])

    parts = [x for x in ordered_map(run, _blocks(graph.n)) if x is not None]
    psi, om, lw, k, lab = (np.concatenate([p[i] for p in parts]) for i in range(5))
    return RcEnsemble(graph, bc, params, psi, om, lw, k, lab)


def rc_connection_moments(graph: Graph, bc: BoundaryCondition, params: ModelParams,
                          events: list[tuple[list[int], list[int]]]) -> dict:
    """Streaming exact moments for connection events S_j <-> T_j.

    Nodes are interior 0..n-1 and boundary n..n+nb-1. Returns probabilities
    of the events, means of the coordinates (vertices then edges) and the
    joint means E[1_j η_d].
    """
    args = _rc_args(graph, bc, params)
    _check_size(graph, args)
    nn = graph.n + graph.n_boundary
    if nn > 62:
        raise InstanceTooLarge("too many nodes for bitmask events", 2.0 ** nn)
    src = np.array([sum(1 << int(s) for s in S) for S, _ in events], dtype=np.int64)
    tgt = np.array([sum(1 << int(t) for t in T) for _, T in events], dtype=np.int64)
    shift = _shift_bound(args)

    def run(blk):
        return K.rc_moments(blk[0], blk[1], args["n"], args["nb"], args["open_b"], args["cls_b"],
                            args["ncls"], args["eu"], args["ev"], args["forced"], args["lo"],
                            args["lr"], args["la"], args["a_one"], shift, src, tgt)

    Z = 0.0
    ev = np.zeros(len(events))
    eta = np.zeros(graph.n + graph.n_edge_vars)
    joint = np.zeros((len(events), len(eta)))
    for z, a, b, c in ordered_map(run, _blocks(graph.n)):
        Z += z
        ev += a
        eta += b
        joint += c
    if Z <= 0:
        raise ZeroPartitionFunction("partition function underflowed")
    return {"log_Z": math.log(Z) + shift, "event": ev / Z, "eta": eta / Z, "joint": joint / Z}


def rc_marginal(graph: Graph, bc: BoundaryCondition, params: ModelParams) -> np.ndarray:
    """Law of (ψ, ω restricted to internal edges), indexed by ψ | ω_int << n."""
    args = _rc_args(graph, bc, params)
    _check_size(graph, args)
    keep = graph.n_edges
    if graph.n + keep > 26:
        raise InstanceTooLarge("marginal table too large", 2.0 ** (graph.n + keep))
    shift = _shift_bound(args)

    def run(blk):
        return K.rc_marginal(blk[0], blk[1], args["n"], args["nb"], args["open_b"],
                             args["cls_b"], args["ncls"], args["eu"], args["ev"], args["forced"],
                             args["lo"], args["lr"], args["la"], args["a_one"], shift, keep)

    out = np.zeros(1 << (graph.n + keep))
    for part in ordered_map(run, _blocks(graph.n)):
        out += part
    return out / out.sum()


# ---------------------------------------------------------------------------
# lifted Ising ensembles
# ---------------------------------------------------------------------------

def ising_couplings(graph: Graph, beta: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Couplings of ℓ(G): β/4 on E1 and lifted boundary edges, (Δ + log 2)/2 on E2.

    Returns (J, Jb) with J a dense (2n, 2n) symmetric matrix and Jb the
    coupling per lifted boundary edge.
    """
    lg = lift_graph(graph)
    J = np.zeros((lg.n, lg.n))
    for u, v in lg.e1:
        J[u, v] = J[v, u] = beta / 4.0
    for u, v in lg.e2:
        J[u, v] = J[v, u] = (delta + LOG2) / 2.0
    return J, np.full(len(lg.boundary_edges), beta / 4.0)


@functools.lru_cache(maxsize=16)
def ising_states(n: int) -> np.ndarray:
    if n > 2 * MAX_VERTICES:
        raise InstanceTooLarge("too many Ising spins", 2.0 ** n)
    s = np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int8).reshape(-1, n)
    s.setflags(write=False)
    return s


@dataclass
class IsingEnsemble:
    graph: Graph
    states: np.ndarray
    logw: np.ndarray

    def probs(self) -> np.ndarray:
        return _normalise(self.logw)

    def log_partition(self) -> float:
        return _logsumexp(self.logw)


def ising_ensemble(graph: Graph, bc: BoundaryCondition, beta: float, delta: float,
                   J: np.ndarray | None = None, Jb: np.ndarray | None = None) -> IsingEnsemble:
    lg = lift_graph(graph)
    if J is None:
        J, Jb = ising_couplings(graph, beta, delta)
    st = ising_states(lg.n)
    s = st.astype(np.float64)
    iu, ju = np.triu_indices(lg.n, 1)
    nz = J[iu, ju] != 0
    iu, ju = iu[nz], ju[nz]
    lw = s[:, iu] * s[:, ju] @ J[iu, ju] if len(iu) else np.zeros(len(s))
    if len(lg.boundary_edges):
        xi = bc.boundary_spins(graph)
        lifted = np.repeat(xi, 2)
        be = lg.boundary_edges
        lw = lw + s[:, be[:, 0]] @ (Jb * lifted[be[:, 1]])
    return IsingEnsemble(graph, st, lw)


# ---------------------------------------------------------------------------
# public oracle
# ---------------------------------------------------------------------------

KINDS = ("BlumeCapel", "DiluteRC", "IsingLifted")


def _spin_params(params) -> tuple[float, float]:
    if isinstance(params, ModelParams):
        return params.spin_params()
    beta, delta = params
    return float(beta), float(delta)


def _ensemble(kind: str, instance, bc, params, field):
    g = _as_graph(instance)
    bc = bc if bc is not None else BoundaryCondition.free()
    if kind == "BlumeCapel":
        beta, delta = _spin_params(params)
        return spin_ensemble(g, bc, beta, delta, field)
    if field is not None:
        raise ValueError("complex fields apply to the spin ensemble only")
    if kind == "DiluteRC":
        if not isinstance(params, ModelParams):
            params = ModelParams.rc(*params)
        return rc_ensemble(g, bc, params)
    if kind == "IsingLifted":
        beta, delta = _spin_params(params)
        return ising_ensemble(g, bc, beta, delta)
    raise ValueError(f"kind must be one of {KINDS}")


def exact_partition(kind: str, instance, bc: BoundaryCondition | None = None, params=None,
                    event: Callable | None = None, field=None):
    """Exact Z (optionally restricted to an event).

    ``event`` receives the ensemble and returns a boolean mask over its
    configurations. The result is complex iff a field is given.
    """
    ens = _ensemble(kind, instance, bc, params, field)
    lw = ens.logw
    if event is not None:
        lw = lw[np.asarray(event(ens), dtype=bool)]
    if field is not None:
        return complex(np.sum(np.exp(lw))) if len(lw) else 0j
    ls = _logsumexp(lw)
    return math.exp(ls) if ls > -math.inf else 0.0


def exact_expectation(kind: str, instance, bc: BoundaryCondition | None = None, params=None,
                      observable: Callable | None = None, event: Callable | None = None,
                      field=None):
    """Σ weight·obs / Σ weight; ``observable`` maps the ensemble to per-state values."""
    ens = _ensemble(kind, instance, bc, params, field)
    obs = np.asarray(observable(ens))
    lw = ens.logw
    if event is not None:
        m = np.asarray(event(ens), dtype=bool)
        lw, obs = lw[m], obs[m]
    if field is not None:
        w = np.exp(lw)
        Z = complex(np.sum(w))
        if Z == 0:
            raise ZeroPartitionFunction("Z vanishes at this complex field")
        return complex(np.sum(w * obs)) / Z
    if len(lw) == 0 or np.max(lw) == -math.inf:
        raise ZeroPartitionFunction("no configuration carries positive weight")
    w = _normalise(lw)
    return float(np.sum(w * obs))


# ---------------------------------------------------------------------------
# Edwards-Sokal coupling
# ---------------------------------------------------------------------------

def _es_triples(graph: Graph, bc: BoundaryCondition, params: ModelParams):
    """Build the coupling measure on triples (σ, ψ, ω) from its definition.

    A triple is admissible when σ² = ψ, open edges join open vertices with
    equal spins, and boundary edges are open only towards a matching +1
    boundary spin. Its weight is Π (a/(1-a))^{ψ} Π_{E_ψ} r (p/(1-p))^{ω}.
    """
    n = graph.n
    ep = graph.endpoints()
    ne = len(ep)
    args = _rc_args(graph, bc, params)
    lo, lr, la = args["lo"], args["lr"], args["la"]
    open_b = args["open_b"]
    out_sig, out_psi, out_om, out_lw = [], [], [], []
    psis = [(1 << n) - 1] if args["a_one"] else range(1 << n)
    for psi in psis:
        pb = np.array([(psi >> x) & 1 for x in range(n)], dtype=np.int64)
        full = np.concatenate([pb, open_b])
        feas = np.nonzero((full[ep[:, 0]] == 1) & (full[ep[:, 1]] == 1))[0]
        m = len(feas)
        opn = np.nonzero(pb)[0]
        omask = _cube(m)
        sg = 2 * _cube(len(opn)) - 1
        sigma = np.zeros((len(sg), n), dtype=np.int64)
        sigma[:, opn] = sg
        ext = np.concatenate([sigma, np.ones((len(sg), graph.n_boundary), dtype=np.int64)], axis=1)
        neq = (ext[:, ep[feas, 0]] != ext[:, ep[feas, 1]]).astype(np.float64).T
        valid = (omask.astype(np.float64) @ neq) == 0
        base = la * len(opn) + float(np.sum(lr[feas]))
        lw = base + omask.astype(np.float64) @ lo[feas]
        om_int = np.zeros(len(omask), dtype=np.int64)
        for j, e in enumerate(feas):
            om_int |= omask[:, j] << int(e)
        wi, si = np.nonzero(valid)
        out_sig.append(sigma[si])
        out_psi.append(np.full(len(wi), psi, dtype=np.int64))
        out_om.append(om_int[wi])
        out_lw.append(lw[wi])
    assert ne < 63
    return (np.concatenate(out_sig), np.concatenate(out_psi), np.concatenate(out_om),
            np.concatenate(out_lw))


def _cube(m: int) -> np.ndarray:
    """{0,1}^m in lexicographic order, shape (2^m, m)."""
    return (np.arange(1 << m, dtype=np.int64)[:, None] >> np.arange(m - 1, -1, -1)) & 1


def _sigma_index(sig: np.ndarray) -> np.ndarray:
    """Position of each spin row inside spin_states(n)."""
    n = sig.shape[1]
    return (sig + 1) @ (3 ** np.arange(n - 1, -1, -1))


def _es_spin_bc(bc: BoundaryCondition) -> BoundaryCondition:
    if bc.kind == "delta":
        return BoundaryCondition.eps_field(-0.5 * math.log1p(-bc.delta))
    return bc


def verify_es_coupling(instance, bc: BoundaryCondition, beta: float, delta: float,
                       convention: Convention | str | None = None,
                       tol: float = PROB_TOL) -> list[ExactReport]:
    """Check both marginals, both conditional laws and the correlation identities.

    bc is free, wired, or a δ-wired condition (matched with the ε-field spin
    condition ε = -½ log(1-δ)).
    """
    if bc.kind not in ("free", "wired", "delta"):
        raise ValueError("the coupling is checked for free, wired and delta-wired conditions")
    conv = Convention(convention) if convention is not None else resolved_convention()
    g = _as_graph(instance)
    name = _name(instance)
    n, nb = g.n, g.n_boundary
    p, a, r = bc_to_rc_params(beta, delta, conv)
    params = ModelParams(p, a, r, True, beta, delta, conv)
    reports = []
    R = functools.partial(_report, instance=name, tol=tol, convention=conv)

    sig, psi, om, lw = _es_triples(g, bc, params)
    w = np.exp(lw - lw.max())
    Zt = w.sum()
    w /= Zt
    rc = rc_ensemble(g, bc, params)
    rcp = rc.probs()
    sp = spin_ensemble(g, _es_spin_bc(bc), beta, delta)
    spp = sp.probs()

    # σ-marginal
    si = _sigma_index(sig)
    smarg = np.bincount(si, weights=w, minlength=len(spp))
    err = np.abs(smarg - spp)
    reports.append(R("es_sigma_marginal", abs_errs=err, witnesses=sp.states))

    # (ψ, ω)-marginal
    keys = psi | (om << n)
    rk = rc.keys()
    order = np.argsort(rk)
    pos = np.searchsorted(rk[order], keys)
    pos = np.clip(pos, 0, len(rk) - 1)
    missing = rk[order][pos] != keys
    tm = np.bincount(order[pos], weights=w, minlength=len(rk))
    err = np.abs(tm - rcp)
    if missing.any():
        err = np.append(err, np.inf)
    rc_wit = np.stack([rc.psi, rc.omega], axis=1)
    reports.append(R("es_rc_marginal", abs_errs=err, witnesses=rc_wit))

    # same normalisation: the triple sum is Z_BC, and Z_RC carries one extra
    # factor 2 for the boundary cluster when the boundary is open
    boundary_cls = 1 if (nb and bc.kind != "free") else 0
    log_zt = _logsumexp(lw)
    rel = [abs(math.expm1(log_zt + boundary_cls * LOG2 - rc.log_partition())),
           abs(math.expm1(log_zt - sp.log_partition()))]
    reports.append(R("es_joint_normalisation", abs_errs=[0.0], rel_errs=rel, rel_tol=Z_RTOL))

    # (a),(b): given (ψ, ω), spins constant on clusters, +1 on boundary clusters, uniform
    rc_pos = order[pos]
    lab = rc.labels[rc_pos]
    ext = np.concatenate([sig, np.ones((len(sig), nb), dtype=np.int64)], axis=1)
    root_spin = np.take_along_axis(ext, np.maximum(lab[:, :n], 0), axis=1)
    open_x = ((psi[:, None] >> np.arange(n)) & 1).astype(bool)
    bad = open_x & (root_spin != sig)
    bad |= rc.boundary_connections()[rc_pos] & (sig != 1)
    n_valid = np.bincount(rc_pos, minlength=len(rk))
    k_free = rc.k - boundary_cls
    err_b = np.abs(1.0 / np.maximum(n_valid, 1) - 2.0 ** (-k_free.astype(float)))
    err_b[n_valid == 0] = np.inf
    err_b = np.append(err_b, np.inf if bad.any() else 0.0)
    reports.append(R("es_spin_given_rc", abs_errs=err_b, witnesses=rc_wit))

    # (i)-(iii): given σ, ψ = σ² and each eligible edge open independently
    zsig = np.bincount(si, weights=w, minlength=len(spp))
    cond = w / zsig[si]
    # eligible edges per spin state, as bitmasks split into internal / boundary
    st = sp.states.astype(np.int64)
    full = np.concatenate([st, np.full((len(st), nb), 0 if bc.kind == "free" else 1)], axis=1)
    ep = g.endpoints()
    elig = (full[:, ep[:, 0]] != 0) & (full[:, ep[:, 0]] == full[:, ep[:, 1]])
    bitv = np.int64(1) << np.arange(g.n_edge_vars, dtype=np.int64)
    int_mask = np.int64((1 << g.n_edges) - 1)
    el = (elig * bitv).sum(axis=1)[si]
    pb = p if bc.kind != "delta" else bc.delta
    cnt = np.bitwise_count
    oi, ob = om & int_mask, om & ~int_mask
    expect = (p ** cnt(oi) * (1 - p) ** (cnt(el & int_mask) - cnt(oi))
              * pb ** cnt(ob) * (1 - pb) ** (cnt(el & ~int_mask) - cnt(ob)))
    expect = np.where((om & ~el) != 0, 0.0, expect)
    psi_ok = (psi == ((sig != 0) * (np.int64(1) << np.arange(n, dtype=np.int64))).sum(axis=1))
    err = np.where(psi_ok, np.abs(cond - expect), np.inf)
    reports.append(R("es_rc_given_spin", abs_errs=err, witnesses=sig))

    # correlation identities
    s = sp.states.astype(float)
    errs, wits = [], []
    if bc.kind in ("wired", "delta"):
        for x in range(n):
            lhs = float(spp @ s[:, x])
            rhs = float(rcp @ rc.connected_to_boundary(x))
            errs.append(abs(lhs - rhs))
            wits.append(("sigma_x", x))
    for x in range(n):
        for y in range(x + 1, n):
            lhs = float(spp @ (s[:, x] * s[:, y]))
            rhs = float(rcp @ rc.connected(x, y))
            errs.append(abs(lhs - rhs))
            wits.append(("sigma_x_sigma_y", x, y))
    reports.append(R("es_correlations", abs_errs=errs if errs else [0.0], witnesses=wits))
    return reports


# ---------------------------------------------------------------------------
# convention resolution
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=1)
def resolved_convention() -> Convention:
    """The a-convention under which the coupling identities hold.

    Tested on a single site and a two-site path with free boundary.
    """
    ok = []
    for conv in (Convention.ACTIVITY_E, Convention.PAPER_A):
        good = True
        for g in (Graph.from_edges(1, []), Graph.from_edges(2, [(0, 1)])):
            reps = verify_es_coupling(g, BoundaryCondition.free(), 0.5, 0.3, conv)
            good &= all(rp.passed for rp in reps)
        if good:
            ok.append(conv)
    if len(ok) != 1:
        raise RuntimeError(f"convention resolution is ambiguous: {ok}")
    return ok[0]


# ---------------------------------------------------------------------------
# Ising lift
# ---------------------------------------------------------------------------

def with_boundary(g: Graph) -> Graph:
    """Attach one private boundary vertex to every vertex of g."""
    be = np.stack([np.arange(g.n), np.arange(g.n)], axis=1)
    return Graph(g.n, g.edges, be, g.n)


def verify_ising_mapping(graph: Graph, beta: float, delta: float,
                         xi: BoundaryCondition | str = "free",
                         tol: float = Z_RTOL) -> list[ExactReport]:
    """Check the lifted-Ising mapping: couplings, Z, the law of T(τ) and correlations."""
    g = graph if isinstance(graph, Graph) else _as_graph(graph)
    if g.n > 6:
        raise InstanceTooLarge("the lifted graph has too many spins", 2.0 ** (2 * g.n))
    bc = BoundaryCondition.parse(xi) if isinstance(xi, str) else xi
    name = _name(g) + f" beta={beta!r} delta={delta!r} xi={bc.label()}"
    R = functools.partial(_report, instance=name, tol=tol)
    reports = []
    lg = lift_graph(g)

    # (i) coupling assembly against a pairwise rebuild
    J, Jb = ising_couplings(g, beta, delta)
    Jref = np.zeros_like(J)
    emap = {tuple(sorted(e)) for e in g.edges.tolist()}
    for u in range(lg.n):
        for v in range(lg.n):
            x, i = divmod(u, 2)
            y, j = divmod(v, 2)
            if x == y and i != j:
                Jref[u, v] = (delta + LOG2) / 2.0
            elif tuple(sorted((x, y))) in emap:
                Jref[u, v] = beta / 4.0
    err = np.abs(J - Jref).ravel()
    reports.append(R("ising_couplings", abs_errs=err, tol=0.0))

    # (ii) Z_Ising = e^{-(Δ - log 2)|V|/2} Z_BC
    ising = ising_ensemble(g, bc, beta, delta, J, Jb)
    bcs = spin_ensemble(g, bc, beta, delta)
    lhs = ising.log_partition()
    rhs = -(delta - LOG2) * g.n / 2.0 + bcs.log_partition()
    reports.append(R("ising_partition", abs_errs=[0.0], rel_errs=[abs(math.expm1(lhs - rhs))],
                     rel_tol=tol))

    # (iii) law of T(τ) equals μ^ξ, and |T^{-1}(η)| = 2^{Σ(1-η²)}
    tau = ising.states.astype(np.int64)
    T = (tau[:, 0::2] + tau[:, 1::2]) // 2
    ti = _sigma_index(T)
    law = np.bincount(ti, weights=ising.probs(), minlength=len(bcs.states))
    sizes = np.bincount(ti, minlength=len(bcs.states))
    expect_sizes = 2 ** np.sum(1 - bcs.states.astype(np.int64) ** 2, axis=1)
    pb = bcs.probs()
    rel = np.abs(law - pb) / np.maximum(pb, 1e-300)
    reports.append(R("ising_pushforward", abs_errs=np.abs(law - pb), rel_errs=rel, tol=PROB_TOL,
                     rel_tol=tol, witnesses=bcs.states.tolist()))
    reports.append(R("ising_fibre_sizes", abs_errs=np.abs(sizes - expect_sizes), tol=0.0,
                     witnesses=bcs.states.tolist()))

    # (iv) ⟨Π σ_x⟩ = ⟨Π τ_x^{i_x}⟩ for |A| ≤ 3 and every layer choice
    s = bcs.states.astype(float)
    t = tau.astype(float)
    ip = ising.probs()
    errs, rels, wits = [], [], []
    for size in range(1, min(3, g.n) + 1):
        for A in itertools.combinations(range(g.n), size):
            lhs = float(pb @ np.prod(s[:, list(A)], axis=1))
            for layers in itertools.product((0, 1), repeat=size):
                cols = [2 * x + i for x, i in zip(A, layers)]
                rhs = float(ip @ np.prod(t[:, cols], axis=1))
                d = abs(lhs - rhs)
                errs.append(d)
                rels.append(d / max(abs(lhs), abs(rhs)) if max(abs(lhs), abs(rhs)) > 0 else 0.0)
                wits.append((A, layers))
    # relative error is meaningless for correlations that vanish by symmetry
    viol_rel = [r if e > 1e-14 else 0.0 for r, e in zip(rels, errs)]
    reports.append(R("ising_correlations", abs_errs=errs, rel_errs=viol_rel, tol=PROB_TOL,
                     rel_tol=tol, witnesses=wits))
    return reports


# ---------------------------------------------------------------------------
# order properties
# ---------------------------------------------------------------------------

_TRIPLE_FNS = (
    lambda a, b, c: a & b & c,
    lambda a, b, c: a | b | c,
    lambda a, b, c: (a & b) | c,
    lambda a, b, c: (a & c) | b,
    lambda a, b, c: (b & c) | a,
    lambda a, b, c: (a | b) & c,
    lambda a, b, c: (a | c) & b,
    lambda a, b, c: (b | c) & a,
    lambda a, b, c: (a & b) | (a & c) | (b & c),
)


def increasing_family(X: np.ndarray, seed: int = 0, n_random: int = 200) -> np.ndarray:
    """Increasing events evaluated on the rows of a 0/1 matrix X (states x coords).

    The family: every single coordinate; x∧y and x∨y for every pair; the
    nine essential monotone functions of every triple; and n_random random
    upper sets, each generated by 1 to 3 random minimal elements. Returned
    as a boolean (events x states) matrix without duplicate rows.
    """
    Xb = X.astype(bool).T
    D = Xb.shape[0]
    ev = [Xb]
    if D >= 2:
        i, j = np.triu_indices(D, 1)
        ev.append(Xb[i] & Xb[j])
        ev.append(Xb[i] | Xb[j])
    if D >= 3:
        for tri in itertools.combinations(range(D), 3):
            a, b, c = Xb[tri[0]], Xb[tri[1]], Xb[tri[2]]
            ev.append(np.stack([f(a, b, c) for f in _TRIPLE_FNS]))
    rng = np.random.default_rng(seed)
    rand = []
    for _ in range(n_random):
        e = np.zeros(Xb.shape[1], dtype=bool)
        for _ in range(int(rng.integers(1, 4))):
            m = rng.choice(D, size=int(rng.integers(1, min(4, D) + 1)), replace=False)
            e |= np.all(Xb[m], axis=0)
        rand.append(e)
    ev.append(np.array(rand).reshape(-1, Xb.shape[1]))
    E = np.concatenate(ev)
    packed = np.packbits(E, axis=1)
    _, idx = np.unique(packed, axis=0, return_index=True)
    return E[np.sort(idx)]


def _fkg_violations(E: np.ndarray, w: np.ndarray, slack: float, chunk: int = 512):
    """Worst value of P(A)P(B) - P(A∩B) over all pairs of events (rows of E)."""
    Ef = E.astype(np.float64)
    P = Ef @ w
    worst, wit, viol = -np.inf, None, 0
    for s in range(0, len(E), chunk):
        M = (Ef[s:s + chunk] * w) @ Ef.T
        gap = np.outer(P[s:s + chunk], P) - M
        viol += int(np.sum(gap > slack))
        i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[i, j] > worst:
            worst, wit = float(gap[i, j]), (s + int(i), int(j))
    return max(worst, 0.0), viol, wit


def lattice_condition(keys: np.ndarray, w: np.ndarray, slack: float, chunk: int = 256):
    """Holley lattice condition μ(η∨ξ)μ(η∧ξ) ≥ μ(η)μ(ξ) over all support pairs.

    Returns (worst relative gap, violation count, witness key pair). The
    dilute RC measure does not satisfy it in general (the factor r penalises
    two open neighbours), which is why FKG is checked on events instead.
    """
    order = np.argsort(keys)
    sk, sw = keys[order], w[order]

    def prob(k):
        pos = np.clip(np.searchsorted(sk, k), 0, len(sk) - 1)
        return np.where(sk[pos] == k, sw[pos], 0.0)

    worst, viol, wit = 0.0, 0, None
    for s in range(0, len(sk), chunk):
        a = sk[s:s + chunk, None]
        lhs = prob(a | sk[None, :]) * prob(a & sk[None, :])
        rhs = sw[s:s + chunk, None] * sw[None, :]
        gap = (rhs - lhs) / np.maximum(rhs, 1e-300)
        v = gap > slack
        viol += int(v.sum())
        i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[i, j] > worst:
            worst, wit = float(gap[i, j]), (int(sk[s + i]), int(sk[j]))
    return worst, viol, wit


def _coord_labels(region: Region) -> list:
    """Geometric names of the coordinates: vertices then edges (internal, then boundary)."""
    lab = [("v", tuple(int(c) for c in x)) for x in region.vertices]
    for e in range(region.n_edge_vars):
        u, v = region.edge_coords(e)
        lab.append(("e", tuple(sorted((tuple(int(c) for c in u), tuple(int(c) for c in v))))))
    return lab


def _law_on(ens: RcEnsemble, region: Region, coords: list) -> dict:
    """Law of the named coordinates, as {tuple of bits: probability}."""
    X = ens.coords()
    names = _coord_labels(region)
    pos = {nm: i for i, nm in enumerate(names)}
    cols = [pos[c] for c in coords]
    w = ens.probs()
    out: dict = {}
    for row, pw in zip(map(tuple, X[:, cols]), w):
        out[row] = out.get(row, 0.0) + pw
    return out


def _domination(lo: dict, hi: dict, D: int, seed: int, slack: float):
    """Check lo ⪯ hi on the increasing family over the union of both supports."""
    sup = sorted(set(lo) | set(hi))
    X = np.array(sup, dtype=np.uint8).reshape(-1, D)
    E = increasing_family(X, seed)
    wl = np.array([lo.get(s, 0.0) for s in sup])
    wh = np.array([hi.get(s, 0.0) for s in sup])
    gap = E.astype(float) @ wl - E.astype(float) @ wh
    i = int(np.argmax(gap))
    return max(float(gap[i]), 0.0), int(np.sum(gap > slack)), len(E), i


def _sub_boundary(big: Region, sub: Region, omega_big: np.ndarray | None, outer_open: np.ndarray,
                  outer_class: np.ndarray, psi_big: np.ndarray) -> BoundaryCondition:
    """Boundary condition induced on sub by a configuration of big outside sub.

    Boundary vertices of sub inside big take their ψ; those outside big take
    the outer condition. Wiring classes merge through the open edges of big
    that are not edges of sub.
    """
    n_big = big.n
    nbb = big.graph.n_boundary
    node_open = np.concatenate([psi_big, outer_open]).astype(bool)
    parent = list(range(n_big + nbb + int(outer_class.max(initial=-1)) + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for b in range(nbb):
        if outer_open[b] and outer_class[b] >= 0:
            union(n_big + b, n_big + nbb + int(outer_class[b]))
    sub_edges = set()
    for e in range(sub.n_edge_vars):
        u, v = sub.edge_coords(e)
        sub_edges.add(tuple(sorted((u, v))))
    ep = big.graph.endpoints()
    for e in range(big.n_edge_vars):
        if omega_big[e]:
            key = tuple(sorted(big.edge_coords(e)))
            if key not in sub_edges:
                union(int(ep[e, 0]), int(ep[e, 1]))
    opens, classes = [], []
    for y in sub.boundary:
        y = tuple(int(c) for c in y)
        if big.contains(y):
            node = big.index(y)
        else:
            node = n_big + big.boundary_index(y)
        opens.append(bool(node_open[node]))
        classes.append(find(node) if node_open[node] else -1)
    uniq = {c: i for i, c in enumerate(sorted({c for c in classes if c >= 0}))}
    classes = [uniq[c] if c >= 0 else -1 for c in classes]
    return BoundaryCondition.explicit_rc(opens, classes)


def _finite_energy(ens: RcEnsemble):
    """Min and max of one-coordinate conditionals over positive-probability conditionings.

    For a vertex x the conditioning is every other vertex and every edge not
    touching x. For an internal edge xy it is everything except ψ_x, ψ_y, ω_xy.
    """
    g = ens.graph
    n = g.n
    ep = g.endpoints()
    X = ens.coords()
    w = ens.probs()
    lo_, hi_ = 1.0, 0.0
    wit_lo = wit_hi = None
    ncoord = X.shape[1]
    for d in range(n + g.n_edges):
        if d < n:
            hide = {d} | {n + e for e in range(g.n_edge_vars) if d in (ep[e, 0], ep[e, 1])}
        else:
            hide = {d} | {int(x) for x in ep[d - n]}
        keep = np.array([c for c in range(ncoord) if c not in hide])
        _, inv = np.unique(X[:, keep], axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        tot = np.bincount(inv, weights=w)
        one = np.bincount(inv, weights=w * X[:, d])
        c = one[tot > 0] / tot[tot > 0]
        if c.min() < lo_:
            lo_, wit_lo = float(c.min()), d
        if c.max() > hi_:
            hi_, wit_hi = float(c.max()), d
    return lo_, hi_, (wit_lo, wit_hi)


_SHAPES = {"1x1": (0, 0, 0, 0), "1x2": (0, 1, 0, 0), "2x2": (0, 1, 0, 1)}
_SUB = {"1x2": "1x1", "2x2": "1x2"}


def verify_order_properties(params_grid=None, regions=("1x2", "2x2"), seed: int = 0,
                            slack: float = PROB_TOL, s_subsets: int = 6,
                            step: float = 0.1) -> list[ExactReport]:
    """FKG, domination, MON, SMP, finite energy and closed-edges vs closed-vertices.

    FKG is checked on every pair from the increasing family. Domination is checked on the increasing family built over the
    union of both supports.
    """
    if params_grid is None:
        params_grid = [(p, a) for p in (0.3, 0.5, 0.7) for a in (0.3, 0.5, 0.7)]
    free, wired = BoundaryCondition.free(), BoundaryCondition.wired()
    reports = []
    for p, a in params_grid:
        prm = ModelParams.rc(p, a)
        for rn in regions:
            reg = rect_region(*_SHAPES[rn])
            name = f"{rn} (p,a)=({p!r},{a!r})"
            R = functools.partial(_report, instance=name, tol=slack)
            names = _coord_labels(reg)
            D = len(names)
            ens = {"free": rc_ensemble(reg.graph, free, prm),
                   "wired": rc_ensemble(reg.graph, wired, prm)}
            law = {k: _law_on(e, reg, names) for k, e in ens.items()}

            for k, en in ens.items():
                w = en.probs()
                E = increasing_family(en.coords(), seed)
                worst, viol, wit = _fkg_violations(E, w, slack)
                reports.append(R(f"fkg_{k}", abs_errs=[worst], witnesses=[wit], n_events=len(E)))

            # ξ ≤ ξ'
            worst, _, ne, _ = _domination(law["free"], law["wired"], D, seed, slack)
            reports.append(R("domination_free_wired", abs_errs=[worst], n_events=ne))
            # p ≤ p', a ≤ a' at fixed boundary
            for dp, da in ((step, 0.0), (0.0, step), (step, step)):
                up = ModelParams.rc(p + dp, a + da)
                for k, bc in (("free", free), ("wired", wired)):
                    hi = _law_on(rc_ensemble(reg.graph, bc, up), reg, names)
                    worst, _, ne, _ = _domination(law[k], hi, D, seed, slack)
                    reports.append(R(f"domination_{k} dp={dp!r} da={da!r}", abs_errs=[worst],
                                     n_events=ne))

            for k, en in ens.items():
                mn, mx, wit = _finite_energy(en)
                err = 0.0 if (mn > 0.0 and mx < 1.0) else 1.0
                reports.append(R(f"finite_energy_{k}", abs_errs=[err], tol=0.0, witnesses=[wit],
                                 min_conditional=mn, max_conditional=mx))

            if rn in _SUB:
                sub = rect_region(*_SHAPES[_SUB[rn]])
                sub_names = _coord_labels(sub)
                ds = len(sub_names)
                small0 = _law_on(rc_ensemble(sub.graph, free, prm), sub, sub_names)
                small1 = _law_on(rc_ensemble(sub.graph, wired, prm), sub, sub_names)
                for k, en in ens.items():
                    big = _law_on(en, reg, sub_names)
                    worst, _, _, _ = _domination(big, small1, ds, seed, slack)
                    reports.append(R(f"mon_wired {_SUB[rn]} vs {rn}^{k}", abs_errs=[worst]))
                    worst, _, _, _ = _domination(small0, big, ds, seed, slack)
                    reports.append(R(f"mon_free {_SUB[rn]} vs {rn}^{k}", abs_errs=[worst]))
                reports.append(_check_smp(reg, sub, ens, prm, name, slack))

            reports.append(_check_closed_edges_vs_vertices(reg, prm, name, seed, slack, s_subsets))
    return reports


def _check_smp(reg: Region, sub: Region, ens: dict, prm: ModelParams, name: str,
               slack: float) -> ExactReport:
    """Conditioned on every coordinate outside sub, the law inside is φ_sub with the induced bc."""
    names = _coord_labels(reg)
    pos = {nm: i for i, nm in enumerate(names)}
    sub_names = _coord_labels(sub)
    if any(c not in pos for c in sub_names):
        raise ValueError("sub-region coordinates must be coordinates of the region")
    inside = [pos[c] for c in sub_names]
    outside = [i for i in range(len(names)) if i not in set(inside)]
    errs, wits = [], []
    for kb, en in ens.items():
        X = en.coords()
        w = en.probs()
        rb = en.bc.rc_boundary(reg.graph)
        _, inv = np.unique(X[:, outside], axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        for c in range(inv.max() + 1):
            m = inv == c
            tot = w[m].sum()
            if tot <= 0:
                continue
            row = X[np.nonzero(m)[0][0]]
            bc = _sub_boundary(reg, sub, row[reg.n:], rb.open.astype(np.int64), rb.classes,
                               row[:reg.n])
            es = rc_ensemble(sub.graph, bc, prm)
            ref = dict(zip(map(tuple, es.coords()), es.probs()))
            cond: dict = {}
            for r_, pw in zip(map(tuple, X[m][:, inside]), w[m]):
                cond[r_] = cond.get(r_, 0.0) + pw / tot
            errs.append(max(abs(cond.get(k, 0.0) - ref.get(k, 0.0)) for k in set(cond) | set(ref)))
            wits.append((kb, tuple(int(v) for v in row)))
    return _report("smp", name, errs, tol=slack, witnesses=wits, n_conditionings=len(errs))


def _check_closed_edges_vs_vertices(reg: Region, prm: ModelParams, name: str, seed: int,
                                    slack: float, n_random: int) -> ExactReport:
    """Vertex marginals: closed edges E(S,Λ) ⪯ closed S, wired outside, over a family of S."""
    g = reg.graph
    nb = g.n_boundary
    rng = np.random.default_rng(seed)
    fam = {(b,) for b in range(nb)} | {tuple(range(nb))}
    for _ in range(n_random):
        k = int(rng.integers(2, nb + 1))
        fam.add(tuple(sorted(int(x) for x in rng.choice(nb, size=k, replace=False))))
    vnames = _coord_labels(reg)[:reg.n]
    errs, wits = [], []
    for S in sorted(fam):
        Sset = set(S)
        closed = [j for j, (_, b) in enumerate(g.boundary_edges.tolist()) if b in Sset]
        bc_e = BoundaryCondition.explicit_rc([True] * nb, [0] * nb, closed)
        bc_v = BoundaryCondition.explicit_rc([b not in Sset for b in range(nb)], [0] * nb)
        lo = _law_on(rc_ensemble(g, bc_e, prm), reg, vnames)
        hi = _law_on(rc_ensemble(g, bc_v, prm), reg, vnames)
        worst, _, _, _ = _domination(lo, hi, reg.n, seed, slack)
        errs.append(worst)
        wits.append(S)
    return _report("closed_edges_below_closed_vertices", name, errs, tol=slack, witnesses=wits,
                   n_subsets=len(errs))


# ---------------------------------------------------------------------------
# comparison between δ-wired and free
# ---------------------------------------------------------------------------

def comparison_factor(delta: float, n: int) -> float:
    return (1.0 / (1.0 - delta)) ** (12 * n + 6)


def verify_comparison_lemma(n: int = 1, deltas=(0.1, 0.3, 0.5), p: float = 0.5, a: float = 0.5,
                            n_events: int = 200, seed: int = 0,
                            slack: float = PROB_TOL) -> list[ExactReport]:
    """φ^{1,δ}[A] ≤ (1/(1-δ))^{12n+6} φ^0[A] for events of (ψ_Λ, ω_{b(Λ)}).

    The atom-wise maximum ratio certifies the bound for every such event;
    n_events random unions of atoms are checked explicitly as well.
    """
    if n != 1:
        raise InstanceTooLarge("only n = 1 is enumerable in d = 2", 2.0 ** (5 * n * n))
    from .lattice import box_region
    reg = box_region(n, 2)
    prm = ModelParams.rc(p, a)
    m0 = rc_marginal(reg.graph, BoundaryCondition.free(), prm)
    reports = []
    rng = np.random.default_rng(seed)
    for d in deltas:
        m1 = rc_marginal(reg.graph, BoundaryCondition.delta_wired(d), prm)
        c = comparison_factor(d, n)
        sup = (m0 > 0) | (m1 > 0)
        ratio = np.where(m0[sup] > 0, m1[sup] / np.where(m0[sup] > 0, m0[sup], 1.0), np.inf)
        errs = [max(0.0, float(np.max(m1[sup] - c * m0[sup])))]
        idx = np.nonzero(sup)[0]
        for _ in range(n_events):
            q = 10.0 ** rng.uniform(-5, -0.3)
            A = idx[rng.random(len(idx)) < q]
            errs.append(max(0.0, float(m1[A].sum() - c * m0[A].sum())))
        reports.append(_report("comparison_lemma", f"box n={n} d=2 (p,a)=({p!r},{a!r}) delta={d!r}",
                               errs, tol=slack, factor=c, max_atom_ratio=float(ratio.max()),
                               n_events=n_events))
    return reports
