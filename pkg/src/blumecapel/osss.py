"""Admissible decision trees, revealment and the OSSS inequality on small domains.

A domain is the set of binary coordinates D = Λ ⊔ E_Λ: interior vertices
0..n-1 followed by edge variables (internal edges, then boundary edges), the
same layout as ``RcEnsemble.keys``. Exact checks enumerate every
configuration, so they are limited to a few dozen coordinates at most.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exact import ExactReport, InstanceTooLarge, rc_connection_moments, rc_ensemble
from .lattice import Graph, Region, box_region
from .model import BoundaryCondition, ModelParams
from .sampler import ChainSpec, RcTarget, collect_states
from .stats import estimate, jackknife

MAX_COORDS = 16
MAX_WM_COORDS = 14
SLACK = 1e-12
FD_STEP = 1e-5
FD_TOL = 1e-6
MC_BURN_IN = 1000


class AdmissibilityError(ValueError):
    """A decision tree queried an edge before its endpoints, or repeated a query."""


def weak_monotonicity_threshold(p: float) -> float:
    """Smallest r for which the generalized measure is known to be weakly monotonic."""
    return 2.0 * (1.0 - p) / (2.0 - p)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Binary coordinates of a region: vertices, then edge variables.

    ``ends[e]`` lists the Λ-endpoints of edge e (one for boundary edges).
    """

    graph: Graph
    region: Region | None = None

    @property
    def n_vertices(self) -> int:
        return self.graph.n

    @property
    def n_edges(self) -> int:
        return self.graph.n_edge_vars

    @property
    def size(self) -> int:
        return self.graph.n + self.graph.n_edge_vars

    @classmethod
    def of(cls, instance) -> "Domain":
        if isinstance(instance, Domain):
            return instance
        if isinstance(instance, Region):
            return cls(instance.graph, instance)
        if isinstance(instance, Graph):
            return cls(instance)
        raise TypeError("expected a Region, Graph or Domain")

    @property
    def ends(self) -> tuple[tuple[int, ...], ...]:
        g = self.graph
        return tuple((int(u), int(v)) for u, v in g.edges) + \
            tuple((int(u),) for u, _ in g.boundary_edges)

    def is_vertex(self, d: int) -> bool:
        return 0 <= d < self.n_vertices

    def endpoints(self, d: int) -> tuple[int, ...]:
        """Λ-endpoints of coordinate d (empty for a vertex)."""
        if self.is_vertex(d):
            return ()
        return self.ends[d - self.n_vertices]

    def label(self, d: int) -> str:
        if self.is_vertex(d):
            return f"v{d}"
        return f"e{d - self.n_vertices}"

    def in_S(self, seq) -> bool:
        """Ordered sequence with no repeats, every edge after its Λ-endpoints."""
        seen = set()
        for d in seq:
            d = int(d)
            if d in seen or not 0 <= d < self.size:
                return False
            if any(u not in seen for u in self.endpoints(d)):
                return False
            seen.add(d)
        return True

    def in_U(self, subset) -> bool:
        s = {int(d) for d in subset}
        return all(0 <= d < self.size for d in s) and \
            all(u in s for d in s for u in self.endpoints(d))

    def closed_subsets(self) -> list[tuple[int, ...]]:
        """Every member of U_Λ as a sorted tuple."""
        nv = self.n_vertices
        ends = self.ends
        out = []
        for vm in range(1 << nv):
            allowed = [nv + e for e, en in enumerate(ends) if all((vm >> u) & 1 for u in en)]
            verts = [x for x in range(nv) if (vm >> x) & 1]
            for em in range(1 << len(allowed)):
                out.append(tuple(verts + [allowed[j] for j in range(len(allowed)) if (em >> j) & 1]))
        return out

    def all_configs(self) -> np.ndarray:
        n = self.size
        if n > MAX_COORDS:
            raise InstanceTooLarge(f"{n} coordinates exceed the exact cap of {MAX_COORDS}", 2.0 ** n)
        return _bits(np.arange(1 << n, dtype=np.int64), n)


def _bits(keys: np.ndarray, n: int) -> np.ndarray:
    return ((np.asarray(keys, dtype=np.int64)[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _key(bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


# ---------------------------------------------------------------------------
# functions on {0,1}^D
# ---------------------------------------------------------------------------

def _labels(domain: Domain, X: np.ndarray) -> np.ndarray:
    """Cluster labels of open vertices (-1 if closed) using internal edges only."""
    nv = domain.n_vertices
    X = np.atleast_2d(X)
    open_v = X[:, :nv].astype(bool)
    L = np.where(open_v, np.arange(nv)[None, :], -1)
    edges = domain.graph.edges
    act = [(int(u), int(v), X[:, nv + e].astype(bool) & open_v[:, u] & open_v[:, v])
           for e, (u, v) in enumerate(edges)]
    act = [(u, v, a) for u, v, a in act if a.any()]
    changed = True
    while changed:
        changed = False
        for u, v, a in act:
            lu, lv = L[:, u], L[:, v]
            m = np.minimum(lu, lv)
            upd = a & ((lu != m) | (lv != m))
            if upd.any():
                L[upd, u] = m[upd]
                L[upd, v] = m[upd]
                changed = True
    return L


def connection_function(domain: Domain, S, T) -> Callable[[np.ndarray], np.ndarray]:
    """f(η) = 1{S <-> T} through open vertices and open internal edges.

    Boundary edges are ignored, so f is increasing in every coordinate.
    """
    S = [int(s) for s in S]
    T = [int(t) for t in T]

    def f(X):
        X = np.asarray(X)
        single = X.ndim == 1
        L = _labels(domain, X)
        hit = np.zeros(len(L), dtype=bool)
        for s in S:
            ls = L[:, s]
            for t in T:
                hit |= (ls >= 0) & (ls == L[:, t])
        out = hit.astype(float)
        return out[0] if single else out

    return f


def coordinate_function(d: int) -> Callable[[np.ndarray], np.ndarray]:
    def f(X):
        return np.asarray(X)[..., d].astype(float)
    return f


def all_open_function(coords) -> Callable[[np.ndarray], np.ndarray]:
    c = [int(x) for x in coords]

    def f(X):
        return np.asarray(X)[..., c].min(axis=-1).astype(float)
    return f


def function_table(f, n: int) -> np.ndarray:
    """Values of f on all 2^n configurations, indexed by bitmask."""
    if isinstance(f, np.ndarray):
        if len(f) != 1 << n:
            raise ValueError("table length must be 2^n")
        return f.astype(float)
    if n > MAX_COORDS:
        raise InstanceTooLarge(f"{n} coordinates exceed the exact cap of {MAX_COORDS}", 2.0 ** n)
    return np.asarray(f(_bits(np.arange(1 << n, dtype=np.int64), n)), dtype=float)


def is_increasing(table: np.ndarray, n: int) -> bool:
    idx = np.arange(1 << n, dtype=np.int64)
    for d in range(n):
        lo = idx[((idx >> d) & 1) == 0]
        if np.any(table[lo | (1 << d)] < table[lo]):
            return False
    return True


def random_monotone_table(n: int, rng: np.random.Generator, n_terms: int = 3, max_size: int = 3,
                          n_average: int = 1) -> np.ndarray:
    """Average of n_average random monotone DNFs (ORs of random minterms)."""
    keys = np.arange(1 << n, dtype=np.int64)
    out = np.zeros(1 << n)
    for _ in range(n_average):
        f = np.zeros(1 << n, dtype=bool)
        for _ in range(n_terms):
            k = int(rng.integers(1, max_size + 1))
            m = int(sum(1 << int(c) for c in rng.choice(n, size=min(k, n), replace=False)))
            f |= (keys & m) == m
        out += f
    return out / n_average


# ---------------------------------------------------------------------------
# decision trees
# ---------------------------------------------------------------------------

class DecisionTree:
    """First query plus a rule (history, revealed values) -> next coordinate.

    The first query must be a vertex. Every query is checked against the
    admissibility constraint as it is made.
    """

    def __init__(self, domain: Domain, first: int, rule: Callable, name: str = "tree"):
        self.domain = Domain.of(domain)
        if not self.domain.is_vertex(int(first)):
            raise AdmissibilityError("an admissible tree starts from a vertex")
        self.first = int(first)
        self.rule = rule
        self.name = name

    def next_query(self, history: tuple, values: tuple) -> int:
        if not history:
            return self.first
        d = int(self.rule(tuple(history), tuple(values)))
        if not 0 <= d < self.domain.size or d in history:
            raise AdmissibilityError(f"{self.name}: invalid or repeated query {d}")
        if any(u not in history for u in self.domain.endpoints(d)):
            raise AdmissibilityError(f"{self.name}: edge {d} queried before its endpoints")
        return d

    @classmethod
    def from_order(cls, domain, order, name: str = "static") -> "DecisionTree":
        """Non-adaptive tree; the whole order is validated up front."""
        dom = Domain.of(domain)
        order = [int(d) for d in order]
        if sorted(order) != list(range(dom.size)) or not dom.in_S(order):
            raise AdmissibilityError("order is not an admissible permutation of D")
        pos = order

        def rule(history, values):
            return pos[len(history)]
        return cls(dom, order[0], rule, name)


def lexicographic_tree(domain) -> DecisionTree:
    dom = Domain.of(domain)
    return DecisionTree.from_order(dom, range(dom.size), "lexicographic")


def random_admissible_tree(domain, rng: np.random.Generator) -> DecisionTree:
    """Static tree whose order picks uniformly among currently admissible coordinates."""
    dom = Domain.of(domain)
    done: set[int] = set()
    order = []
    while len(order) < dom.size:
        avail = [d for d in range(dom.size)
                 if d not in done and all(u in done for u in dom.endpoints(d))]
        if not order:
            avail = [d for d in avail if dom.is_vertex(d)]
        d = int(avail[int(rng.integers(len(avail)))])
        order.append(d)
        done.add(d)
    return DecisionTree.from_order(dom, order, "random")


def _find(parent: dict, x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def cluster_exploration_tree(domain, seeds, name: str = "exploration") -> DecisionTree:
    """Explore the open cluster of a vertex set, then finish lexicographically.

    Seeds are queried in order, then edges between open seeds. After that the
    tree queries any unrevealed internal edge joining the explored cluster C
    to an open revealed vertex, and otherwise the first unrevealed vertex
    adjacent to C. Once neither exists, C is the union of the clusters of the
    open seeds.
    """
    dom = Domain.of(domain)
    g = dom.graph
    nv = dom.n_vertices
    seeds = sorted({int(s) for s in seeds})
    if not seeds:
        raise ValueError("need at least one seed vertex")
    seedset = set(seeds)
    edges = [(int(u), int(v)) for u, v in g.edges]
    ring_edges = [e for e, (u, v) in enumerate(edges) if u in seedset and v in seedset]
    ptr, idx = g.csr
    nbrs = [idx[ptr[x]:ptr[x + 1]].tolist() for x in range(nv)]

    def rule(history, values):
        rev = dict(zip(history, values))
        for s in seeds:
            if s not in rev:
                return s
        for e in ring_edges:
            u, v = edges[e]
            if rev[u] and rev[v] and nv + e not in rev:
                return nv + e
        parent = {x: x for x in range(nv)}
        for e, (u, v) in enumerate(edges):
            if rev.get(nv + e) == 1 and rev.get(u) == 1 and rev.get(v) == 1:
                parent[_find(parent, u)] = _find(parent, v)
        roots = {_find(parent, s) for s in seeds if rev[s]}
        C = {x for x in range(nv) if rev.get(x) == 1 and _find(parent, x) in roots}
        for e, (u, v) in enumerate(edges):
            if nv + e in rev:
                continue
            if (u in C and rev.get(v) == 1) or (v in C and rev.get(u) == 1):
                return nv + e
        for x in range(nv):
            if x not in rev and any(y in C for y in nbrs[x]):
                return x
        for d in range(dom.size):
            if d not in rev:
                return d
        raise AdmissibilityError("every coordinate has been queried")

    return DecisionTree(dom, seeds[0], rule, name)


def _box_n(region: Region) -> int:
    shape = region.shape or {}
    if shape.get("shape") != "box":
        raise ValueError("exploration_tree needs a box region")
    return int(shape["n"])


def exploration_tree(region: Region, k: int) -> DecisionTree:
    """T(k) on Λ_n: explores the cluster of ∂Λ_k, which determines 1{0 <-> ∂Λ_n}."""
    n = _box_n(region)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    ring = np.nonzero(region.sup_norm() == k)[0]
    return cluster_exploration_tree(Domain.of(region), ring, f"T({k})")


def _determined(f, revealed: dict, n: int, increasing: bool, max_brute: int) -> bool:
    if increasing:
        lo = np.zeros(n, dtype=np.uint8)
        hi = np.ones(n, dtype=np.uint8)
        for d, v in revealed.items():
            lo[d] = hi[d] = v
        vals = np.asarray(f(np.stack([lo, hi])), dtype=float)
        return bool(vals[0] == vals[1])
    free = [d for d in range(n) if d not in revealed]
    if len(free) > max_brute:
        raise InstanceTooLarge("too many unrevealed coordinates for a brute-force check",
                               2.0 ** len(free))
    X = np.zeros((1 << len(free), n), dtype=np.uint8)
    for d, v in revealed.items():
        X[:, d] = v
    if free:
        X[:, free] = _bits(np.arange(1 << len(free)), len(free))
    vals = np.asarray(f(X), dtype=float)
    return bool(np.all(vals == vals[0]))


def run_decision_tree(tree: DecisionTree, eta, f, increasing: bool = True,
                      max_brute: int = 20) -> dict:
    """Query until f is constant on the revealed cylinder.

    For increasing f this compares f at the lowest and highest completions;
    otherwise all completions are tried. Returns the transcript and τ_f ≥ 1.
    """
    eta = np.asarray(eta, dtype=np.uint8)
    n = tree.domain.size
    if eta.shape != (n,):
        raise ValueError(f"configuration must have {n} coordinates")
    hist: list[int] = []
    vals: list[int] = []
    revealed: dict[int, int] = {}
    while True:
        d = tree.next_query(tuple(hist), tuple(vals))
        hist.append(d)
        vals.append(int(eta[d]))
        revealed[d] = int(eta[d])
        if _determined(f, revealed, n, increasing, max_brute):
            break
    return {"transcript": list(zip(hist, vals)), "tau": len(hist),
            "value": float(np.asarray(f(eta[None, :]))[0])}


# ---------------------------------------------------------------------------
# exact measures
# ---------------------------------------------------------------------------

@dataclass
class ExactMeasure:
    """A probability measure on {0,1}^D listed on its support (bitmask keys)."""

    domain: Domain
    keys: np.ndarray
    probs: np.ndarray
    name: str = "measure"

    def bits(self) -> np.ndarray:
        return _bits(self.keys, self.domain.size)

    def means(self) -> np.ndarray:
        return self.probs @ self.bits()


def rc_measure(instance, bc: BoundaryCondition, params: ModelParams) -> ExactMeasure:
    dom = Domain.of(instance)
    ens = rc_ensemble(dom.graph, bc, params)
    w = ens.probs()
    keep = w > 0
    tag = "tied" if params.tied else f"r={params.r:.6g}"
    return ExactMeasure(dom, ens.keys()[keep].astype(np.int64), w[keep],
                        f"rc(p={params.p:.6g}, a={params.a:.6g}, {tag}, {bc.label()})")


def product_measure(domain, q) -> ExactMeasure:
    dom = Domain.of(domain)
    n = dom.size
    q = np.broadcast_to(np.asarray(q, dtype=float), (n,))
    X = dom.all_configs()
    w = np.prod(np.where(X == 1, q, 1.0 - q), axis=1)
    keep = w > 0
    return ExactMeasure(dom, np.arange(1 << n, dtype=np.int64)[keep], w[keep], "product")


def revealments(measure: ExactMeasure, f, tree: DecisionTree) -> np.ndarray:
    """δ_d(f, T) for every d: the tree is followed on every support configuration.

    Configurations sharing a history are handled together, so the tree rule
    is called once per node of the explored tree. f must be increasing.
    """
    n = measure.domain.size
    tab = function_table(f, n)
    full = (1 << n) - 1
    keys, probs = measure.keys, measure.probs
    parts: list[list[float]] = [[] for _ in range(n)]
    stack = [((), (), np.arange(len(keys)))]
    while stack:
        hist, vals, idx = stack.pop()
        if hist:
            mask = sum(1 << d for d in hist)
            lo = sum(v << d for d, v in zip(hist, vals))
            if tab[lo] == tab[lo | (full & ~mask)]:
                m = math.fsum(probs[idx])
                for d in hist:
                    parts[d].append(m)
                continue
        d = tree.next_query(hist, vals)
        bit = (keys[idx] >> d) & 1
        for v in (1, 0):
            sub = idx[bit == v]
            if len(sub):
                stack.append((hist + (d,), vals + (v,), sub))
    return np.array([math.fsum(p) for p in parts])


@dataclass
class OsssResult:
    var: float
    rhs: float
    revealment: np.ndarray
    cov: np.ndarray
    holds: bool
    measure: str = ""
    tree: str = ""
    slack: float = SLACK

    @property
    def margin(self) -> float:
        return self.rhs - self.var

    def to_dict(self) -> dict:
        return {"measure": self.measure, "tree": self.tree, "var": self.var, "rhs": self.rhs,
                "margin": self.margin, "holds": self.holds,
                "max_revealment": float(self.revealment.max()) if len(self.revealment) else 0.0}


def osss_inequality_check(measure: ExactMeasure, f, tree: DecisionTree,
                          slack: float = SLACK) -> OsssResult:
    """Var(f) ≤ Σ_d δ_d(f, T) Cov(f, η_d) by full enumeration."""
    n = measure.domain.size
    if n > MAX_COORDS:
        raise InstanceTooLarge(f"{n} coordinates exceed the exact cap of {MAX_COORDS}", 2.0 ** n)
    tab = function_table(f, n)
    if tab.min() < 0 or tab.max() > 1 or not is_increasing(tab, n):
        raise ValueError("f must be increasing with values in [0, 1]")
    p = measure.probs
    fv = tab[measure.keys]
    Ef = float(p @ fv)
    c = fv - Ef
    var = float(p @ (c * c))
    cov = (p * c) @ measure.bits()
    delta = revealments(measure, tab, tree)
    rhs = float(math.fsum(delta * cov))
    return OsssResult(var, rhs, delta, cov, bool(var <= rhs + slack), measure.name, tree.name, slack)


def classical_osss_product(q, table: np.ndarray, order) -> tuple[float, float]:
    """Direct (Var, Σ δ_i Cov_i) for a product measure and a static order.

    Cov_i is q_i(1-q_i) times the expected discrete derivative, and τ is
    found by trying every completion. Meant for n ≤ 10 as a cross-check.
    """
    n = len(order)
    q = np.broadcast_to(np.asarray(q, dtype=float), (n,))
    configs = list(itertools.product((0, 1), repeat=n))
    weight = {}
    for x in configs:
        w = 1.0
        for i, b in enumerate(x):
            w *= q[i] if b else 1.0 - q[i]
        weight[x] = w
    val = {x: float(table[_key(x)]) for x in configs}
    mean = sum(weight[x] * val[x] for x in configs)
    var = sum(weight[x] * (val[x] - mean) ** 2 for x in configs)
    cov = []
    for i in range(n):
        d = sum(weight[x] * (val[x[:i] + (1,) + x[i + 1:]] - val[x[:i] + (0,) + x[i + 1:]])
                for x in configs)
        cov.append(q[i] * (1 - q[i]) * d)
    reveal = [0.0] * n
    for x in configs:
        for t in range(1, n + 1):
            fixed = order[:t]
            vals = {val[y] for y in configs if all(y[j] == x[j] for j in fixed)}
            if len(vals) == 1:
                break
        for j in order[:t]:
            reveal[j] += weight[x]
    return var, sum(r * c for r, c in zip(reveal, cov))


def estimate_revealment(tree: DecisionTree, configs: np.ndarray, f) -> np.ndarray:
    """Fraction of sampled configurations on which each coordinate is queried.

    An estimate of δ_d for domains too large to enumerate; f must be increasing.
    """
    n = tree.domain.size
    hits = np.zeros(n)
    for eta in np.asarray(configs, dtype=np.uint8):
        for d, _ in run_decision_tree(tree, eta, f)["transcript"]:
            hits[d] += 1
    return hits / max(1, len(configs))


# ---------------------------------------------------------------------------
# weak monotonicity
# ---------------------------------------------------------------------------

def _compress(keys: np.ndarray, coords) -> np.ndarray:
    out = np.zeros(len(keys), dtype=np.int64)
    for j, c in enumerate(coords):
        out |= ((keys >> c) & 1) << j
    return out


def check_weak_monotonicity(region, p: float, a: float, r: float,
                            bc: BoundaryCondition | None = None, slack: float = SLACK,
                            max_coords: int = MAX_WM_COORDS) -> ExactReport:
    """Exhaustive test of μ[η_{d0}=1 | η¹] ≤ μ[η_{d0}=1 | η²] for η¹ ≤ η².

    All U in U_Λ, all d0 and all comparable pairs of positive-probability
    patterns on U are covered: a running maximum over sub-patterns is
    compared with each pattern's own conditional probability.
    """
    bc = bc if bc is not None else BoundaryCondition.wired()
    dom = Domain.of(region)
    n = dom.size
    if n > max_coords:
        raise InstanceTooLarge(f"{n} coordinates exceed the cap of {max_coords}", 3.0 ** n)
    mu = rc_measure(dom, bc, ModelParams.rc(p, a, r))
    keys, probs = mu.keys, mu.probs
    B = mu.bits().astype(float)
    PB = probs[:, None] * B
    worst, viol, witness, n_sub = 0.0, 0, None, 0
    for U in dom.closed_subsets():
        n_sub += 1
        k = len(U)
        idx = _compress(keys, U)
        mass = np.bincount(idx, probs, 1 << k)
        top = np.stack([np.bincount(idx, PB[:, d], 1 << k) for d in range(n)], axis=1)
        pos = mass > 0
        cond = np.where(pos[:, None], top / np.where(pos, mass, 1.0)[:, None], -np.inf)
        M = cond.copy()
        for j in range(k):
            V = M.reshape(-1, 2, 1 << j, n)
            np.maximum(V[:, 1], V[:, 0], out=V[:, 1])
        excess = np.where(pos[:, None], M - cond, 0.0)
        bad = excess > slack
        viol += int(bad.sum())
        if excess.size:
            worst = max(worst, float(excess.max()))
        if witness is None and bad.any():
            hi, d0 = (int(v) for v in np.argwhere(bad)[0])
            lo = max((s for s in range(1 << k) if s & hi == s and pos[s]), key=lambda s: cond[s, d0])
            witness = {"U": [dom.label(c) for c in U], "eta1": [(lo >> j) & 1 for j in range(k)],
                       "eta2": [(hi >> j) & 1 for j in range(k)], "d0": dom.label(d0),
                       "p1": float(cond[lo, d0]), "p2": float(cond[hi, d0])}
    thr = weak_monotonicity_threshold(p)
    name = repr(region) if isinstance(region, Region) else f"domain(n={n})"
    return ExactReport("weak_monotonicity", name, worst, 0.0, viol, witness, slack, None,
                       {"p": p, "a": a, "r": r, "threshold": thr, "r_meets_threshold": r >= thr,
                        "subsets": n_sub, "bc": bc.label()})


# ---------------------------------------------------------------------------
# sharp threshold bound and derivative identities
# ---------------------------------------------------------------------------

def _params(p: float, a: float, r: float | None) -> ModelParams:
    return ModelParams.rc(p, a, r)


def _ring_sets(region: Region, n: int) -> dict:
    """For x in Λ_n and 1 ≤ k < n, the vertices of Λ at sup-distance k from x."""
    V = region.vertices
    out = {}
    for x in range(len(V)):
        dist = np.abs(V - V[x]).max(axis=1)
        for k in range(1, n):
            out[(x, k)] = np.nonzero(dist == k)[0].tolist()
    return out


def _q_from_labels(region: Region, n: int, bc, prm) -> float | None:
    """Second pass for Q_n through the full state list (None if too large)."""
    try:
        ens = rc_ensemble(region.graph, bc, prm)
    except InstanceTooLarge:
        return None
    w = ens.probs()
    lab = ens.labels[:, :region.n]
    V = region.vertices
    best = -np.inf
    for x in range(region.n):
        lx = lab[:, x]
        total = float(w @ (lx >= 0))
        dist = np.abs(V - V[x]).max(axis=1)
        for k in range(1, n):
            hit = np.zeros(len(w), dtype=bool)
            for y in np.nonzero(dist == k)[0]:
                hit |= (lx >= 0) & (lab[:, y] == lx)
            total += float(w @ hit)
        best = max(best, total)
    return best


def _q_second_pass(region: Region, n: int, bc, prm) -> float:
    q = _q_from_labels(region, n, bc, prm)
    if q is not None:
        return q
    rings = _ring_sets(region, n)
    ev = [([x], [x]) for x in range(region.n)]
    ev += [([x], rings[(x, k)]) for k in range(1, n) for x in range(region.n)]
    m = rc_connection_moments(region.graph, bc, prm, ev)["event"]
    tot = m[:region.n].copy()
    for j, (k, x) in enumerate((k, x) for k in range(1, n) for x in range(region.n)):
        tot[x] += m[region.n + j]
    return float(tot.max())


def derivative_identities(instance, bc: BoundaryCondition, p: float, a: float, r: float,
                          events: dict, h: float = FD_STEP, tol: float = FD_TOL) -> list[dict]:
    """Covariance formulas for ∂_p and ∂_a at fixed r against central differences.

    events maps a name to (S, T) node lists for the event S <-> T; ([x], [x])
    is the event ψ_x = 1.
    """
    g = Domain.of(instance).graph
    names = list(events)
    ev = [events[k] for k in names]
    base = rc_connection_moments(g, bc, _params(p, a, r), ev)
    nv = g.n
    bump = {}
    for key, (pp, aa) in {"p+": (p + h, a), "p-": (p - h, a), "a+": (p, a + h),
                          "a-": (p, a - h)}.items():
        bump[key] = rc_connection_moments(g, bc, _params(pp, aa, r), ev)["event"]
    rows = []
    for j, name in enumerate(names):
        cov = base["joint"][j] - base["event"][j] * base["eta"]
        dp = float(math.fsum(cov[nv:])) / (p * (1 - p))
        da = float(math.fsum(cov[:nv])) / (a * (1 - a))
        fdp = (bump["p+"][j] - bump["p-"][j]) / (2 * h)
        fda = (bump["a+"][j] - bump["a-"][j]) / (2 * h)
        rows.append({"event": name, "prob": float(base["event"][j]),
                     "dp_formula": dp, "dp_fd": float(fdp), "dp_err": abs(dp - fdp),
                     "da_formula": da, "da_fd": float(fda), "da_err": abs(da - fda),
                     "passed": bool(abs(dp - fdp) <= tol and abs(da - fda) <= tol)})
    return rows


def _mc_sharp(region: Region, n: int, d: int, bc, prm, plan) -> dict:
    dom = Domain.of(region)
    burn = plan.burn_in if plan.burn_in is not None else MC_BURN_IN
    spec = ChainSpec(RcTarget(region, bc, prm), (), plan.n_samples, burn, plan.thinning,
                     plan.n_chains, plan.seed)
    recs = collect_states(spec, burn_in=spec.burn_in)
    X = np.concatenate([np.concatenate([r.psi, r.omega], axis=1) for r in recs]).astype(np.uint8)
    o = int(np.argmin(region.sup_norm()))
    ring = np.nonzero(region.sup_norm() == n)[0]
    L = _labels(dom, X)
    f = np.zeros(len(X), dtype=bool)
    for t in ring:
        f |= (L[:, o] >= 0) & (L[:, o] == L[:, t])
    f = f.astype(float)
    cols = [f] + [X[:, j].astype(float) for j in range(dom.size)] + [f * X[:, j] for j in range(dom.size)]
    nd = dom.size
    V = region.vertices
    sums = np.zeros(region.n)
    for x in range(region.n):
        lx = L[:, x]
        sums[x] += float(np.mean(lx >= 0))
        dist = np.abs(V - V[x]).max(axis=1)
        for k in range(1, n):
            hit = np.zeros(len(X), dtype=bool)
            for y in np.nonzero(dist == k)[0]:
                hit |= (lx >= 0) & (L[:, y] == lx)
            sums[x] += float(hit.mean())
    Q = float(sums.max())
    theta = estimate(f, spec.burn_in, plan.seed, warn=False)
    cov_sum, cov_err = jackknife(lambda m: sum(m[1 + nd + j] - m[0] * m[1 + j] for j in range(nd)),
                                 cols)
    return {"theta": theta.mean, "theta_stderr": theta.stderr, "cov_sum": cov_sum,
            "cov_sum_stderr": cov_err, "Q_n": Q, "n_samples": len(X)}


def sharp_threshold_check(n: int, d: int, p: float, a: float, r: float | None = None,
                          bc: BoundaryCondition | None = None, mode: str = "exact",
                          derivatives: bool = True, plan=None, slack: float = SLACK,
                          h: float = FD_STEP, tol: float = FD_TOL) -> ExactReport:
    """Σ_d Cov(1{0<->∂Λ_n}, η_d) ≥ n θ(1-θ) / (4 d Q_n) on Λ_n.

    Exact mode also recomputes Q_n in a second pass and, if requested,
    checks the covariance formulas for the p- and a-derivatives of
    φ[0 <-> ∂Λ_n] and φ[ψ_0 = 1]. The k = 0 term of Q_n is μ[ψ_x = 1].
    Monte Carlo mode (tied or generalized r) reports estimates; the bound
    counts as violated only if it fails by more than two standard errors.
    """
    bc = bc if bc is not None else BoundaryCondition.wired()
    if bc.label() not in ("free", "wired"):
        raise ValueError("derivative identities need free or wired boundary conditions")
    if n < 1:
        raise ValueError("need n >= 1")
    region = box_region(n, d)
    prm = _params(p, a, r)
    r_used = prm.r
    o = int(np.argmin(region.sup_norm()))
    ring = np.nonzero(region.sup_norm() == n)[0].tolist()
    name = f"Lambda_{n}(d={d})"
    if mode == "mc":
        from .crossing import SamplingPlan
        res = _mc_sharp(region, n, d, bc, prm, plan or SamplingPlan())
        rhs = n / (4 * d * res["Q_n"]) * res["theta"] * (1 - res["theta"])
        gap = res["cov_sum"] - rhs
        viol = int(gap + 2 * res["cov_sum_stderr"] < 0)
        return ExactReport("sharp_threshold_mc", name, max(0.0, -gap), 0.0, viol, None, slack, None,
                           dict(res, rhs=rhs, slack_measured=gap, p=p, a=a, r=r_used))
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'mc'")
    rings = _ring_sets(region, n)
    ev = [([o], ring)] + [([x], [x]) for x in range(region.n)]
    pairs = [(x, k) for x in range(region.n) for k in range(1, n)]
    ev += [([x], rings[(x, k)]) for x, k in pairs]
    m = rc_connection_moments(region.graph, bc, prm, ev)
    theta = float(m["event"][0])
    cov = m["joint"][0] - theta * m["eta"]
    cov_sum = float(math.fsum(cov))
    sums = m["event"][1:1 + region.n].copy()
    for j, (x, k) in enumerate(pairs):
        sums[x] += m["event"][1 + region.n + j]
    Q = float(sums.max())
    Q2 = _q_second_pass(region, n, bc, prm)
    rhs = n / (4 * d * Q) * theta * (1 - theta)
    gap = cov_sum - rhs
    viol = int(gap < -slack) + int(abs(Q - Q2) > slack)
    errs = [max(0.0, -gap), abs(Q - Q2)]
    rows = []
    if derivatives:
        rows = derivative_identities(region, bc, p, a, r_used,
                                     {"0<->dLambda_n": ([o], ring), "psi_0=1": ([o], [o])}, h, tol)
        viol += sum(not row["passed"] for row in rows)
        errs += [row["dp_err"] for row in rows] + [row["da_err"] for row in rows]
    return ExactReport("sharp_threshold", name, max(errs), 0.0, viol, None, tol, None,
                       {"theta": theta, "cov_sum": cov_sum, "Q_n": Q, "Q_n_second_pass": Q2,
                        "rhs": rhs, "slack_measured": gap, "p": p, "a": a, "r": r_used,
                        "bc": bc.label(), "derivatives": rows})


def threshold_diagnostic(p0: float, a0: float, ns=(1, 2, 3), d: int = 1,
                         h: float = FD_STEP) -> list[dict]:
    """θ_n, S_n and both sides of θ'_n ≥ t n θ_n / S_n along a(p) = p/(p + c0(1-p)).

    μ_k is the wired measure on Λ_{2k} with r fixed at √(1-p0), and
    θ_k = μ_k[0 <-> ∂Λ_k]. θ'_n is the covariance sum over p(1-p); t is the
    ratio θ'_n S_n / (n θ_n), reported only.
    """
    c0 = p0 * (1 - a0) / ((1 - p0) * a0)
    r0 = math.sqrt(1 - p0)
    bc = BoundaryCondition.wired()

    def a_of(p):
        return p / (p + c0 * (1 - p))

    def theta(k, p, moments=False):
        region = box_region(2 * k, d)
        o = int(np.argmin(region.sup_norm()))
        T = np.nonzero(region.sup_norm() == k)[0].tolist()
        m = rc_connection_moments(region.graph, bc, _params(p, a_of(p), r0), [([o], T)])
        return m if moments else float(m["event"][0])

    kmax = max(ns)
    thetas = [theta(k, p0) for k in range(kmax + 1)]
    rows = []
    for k in ns:
        m = theta(k, p0, True)
        th = float(m["event"][0])
        cov = m["joint"][0] - th * m["eta"]
        deriv = float(math.fsum(cov)) / (p0 * (1 - p0))
        fd = (theta(k, p0 + h) - theta(k, p0 - h)) / (2 * h)
        S = float(sum(thetas[:k]))
        rows.append({"n": k, "theta": th, "S_n": S, "dtheta_formula": deriv, "dtheta_fd": fd,
                     "rhs_over_t": k * th / S if S > 0 else math.inf,
                     "t": deriv * S / (k * th) if th > 0 else math.inf})
    return rows
