"""Configurations, parameters, boundary conditions and weights.

Spin side: Blume-Capel with log-weight

    -H(σ) = β Σ_{xy} σ_x σ_y + Δ Σ_x σ_x² + (boundary terms) + Σ_x h_x σ_x.

RC side: the dilute random-cluster weight

    Π_x (a/(1-a))^{ψ_x} Π_{e ∈ E_{ψ,Λ}} r_e (p_e/(1-p_e))^{ω_e} 2^{k(θ,Λ)}.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import Graph

LOG2 = math.log(2.0)


class Convention(str, enum.Enum):
    """How the vertex parameter a is tied to the crystal field Δ."""

    PAPER_A = "PaperA"          # a = 2e^Δ / (1 + 2e^Δ)
    ACTIVITY_E = "ActivityE"    # a = e^Δ / (1 + e^Δ), i.e. a/(1-a) = e^Δ


def _resolved() -> Convention:
    from .exact import resolved_convention
    return resolved_convention()


def a_from_delta(delta: float, convention: Convention | None = None) -> float:
    conv = Convention(convention) if convention is not None else _resolved()
    if delta == math.inf:
        return 1.0
    if delta == -math.inf:
        return 0.0
    c = 2.0 if conv is Convention.PAPER_A else 1.0
    # logistic of Δ + log c, written to stay finite for large |Δ|
    t = delta + math.log(c)
    return 1.0 / (1.0 + math.exp(-t)) if t >= 0 else math.exp(t) / (1.0 + math.exp(t))


def delta_from_a(a: float, convention: Convention | None = None) -> float:
    conv = Convention(convention) if convention is not None else _resolved()
    if not 0.0 <= a <= 1.0:
        raise ValueError("a must lie in [0, 1]")
    if a == 1.0:
        return math.inf
    if a == 0.0:
        return -math.inf
    c = 2.0 if conv is Convention.PAPER_A else 1.0
    return math.log(a / (1.0 - a)) - math.log(c)


def bc_to_rc_params(beta: float, delta: float,
                    convention: Convention | None = None) -> tuple[float, float, float]:
    """(β, Δ) -> (p, a, r) with p = 1 - e^{-2β}, r = √(1-p)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    p = -math.expm1(-2.0 * beta)
    r = math.exp(-beta)
    return p, a_from_delta(delta, convention), r


def rc_to_bc_params(p: float, a: float,
                    convention: Convention | None = None) -> tuple[float, float]:
    """Inverse of bc_to_rc_params."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return -0.5 * math.log1p(-p), delta_from_a(a, convention)


@dataclass(frozen=True)
class ModelParams:
    """Spin parameters (β, Δ) and RC parameters (p, a, r).

    When ``tied`` is true, r = √(1-p). Spin parameters are None for
    generalized-r measures that have no spin counterpart.
    """

    p: float
    a: float
    r: float
    tied: bool = True
    beta: float | None = None
    delta: float | None = None
    convention: Convention | None = None

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.a <= 1.0):
            raise ValueError("p and a must lie in [0, 1]")
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if self.tied and abs(self.r * self.r + self.p - 1.0) > 4e-16:
            raise ValueError("tied parameters require r^2 + p = 1")

    @classmethod
    def rc(cls, p: float, a: float, r: float | None = None) -> "ModelParams":
        if r is None:
            return cls(p, a, math.sqrt(1.0 - p), True)
        return cls(p, a, r, False)

    @classmethod
    def spin(cls, beta: float, delta: float,
             convention: Convention | None = None) -> "ModelParams":
        conv = Convention(convention) if convention is not None else _resolved()
        p, a, _ = bc_to_rc_params(beta, delta, conv)
        return cls(p, a, math.sqrt(1.0 - p), True, beta, delta, conv)

    def spin_params(self, convention: Convention | None = None) -> tuple[float, float]:
        if self.beta is not None:
            return self.beta, self.delta
        if not self.tied:
            raise ValueError("generalized-r measures have no spin representation")
        if self.p == 0.0:
            return 0.0, delta_from_a(self.a, convention or self.convention)
        return rc_to_bc_params(self.p, self.a, convention or self.convention)

    def as_dict(self) -> dict:
        d = {"p": self.p, "a": self.a, "r": self.r, "tied": self.tied}
        if self.beta is not None:
            d.update(beta=self.beta, delta=self.delta)
        if self.convention is not None:
            d["convention"] = Convention(self.convention).value
        return d


@dataclass
class ComplexField:
    """Per-vertex complex field h."""

    h: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)

    def in_cone(self) -> np.ndarray:
        return self.h.real >= np.abs(self.h.imag)

    @classmethod
    def uniform(cls, n: int, h: complex) -> "ComplexField":
        return cls(np.full(n, h, dtype=complex))

    @classmethod
    def two_parameter(cls, graph: Graph, origin: int, eta: complex, h: complex) -> "ComplexField":
        """Field η at the origin and h times the number of boundary edges elsewhere."""
        nb = graph.boundary_edge_count().astype(complex)
        f = h * nb
        f[origin] = eta
        return cls(f)


@dataclass(frozen=True)
class RcBoundary:
    open: np.ndarray
    classes: np.ndarray
    log_odds: np.ndarray | None
    log_r: np.ndarray | None
    forced_closed: np.ndarray


@dataclass(frozen=True)
class BoundaryCondition:
    """Finite encoding of a boundary condition.

    kind is one of free, wired, minus, eps, delta, explicit. ``wired`` is the
    plus condition on the spin side. ``explicit`` carries per-boundary-vertex
    spins or open flags, a wiring class per open vertex and a set of boundary
    edges forced closed.
    """

    kind: str
    eps: float = 0.0
    delta: float = 0.0
    spins: tuple | None = None
    open: tuple | None = None
    classes: tuple | None = None
    closed_edges: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("free", "wired", "minus", "eps", "delta", "explicit"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "delta" and not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def free(cls) -> "BoundaryCondition":
        return cls("free")

    @classmethod
    def wired(cls) -> "BoundaryCondition":
        return cls("wired")

    plus = wired

    @classmethod
    def minus(cls) -> "BoundaryCondition":
        return cls("minus")

    @classmethod
    def eps_field(cls, eps: float) -> "BoundaryCondition":
        return cls("eps", eps=float(eps))

    @classmethod
    def delta_wired(cls, delta: float) -> "BoundaryCondition":
        return cls("delta", delta=float(delta))

    @classmethod
    def explicit_spins(cls, spins) -> "BoundaryCondition":
        s = tuple(int(x) for x in spins)
        if any(x not in (-1, 0, 1) for x in s):
            raise ValueError("boundary spins must be in {-1, 0, 1}")
        cl = tuple(0 if x == 1 else (1 if x == -1 else -1) for x in s)
        return cls("explicit", spins=s, open=tuple(x != 0 for x in s), classes=cl)

    @classmethod
    def explicit_rc(cls, open_, classes=None, closed_edges=()) -> "BoundaryCondition":
        o = tuple(bool(x) for x in open_)
        if classes is None:
            classes = tuple(i if x else -1 for i, x in enumerate(o))
        cl = tuple(int(c) if o[i] else -1 for i, c in enumerate(classes))
        return cls("explicit", open=o, classes=cl, closed_edges=tuple(sorted(int(e) for e in closed_edges)))

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        """Parse free | wired | plus | minus | eps:<ε> | delta:<δ>."""
        t = text.strip().lower()
        if t in ("free", "0"):
            return cls.free()
        if t in ("wired", "plus", "+", "1"):
            return cls.wired()
        if t in ("minus", "-"):
            return cls.minus()
        if t.startswith("eps:"):
            return cls.eps_field(float(t[4:]))
        if t.startswith("delta:"):
            return cls.delta_wired(float(t[6:]))
        raise ValueError(f"cannot parse boundary condition {text!r}")

    def label(self) -> str:
        if self.kind == "eps":
            return f"eps:{self.eps!r}"
        if self.kind == "delta":
            return f"delta:{self.delta!r}"
        return self.kind

    # -- spin side -----------------------------------------------------------

    def boundary_spins(self, graph: Graph) -> np.ndarray:
        nb = graph.n_boundary
        if self.kind == "free":
            return np.zeros(nb, dtype=np.int64)
        if self.kind in ("wired", "eps", "delta"):
            return np.ones(nb, dtype=np.int64)
        if self.kind == "minus":
            return -np.ones(nb, dtype=np.int64)
        if self.spins is None:
            raise ValueError("explicit boundary condition carries no spins")
        if len(self.spins) != nb:
            raise ValueError("boundary spins do not match the graph")
        return np.asarray(self.spins, dtype=np.int64)

    def boundary_couplings(self, graph: Graph, beta: float) -> tuple[np.ndarray, np.ndarray]:
        """Per boundary edge coupling J_e and boundary spin η_e.

        The boundary contribution to -H is Σ_e J_e σ_x η_e.
        """
        be = graph.boundary_edges
        eta = self.boundary_spins(graph)[be[:, 1]] if len(be) else np.zeros(0, dtype=np.int64)
        if self.kind == "eps":
            J = np.full(len(be), self.eps)
        elif self.kind == "delta":
            J = np.full(len(be), -0.5 * math.log1p(-self.delta))
        else:
            J = np.full(len(be), float(beta))
        if self.closed_edges:
            raise ValueError("forced-closed boundary edges have no spin counterpart")
        return J, eta

    # -- RC side ---------------------------------------------------------------

    def rc_boundary(self, graph: Graph) -> RcBoundary:
        nb = graph.n_boundary
        ne = graph.n_edge_vars
        nint = graph.n_edges
        log_odds = log_r = None
        forced = np.zeros(ne, dtype=bool)
        if self.kind == "free":
            op = np.zeros(nb, dtype=bool)
            cl = -np.ones(nb, dtype=np.int64)
        elif self.kind in ("wired", "minus", "eps", "delta"):
            op = np.ones(nb, dtype=bool)
            cl = np.zeros(nb, dtype=np.int64)
            if self.kind in ("eps", "delta"):
                d = self.delta if self.kind == "delta" else -math.expm1(-2.0 * self.eps)
                log_odds = np.full(ne, np.nan)
                log_r = np.full(ne, np.nan)
                log_odds[nint:] = math.log(d) - math.log1p(-d)
                log_r[nint:] = 0.5 * math.log1p(-d)
        else:
            if self.open is None or len(self.open) != nb:
                raise ValueError("explicit boundary condition does not match the graph")
            op = np.asarray(self.open, dtype=bool)
            cl = np.asarray(self.classes, dtype=np.int64)
            for e in self.closed_edges:
                forced[nint + e] = True
        return RcBoundary(op, cl, log_odds, log_r, forced)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "eps":
            d["eps"] = self.eps
        if self.kind == "delta":
            d["delta"] = self.delta
        if self.kind == "explicit":
            d.update(spins=self.spins, open=self.open, classes=self.classes,
                     closed_edges=list(self.closed_edges))
        return d


@dataclass
class SpinConfig:
    """Interior spins plus the boundary spins prescribed by a condition."""

    interior: np.ndarray
    boundary: np.ndarray

    @classmethod
    def build(cls, graph: Graph, sigma, bc: BoundaryCondition) -> "SpinConfig":
        s = np.asarray(sigma, dtype=np.int64)
        if s.shape != (graph.n,) or np.any(np.abs(s) > 1):
            raise ValueError("spins must be a vector in {-1,0,1}^n")
        return cls(s, bc.boundary_spins(graph))


@dataclass
class RcConfig:
    """θ = (ψ, ω) on interior vertices and the edge variables E_Λ."""

    psi: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.uint8)
        self.omega = np.asarray(self.omega, dtype=np.uint8)


def bc_energy(graph: Graph, sigma, bc: BoundaryCondition, beta: float, delta: float,
              field: ComplexField | np.ndarray | None = None) -> complex | float:
    """-H(σ): the log-weight of σ including boundary and field terms."""
    s = np.asarray(sigma, dtype=np.int64)
    if s.shape != (graph.n,):
        raise ValueError("sigma must cover the interior vertices")
    e = graph.edges
    val = float(beta) * float(np.sum(s[e[:, 0]] * s[e[:, 1]])) if len(e) else 0.0
    if delta == math.inf:
        if np.any(s == 0):
            return -math.inf
    else:
        val += float(delta) * float(np.sum(s * s))
    if graph.n_boundary:
        J, eta = bc.boundary_couplings(graph, beta)
        be = graph.boundary_edges
        val += float(np.sum(J * s[be[:, 0]] * eta))
    if field is not None:
        h = field.h if isinstance(field, ComplexField) else np.asarray(field, dtype=complex)
        return complex(val) + complex(np.sum(h * s))
    return val


def _components(n_nodes: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    g = coo_matrix((np.ones(len(u)), (u, v)), shape=(n_nodes, n_nodes))
    return connected_components(g, directed=False)[1]


def _full_psi(graph: Graph, psi, bc: BoundaryCondition | None) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.int64)
    if len(psi) == graph.n + graph.n_boundary:
        return psi
    if len(psi) != graph.n:
        raise ValueError("psi has the wrong length")
    bnd = np.zeros(graph.n_boundary, dtype=np.int64) if bc is None else \
        bc.rc_boundary(graph).open.astype(np.int64)
    return np.concatenate([psi, bnd])


def is_compatible(psi, omega, graph: Graph, bc: BoundaryCondition | None = None) -> bool:
    """True iff no open edge has a closed endpoint."""
    full = _full_psi(graph, psi, bc)
    om = np.asarray(omega, dtype=np.int64)
    if len(om) != graph.n_edge_vars:
        raise ValueError("omega has the wrong length")
    ep = graph.endpoints()
    bad = (om == 1) & ((full[ep[:, 0]] == 0) | (full[ep[:, 1]] == 0))
    if bc is not None and bc.closed_edges:
        forced = bc.rc_boundary(graph).forced_closed
        bad |= (om == 1) & forced
    return not bool(np.any(bad))


def cluster_count(graph: Graph, psi, omega, bc: BoundaryCondition) -> int:
    """k(θ, Λ): clusters of open vertices meeting Λ ∪ ∂Λ, wiring classes merged."""
    if not is_compatible(psi, omega, graph, bc):
        raise ValueError("incompatible configuration")
    rb = bc.rc_boundary(graph)
    full = _full_psi(graph, psi, bc)
    n, nb = graph.n, graph.n_boundary
    ncls = int(rb.classes.max()) + 1 if nb and rb.classes.max() >= 0 else 0
    ep = graph.endpoints()
    om = np.asarray(omega, dtype=bool)
    u = list(ep[om, 0])
    v = list(ep[om, 1])
    for b in range(nb):
        if rb.open[b] and rb.classes[b] >= 0:
            u.append(n + b)
            v.append(n + nb + rb.classes[b])
    lab = _components(n + nb + ncls, np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64))
    open_nodes = np.nonzero(full == 1)[0]
    return int(len(np.unique(lab[open_nodes])))


def rc_log_weight(graph: Graph, psi, omega, bc: BoundaryCondition, params: ModelParams) -> float:
    """Natural log of the dilute RC weight."""
    p, a, r = params.p, params.a, params.r
    if a in (0.0, 1.0) or p in (0.0, 1.0):
        raise ValueError("degenerate parameters: use the product-measure conventions instead")
    k = cluster_count(graph, psi, omega, bc)
    rb = bc.rc_boundary(graph)
    full = _full_psi(graph, psi, bc)
    ep = graph.endpoints()
    om = np.asarray(omega, dtype=np.int64)
    ne = graph.n_edge_vars
    lo = np.full(ne, math.log(p) - math.log1p(-p))
    lr = np.full(ne, math.log(r))
    if rb.log_odds is not None:
        m = ~np.isnan(rb.log_odds)
        lo[m] = rb.log_odds[m]
        lr[m] = rb.log_r[m]
    in_psi = (full[ep[:, 0]] == 1) & (full[ep[:, 1]] == 1)
    val = float(np.sum(np.asarray(psi[:graph.n]))) * (math.log(a) - math.log1p(-a))
    val += float(np.sum(lr[in_psi])) + float(np.sum(lo[om == 1])) + k * LOG2
    return val


def rc_weight(graph: Graph, psi, omega, bc: BoundaryCondition, params: ModelParams) -> float:
    return math.exp(rc_log_weight(graph, psi, omega, bc, params))


def dump_config(region_json: str, bc: BoundaryCondition, params: ModelParams,
                psi=None, omega=None, sigma=None, convention: Convention | None = None) -> str:
    """Serialize a configuration: one JSON header line, then bitstrings."""
    head = {"region": json.loads(region_json), "bc": bc.to_dict(), "params": params.as_dict(),
            "convention": Convention(convention).value if convention else None}
    lines = [json.dumps(head, sort_keys=True)]
    if psi is not None:
        lines.append("psi " + "".join("1" if x else "0" for x in psi))
    if omega is not None:
        lines.append("omega " + "".join("1" if x else "0" for x in omega))
    if sigma is not None:
        lines.append("sigma " + "".join({-1: "-", 0: "0", 1: "+"}[int(x)] for x in sigma))
    return "\n".join(lines) + "\n"


def load_config(text: str) -> tuple[dict, dict]:
    """Inverse of dump_config: (header, {name: array})."""
    lines = text.strip().splitlines()
    head = json.loads(lines[0])
    data = {}
    for ln in lines[1:]:
        name, bits = ln.split(" ", 1)
        if name == "sigma":
            data[name] = np.array([{"-": -1, "0": 0, "+": 1}[c] for c in bits], dtype=np.int64)
        else:
            data[name] = np.array([int(c) for c in bits], dtype=np.uint8)
    return head, data
