"""Finite regions of Z^d, their boundaries, the planar dual and the lifted graph."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

MAX_DIM = 4
MAX_VERTICES = 2**31


@dataclass(frozen=True)
class Graph:
    """Index-level view of a finite graph with an optional fixed boundary.

    Interior vertices are 0..n-1. ``edges`` are internal edges (both ends
    interior). ``boundary_edges`` are pairs (interior index, boundary index)
    with boundary indices in 0..n_boundary-1. Edge variables of the dilute RC
    model are ordered as internal edges followed by boundary edges.
    """

    n: int
    edges: np.ndarray
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    n_boundary: int = 0

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        b = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= self.n or np.any(e[:, 0] == e[:, 1])):
            raise ValueError("malformed internal edge list")
        if len(b) and (b[:, 0].min() < 0 or b[:, 0].max() >= self.n
                       or b[:, 1].min() < 0 or b[:, 1].max() >= self.n_boundary):
            raise ValueError("malformed boundary edge list")
        e.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "boundary_edges", b)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_edge_vars(self) -> int:
        return len(self.edges) + len(self.boundary_edges)

    @cached_property
    def degree(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        np.add.at(d, self.edges.ravel(), 1)
        return d

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Interior adjacency as (indptr, indices), neighbours sorted."""
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(ptr, src + 1, 1)
        return np.cumsum(ptr), dst.astype(np.int64)

    def endpoints(self) -> np.ndarray:
        """All edge variables as (u, v) with v >= n meaning boundary vertex v - n."""
        b = self.boundary_edges.copy()
        b[:, 1] += self.n
        return np.concatenate([self.edges, b]).astype(np.int64)

    def boundary_edge_count(self) -> np.ndarray:
        c = np.zeros(self.n, dtype=np.int64)
        np.add.at(c, self.boundary_edges[:, 0], 1)
        return c

    @classmethod
    def from_edges(cls, n: int, edges, pendant: int = 0) -> "Graph":
        """Graph on n vertices; optionally give every vertex ``pendant - deg`` boundary edges."""
        e = np.asarray(sorted(tuple(sorted(map(int, x))) for x in edges), dtype=np.int64).reshape(-1, 2)
        if len({tuple(x) for x in e}) != len(e):
            raise ValueError("graph must be simple")
        g = cls(n, e)
        if pendant <= 0:
            return g
        bnd = []
        for x in range(n):
            for _ in range(max(0, pendant - int(g.degree[x]))):
                bnd.append((x, len(bnd)))
        return cls(n, e, np.asarray(bnd, dtype=np.int64).reshape(-1, 2), len(bnd))


def _encode(coords: np.ndarray, off: int, base: int) -> np.ndarray:
    key = np.zeros(len(coords), dtype=np.int64)
    for j in range(coords.shape[1]):
        key = key * base + (coords[:, j] + off)
    return key


class Region:
    """A finite set of vertices of Z^d with derived boundary and edge sets.

    Vertices are stored in lexicographic order. Boundary edges are ordered by
    (interior index, boundary index).
    """

    def __init__(self, vertices, dim: int | None = None, shape: dict | None = None):
        v = np.asarray(vertices, dtype=np.int64)
        if v.ndim == 1:
            v = v.reshape(-1, 1) if dim in (None, 1) else v.reshape(-1, dim)
        if dim is None:
            dim = v.shape[1]
        if dim < 1 or dim > MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {dim}")
        if v.shape[1] != dim:
            raise ValueError("vertex coordinates do not match dim")
        if len(v) == 0:
            raise ValueError("empty region")
        if len(v) >= MAX_VERTICES:
            raise ValueError("region too large for the index type")
        v = np.unique(v, axis=0)
        self.dim = dim
        self.vertices = v
        self.shape = shape
        self.vertices.setflags(write=False)
        self._build()

    def _build(self):
        v, d = self.vertices, self.dim
        self._off = int(-v.min()) + 2
        self._base = int(v.max()) + self._off + 3
        keys = _encode(v, self._off, self._base)
        self._keys = keys
        nbr_in, nbr_out = [], []
        for j in range(d):
            step = np.zeros(d, dtype=np.int64)
            step[j] = 1
            for s in (1, -1):
                w = v + s * step
                idx = self._lookup(w)
                inside = idx >= 0
                if s == 1:
                    nbr_in.append(np.stack([np.nonzero(inside)[0], idx[inside]], axis=1))
                out = np.nonzero(~inside)[0]
                nbr_out.append((out, w[~inside]))
        e = np.concatenate(nbr_in) if nbr_in else np.zeros((0, 2), dtype=np.int64)
        e = e[np.lexsort((e[:, 1], e[:, 0]))]
        src = np.concatenate([o[0] for o in nbr_out])
        ext = np.concatenate([o[1] for o in nbr_out])
        bverts, binv = np.unique(ext, axis=0, return_inverse=True)
        binv = np.asarray(binv).ravel()
        be = np.stack([src, binv], axis=1).astype(np.int64)
        be = be[np.lexsort((be[:, 1], be[:, 0]))]
        self.boundary = bverts
        self.boundary.setflags(write=False)
        self.graph = Graph(len(v), e, be, len(bverts))

    def _lookup(self, coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        ok = np.all((coords + self._off >= 0) & (coords + self._off < self._base), axis=1)
        keys = _encode(np.where(ok[:, None], coords, 0), self._off, self._base)
        pos = np.searchsorted(self._keys, keys)
        pos = np.clip(pos, 0, len(self._keys) - 1)
        hit = ok & (self._keys[pos] == keys)
        return np.where(hit, pos, -1)

    def index(self, x) -> int:
        i = int(self._lookup(np.asarray(x).reshape(1, -1))[0])
        if i < 0:
            raise KeyError(f"{tuple(x)} not in region")
        return i

    def boundary_index(self, x) -> int:
        hit = np.nonzero(np.all(self.boundary == np.asarray(x), axis=1))[0]
        if len(hit) == 0:
            raise KeyError(f"{tuple(x)} not on the boundary")
        return int(hit[0])

    def contains(self, x) -> bool:
        return int(self._lookup(np.asarray(x).reshape(1, -1))[0]) >= 0

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        if self.shape is not None:
            return f"Region({self.shape})"
        return f"Region(dim={self.dim}, |V|={len(self)})"

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def b_edges(self) -> np.ndarray:
        """Induced edges b(Λ) as index pairs."""
        return self.graph.edges

    @property
    def boundary_edges(self) -> np.ndarray:
        """Edges of ∂_E Λ as (interior index, boundary index)."""
        return self.graph.boundary_edges

    @property
    def n_edge_vars(self) -> int:
        return self.graph.n_edge_vars

    def edge_coords(self, e: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Coordinates of edge variable e (internal edges first)."""
        ne = self.graph.n_edges
        if e < ne:
            u, w = self.graph.edges[e]
            return tuple(self.vertices[u]), tuple(self.vertices[w])
        u, b = self.graph.boundary_edges[e - ne]
        return tuple(self.vertices[u]), tuple(self.boundary[b])

    def sup_norm(self) -> np.ndarray:
        return np.abs(self.vertices).max(axis=1)

    def to_json(self) -> str:
        if self.shape is not None:
            return json.dumps(self.shape)
        return json.dumps({"dim": self.dim, "vertices": self.vertices.tolist()})

    @classmethod
    def from_json(cls, doc) -> "Region":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if doc.get("shape") == "box":
            return box_region(int(doc["n"]), int(doc["dim"]))
        if doc.get("shape") == "rect":
            return rect_region(*doc["corners"])
        return cls(doc["vertices"], int(doc["dim"]))


def box_region(n: int, d: int) -> Region:
    """The box Λ_n = [-n, n]^d."""
    if d < 1 or d > MAX_DIM:
        raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {d}")
    if n < 0:
        raise ValueError("n must be non-negative")
    if (2 * n + 1) ** d >= MAX_VERTICES:
        raise ValueError("box too large for the index type")
    axes = [np.arange(-n, n + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return Region(grid, d, shape={"dim": d, "shape": "box", "n": n})


def rect_region(a: int, b: int, c: int, d: int) -> Region:
    """The rectangle [a,b]x[c,d] of Z^2 as a region."""
    if b < a or d < c:
        raise ValueError("empty rectangle")
    xs, ys = np.meshgrid(np.arange(a, b + 1), np.arange(c, d + 1), indexing="ij")
    return Region(np.stack([xs.ravel(), ys.ravel()], axis=1), 2,
                  shape={"dim": 2, "shape": "rect", "corners": [a, b, c, d]})


@dataclass(frozen=True)
class Rect:
    """Rectangle [a,b]x[c,d] of Z^2 with sides B, T, L, R."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.b < self.a or self.d < self.c:
            raise ValueError("empty rectangle")

    def side(self, name: str) -> list[tuple[int, int]]:
        if name == "B":
            return [(x, self.c) for x in range(self.a, self.b + 1)]
        if name == "T":
            return [(x, self.d) for x in range(self.a, self.b + 1)]
        if name == "L":
            return [(self.a, y) for y in range(self.c, self.d + 1)]
        if name == "R":
            return [(self.b, y) for y in range(self.c, self.d + 1)]
        raise ValueError(name)

    @property
    def width(self) -> int:
        return self.b - self.a

    @property
    def height(self) -> int:
        return self.d - self.c

    def vertices(self) -> list[tuple[int, int]]:
        return [(x, y) for x in range(self.a, self.b + 1) for y in range(self.c, self.d + 1)]

    def inside(self, region: Region) -> bool:
        if region.dim != 2:
            return False
        pts = np.array([(self.a, self.c), (self.a, self.d), (self.b, self.c), (self.b, self.d)])
        if np.any(region._lookup(pts) < 0):
            return False
        return bool(np.all(region._lookup(np.array(self.vertices())) >= 0))

    @classmethod
    def box(cls, n: int) -> "Rect":
        return cls(-n, n, -n, n)


def _check_nn(e) -> tuple[tuple[int, int], tuple[int, int]]:
    u, v = (tuple(int(t) for t in x) for x in e)
    if len(u) != 2 or len(v) != 2:
        raise ValueError("dual edges exist only in d=2")
    if abs(u[0] - v[0]) + abs(u[1] - v[1]) != 1:
        raise ValueError(f"{e} is not a nearest-neighbour edge")
    return (u, v) if u < v else (v, u)


def dual_edge(e) -> tuple[tuple[int, int], tuple[int, int]]:
    """Dual edge crossing the primal edge e.

    Dual sites are written as the integer cell (x, y) standing for
    (x + 1/2, y + 1/2).
    """
    (x, y), (x2, y2) = _check_nn(e)
    if y2 == y:
        return (x, y - 1), (x, y)
    return (x - 1, y), (x, y)


def primal_edge(f) -> tuple[tuple[int, int], tuple[int, int]]:
    """Inverse of dual_edge: the primal edge crossed by the dual edge f."""
    (x, y), (x2, y2) = _check_nn(f)
    if x2 == x:
        return (x, y + 1), (x + 1, y + 1)
    return (x + 1, y), (x + 1, y + 1)


def dual_point(cell) -> tuple[Fraction, Fraction]:
    """Half-integer coordinates of a dual cell."""
    return Fraction(2 * cell[0] + 1, 2), Fraction(2 * cell[1] + 1, 2)


@dataclass(frozen=True)
class EnlargedGraph:
    """The lift ℓ(G): vertices (x, i) -> 2x + i, edges labelled E1 or E2."""

    base: Graph
    e1: np.ndarray
    e2: np.ndarray
    boundary_edges: np.ndarray

    @property
    def n(self) -> int:
        return 2 * self.base.n

    @property
    def n_boundary(self) -> int:
        return 2 * self.base.n_boundary


def lift_graph(g: Graph) -> EnlargedGraph:
    """Lift G to ℓ(G) = (V x {0,1}, E1 ∪ E2).

    Each base edge xy gives the four edges {(x,i),(y,j)}; each vertex gives
    the rung {(x,0),(x,1)}. Boundary edges are lifted the same way.
    """
    e1 = [(2 * x + i, 2 * y + j) for x, y in g.edges for i in (0, 1) for j in (0, 1)]
    e2 = [(2 * x, 2 * x + 1) for x in range(g.n)]
    be = [(2 * x + i, 2 * b + j) for x, b in g.boundary_edges for i in (0, 1) for j in (0, 1)]
    return EnlargedGraph(
        g,
        np.asarray(e1, dtype=np.int64).reshape(-1, 2),
        np.asarray(e2, dtype=np.int64).reshape(-1, 2),
        np.asarray(be, dtype=np.int64).reshape(-1, 2),
    )


def fixed_polyominoes(max_size: int) -> list[tuple[tuple[int, int], ...]]:
    """All connected subsets of Z^2 with at most max_size cells, up to translation."""
    def norm(cells):
        mx = min(c[0] for c in cells)
        my = min(c[1] for c in cells)
        return tuple(sorted((c[0] - mx, c[1] - my) for c in cells))

    level = {((0, 0),)}
    out = sorted(level)
    for _ in range(max_size - 1):
        nxt = set()
        for p in level:
            ps = set(p)
            for (x, y) in p:
                for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    c = (x + dx, y + dy)
                    if c not in ps:
                        nxt.add(norm(ps | {c}))
        level = nxt
        out.extend(sorted(level))
    return out


def polyomino_region(cells) -> Region:
    """Region of a polyomino, translated so that its first cell is the origin."""
    cells = sorted(cells)
    x0, y0 = cells[0]
    return Region([(x - x0, y - y0) for x, y in cells], 2)


def small_graphs(max_vertices: int) -> list[tuple[str, Graph]]:
    """All simple graphs on 1..max_vertices vertices up to isomorphism."""
    import networkx as nx

    if max_vertices > 7:
        raise ValueError("the graph atlas stops at 7 vertices")
    out = []
    for i, g in enumerate(nx.graph_atlas_g()):
        if 1 <= g.number_of_nodes() <= max_vertices:
            out.append((f"atlas{i}", Graph.from_edges(g.number_of_nodes(), list(g.edges()))))
    return out


def named_graph(name: str) -> Graph:
    """Small named graphs: pathN, cycleN, completeN, starN, gridAxB."""
    import re

    m = re.fullmatch(r"(path|cycle|complete|star)(\d+)", name)
    if m:
        kind, k = m.group(1), int(m.group(2))
        if kind == "path":
            e = [(i, i + 1) for i in range(k - 1)]
        elif kind == "cycle":
            e = [(i, (i + 1) % k) for i in range(k)] if k > 2 else [(i, i + 1) for i in range(k - 1)]
        elif kind == "complete":
            e = list(itertools.combinations(range(k), 2))
        else:
            e = [(0, i) for i in range(1, k)]
        return Graph.from_edges(k, e)
    m = re.fullmatch(r"grid(\d+)x(\d+)", name)
    if m:
        r = rect_region(0, int(m.group(1)) - 1, 0, int(m.group(2)) - 1)
        return Graph(r.n, r.graph.edges)
    raise ValueError(f"unknown graph name {name!r}")
