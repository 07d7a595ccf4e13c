from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blumecapel.lattice import (Graph, Rect, Region, box_region, dual_edge, dual_point,
                                fixed_polyominoes, lift_graph, named_graph, polyomino_region,
                                primal_edge, rect_region, small_graphs)


def test_box_single_site():
    r = box_region(0, 2)
    assert r.n == 1
    assert len(r.boundary) == 4
    assert r.n_edge_vars == 4
    assert len(r.b_edges) == 0


def test_box_3x3_counts():
    r = box_region(1, 2)
    assert r.n == 9
    assert len(r.b_edges) == 12
    assert len(r.boundary_edges) == 12
    assert len(r.boundary) == 12


def test_box_path():
    r = box_region(1, 1)
    assert r.n == 3
    assert len(r.b_edges) == 2
    assert len(r.boundary_edges) == 2


@pytest.mark.parametrize("n,d", [(0, 1), (2, 1), (1, 3), (2, 2), (1, 4)])
def test_box_size_and_lexicographic_order(n, d):
    r = box_region(n, d)
    assert r.n == (2 * n + 1) ** d
    v = [tuple(x) for x in r.vertices.tolist()]
    assert v == sorted(v)


def test_box_rejects_bad_dimension():
    with pytest.raises(ValueError):
        box_region(1, 0)
    with pytest.raises(ValueError):
        box_region(-1, 2)
    with pytest.raises(ValueError):
        box_region(10 ** 6, 4)


def _check_region_invariants(r: Region):
    inside = {tuple(x) for x in r.vertices.tolist()}
    bnd = {tuple(x) for x in r.boundary.tolist()}
    assert not inside & bnd
    for b in bnd:
        assert any(sum(abs(p - q) for p, q in zip(b, v)) == 1 for v in inside)
    g = r.graph
    # every lattice edge touching the region appears exactly once
    count = 0
    for v in inside:
        for j in range(r.dim):
            for s in (1, -1):
                w = list(v)
                w[j] += s
                count += 1 if tuple(w) in inside else 2
    assert 2 * g.n_edges + 2 * len(g.boundary_edges) == count


@settings(max_examples=40, deadline=None)
@given(st.sets(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=12))
def test_region_invariants_random(cells):
    _check_region_invariants(Region(sorted(cells), 2))


def test_rect_sides():
    R = Rect(0, 3, 1, 2)
    assert R.side("B") == [(x, 1) for x in range(4)]
    assert R.side("T") == [(x, 2) for x in range(4)]
    assert R.side("L") == [(0, 1), (0, 2)]
    assert R.side("R") == [(3, 1), (3, 2)]
    perim = set(R.side("B")) | set(R.side("T")) | set(R.side("L")) | set(R.side("R"))
    assert perim == {(x, y) for x in range(4) for y in (1, 2)}
    assert R.inside(rect_region(-1, 4, 0, 3))
    assert not R.inside(rect_region(0, 2, 0, 3))
    with pytest.raises(ValueError):
        Rect(1, 0, 0, 0)


def test_dual_edge_geometry():
    f = dual_edge(((0, 0), (1, 0)))
    assert [dual_point(c) for c in f] == [(Fraction(1, 2), Fraction(-1, 2)),
                                          (Fraction(1, 2), Fraction(1, 2))]
    f = dual_edge(((0, 0), (0, 1)))
    assert [dual_point(c) for c in f] == [(Fraction(-1, 2), Fraction(1, 2)),
                                          (Fraction(1, 2), Fraction(1, 2))]


@given(st.integers(-5, 5), st.integers(-5, 5), st.booleans())
def test_dual_edge_involution(x, y, horizontal):
    e = ((x, y), (x + 1, y)) if horizontal else ((x, y), (x, y + 1))
    assert primal_edge(dual_edge(e)) == e


def test_dual_edge_rejects_non_neighbours():
    with pytest.raises(ValueError):
        dual_edge(((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        dual_edge(((0, 0, 0), (1, 0, 0)))


def test_lift_graph_examples():
    L = lift_graph(Graph.from_edges(1, []))
    assert L.n == 2 and len(L.e2) == 1 and len(L.e1) == 0
    L = lift_graph(Graph.from_edges(2, [(0, 1)]))
    assert L.n == 4 and len(L.e1) == 4 and len(L.e2) == 2
    L = lift_graph(rect_region(0, 1, 0, 1).graph)
    assert L.n == 8 and len(L.e1) == 16 and len(L.e2) == 4


@pytest.mark.parametrize("name", ["path5", "cycle4", "complete4", "star5"])
def test_lift_counts(name):
    g = named_graph(name)
    L = lift_graph(g)
    assert L.n == 2 * g.n
    assert len(L.e2) == g.n
    assert len(L.e1) == 4 * g.n_edges
    pairs = {tuple(sorted(e)) for e in L.e1.tolist()}
    for x, y in g.edges.tolist():
        assert {(2 * x + i, 2 * y + j) for i in (0, 1) for j in (0, 1)} <= pairs


def test_polyomino_counts():
    sizes = [len(p) for p in fixed_polyominoes(5)]
    assert [sizes.count(k) for k in range(1, 6)] == [1, 2, 6, 19, 63]
    r = polyomino_region(((0, 0), (1, 0), (1, 1)))
    assert r.n == 3 and r.graph.n_edges == 2


def test_small_graphs_counts():
    # graphs on 1..4 vertices up to isomorphism: 1 + 2 + 4 + 11
    assert len(small_graphs(4)) == 18


def test_region_json_round_trip():
    for r in (box_region(2, 2), rect_region(0, 3, 0, 1), Region([(0, 0), (0, 1), (5, 5)], 2)):
        r2 = Region.from_json(r.to_json())
        assert np.array_equal(r.vertices, r2.vertices)
        assert np.array_equal(r.graph.edges, r2.graph.edges)
