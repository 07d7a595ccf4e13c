import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blumecapel.lattice import Graph, named_graph
from blumecapel.leeyang import (LOG4, ConeGrid, SiteClass, complex_event_partition, cone_scan,
                                decoupled_square_check, site_factor, value_set,
                                verify_site_factor_identity)
from blumecapel.model import ComplexField

SITE = Graph.from_edges(1, [])


def pair_sum(n, n2, delta, cls):
    """Σ over spin pairs (σ, σ') of ν^n conj(ν)^{n'} e^{Δ(σ²+σ'²)}, ν = e^{-iπ/4}(σ + iσ')."""
    vals = (-1, 1) if cls == SiteClass.ISING else (-1, 0, 1)
    rot = cmath.exp(-0.25j * math.pi)
    tot = 0j
    for s, t in itertools.product(vals, repeat=2):
        nu = rot * complex(s, t)
        tot += nu ** n * nu.conjugate() ** n2 * math.exp(delta * (s * s + t * t))
    return tot


def test_value_sets():
    ising, bc = value_set(SiteClass.ISING), value_set(SiteClass.BC)
    assert len(ising) == 4 and len(bc) == 9
    assert np.allclose(np.abs(ising) ** 2, 2.0)
    assert set(np.round(np.abs(bc) ** 2, 12)) == {0.0, 1.0, 2.0}


def test_site_factor_examples():
    assert site_factor(0, 0, 0.0, SiteClass.ISING) == 4
    assert site_factor(4, 0, -LOG4, SiteClass.BC) == 0
    assert site_factor(2, 2, -LOG4, SiteClass.BC).real == pytest.approx(2.0, abs=1e-15)
    assert site_factor(1, 0, 0.3, SiteClass.BC) == 0
    with pytest.raises(ValueError):
        site_factor(-1, 0, 0.0, SiteClass.BC)


@settings(max_examples=80)
@given(st.integers(0, 10), st.integers(0, 10), st.floats(-2.0, 1.0), st.sampled_from(list(SiteClass)))
def test_site_factor_against_spin_pairs(n, n2, delta, cls):
    ref = pair_sum(n, n2, delta, cls)
    scale = sum(abs(x) for x in [ref]) + 2.0 ** ((n + n2) / 2) * 9 * math.exp(2 * max(delta, 0))
    assert abs(site_factor(n, n2, delta, cls) - ref) <= 1e-12 * scale


def test_identity_report():
    reps = verify_site_factor_identity(8, (-LOG4, -1.0, 0.0, 1.0))
    assert [r.violations for r in reps] == [0, 0, 0]
    with pytest.raises(ValueError):
        verify_site_factor_identity(17)


def test_positivity_fails_below_threshold():
    closed, imag, neg = verify_site_factor_identity(8, (-LOG4 - 0.1,))
    assert closed.passed and imag.passed
    assert not neg.passed
    assert site_factor(4, 0, -LOG4 - 0.1, SiteClass.BC).real < 0


def test_event_partition_examples():
    d = -0.7
    z = complex_event_partition(SITE, 0.3, d, 0.0, A=[0])
    assert z.value == pytest.approx(2 * math.exp(d), abs=1e-15)
    z = complex_event_partition(SITE, 0.3, d, 0.8, A=[0])
    assert z.value == pytest.approx(2 * math.exp(d) * math.cosh(0.8), rel=1e-15)
    z = complex_event_partition(SITE, 0.3, d, 0.5j * math.pi)
    assert not z.in_cone
    assert z.value == pytest.approx(1 + 2 * math.exp(d) * math.cos(0.5 * math.pi), abs=1e-15)
    with pytest.raises(ValueError):
        complex_event_partition(SITE, 0.3, d, np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_conjugation_symmetry_and_real_fields(re, s, beta):
    g = named_graph("path3")
    h = complex(re, s * re)
    z = complex_event_partition(g, beta, -0.5, h, A=[1])
    zc = complex_event_partition(g, beta, -0.5, h.conjugate(), A=[1])
    assert zc.value == z.value.conjugate()
    zr = complex_event_partition(g, beta, -0.5, re, A=[1])
    assert zr.value.real > 0 and abs(zr.value.imag) <= 1e-12 * zr.condition * abs(zr.value)


def test_cone_scan_examples():
    res = cone_scan(Graph.from_edges(2, [(0, 1)]), 0.5, -LOG4, A=[0, 1])
    assert res.passed()
    assert len(res.records) == len(ConeGrid().points())
    res = cone_scan(named_graph("star5"), 0.5, 0.0, A=range(5))
    assert res.min_normalised > 1e-9
    explore = cone_scan(named_graph("path3"), 0.5, -2.0, keep_records=False)
    assert math.isfinite(explore.min_normalised)


def test_cone_grid_includes_faces():
    pts = ConeGrid(R=1.0, n_re=3, n_im=3).points()
    assert 1 + 1j in pts and 1 - 1j in pts and 0 in pts


def test_two_parameter_scan():
    g = named_graph("path3")
    res = cone_scan(g, 0.4, 0.0, grid=ConeGrid(n_re=11, n_im=11, mode="two_parameter", h_grid=(1.0, 5, 5)))
    assert res.passed() and len(res.argmin) == 2
    with pytest.raises(ValueError):
        cone_scan(g, 0.4, 0.0, grid=ConeGrid(mode="bogus"))


@pytest.mark.parametrize("delta", [-LOG4, -0.5, 0.0, 0.7])
def test_decoupled_square_identity(delta):
    out = decoupled_square_check([0.3 + 0.1j, 0.5 - 0.2j, 0.2 + 0.2j], delta, A=[1])
    assert out["rel_err"] <= 1e-10
