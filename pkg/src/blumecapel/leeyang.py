"""Partition functions with complex magnetic field and the site factors of
the duplicated system.

For a pair (σ, σ') put ν = e^{-iπ/4}(σ + iσ'). A site constrained to σ ≠ 0
has ν in S_Ising = √2·{1, i, -1, -i}; an unconstrained site has ν in
S_BC = {0, ±√2, ±√2 i, e^{iπ/4} i^k}. The site factor is
Σ_ν ν^n conj(ν)^{n'} e^{Δ|ν|²}.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .exact import MAX_VERTICES, ExactReport, InstanceTooLarge, _report, spin_states
from .lattice import Graph
from .model import ComplexField

MAX_N = 16
NONVANISHING = 1e-9
LOG4 = math.log(4.0)


class SiteClass(str, enum.Enum):
    ISING = "IsingSite"
    BC = "BCSite"


# value sets as Gaussian integers g, with ν = g / √2
_GAUSS = {
    SiteClass.ISING: [(2, 0), (0, 2), (-2, 0), (0, -2)],
    SiteClass.BC: [(0, 0), (2, 0), (0, 2), (-2, 0), (0, -2), (1, 1), (-1, 1), (-1, -1), (1, -1)],
}


def value_set(cls: SiteClass) -> np.ndarray:
    return np.array([complex(a, b) for a, b in _GAUSS[SiteClass(cls)]]) / math.sqrt(2.0)


def site_factor(n: int, n2: int, delta: float, cls: SiteClass) -> complex:
    """Closed form of Σ_ν ν^n conj(ν)^{n'} e^{Δ|ν|²} for the site class."""
    if n < 0 or n2 < 0:
        raise ValueError("exponents must be non-negative")
    cls = SiteClass(cls)
    d = n - n2
    val = 0.0
    if d % 4 == 0:
        # 4 | n - n' makes n + n' even, so √2^{n+n'} is an exact power of two
        t = math.exp(delta)
        half = (n + n2) // 2
        if cls is SiteClass.ISING:
            val = 4.0 * math.ldexp(t * t, half)
        else:
            sign = -1.0 if (d // 4) % 2 else 1.0
            val = 4.0 * t * (math.ldexp(t, half) + sign)
    if cls is SiteClass.BC and n == 0 and n2 == 0:
        val += 1.0
    return complex(val, 0.0)


def _gpow(a: int, b: int, k: int) -> tuple[int, int]:
    ra, rb = 1, 0
    for _ in range(k):
        ra, rb = ra * a - rb * b, ra * b + rb * a
    return ra, rb


def brute_site_sum(n: int, n2: int, delta: float, cls: SiteClass) -> tuple[complex, float]:
    """Direct sum over the value set; powers are exact Gaussian integers.

    Returns the sum and Σ|terms| (the scale against which errors are judged).
    """
    re = im = scale = 0.0
    norm = math.sqrt(2.0) ** (n + n2)
    for a, b in _GAUSS[SiteClass(cls)]:
        pa, pb = _gpow(a, b, n)
        qa, qb = _gpow(a, -b, n2)
        ga, gb = pa * qa - pb * qb, pa * qb + pb * qa
        w = math.exp(delta * (a * a + b * b) / 2.0) / norm
        re += ga * w
        im += gb * w
        scale += math.hypot(ga, gb) * w
    return complex(re, im), scale


def verify_site_factor_identity(n_max: int = 8, deltas=(-LOG4, -1.0, 0.0, 1.0),
                                tol: float = 1e-12) -> list[ExactReport]:
    """Closed forms against brute-force sums, and their sign pattern.

    The first report compares the two for every (n, n') with n, n' ≤ n_max,
    both classes and every Δ (relative to Σ|terms|); the second checks that
    imaginary parts vanish; the third checks non-negativity of the closed
    forms for each Δ ≥ -log 4. For Δ < -log 4 the sign check reports the
    negative entries as violations.
    """
    if not 0 <= n_max <= MAX_N:
        raise ValueError(f"n_max must lie in 0..{MAX_N}")
    abs_e, rel_e, imag_e, neg, wit, iwit, nwit = [], [], [], [], [], [], []
    for delta in deltas:
        for cls in SiteClass:
            for n in range(n_max + 1):
                for n2 in range(n_max + 1):
                    b, scale = brute_site_sum(n, n2, delta, cls)
                    c = site_factor(n, n2, delta, cls)
                    abs_e.append(abs(b - c))
                    rel_e.append(abs(b - c) / max(scale, 1.0))
                    imag_e.append(abs(b.imag) / max(scale, 1.0))
                    wit.append({"n": n, "n2": n2, "delta": delta, "class": cls.value})
                    iwit.append(wit[-1])
                    if (n - n2) % 4 == 0:
                        neg.append(max(0.0, -c.real))
                        nwit.append({"n": n, "n2": n2, "delta": delta, "class": cls.value,
                                     "value": c.real})
    return [
        _report("site_factor_closed_form", f"n_max={n_max}", abs_e, rel_e, math.inf, wit, rel_tol=tol,
                scale="relative to the sum of term moduli"),
        _report("site_factor_imaginary", f"n_max={n_max}", imag_e, None, tol, iwit),
        _report("site_factor_nonnegative", f"n_max={n_max}", neg, None, 0.0, nwit),
    ]


# ---------------------------------------------------------------------------
# partition functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexValue:
    value: complex
    condition: float
    in_cone: bool

    @property
    def normalised(self) -> float:
        """|Z| / Σ|terms|; the reciprocal of the condition estimate."""
        return 0.0 if self.condition == math.inf else 1.0 / self.condition


def _states(graph: Graph, A) -> np.ndarray:
    if graph.n > MAX_VERTICES:
        raise InstanceTooLarge(f"{graph.n} vertices exceed {MAX_VERTICES}", 3 ** graph.n)
    S = spin_states(graph.n)
    A = np.asarray(sorted(set(int(a) for a in A)), dtype=np.int64)
    if len(A):
        S = S[np.all(S[:, A] != 0, axis=1)]
    return S


def _real_log_weights(graph: Graph, S: np.ndarray, beta: float, delta: float) -> np.ndarray:
    e = graph.edges
    lw = delta * (S * S).sum(axis=1, dtype=np.float64)
    if len(e):
        lw = lw + beta * (S[:, e[:, 0]] * S[:, e[:, 1]]).sum(axis=1, dtype=np.float64)
    return lw


def complex_event_partition(graph: Graph, beta: float, delta: float, h, A=()) -> ComplexValue:
    """Z^h[σ_A ≠ 0] by enumeration with exactly rounded sums (math.fsum)."""
    f = h if isinstance(h, ComplexField) else ComplexField(np.broadcast_to(np.asarray(h, complex),
                                                                           (graph.n,)))
    if f.h.shape != (graph.n,):
        raise ValueError("field does not match the graph")
    S = _states(graph, A)
    lw = _real_log_weights(graph, S, beta, delta) + S @ f.h
    terms = np.exp(lw)
    val = complex(math.fsum(terms.real), math.fsum(terms.imag))
    tot = math.fsum(np.abs(terms))
    cond = tot / abs(val) if val != 0 else math.inf
    return ComplexValue(val, cond, bool(np.all(f.in_cone())))


@dataclass(frozen=True)
class ConeGrid:
    """Points Re h = t·R, Im h = s·Re h with t, s on uniform grids of [0,1] and [-1,1].

    The cone faces s = ±1 are included. ``mode`` is uniform (one h for every
    site) or two_parameter (η at the origin, h times the number of boundary
    edges elsewhere; η runs over this grid and h over ``h_grid``).
    """

    R: float = 2.0
    n_re: int = 101
    n_im: int = 101
    mode: str = "uniform"
    origin: int = 0
    h_grid: tuple = (2.0, 11, 11)

    def points(self, R=None, n_re=None, n_im=None) -> np.ndarray:
        R = self.R if R is None else R
        re = np.linspace(0.0, R, self.n_re if n_re is None else n_re)
        s = np.linspace(-1.0, 1.0, self.n_im if n_im is None else n_im)
        pts = (re[:, None] * (1.0 + 1j * s[None, :])).ravel()
        return np.unique(pts)


@dataclass
class ScanResult:
    min_normalised: float
    argmin: tuple
    records: list = field(default_factory=list)

    def passed(self, threshold: float = NONVANISHING) -> bool:
        return self.min_normalised > threshold


def _grouped(graph: Graph, beta: float, delta: float, A, keys_fn):
    """Sum the real weights of states sharing the same field exponent key."""
    S = _states(graph, A)
    lw = _real_log_weights(graph, S, beta, delta)
    keys = keys_fn(S)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    shift = lw.max()
    c = np.bincount(np.asarray(inv).ravel(), weights=np.exp(lw - shift), minlength=len(uniq))
    return uniq, c, shift


def _evaluate(uniq: np.ndarray, c: np.ndarray, fields: np.ndarray, chunk: int = 4096):
    """Σ_k c_k exp(<field, key_k>) and Σ_k |...| for rows of fields."""
    vals, scales = [], []
    for i in range(0, len(fields), chunk):
        F = fields[i:i + chunk]
        E = F @ uniq.T.astype(complex)
        terms = c[None, :] * np.exp(E)
        vals.append(terms.sum(axis=1))
        scales.append(np.abs(terms).sum(axis=1))
    return np.concatenate(vals), np.concatenate(scales)


def cone_scan(graph: Graph, beta: float, delta: float, A=(), grid: ConeGrid = ConeGrid(),
              keep_records: bool = True) -> ScanResult:
    """Minimum of |Z^h[σ_A≠0]| / Σ|terms| over fields in the cone Re h ≥ |Im h|.

    States are grouped by their field exponent, so each grid point costs one
    sum over at most (2n+1)² groups.
    """
    if grid.mode == "uniform":
        uniq, c, shift = _grouped(graph, beta, delta, A, lambda S: S.sum(axis=1, keepdims=True))
        hs = grid.points()
        fields = hs[:, None]
        labels = [(complex(h),) for h in hs]
    elif grid.mode == "two_parameter":
        nb = graph.boundary_edge_count().astype(np.int64)
        o = int(grid.origin)
        wts = nb.copy()
        wts[o] = 0

        def keys(S):
            return np.stack([S[:, o], S @ wts], axis=1)
        uniq, c, shift = _grouped(graph, beta, delta, A, keys)
        etas = grid.points()
        hs = grid.points(*grid.h_grid)
        E, Hh = np.meshgrid(etas, hs, indexing="ij")
        fields = np.stack([E.ravel(), Hh.ravel()], axis=1)
        labels = [(complex(e), complex(h)) for e, h in fields]
    else:
        raise ValueError("grid mode must be uniform or two_parameter")
    vals, scales = _evaluate(uniq, c, fields)
    norm = np.abs(vals) / scales
    k = int(np.argmin(norm))
    recs = []
    if keep_records:
        recs = [{"field": labels[i], "abs": float(np.abs(vals[i]) * math.exp(shift)), "normalised": float(norm[i])}
                for i in range(len(labels))]
    return ScanResult(float(norm[k]), labels[k], recs)


def decoupled_square_check(field_values, delta: float, A=(), n_terms: int = 80) -> dict:
    """|Z^h[σ_A≠0]|² at β = 0 computed directly and from the site factors.

    With no edges the duplicated-system expansion factorises over sites:
    |z_x|² = Σ_{n,n'} a^n b^{n'} / (n! n'!) · site_factor(n, n'), with
    a = (Re h - Im h)/√2 and b = (Re h + Im h)/√2. Returns both values and
    their relative difference.
    """
    hv = np.asarray(field_values, dtype=complex)
    A = set(int(a) for a in A)
    direct = 1.0
    series = 1.0
    for x, h in enumerate(hv):
        spins = (-1, 1) if x in A else (-1, 0, 1)
        z = sum(np.exp(delta * s * s + h * s) for s in spins)
        direct *= abs(z) ** 2
        a = (h.real - h.imag) / math.sqrt(2.0)
        b = (h.real + h.imag) / math.sqrt(2.0)
        cls = SiteClass.ISING if x in A else SiteClass.BC
        terms = []
        for n in range(n_terms):
            for n2 in range(n_terms):
                if (n - n2) % 4:
                    continue
                coef = a ** n * b ** n2 / (math.factorial(n) * math.factorial(n2))
                terms.append(coef * site_factor(n, n2, delta, cls).real)
        series *= math.fsum(terms)
    return {"direct": float(direct), "series": float(series),
            "rel_err": abs(direct - series) / abs(direct)}
