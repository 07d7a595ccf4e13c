"""Binning error analysis, jackknife ratios and simple model fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

MIN_BINS = 16


class BinningWarning(UserWarning):
    """The binning error estimate did not reach a plateau."""


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_samples: int
    n_chains: int = 1
    burn_in: int = 0
    seed: int | None = None
    bin_level: int = 0
    inefficiency: float = 1.0
    converged: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def interval(self, z: float = 2.0) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def bin_means(x: np.ndarray, level: int) -> np.ndarray:
    """Means of consecutive bins of size 2^level (a trailing partial bin is dropped)."""
    b = 1 << level
    m = len(x) // b
    return x[:m * b].reshape(m, b).mean(axis=1)


def binning_errors(series: list[np.ndarray], min_bins: int = MIN_BINS) -> np.ndarray:
    """Standard error of the pooled mean for bin sizes 1, 2, 4, ...

    Bins never straddle chains. Levels stop once fewer than min_bins bins remain.
    """
    series = [np.asarray(s, dtype=float) for s in series]
    errs = []
    level = 0
    while True:
        bins = np.concatenate([bin_means(s, level) for s in series])
        if len(bins) < min_bins:
            break
        errs.append(float(np.std(bins, ddof=1) / math.sqrt(len(bins))) if len(bins) > 1 else 0.0)
        level += 1
    return np.asarray(errs)


def binned_stderr(series: list[np.ndarray], min_bins: int = MIN_BINS) -> tuple[float, int, float, bool]:
    """(stderr, level, inefficiency, converged).

    The error is the maximum over levels, so it never understates the naive
    estimate. Converged means the three coarsest levels agree within a factor
    1.6 (the spread expected from noise with 16 to 64 bins).
    """
    errs = binning_errors(series, min_bins)
    if len(errs) == 0:
        raise ValueError(f"need at least {min_bins} samples")
    lvl = int(np.argmax(errs))
    err = float(errs[lvl])
    ineff = (err / errs[0]) ** 2 if errs[0] > 0 else 1.0
    tail = errs[-3:]
    converged = bool(err == 0.0 or (len(errs) >= 3 and tail.max() <= 1.6 * tail.min()))
    return err, lvl, float(ineff), converged


def estimate(series: list[np.ndarray] | np.ndarray, burn_in: int = 0, seed: int | None = None,
             warn: bool = True) -> Estimate:
    if isinstance(series, np.ndarray) and series.ndim == 1:
        series = [series]
    series = [np.asarray(s, dtype=float) for s in series]
    allx = np.concatenate(series)
    err, lvl, ineff, conv = binned_stderr(series)
    if warn and not conv:
        warnings.warn("binning did not plateau; the error bar may be optimistic", BinningWarning,
                      stacklevel=2)
    return Estimate(float(allx.mean()), err, len(allx), len(series), burn_in, seed, lvl, ineff, conv)


def jackknife(fn, columns: list[np.ndarray], n_blocks: int = 32) -> tuple[float, float]:
    """Jackknife estimate of fn(mean of each column) with contiguous blocks.

    columns share their length; fn takes the vector of column means.
    """
    X = np.stack([np.asarray(c, dtype=float) for c in columns], axis=1)
    N = len(X)
    if N < n_blocks:
        n_blocks = max(2, N)
    cuts = np.linspace(0, N, n_blocks + 1).astype(int)
    sums = np.stack([X[cuts[i]:cuts[i + 1]].sum(axis=0) for i in range(n_blocks)])
    counts = np.diff(cuts).astype(float)
    total, ntot = sums.sum(axis=0), counts.sum()
    full = fn(total / ntot)
    loo = np.array([fn((total - sums[i]) / (ntot - counts[i])) for i in range(n_blocks)])
    var = (n_blocks - 1) / n_blocks * np.sum((loo - loo.mean()) ** 2)
    bias = (n_blocks - 1) * (loo.mean() - full)
    return float(full - bias), float(math.sqrt(var))


def binomial_interval(k: int, n: int, z: float = 2.0) -> tuple[float, float]:
    """Wilson score interval."""
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    c = (ph + z * z / (2 * n)) / den
    h = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, c - h), min(1.0, c + h)


def weighted_linear_fit(x, y, sigma) -> dict:
    """Weighted least squares y = c0 + c1 x; returns coefficients, their covariance and χ²."""
    x, y, s = (np.asarray(v, dtype=float) for v in (x, y, sigma))
    w = 1.0 / s ** 2
    A = np.stack([np.ones_like(x), x], axis=1)
    M = A.T @ (A * w[:, None])
    cov = np.linalg.inv(M)
    coef = cov @ (A.T @ (w * y))
    res = y - A @ coef
    return {"coef": coef, "cov": cov, "chi2": float(np.sum(w * res ** 2)), "n": len(x)}


def binomial_loglinear_fit(x, k, N, max_iter: int = 200) -> dict:
    """Maximum likelihood for k_i ~ Binomial(N_i, exp(c0 + c1 x_i)).

    Returns the slope c1 with its standard error (observed information), and
    the signed root of the likelihood ratio against a constant probability
    (positive when the probability decreases in x). Zero counts are fine.
    """
    x, k, N = (np.asarray(v, dtype=float) for v in (x, k, N))
    X = np.stack([np.ones_like(x), x], axis=1)

    def loglik(c):
        eta = X @ c
        if np.any(eta >= 0):
            return -np.inf
        return float(np.sum(k * eta + (N - k) * np.log(-np.expm1(eta))))

    pbar = min(max(k.sum() / N.sum(), 0.5 / N.sum()), 1 - 0.5 / N.sum())
    l0 = float(np.sum(k * math.log(pbar) + (N - k) * math.log1p(-pbar)))
    c = np.array([math.log(pbar), 0.0])
    for _ in range(max_iter):
        eta = X @ c
        pi = np.exp(eta)
        g = k - (N - k) * pi / (1 - pi)
        h = -(N - k) * pi / (1 - pi) ** 2
        grad = X.T @ g
        H = (X * h[:, None]).T @ X - 1e-12 * np.eye(2)
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        t = 1.0
        base = loglik(c)
        while t > 1e-10 and not loglik(c + t * step) >= base:
            t *= 0.5
        if t <= 1e-10:
            break
        c = c + t * step
        if np.max(np.abs(t * step)) < 1e-12:
            break
    eta = X @ c
    pi = np.exp(eta)
    h = -(N - k) * pi / (1 - pi) ** 2
    info = -((X * h[:, None]).T @ X)
    if abs(np.linalg.det(info)) > 1e-300:
        se = float(math.sqrt(max(np.linalg.inv(info)[1, 1], 0.0)))
    else:
        se = math.inf
    l1 = loglik(c)
    lr = max(0.0, 2.0 * (l1 - l0))
    z = math.copysign(math.sqrt(lr), -c[1])
    return {"c0": float(c[0]), "slope": float(c[1]), "stderr": se, "z": z, "loglik": l1}
