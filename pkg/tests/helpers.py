"""Shared oracles for the statistical tests."""

import numpy as np
from scipy import stats

from blumecapel.stats import binned_stderr


def state_index(spins: np.ndarray) -> np.ndarray:
    """Base-3 code of each spin row, matching exact.spin_states ordering."""
    s = np.asarray(spins, dtype=np.int64) + 1
    w = 3 ** np.arange(s.shape[1])[::-1]
    return s @ w


def chi2_state_test(series: list[np.ndarray], probs: np.ndarray) -> dict:
    """Pearson χ² of visited-state counts against exact probabilities.

    series holds one integer state code per sample, one array per chain. The
    statistic is divided by the largest binning inefficiency over the state
    indicators, which turns correlated counts into an effective sample.
    """
    codes = np.concatenate(series)
    k = len(probs)
    counts = np.bincount(codes, minlength=k).astype(float)
    n = counts.sum()
    keep = probs * n >= 5
    ineff = 1.0
    for j in np.nonzero(keep)[0]:
        _, _, f, _ = binned_stderr([(s == j).astype(float) for s in series])
        ineff = max(ineff, f)
    exp = probs * n
    merged_obs = np.append(counts[keep], counts[~keep].sum())
    merged_exp = np.append(exp[keep], exp[~keep].sum())
    if merged_exp[-1] == 0:
        merged_obs, merged_exp = merged_obs[:-1], merged_exp[:-1]
    chi2 = float(np.sum((merged_obs - merged_exp) ** 2 / merged_exp)) / ineff
    dof = len(merged_exp) - 1
    return {"chi2": chi2, "dof": dof, "inefficiency": ineff, "p_value": float(stats.chi2.sf(chi2, dof))}
