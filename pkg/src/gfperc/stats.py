"""Small statistics helpers: binomial errors, trend tests, fits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


def binomial_se(p, n):
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1 - p) / n)


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class TrendTest:
    tau: float
    p_value: float
    alternative: str

    def significant(self, alpha=0.05):
        return self.p_value < alpha


def mann_kendall(values, alternative="increasing"):
    """Mann-Kendall trend test (Kendall's tau against the index, exact
    null distribution for small samples)."""
    y = np.asarray(values, dtype=float)
    alt = {"increasing": "greater", "decreasing": "less", "two-sided": "two-sided"}[alternative]
    res = stats.kendalltau(np.arange(y.size), y, alternative=alt, method="auto")
    return TrendTest(float(res.statistic), float(res.pvalue), alternative)


def monotone_within(values, ses, increasing=True, k=3.0):
    """No consecutive step goes the wrong way by more than ``k`` combined SE."""
    v = np.asarray(values, dtype=float)
    s = np.asarray(ses, dtype=float)
    d = np.diff(v) if increasing else -np.diff(v)
    tol = k * np.hypot(s[1:], s[:-1])
    return bool(np.all(d >= -tol))


def jackknife(stat, groups):
    """Delete-one-group jackknife estimate and standard error.

    ``stat`` maps a boolean keep-mask over groups to a scalar (or array).
    """
    g = int(groups)
    full = np.asarray(stat(np.ones(g, dtype=bool)), dtype=float)
    reps = []
    for i in range(g):
        keep = np.ones(g, dtype=bool)
        keep[i] = False
        reps.append(np.asarray(stat(keep), dtype=float))
    reps = np.array(reps)
    mean = reps.mean(axis=0)
    se = np.sqrt((g - 1) / g * np.sum((reps - mean) ** 2, axis=0))
    return full, se


def group_ids(n, groups):
    """Contiguous group labels for ``n`` trials."""
    return (np.arange(n) * groups) // n


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_se: float
    ci_low: float
    ci_high: float


def linear_fit(x, y, slope_se=None, level=0.95, dof=None):
    """Least-squares line; a supplied ``slope_se`` (e.g. jackknife) replaces
    the residual-based one."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    res = stats.linregress(x, y)
    se = res.stderr if slope_se is None else float(slope_se)
    if dof is None:
        dof = max(x.size - 2, 1)
    q = stats.t.ppf(0.5 + level / 2, dof)
    return LineFit(float(res.slope), float(res.intercept), float(se),
                   float(res.slope - q * se), float(res.slope + q * se))


def poisson_upper(k, n, level=0.95):
    """One-sided upper bound for a binomial proportion (Clopper-Pearson)."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(level, k + 1, n - k))
