import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from gfperc.stats import (binomial_se, group_ids, jackknife, linear_fit, mann_kendall,
                          mean_se, monotone_within, poisson_upper)


def test_binomial_and_mean_se():
    assert binomial_se(0.5, 100) == pytest.approx(0.05)
    m, se = mean_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


def test_mann_kendall_against_brute_force():
    y = [0.1, 0.3, 0.2, 0.5, 0.6]
    # exact null: all permutations of five distinct values
    import itertools
    def s_stat(v):
        return sum(np.sign(v[j] - v[i]) for i in range(5) for j in range(i + 1, 5))
    s0 = s_stat(y)
    perms = [s_stat(p) for p in itertools.permutations(y)]
    p_exact = np.mean([s >= s0 for s in perms])
    t = mann_kendall(y, "increasing")
    assert t.p_value == pytest.approx(p_exact, abs=1e-12)
    assert t.tau == pytest.approx(s0 / 10)


def test_monotone_within():
    assert monotone_within([0.1, 0.09, 0.3], [0.01, 0.01, 0.01])
    assert not monotone_within([0.3, 0.1], [0.01, 0.01])
    assert monotone_within([0.3, 0.1], [0.01, 0.01], increasing=False)


@given(st.lists(st.floats(-100, 100), min_size=4, max_size=40))
def test_jackknife_of_mean_is_standard_error(x):
    x = np.array(x)
    full, se = jackknife(lambda keep: x[keep].mean(), x.size)
    assert full == pytest.approx(x.mean())
    assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-9, abs=1e-9)


def test_group_ids_balanced():
    g = group_ids(103, 10)
    assert g.min() == 0 and g.max() == 9
    assert np.all(np.diff(g) >= 0)
    assert np.bincount(g).max() - np.bincount(g).min() <= 1


def test_linear_fit_against_polyfit():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 1, 20)
    y = 2 - 3 * x + rng.normal(0, 0.1, x.size)
    fit = linear_fit(x, y)
    slope, intercept = np.polyfit(x, y, 1)
    assert fit.slope == pytest.approx(slope)
    assert fit.intercept == pytest.approx(intercept)
    assert fit.ci_low < -3 < fit.ci_high
    forced = linear_fit(x, y, slope_se=1.0, dof=10)
    q = sps.t.ppf(0.975, 10)
    assert forced.ci_high - forced.ci_low == pytest.approx(2 * q)


@given(st.integers(0, 50), st.integers(51, 500))
def test_clopper_pearson_upper(k, n):
    u = poisson_upper(k, n)
    assert k / n <= u <= 1
    # the bound is the value where P[Bin(n, u) <= k] = 5%
    assert sps.binom.cdf(k, n, u) == pytest.approx(0.05, abs=1e-6)
