import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gfperc.explorer import (ConstantEvent, CrossingEvent, CrossingExplorer, DeterminationError,
                             DictatorEvent, ExplorationTrace, MajorityEvent, influence_resampling,
                             influence_russo, majority_explorer, noise_ensemble, null_explorer,
                             osss_audit, point_event, revealment, reveal_first_explorer,
                             russo_derivative_check)
from gfperc.field import pointwise_variance
from gfperc.grid import GridSpec
from gfperc.kernel import CutoffSpec, KernelSpec
from gfperc.rng import derive_seed

RQ4 = KernelSpec.rational_quadratic(4)
SMALL = CrossingExplorer(RQ4, 4.0, 1.0, 16.0, 0.0)


# ------------------------------------------------------------ exploration

@settings(max_examples=60)
@given(st.integers(0, 2 ** 62), st.floats(-0.5, 0.5))
def test_output_equals_full_reveal(seed, level):
    ex = CrossingExplorer(RQ4, 4.0, 1.0, 16.0, level)
    v = ex.domain.noise(seed)
    assert ex.run(v, derive_seed(seed, 1)).output == ex.full_reveal(v)


@settings(max_examples=25)
@given(st.integers(0, 2 ** 62))
def test_output_depends_only_on_revealed(seed):
    ex = SMALL
    v = ex.domain.noise(seed)
    t = ex.run(v, 99)
    w = np.where(t.revealed, v, ex.domain.noise(seed + 1))
    t2 = ex.run(w, 99)
    assert t2.output == t.output
    assert np.array_equal(t2.revealed, t.revealed)


@given(st.integers(0, 2 ** 62))
def test_strip_always_revealed(seed):
    t = SMALL.run(SMALL.domain.noise(seed), seed)
    assert np.all(t.revealed[SMALL.domain.strip(t.seed_line_index)])
    assert np.all(t.reveal_round[SMALL.domain.strip(t.seed_line_index)] == 0)


def test_field_far_above_level():
    v = np.abs(SMALL.domain.noise(0)) * 1e6 + 1e6
    t = SMALL.run(v, 3)
    assert t.output == 1
    assert np.array_equal(t.revealed, SMALL.domain.strip(t.seed_line_index))


def test_explorer_rejects_infinite_radius():
    with pytest.raises(ValueError):
        CrossingExplorer(RQ4, math.inf, 1.0, 16.0, 0.0)


# -------------------------------------------------------------- revealment

def _trace(revealed):
    return ExplorationTrace(0, revealed, 0, np.zeros(0, int), np.zeros(revealed.shape, int), 0)


def test_revealment_examples():
    full = [_trace(np.ones((3, 4), dtype=bool)) for _ in range(5)]
    assert np.all(revealment(full).delta == 1)
    half = [_trace(np.eye(3, dtype=bool)), _trace(np.zeros((3, 3), dtype=bool))]
    r = revealment(half)
    assert r.delta[0, 0] == 0.5 and r.delta[0, 1] == 0.0


def test_revealment_strip_floor():
    ex = SMALL
    traces = [ex.run(ex.domain.noise(derive_seed(5, t)), derive_seed(6, t)) for t in range(400)]
    r = revealment(traces)
    floor = 1.0 / ex.domain.n_lines
    for k in range(ex.domain.n_lines):
        s = ex.domain.strip(k)
        assert np.all(r.delta[s] >= floor - 3 * r.se[s] - 1e-12)


# ------------------------------------------------------------ influences

def test_dictator_influences():
    ev = DictatorEvent((3, 3), (1, 2))
    est = influence_resampling(ev, noise_ensemble(1, 3000, ev.shape))
    assert abs(est.resampling[1, 2] - 0.5) <= 3 * est.resampling_se[1, 2]
    mask = np.ones(ev.shape, dtype=bool)
    mask[1, 2] = False
    assert np.all(est.resampling[mask] == 0)


def test_majority_influences():
    ev = MajorityEvent((2, 3))
    est = influence_resampling(ev, noise_ensemble(2, 4000, ev.shape))
    for c in ev.coords:
        assert abs(est.resampling[c] - 0.25) <= 3 * est.resampling_se[c]


def test_russo_influence_half_space():
    ev = DictatorEvent((2, 2), (0, 0))
    est = influence_russo(ev, noise_ensemble(3, 20000, ev.shape))
    assert abs(est.russo[0, 0] - 1 / math.sqrt(2 * math.pi)) <= 3 * est.russo_se[0, 0]
    for c in ((0, 1), (1, 0), (1, 1)):
        assert abs(est.russo[c]) <= 3 * est.russo_se[c]


def test_russo_influence_increasing_event_positive():
    ev = CrossingEvent(RQ4, 2.0, 1.0, 4.0, 0.0)
    est = influence_russo(ev, noise_ensemble(4, 600, ev.shape))
    # one-sided check per coordinate at a 1% family-wise level (Bonferroni)
    z = stats.norm.isf(0.01 / est.russo.size)
    assert np.all(est.russo >= -z * est.russo_se)
    assert est.russo.sum() > 0


def test_crossing_resampled_matches_brute_force():
    ev = CrossingEvent(RQ4, 2.0, 1.0, 3.0, 0.0)
    w = noise_ensemble(7, 1, ev.shape)[0]
    fresh = noise_ensemble(8, 1, ev.shape)[0]
    fast = ev.resampled(w, fresh)
    for idx in np.ndindex(*ev.shape):
        tmp = w.copy()
        tmp[idx] = fresh[idx]
        assert fast[idx] == ev(tmp)


# ------------------------------------------------------------------ OSSS

def test_osss_dictator_closed_form():
    ev = DictatorEvent((4, 4), (0, 0))
    a = osss_audit(ev, reveal_first_explorer(ev), 4000, seed=1)
    assert a.passed
    # Var = 1/4 and sum delta I = 1 * 1/2
    assert abs(a.variance - 0.25) < 3 * a.variance_se + 1e-3
    assert abs(a.rhs - 0.5) <= 3 * a.rhs_se
    assert abs(a.margin - 0.25) <= 3 * a.margin_se


def test_osss_constant_and_majority():
    ev = ConstantEvent((2, 2))
    a = osss_audit(ev, null_explorer(ev), 200, seed=2)
    assert a.variance == 0 and a.passed
    m = MajorityEvent((1, 4))
    assert osss_audit(m, majority_explorer(m), 1000, seed=3).passed


def test_osss_crossing_event():
    ev = CrossingEvent(RQ4, 2.0, 1.0, 8.0, 0.0)
    assert osss_audit(ev, ev.explorer, 300, seed=4).passed


def test_osss_detects_wrong_explorer():
    ev = DictatorEvent((2, 2), (0, 0))
    wrong = reveal_first_explorer(DictatorEvent((2, 2), (1, 1)))
    with pytest.raises(DeterminationError):
        osss_audit(ev, wrong, 50, seed=5)


# ----------------------------------------------------------------- Russo

def _point_check(h, n, seed=11):
    cut = CutoffSpec(4.0)
    return russo_derivative_check(RQ4, cut, GridSpec.square(1, 0.25), point_event((0, 0)),
                                  0.3, h, n, seed=seed)


def test_russo_point_event_closed_form():
    sigma = math.sqrt(pointwise_variance(RQ4, CutoffSpec(4.0), 0.25))
    closed = stats.norm.pdf(0.3 / sigma) / sigma
    c = _point_check(0.1, 6000)
    assert abs(c.lhs - closed) <= 3 * c.lhs_se
    assert abs(c.rhs - closed) <= 3 * c.rhs_se


def test_russo_finite_difference_bias_shrinks():
    sigma = math.sqrt(pointwise_variance(RQ4, CutoffSpec(4.0), 0.25))
    closed = stats.norm.pdf(0.3 / sigma) / sigma
    wide, narrow = _point_check(1.0, 6000), _point_check(0.5, 6000)
    assert abs(narrow.lhs - closed) <= abs(wide.lhs - closed) + 3 * narrow.lhs_se
