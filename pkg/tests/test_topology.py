import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from gfperc.field import FieldSample, required_padding, sample_noise, synthesize
from gfperc.grid import GridSpec
from gfperc.kernel import KernelSpec
from gfperc.topology import (BOTTOM_TOP, DUAL, LEFT_RIGHT, PRIMAL, ArmQuery, CrossingQuery,
                             annulus_pixels, arm_event, crossing, crosses, excursion_mask,
                             label_components, largest_component)

BF = KernelSpec.bargmann_fock()


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def oracle_roots(bits, connectivity):
    ny, nx = bits.shape
    uf = UnionFind(ny * nx)
    steps = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if connectivity == 8 else [])
    for j, i in itertools.product(range(ny), range(nx)):
        if not bits[j, i]:
            continue
        for dj, di in steps:
            v, u = j + dj, i + di
            if 0 <= v < ny and 0 <= u < nx and bits[v, u]:
                uf.union(j * nx + i, v * nx + u)
    return np.array([uf.find(k) for k in range(ny * nx)]).reshape(ny, nx)


def oracle_crosses(bits, connectivity):
    roots = oracle_roots(bits, connectivity)
    left = set(roots[bits[:, 0], 0].tolist())
    right = set(roots[bits[:, -1], -1].tolist())
    return bool(left & right)


def same_partition(labels, roots, bits):
    if not np.array_equal(labels >= 0, bits):
        return False
    pairs = set(zip(labels[bits].tolist(), roots[bits].tolist()))
    return len(pairs) == len(set(labels[bits].tolist())) == len(set(roots[bits].tolist()))


masks = arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12)))


def _sample(values, eps=1.0):
    ny, nx = values.shape
    return FieldSample(values, BF, None, (0, 0), GridSpec.rectangle(nx, ny, eps), 0)


# ---------------------------------------------------------------- masks

def test_mask_examples():
    f = _sample(np.random.default_rng(0).normal(size=(10, 10)))
    assert excursion_mask(f, 1e9).bits.all()
    assert not excursion_mask(f, -1e9).bits.any()


@pytest.mark.parametrize("level,target", [(0.0, 0.5), (1.0, stats.norm.cdf(1.0))])
def test_mask_fraction(level, target):
    eps = 0.25
    g = GridSpec.square(256, eps)
    g = g.with_padding(required_padding(BF, None, eps))
    fr = [excursion_mask(synthesize(BF, None, (0, 0), sample_noise(g, s), g), level).bits.mean()
          for s in range(12)]
    assert abs(np.mean(fr) - target) < 0.01


# ----------------------------------------------------------- components

def test_component_examples():
    lab, n = label_components(np.ones((5, 7), dtype=bool))
    assert n == 1 and np.all(lab == 0)
    board = (np.add.outer(np.arange(4), np.arange(4)) % 2).astype(bool)
    assert label_components(board, 4)[1] == 8
    assert label_components(board, 8)[1] == 1
    with pytest.raises(ValueError):
        label_components(board, 6)


@given(masks, st.sampled_from([4, 8]))
def test_labels_match_union_find(bits, conn):
    lab, n = label_components(bits, conn)
    roots = oracle_roots(bits, conn)
    assert same_partition(lab, roots, bits)
    if n:
        assert set(np.unique(lab[bits]).tolist()) == set(range(n))


# ------------------------------------------------------------- crossings

def test_constant_field_crosses():
    f = _sample(np.ones((6, 12)))
    assert crossing(f, CrossingQuery((0, 12, 0, 6), LEFT_RIGHT, PRIMAL, 0.0))
    assert not crossing(f, CrossingQuery((0, 12, 0, 6), BOTTOM_TOP, DUAL, 0.0))


@given(masks)
def test_crossing_matches_oracle(bits):
    for conn in (4, 8):
        assert crosses(bits, LEFT_RIGHT, conn) == oracle_crosses(bits, conn)
        assert crosses(bits, BOTTOM_TOP, conn) == oracle_crosses(bits.T, conn)


@given(masks)
def test_primal_dual_exclusive(bits):
    assert crosses(bits, LEFT_RIGHT, 4) != crosses(~bits, BOTTOM_TOP, 8)


@pytest.mark.parametrize("shape", [(3, 3), (3, 4)])
def test_duality_exhaustive(shape):
    n = shape[0] * shape[1]
    for code in range(1 << n):
        bits = np.array([(code >> k) & 1 for k in range(n)], dtype=bool).reshape(shape)
        assert crosses(bits, LEFT_RIGHT, 4) != crosses(~bits, BOTTOM_TOP, 8)


@given(masks, st.integers(0, 2 ** 32 - 1))
def test_crossing_increasing(bits, seed):
    extra = np.random.default_rng(seed).random(bits.shape) < 0.3
    if crosses(bits, LEFT_RIGHT, 4):
        assert crosses(bits | extra, LEFT_RIGHT, 4)


def test_query_validation():
    with pytest.raises(ValueError):
        CrossingQuery((0, 1, 0, 1), "diagonal")
    with pytest.raises(ValueError):
        ArmQuery((0, 0), 2.0, 2.0)


# ------------------------------------------------------------------ arms

def test_arm_constant_fields():
    q = ArmQuery((8.0, 8.0), 2.0, 6.0, PRIMAL, 0.0)
    assert arm_event(_sample(np.ones((16, 16))), q)
    q1 = ArmQuery((8.0, 8.0), 2.0, 6.0, PRIMAL, 0.5)
    assert not arm_event(_sample(np.full((16, 16), -1.5)), q1)
    with pytest.raises(ValueError):
        arm_event(_sample(np.ones((16, 16))), ArmQuery((8.0, 8.0), 2.0, 9.0))


def test_arm_matches_label_oracle():
    rng = np.random.default_rng(3)
    g = GridSpec.square(14, 1.0)
    ann, inner, outer = annulus_pixels(g, (7.0, 7.0), 2.0, 6.0)
    for _ in range(500):
        v = rng.normal(size=(14, 14)) + rng.uniform(-1, 1)
        got = arm_event(_sample(v), ArmQuery((7.0, 7.0), 2.0, 6.0))
        roots = oracle_roots((v >= 0) & ann, 4)
        on = (v >= 0) & ann
        want = bool(set(roots[on & inner].tolist()) & set(roots[on & outer].tolist()))
        assert got == want


@given(masks)
def test_largest_component(bits):
    big = largest_component(bits)
    assert np.all(big <= bits)
    lab, n = label_components(bits, 4)
    if n:
        sizes = np.bincount(lab[bits])
        assert big.sum() == sizes.max()
    else:
        assert not big.any()
