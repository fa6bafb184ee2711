"""Randomised exploration of crossing events and influence estimates.

The exploration algorithm decides whether the complement of the excursion
set crosses the rectangle ``[0, 2R] x [0, R]`` from bottom to top while
revealing the white noise only where needed:

1. pick a horizontal line ``L`` at height ``k r``, ``k`` uniform on
   ``{0, ..., floor(R / r)}``;
2. reveal every vertex within ``2 r`` of ``L``;
3. repeat: a pixel is *safe* once every vertex within ``r`` of it is
   revealed (the truncated field there is then known).  If a safe path of
   complement pixels joins bottom and top, output 0.  Otherwise collect the
   safe complement pixels connected to ``L`` that touch an unsafe pixel;
   if there are none output 1, else reveal every vertex within ``2 r`` of
   them, in raster order, and continue.

The output is 1 exactly when there is no bottom-top crossing of the
complement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import signal

from .field import kernel_stencil
from .grid import GridSpec
from .kernel import CutoffSpec, mills_constant
from .rng import derive_seed, lattice_normals, stream_normal, uniform_int
from .topology import BOTTOM_TOP, LEFT_RIGHT, crosses

_TOL = 1e-9


# ------------------------------------------------------------- exploration

@dataclass(frozen=True, eq=False)
class ExplorationTrace:
    """One run of the exploration.

    ``revealed`` is indexed like the noise on the exploration domain,
    ``reveal_round[v]`` is the round in which ``v`` was revealed (0 for the
    initial strip, -1 if never) and ``reveal_order`` lists flat vertex
    indices by round then raster order.
    """

    output: int
    revealed: np.ndarray
    seed_line_index: int
    reveal_order: np.ndarray
    reveal_round: np.ndarray
    n_rounds: int
    params: tuple = field(default=())

    @property
    def n_revealed(self):
        return int(self.revealed.sum())


def _disc_offsets(radius, eps):
    """Integer ``d`` with ``|(1/2 - d) eps| <= radius``: the vertices
    ``i + d`` within ``radius`` of pixel ``i``."""
    m = int(math.ceil(radius / eps)) + 2
    d = np.arange(-m, m + 1)
    dx, dy = np.meshgrid(d, d)
    keep = (0.5 - dx) ** 2 + (0.5 - dy) ** 2 <= (radius / eps) ** 2 * (1 + _TOL)
    return dx[keep].astype(np.int64), dy[keep].astype(np.int64)


@dataclass(frozen=True)
class Domain:
    """Exploration domain: pixels of ``[0, 2R] x [0, R]`` and the vertices
    of ``eps Z^2`` in ``[-r, 2R + r] x [-r, R + r]``."""

    R: float
    r: float
    eps: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError("exploration needs a finite truncation radius")
        if self.r < math.sqrt(2) * self.eps:
            raise ValueError("truncation radius must be at least sqrt(2) eps")
        GridSpec(self.eps, (0.0, 2 * self.R, 0.0, self.R))

    @property
    def grid(self):
        return GridSpec(self.eps, (0.0, 2 * self.R, 0.0, self.R), self.r)

    @property
    def index_range(self):
        return self.grid.noise_index_range()

    @property
    def noise_shape(self):
        ix, iy = self.index_range
        return (iy.size, ix.size)

    @property
    def n_lines(self):
        return int(math.floor(self.R / self.r + _TOL)) + 1

    def line_height(self, k):
        return k * self.r

    def line_row(self, k):
        g = self.grid
        return min(int(math.floor(self.line_height(k) / self.eps + _TOL)), g.ny - 1)

    def strip(self, k):
        """Vertices within ``2 r`` of the seed line."""
        ix, iy = self.index_range
        vx = ix * self.eps
        vy = iy * self.eps
        dx = np.maximum(0.0, np.maximum(-vx, vx - 2 * self.R))
        dy = vy - self.line_height(k)
        return dx[None, :] ** 2 + dy[:, None] ** 2 <= (2 * self.r) ** 2 * (1 + _TOL)

    def noise(self, seed):
        ix, iy = self.index_range
        return lattice_normals(seed, ix, iy)


@numba.njit(cache=True)
def _explore_core(dual, revealed, rnd, orx, ory, o2x, o2y, a0x, a0y, l_row):
    ny, nx = dual.shape
    nvy, nvx = revealed.shape
    cnt = np.zeros((ny, nx), np.int64)
    for j in range(ny):
        for i in range(nx):
            c = 0
            for t in range(orx.size):
                col = i + orx[t] - a0x
                row = j + ory[t] - a0y
                if 0 <= col < nvx and 0 <= row < nvy and revealed[row, col] == 0:
                    c += 1
            cnt[j, i] = c
    comp = np.empty((ny, nx), np.int64)
    queue = np.empty(ny * nx, np.int64)
    front = np.empty(ny * nx, np.int64)
    n_round = 0
    while True:
        comp[:, :] = -1
        n_front = 0
        # flood fill of safe complement pixels from the seed line
        for i0 in range(nx):
            if comp[l_row, i0] >= 0 or cnt[l_row, i0] != 0 or not dual[l_row, i0]:
                continue
            head = 0
            tail = 1
            queue[0] = l_row * nx + i0
            comp[l_row, i0] = i0
            bottom = False
            top = False
            while head < tail:
                p = queue[head]
                head += 1
                j = p // nx
                i = p - j * nx
                if j == 0:
                    bottom = True
                if j == ny - 1:
                    top = True
                touches = False
                for dj in range(-1, 2):
                    for di in range(-1, 2):
                        if di == 0 and dj == 0:
                            continue
                        jj = j + dj
                        ii = i + di
                        if jj < 0 or jj >= ny or ii < 0 or ii >= nx:
                            continue
                        if cnt[jj, ii] != 0:
                            touches = True
                        elif dual[jj, ii] and comp[jj, ii] < 0:
                            comp[jj, ii] = i0
                            queue[tail] = jj * nx + ii
                            tail += 1
                if touches:
                    front[n_front] = p
                    n_front += 1
            if bottom and top:
                return 0, n_round
        if n_front == 0:
            return 1, n_round
        n_round += 1
        # reveal around the frontier in raster order
        fr = np.sort(front[:n_front])
        for t in range(n_front):
            p = fr[t]
            j = p // nx
            i = p - j * nx
            for s in range(o2x.size):
                col = i + o2x[s] - a0x
                row = j + o2y[s] - a0y
                if col < 0 or col >= nvx or row < 0 or row >= nvy or revealed[row, col]:
                    continue
                revealed[row, col] = 1
                rnd[row, col] = n_round
                ax = col + a0x
                ay = row + a0y
                for u in range(orx.size):
                    pi = ax - orx[u]
                    pj = ay - ory[u]
                    if 0 <= pi < nx and 0 <= pj < ny:
                        cnt[pj, pi] -= 1


class CrossingExplorer:
    """Exploration of the bottom-top complement crossing of
    ``[0, 2R] x [0, R]`` for the field ``q_r * W`` on mesh ``eps``."""

    def __init__(self, kernel, r, eps, R, level):
        if r is None or not math.isfinite(r):
            raise ValueError("exploration needs a truncated kernel (finite r)")
        self.kernel = kernel
        self.domain = Domain(float(R), float(r), float(eps))
        self.level = float(level)
        self.cutoff = CutoffSpec(r)
        self.table, self.kmin = kernel_stencil(kernel, self.cutoff, (0, 0), eps)
        g = self.domain.grid
        ix, iy = self.domain.index_range
        kmax = self.kmin + self.table.shape[0] - 1
        # vertex window feeding the pixels, as offsets into the domain noise
        i0 = -int(ix[0])
        j0 = -int(iy[0])
        self._crop = (slice(j0 - kmax, j0 + g.ny - self.kmin),
                      slice(i0 - kmax, i0 + g.nx - self.kmin))
        self._vert0 = (i0, j0)
        if i0 - kmax < 0 or j0 - kmax < 0:
            raise ValueError("domain too small for the kernel support")
        self._orx, self._ory = _disc_offsets(r, eps)
        self._o2x, self._o2y = _disc_offsets(2 * r, eps)
        self._a0 = (int(ix[0]), int(iy[0]))
        self.params = (kernel.key, float(r), float(eps), float(R), float(level))

    @property
    def noise_shape(self):
        return self.domain.noise_shape

    def field(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.noise_shape:
            raise ValueError(f"noise shape {values.shape} does not match the domain "
                             f"{self.noise_shape}")
        eta = values[self._crop]
        return self.domain.eps * signal.fftconvolve(eta, self.table, mode="valid")

    def dual_bits(self, values):
        return self.field(values) < -self.level

    def full_reveal(self, values):
        """1 iff the complement does not cross bottom to top."""
        return int(not crosses(self.dual_bits(values), BOTTOM_TOP, 8))

    def run(self, values, algo_seed, field_values=None):
        d = self.domain
        k = uniform_int(algo_seed, d.n_lines - 1)
        f = self.field(values) if field_values is None else field_values
        dual = np.ascontiguousarray(f < -self.level)
        strip = d.strip(k)
        revealed = strip.astype(np.uint8)
        rnd = np.where(strip, 0, -1).astype(np.int64)
        out, n_round = _explore_core(dual, revealed, rnd, self._orx, self._ory,
                                     self._o2x, self._o2y, self._a0[0], self._a0[1],
                                     d.line_row(k))
        flat = rnd.ravel()
        idx = np.nonzero(flat >= 0)[0]
        order = idx[np.lexsort((idx, flat[idx]))]
        return ExplorationTrace(int(out), revealed.astype(bool), k, order, rnd,
                                int(n_round), self.params)

    def __call__(self, values, algo_seed):
        t = self.run(values, algo_seed)
        return t.output, t.revealed


def explore_crossing(noise, kernel, r, eps, R, level, algo_seed):
    """Run the exploration on white noise covering the domain.

    ``noise`` is a :class:`~gfperc.field.WhiteNoise` on ``eps Z^2``
    (or a raw array shaped like the domain lattice); larger windows are
    cropped to the domain.
    """
    ex = CrossingExplorer(kernel, r, eps, R, level)
    values = getattr(noise, "values", noise)
    if hasattr(noise, "index0"):
        if abs(noise.eps - eps) > 1e-12 * eps:
            raise ValueError("noise mesh differs from eps")
        ix, iy = ex.domain.index_range
        cx = int(ix[0]) - noise.index0[0]
        cy = int(iy[0]) - noise.index0[1]
        if cx < 0 or cy < 0 or cy + iy.size > values.shape[0] or cx + ix.size > values.shape[1]:
            raise ValueError("noise does not cover the exploration domain")
        values = values[cy:cy + iy.size, cx:cx + ix.size]
    return ex.run(values, algo_seed)


@dataclass(frozen=True)
class Revealment:
    delta: np.ndarray
    se: np.ndarray
    max: float
    max_se: float
    argmax: tuple
    n: int


def revealment(traces):
    """Per-vertex fraction of runs revealing each vertex."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    p0 = traces[0].params
    shape = traces[0].revealed.shape
    acc = np.zeros(shape)
    for t in traces:
        if t.params != p0 or t.revealed.shape != shape:
            raise ValueError("traces come from different parameters")
        acc += t.revealed
    n = len(traces)
    delta = acc / n
    se = np.sqrt(delta * (1 - delta) / n)
    am = np.unravel_index(int(np.argmax(delta)), shape)
    return Revealment(delta, se, float(delta[am]), float(se[am]), tuple(int(a) for a in am), n)


# ---------------------------------------------------------------- events

class CrossingEvent:
    """``1`` iff the complement of ``{q_r * W >= -level}`` has no
    bottom-top crossing of ``[0, 2R] x [0, R]``; equivalently, the set
    crosses left to right.  Increasing in the noise for ``q >= 0``."""

    def __init__(self, kernel, r, eps, R, level):
        self.explorer = CrossingExplorer(kernel, r, eps, R, level)
        self.shape = self.explorer.noise_shape

    def __call__(self, values):
        return bool(self.explorer.full_reveal(values))

    def resampled(self, values, new_values):
        """Indicators after replacing, one vertex at a time, each value by
        ``new_values`` at the same position.  Returns a boolean array shaped
        like ``values``."""
        ex = self.explorer
        base = ex.field(values)
        table = ex.table
        eps = ex.domain.eps
        K = table.shape[0]
        kmax = ex.kmin + K - 1
        i0, j0 = ex._vert0
        ny, nx = base.shape
        out = np.zeros(self.shape, dtype=bool)
        for row in range(self.shape[0]):
            for col in range(self.shape[1]):
                delta = new_values[row, col] - values[row, col]
                # pixels reached by this vertex
                pi0 = col - i0 + ex.kmin
                pj0 = row - j0 + ex.kmin
                a0, a1 = max(pi0, 0), min(pi0 + K, nx)
                b0, b1 = max(pj0, 0), min(pj0 + K, ny)
                if a0 >= a1 or b0 >= b1:
                    out[row, col] = self._verdict(base)
                    continue
                patch = base[b0:b1, a0:a1].copy()
                base[b0:b1, a0:a1] += eps * delta * table[b0 - pj0:b1 - pj0, a0 - pi0:a1 - pi0]
                out[row, col] = self._verdict(base)
                base[b0:b1, a0:a1] = patch
        return out

    def _verdict(self, f):
        return not crosses(f < -self.explorer.level, BOTTOM_TOP, 8)


class DictatorEvent:
    """``eta[v0] > 0``."""

    def __init__(self, shape, v0=(0, 0)):
        self.shape = tuple(shape)
        self.v0 = tuple(v0)

    def __call__(self, values):
        return bool(values[self.v0] > 0)


class MajorityEvent:
    """Majority of the signs of three coordinates."""

    def __init__(self, shape, coords=((0, 0), (0, 1), (0, 2))):
        self.shape = tuple(shape)
        self.coords = tuple(tuple(c) for c in coords)

    def __call__(self, values):
        return sum(values[c] > 0 for c in self.coords) >= 2


class ConstantEvent:
    def __init__(self, shape, value=True):
        self.shape = tuple(shape)
        self.value = bool(value)

    def __call__(self, values):
        return self.value


def reveal_first_explorer(event):
    """Reveal ``v0`` and stop."""
    def run(values, algo_seed):
        rev = np.zeros(event.shape, dtype=bool)
        rev[event.v0] = True
        return event(values), rev
    return run


def majority_explorer(event):
    """Reveal the first two coordinates, then the third only if they disagree."""
    def run(values, algo_seed):
        rev = np.zeros(event.shape, dtype=bool)
        a, b, c = event.coords
        rev[a] = rev[b] = True
        sa, sb = values[a] > 0, values[b] > 0
        if sa == sb:
            return bool(sa), rev
        rev[c] = True
        return bool(values[c] > 0), rev
    return run


def null_explorer(event):
    def run(values, algo_seed):
        return event(values), np.zeros(event.shape, dtype=bool)
    return run


# ------------------------------------------------------------- influences

@dataclass(frozen=True)
class InfluenceEstimate:
    resampling: np.ndarray | None
    resampling_se: np.ndarray | None
    russo: np.ndarray | None
    russo_se: np.ndarray | None
    n: int


@dataclass(frozen=True)
class ResamplePlan:
    """Independent copies of each coordinate, keyed by ``seed``."""

    seed: int = 0

    def fresh(self, trial, shape):
        n = int(np.prod(shape))
        return stream_normal(derive_seed(self.seed, trial, 0x2E5A), n).reshape(shape)


def noise_ensemble(seed, n, shape):
    """``n`` independent standard normal arrays of ``shape``."""
    ny, nx = shape
    return np.stack([lattice_normals(derive_seed(seed, t), np.arange(nx), np.arange(ny))
                     for t in range(n)])


def influence_resampling(event, ensemble, plan=ResamplePlan()):
    """Fraction of samples whose indicator flips when a single coordinate is
    resampled.

    Uses ``event.resampled`` when available, otherwise re-evaluates the
    event once per coordinate.
    """
    ensemble = np.asarray(ensemble, dtype=float)
    n = ensemble.shape[0]
    shape = ensemble.shape[1:]
    flips = np.zeros(shape)
    for t in range(n):
        w = ensemble[t]
        fresh = plan.fresh(t, shape)
        base = bool(event(w))
        if hasattr(event, "resampled"):
            new = event.resampled(w, fresh)
        else:
            new = np.empty(shape, dtype=bool)
            tmp = w.copy()
            for idx in np.ndindex(*shape):
                old = tmp[idx]
                tmp[idx] = fresh[idx]
                new[idx] = bool(event(tmp))
                tmp[idx] = old
        flips += new != base
    p = flips / n
    return InfluenceEstimate(p, np.sqrt(p * (1 - p) / n), None, None, n)


def influence_russo(event, ensemble):
    """Monte Carlo ``E[eta_v 1_A]`` for every coordinate."""
    ensemble = np.asarray(ensemble, dtype=float)
    n = ensemble.shape[0]
    ind = np.array([bool(event(w)) for w in ensemble], dtype=float)
    prod = ensemble * ind.reshape((n,) + (1,) * (ensemble.ndim - 1))
    mean = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(mean.shape, np.inf)
    return InfluenceEstimate(None, None, mean, se, n)


def _bernoulli_variance_se(p, n):
    # SE of the plug-in variance p(1 - p) of a Bernoulli sample
    mu4 = p * (1 - p) * (1 - 3 * p * (1 - p))
    var = (mu4 - (p * (1 - p)) ** 2) / n + 2 * (p * (1 - p)) ** 2 / (n * max(n - 1, 1))
    return math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class OsssAudit:
    variance: float
    variance_se: float
    rhs: float
    rhs_se: float
    margin: float
    margin_se: float
    revealment: np.ndarray
    influence: np.ndarray
    n: int

    @property
    def passed(self):
        return self.margin >= -3 * self.margin_se


class DeterminationError(RuntimeError):
    """The explorer output disagrees with the event."""


def osss_audit(event, explorer, n_trials, seed=0, n_check=None):
    """Both sides of ``Var(1_A) <= sum_v delta_v I_v`` by Monte Carlo.

    Revealments come from running ``explorer(values, algo_seed)`` on each
    sample; resampling influences are estimated on the same samples.  The
    explorer output is compared with the event on the first ``n_check``
    samples (all by default).
    """
    shape = event.shape
    ens = noise_ensemble(derive_seed(seed, 0x05), n_trials, shape)
    n_check = n_trials if n_check is None else min(n_check, n_trials)
    rev = np.zeros(shape)
    outs = np.zeros(n_trials)
    for t in range(n_trials):
        out, revealed = explorer(ens[t], derive_seed(seed, 0xA1, t))
        if t < n_check and bool(out) != bool(event(ens[t])):
            raise DeterminationError(f"explorer disagrees with the event on sample {t}")
        outs[t] = bool(out)
        rev += revealed
    n = n_trials
    p = outs.mean()
    var = p * (1 - p)
    var_se = _bernoulli_variance_se(p, n)
    delta = rev / n
    infl = influence_resampling(event, ens, ResamplePlan(derive_seed(seed, 0x1F)))
    rhs = float(np.sum(delta * infl.resampling))
    delta_se2 = delta * (1 - delta) / n
    rhs_se = math.sqrt(float(np.sum(infl.resampling ** 2 * delta_se2
                                    + delta ** 2 * infl.resampling_se ** 2)))
    margin = rhs - var
    margin_se = math.sqrt(rhs_se ** 2 + var_se ** 2)
    return OsssAudit(float(var), var_se, rhs, rhs_se, float(margin), margin_se,
                     delta, infl.resampling, n)


def influence_comparison(resampling, russo, c_rus=None):
    """Per-vertex slack ``c_Rus E[eta_v 1_A] - I_v`` and its combined SE."""
    c = mills_constant() if c_rus is None else c_rus
    slack = c * russo.russo - resampling.resampling
    se = np.sqrt((c * russo.russo_se) ** 2 + resampling.resampling_se ** 2)
    return slack, se


# ------------------------------------------------------------------ Russo

@dataclass(frozen=True)
class RussoCheck:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    relative_gap: float
    gap_se: float
    normaliser: float
    continuum_normaliser: float
    n: int
    russo: InfluenceEstimate | None = None


def russo_derivative_check(kernel, truncation, grid, event, level, h, n_trials, seed=0,
                           keep_influences=False):
    """Finite difference of ``P[f + l in A]`` against the Russo sum.

    Parameters
    ----------
    kernel : KernelSpec
        Must be non-negative.
    truncation : CutoffSpec or None
    grid : GridSpec
        Pixel window; its padding is raised to the kernel support.
    event : callable
        ``event(f_values, level) -> bool``, the indicator of ``f + level``
        in an increasing set ``A``.
    level, h : float
        Point of differentiation and half-step of the centred difference.

    Notes
    -----
    Shifting every noise coordinate by ``d`` shifts the synthesised field
    by ``d * eps * sum(stencil)``, so the exact discrete normaliser is
    ``1 / (eps * sum(stencil))``; the continuum value ``eps / ||q||_1`` is
    reported alongside.
    """
    from .field import required_padding, sample_noise, synthesize, _support_cutoff
    from .kernel import l1_norm

    cutoff = _support_cutoff(kernel, truncation)
    table, kmin = kernel_stencil(kernel, cutoff, (0, 0), grid.eps)
    if table.min() < 0:
        raise ValueError("Russo check needs a non-negative kernel")
    pad = required_padding(kernel, truncation, grid.eps)
    g = grid.with_padding(pad)
    c = 1.0 / (grid.eps * float(table.sum()))
    kmax = kmin + table.shape[0] - 1
    lhs_terms = np.empty(n_trials)
    rhs_terms = np.empty(n_trials)
    acc = None
    acc2 = None
    for t in range(n_trials):
        noise = sample_noise(g, derive_seed(seed, t))
        f = synthesize(kernel, truncation, (0, 0), noise, g).values
        # vertices reaching at least one pixel
        i0 = int(round((g.extent[0] - noise.origin[0]) / g.eps))
        j0 = int(round((g.extent[2] - noise.origin[1]) / g.eps))
        eta = noise.values[j0 - kmax:j0 + g.ny - kmin, i0 - kmax:i0 + g.nx - kmin]
        a0 = bool(event(f, level))
        lhs_terms[t] = float(event(f, level + h)) - float(event(f, level - h))
        rhs_terms[t] = c * eta.sum() * a0
        if keep_influences:
            term = eta * a0
            acc = term.copy() if acc is None else acc + term
            acc2 = term * term if acc2 is None else acc2 + term * term
    n = n_trials
    lhs = lhs_terms.mean() / (2 * h)
    lhs_se = lhs_terms.std(ddof=1) / math.sqrt(n) / (2 * h)
    rhs = rhs_terms.mean()
    rhs_se = rhs_terms.std(ddof=1) / math.sqrt(n)
    gap = abs(lhs - rhs) / abs(rhs) if rhs != 0 else math.inf
    gap_se = math.hypot(lhs_se, rhs_se) / abs(rhs) if rhs != 0 else math.inf
    russo = None
    if keep_influences:
        mean = acc / n
        se = np.sqrt(np.maximum(acc2 / n - mean ** 2, 0.0) / max(n - 1, 1))
        russo = InfluenceEstimate(None, None, mean, se, n)
    cont = grid.eps / l1_norm(kernel)
    return RussoCheck(float(lhs), float(lhs_se), float(rhs), float(rhs_se), float(gap),
                      float(gap_se), c, cont, n, russo)


def point_event(index):
    """``f[index] + level >= 0``."""
    def ev(f, level):
        return bool(f[index] + level >= 0)
    return ev


def crossing_event(direction=LEFT_RIGHT):
    """Primal crossing of the whole window by ``{f + level >= 0}``."""
    def ev(f, level):
        return crosses(f >= -level, direction, 4)
    return ev
