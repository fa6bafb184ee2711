"""Discrete white noise and convolution synthesis of Gaussian fields.

The discretised field at a pixel centre ``x`` is

    f(x) = eps * sum_v eta_v * q~(x - v),

a sum over the vertices ``v`` of ``eps Z^2``, with ``eta_v`` i.i.d. standard
normals and ``q~`` the (optionally truncated, optionally differentiated)
kernel.  Vertices sit at multiples of ``eps`` and pixel centres at their
half-offsets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import signal

from .grid import GridSpec
from .kernel import CutoffSpec, KernelSpec, cell_averages, infinite_cutoff
from .rng import lattice_normals

__all__ = [
    "GridSpec", "WhiteNoise", "FieldSample", "PaddingError", "sample_noise",
    "coarsen_noise", "synthesize", "coupled_difference", "sup_norm",
    "kernel_stencil", "pointwise_variance", "required_padding",
]

_ORIGIN_TOL = 1e-9


class PaddingError(ValueError):
    """The noise window does not cover the kernel support around the extent."""


@dataclass(frozen=True, eq=False)
class WhiteNoise:
    """Standard normals ``values[j, i]`` at ``origin + eps * (i, j)``.

    ``index0`` holds the integer lattice coordinates of ``values[0, 0]``
    for noise drawn directly on ``eps Z^2``.
    """

    values: np.ndarray
    seed: int
    eps: float
    origin: tuple
    index0: tuple = (0, 0)

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values):
        return WhiteNoise(np.asarray(values, dtype=float), self.seed, self.eps,
                          self.origin, self.index0)

    def vertex_x(self):
        return self.origin[0] + np.arange(self.values.shape[1]) * self.eps

    def vertex_y(self):
        return self.origin[1] + np.arange(self.values.shape[0]) * self.eps


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Field values at the pixel centres of ``grid`` (rows along ``y``)."""

    values: np.ndarray
    kernel: KernelSpec
    truncation: CutoffSpec | None
    derivative: tuple
    grid: GridSpec
    noise_seed: int

    def with_values(self, values):
        return FieldSample(values, self.kernel, self.truncation, self.derivative,
                           self.grid, self.noise_seed)


def sample_noise(grid, seed):
    """One standard normal per vertex of ``eps Z^2`` in the padded extent.

    Vertex ``(ix, iy)`` gets a value that depends only on ``seed`` and its
    integer coordinates, so a larger window extends the same noise.
    """
    ix, iy = grid.noise_index_range()
    vals = lattice_normals(seed, ix, iy)
    vals.setflags(write=False)
    return WhiteNoise(vals, int(seed), grid.eps,
                      (float(ix[0] * grid.eps), float(iy[0] * grid.eps)),
                      (int(ix[0]), int(iy[0])))


def coarsen_noise(noise):
    """Noise on the mesh ``2 eps`` whose vertices are half the sum of their
    four children; cell-integral consistency of white noise across scales."""
    v = noise.values
    ny, nx = v.shape
    if nx % 2 or ny % 2:
        raise ValueError(f"coarsening needs even lattice dimensions, got {v.shape}")
    coarse = 0.5 * (v[0::2, 0::2] + v[0::2, 1::2] + v[1::2, 0::2] + v[1::2, 1::2])
    coarse.setflags(write=False)
    e = noise.eps
    return WhiteNoise(coarse, noise.seed, 2.0 * e,
                      (noise.origin[0] + 0.5 * e, noise.origin[1] + 0.5 * e),
                      noise.index0)


def _check_alignment(noise, grid):
    if abs(noise.eps - grid.eps) > 1e-12 * grid.eps:
        raise ValueError(f"noise mesh {noise.eps} differs from grid mesh {grid.eps}")
    e = grid.eps
    out = []
    for axis, lo in ((0, grid.extent[0]), (1, grid.extent[2])):
        # offset of the first pixel centre from the first vertex
        c = lo + 0.5 * e - noise.origin[axis]
        frac = c / e - 0.5
        if abs(frac - round(frac)) > _ORIGIN_TOL * max(1.0, abs(frac)):
            raise ValueError("pixel centres must sit at half-offsets of the noise lattice")
        out.append(int(round(frac)))
    return out


def _support_cutoff(kernel, truncation):
    return truncation if truncation is not None else infinite_cutoff(kernel)


_STENCIL_CACHE = {}


def kernel_stencil(kernel, cutoff, derivative, eps, cell_average=False):
    """Kernel table ``t[a, b] = q~(((b + kmin) + 1/2) eps, ((a + kmin) + 1/2) eps)``.

    Entry offsets are pixel-centre minus vertex displacements; the table is
    returned together with ``kmin`` (the displacement index of entry 0) and
    covers every displacement inside the support disc.
    """
    key = (kernel.key, cutoff, tuple(derivative), float(eps), bool(cell_average))
    hit = _STENCIL_CACHE.get(key)
    if hit is not None:
        return hit
    rho = cutoff.support_radius
    kmax = int(math.floor(rho / eps - 0.5 + 1e-12))
    kmin = -kmax - 1
    d = (np.arange(kmin, kmax + 1) + 0.5) * eps
    if cell_average:
        t = cell_averages(kernel, cutoff, tuple(derivative), d[None, :], d[:, None], eps)
    else:
        t = kernel.truncated_values(cutoff, d[None, :], d[:, None], tuple(derivative))
    t.setflags(write=False)
    if len(_STENCIL_CACHE) > 64:
        _STENCIL_CACHE.clear()
    _STENCIL_CACHE[key] = (t, kmin)
    return t, kmin


_SPECTRUM_CACHE = {}


def _fft_valid(eta, table, key):
    # valid-mode convolution through a circular one: outputs at index >=
    # stencil size - 1 never wrap once the transform covers eta.  The
    # stencil spectrum is cached per (stencil, transform shape).
    shape = tuple(sfft.next_fast_len(a, real=True) for a in eta.shape)
    ck = (key, shape)
    spec = _SPECTRUM_CACHE.get(ck)
    if spec is None:
        if len(_SPECTRUM_CACHE) > 16:
            _SPECTRUM_CACHE.clear()
        spec = sfft.rfft2(table, shape)
        _SPECTRUM_CACHE[ck] = spec
    full = sfft.irfft2(sfft.rfft2(eta, shape) * spec, shape)
    r0, c0 = table.shape[0] - 1, table.shape[1] - 1
    return full[r0:eta.shape[0], c0:eta.shape[1]]


def _convolve(eta, table, method, key=None):
    if method == "fft":
        if key is None:
            return signal.fftconvolve(eta, table, mode="valid")
        return _fft_valid(eta, table, key)
    if method == "direct":
        return signal.convolve(eta, table, mode="valid", method="direct")
    raise ValueError(f"unknown convolution method {method!r}")


def synthesize(kernel, truncation, derivative, noise, grid, method="fft",
               cell_average=False):
    """Field ``eps * sum_v eta_v q~(x - v)`` at the pixel centres of ``grid``.

    Parameters
    ----------
    kernel : KernelSpec
    truncation : CutoffSpec or None
        ``None`` synthesises the untruncated field through the
        numerical-infinity cut-off of the kernel.
    derivative : tuple
        Multi-index ``(0, 0)``, ``(1, 0)`` or ``(0, 1)``.
    noise : WhiteNoise
        Must cover the support of the kernel around every pixel.
    grid : GridSpec
    method : {"fft", "direct"}
        Zero-padded linear convolution by FFT or by direct summation.
    cell_average : bool
        Replace midpoint kernel values by cell averages.
    """
    derivative = tuple(derivative)
    if sum(derivative) > 1 or min(derivative) < 0:
        raise ValueError(f"derivative order must be <= 1, got {derivative}")
    cutoff = _support_cutoff(kernel, truncation)
    table, kmin = kernel_stencil(kernel, cutoff, derivative, grid.eps, cell_average)
    kmax = kmin + table.shape[0] - 1
    i0, j0 = _check_alignment(noise, grid)
    ny_v, nx_v = noise.values.shape
    lo_x, hi_x = i0 - kmax, i0 + grid.nx - 1 - kmin
    lo_y, hi_y = j0 - kmax, j0 + grid.ny - 1 - kmin
    if lo_x < 0 or lo_y < 0 or hi_x >= nx_v or hi_y >= ny_v:
        need = (kmax + 0.5) * grid.eps
        raise PaddingError(
            f"noise window too small: need a margin of {need:.6g} around the extent "
            f"for support radius {cutoff.support_radius:.6g}")
    eta = noise.values[lo_y:hi_y + 1, lo_x:hi_x + 1]
    key = (kernel.key, cutoff, derivative, float(grid.eps), bool(cell_average))
    vals = grid.eps * _convolve(eta, table, method, key)
    vals.setflags(write=False)
    return FieldSample(vals, kernel, truncation, derivative, grid, noise.seed)


def coupled_difference(kernel, r1, r2, noise, grid, method="fft"):
    """``f_{r2} - f_{r1}`` on shared noise; ``r2 = inf`` selects the
    numerical-infinity proxy."""
    if not r1 <= r2:
        raise ValueError("coupled difference needs r1 <= r2")
    c1 = CutoffSpec(r1)
    c2 = None if math.isinf(r2) else CutoffSpec(r2)
    a = synthesize(kernel, c2, (0, 0), noise, grid, method)
    b = synthesize(kernel, c1, (0, 0), noise, grid, method)
    return FieldSample(a.values - b.values, kernel, c1, (0, 0), grid, noise.seed)


def pointwise_variance(kernel, truncation, eps, derivative=(0, 0)):
    """``eps^2 sum_v q~(x - v)^2``, the exact variance of the synthesised
    field at any pixel."""
    table, _ = kernel_stencil(kernel, _support_cutoff(kernel, truncation), derivative, eps)
    return float(eps * eps * np.sum(table * table))


def required_padding(kernel, truncation, eps):
    table, kmin = kernel_stencil(kernel, _support_cutoff(kernel, truncation), (0, 0), eps)
    return (kmin + table.shape[0] - 0.5) * eps


def sup_norm(sample, center, radius):
    """Maximum of ``|f|`` over pixel centres within ``radius`` of ``center``."""
    g = sample.grid
    cx, cy = center
    x0, x1, y0, y1 = g.extent
    tol = 1e-9 * max(1.0, abs(x1), abs(y1))
    if cx - radius < x0 - tol or cx + radius > x1 + tol or cy - radius < y0 - tol \
            or cy + radius > y1 + tol:
        raise ValueError("ball not inside the sample extent")
    xs, ys = g.centers_x(), g.centers_y()
    inside = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2 <= radius * radius
    if not inside.any():
        return 0.0
    return float(np.abs(sample.values[inside]).max())
