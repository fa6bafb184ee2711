"""Sampling window shared by fields, masks and noise."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ROUND_TOL = 1e-9


def _lattice_count(length, eps):
    n = length / eps
    k = round(n)
    if abs(n - k) > _ROUND_TOL * max(1.0, abs(n)):
        raise ValueError(f"length {length} is not a multiple of eps={eps}")
    return int(k)


@dataclass(frozen=True)
class GridSpec:
    """Pixel window ``[x0, x1] x [y0, y1]`` with mesh ``eps``.

    Pixels are the ``eps``-squares tiling the extent; field values live at
    their centres.  ``padding`` is the extra margin of white noise around
    the extent available to the convolution.
    """

    eps: float
    extent: tuple
    padding: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        x0, x1, y0, y1 = (float(v) for v in self.extent)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate extent {self.extent}")
        if self.padding < 0:
            raise ValueError("padding must be non-negative")
        object.__setattr__(self, "extent", (x0, x1, y0, y1))
        _lattice_count(x1 - x0, self.eps)
        _lattice_count(y1 - y0, self.eps)

    @classmethod
    def square(cls, n_pixels, eps, padding=0.0, origin=(0.0, 0.0)):
        w = n_pixels * eps
        return cls(eps, (origin[0], origin[0] + w, origin[1], origin[1] + w), padding)

    @classmethod
    def rectangle(cls, nx, ny, eps, padding=0.0, origin=(0.0, 0.0)):
        return cls(eps, (origin[0], origin[0] + nx * eps,
                         origin[1], origin[1] + ny * eps), padding)

    @property
    def nx(self):
        return _lattice_count(self.extent[1] - self.extent[0], self.eps)

    @property
    def ny(self):
        return _lattice_count(self.extent[3] - self.extent[2], self.eps)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def centers_x(self):
        return self.extent[0] + (np.arange(self.nx) + 0.5) * self.eps

    def centers_y(self):
        return self.extent[2] + (np.arange(self.ny) + 0.5) * self.eps

    def with_padding(self, padding):
        return GridSpec(self.eps, self.extent, padding)

    def noise_index_range(self):
        """Integer lattice indices ``(ix, iy)`` of ``eps Z^2`` inside the
        padded extent."""
        x0, x1, y0, y1 = self.extent
        p, e = self.padding, self.eps
        ix = np.arange(math.ceil((x0 - p) / e - _ROUND_TOL),
                       math.floor((x1 + p) / e + _ROUND_TOL) + 1)
        iy = np.arange(math.ceil((y0 - p) / e - _ROUND_TOL),
                       math.floor((y1 + p) / e + _ROUND_TOL) + 1)
        return ix, iy

    def pixel_slices(self, rect):
        """Row and column slices of the pixels whose centres lie in ``rect``."""
        x0, x1, y0, y1 = (float(v) for v in rect)
        ex0, ex1, ey0, ey1 = self.extent
        tol = _ROUND_TOL * max(1.0, abs(ex1), abs(ey1), abs(ex0), abs(ey0))
        if x0 < ex0 - tol or x1 > ex1 + tol or y0 < ey0 - tol or y1 > ey1 + tol:
            raise ValueError(f"rectangle {rect} outside extent {self.extent}")
        cx, cy = self.centers_x(), self.centers_y()
        ci = np.nonzero((cx >= x0 - tol) & (cx <= x1 + tol))[0]
        cj = np.nonzero((cy >= y0 - tol) & (cy <= y1 + tol))[0]
        if ci.size == 0 or cj.size == 0:
            raise ValueError(f"rectangle {rect} contains no pixel centre")
        return slice(cj[0], cj[-1] + 1), slice(ci[0], ci[-1] + 1)
