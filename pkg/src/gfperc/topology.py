"""Excursion sets, connected components, crossings and arm events on pixels.

The excursion set ``{f >= -level}`` is read at pixel centres and joined
with 4-connectivity; its complement uses 8-connectivity.  With this
pairing, on any rectangle exactly one of "left-right crossing of the set"
and "bottom-top crossing of the complement" occurs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import GridSpec

LEFT_RIGHT = "left_right"
BOTTOM_TOP = "bottom_top"
PRIMAL = "primal"
DUAL = "dual"

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}
SIDE_CONNECTIVITY = {PRIMAL: 4, DUAL: 8}


@dataclass(frozen=True, eq=False)
class Mask:
    bits: np.ndarray
    grid: GridSpec
    level: float


@dataclass(frozen=True)
class CrossingQuery:
    """Crossing of ``rect = (x0, x1, y0, y1)`` between its left and right
    sides or its bottom and top sides, by the set (primal) or its
    complement (dual)."""

    rect: tuple
    direction: str = LEFT_RIGHT
    side: str = PRIMAL
    level: float = 0.0

    def __post_init__(self):
        if self.direction not in (LEFT_RIGHT, BOTTOM_TOP):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.side not in (PRIMAL, DUAL):
            raise ValueError(f"unknown side {self.side!r}")


@dataclass(frozen=True)
class ArmQuery:
    center: tuple
    rho1: float
    rho2: float
    side: str = PRIMAL
    level: float = 0.0

    def __post_init__(self):
        if not 0 < self.rho1 < self.rho2:
            raise ValueError("arm annulus needs 0 < rho1 < rho2")
        if self.side not in (PRIMAL, DUAL):
            raise ValueError(f"unknown side {self.side!r}")


def excursion_mask(sample, level):
    """Pixels with ``f >= -level``; ties belong to the set."""
    return Mask(np.asarray(sample.values) >= -level, sample.grid, float(level))


def _bits(mask):
    return mask.bits if isinstance(mask, Mask) else np.asarray(mask, dtype=bool)


def label_components(mask, connectivity=4):
    """Connected components of the true cells.

    Returns ``(labels, count)``; labels of true cells are dense in
    ``[0, count)`` and false cells get ``-1``.
    """
    bits = _bits(mask)
    if connectivity not in _STRUCTURE:
        raise ValueError("connectivity must be 4 or 8")
    lab, count = ndimage.label(bits, structure=_STRUCTURE[connectivity])
    return lab.astype(np.int64) - 1, int(count)


def crosses(bits, direction=LEFT_RIGHT, connectivity=4):
    """Whether one component of ``bits`` touches both opposite edges."""
    if direction == BOTTOM_TOP:
        bits = bits.T
    a, b = bits[:, 0], bits[:, -1]
    if not (a.any() and b.any()):
        return False
    lab, _ = ndimage.label(bits, structure=_STRUCTURE[connectivity])
    first = np.unique(lab[:, 0])
    last = np.unique(lab[:, -1])
    common = np.intersect1d(first, last, assume_unique=True)
    return bool(np.any(common > 0))


def side_bits(values, level, side):
    e = np.asarray(values) >= -level
    return e if side == PRIMAL else ~e


def crossing(sample, query):
    """Crossing verdict of ``query`` on a field sample (or a raw value array
    paired with ``sample.grid``)."""
    rs, cs = sample.grid.pixel_slices(query.rect)
    bits = side_bits(np.asarray(sample.values)[rs, cs], query.level, query.side)
    return crosses(bits, query.direction, SIDE_CONNECTIVITY[query.side])


def annulus_pixels(grid, center, rho1, rho2):
    """Boolean arrays (annulus, inner ring, outer ring) of pixels whose
    squares meet the closed annulus, the inner circle and the outer circle."""
    cx, cy = center
    h = grid.eps / 2
    dx = np.abs(grid.centers_x() - cx)[None, :]
    dy = np.abs(grid.centers_y() - cy)[:, None]
    near = np.hypot(np.maximum(dx - h, 0.0), np.maximum(dy - h, 0.0))
    far = np.hypot(dx + h, dy + h)
    inner = (near <= rho1) & (far >= rho1)
    outer = (near <= rho2) & (far >= rho2)
    ann = (near <= rho2) & (far >= rho1)
    return ann, inner, outer


def _check_ball(grid, center, radius):
    x0, x1, y0, y1 = grid.extent
    cx, cy = center
    tol = 1e-9 * max(1.0, abs(x1), abs(y1))
    if cx - radius < x0 - tol or cx + radius > x1 + tol or cy - radius < y0 - tol \
            or cy + radius > y1 + tol:
        raise ValueError("annulus outside the sample extent")


def arm_bits(bits, ann, inner, outer, connectivity):
    lab, _ = ndimage.label(bits & ann, structure=_STRUCTURE[connectivity])
    a = np.unique(lab[inner])
    b = np.unique(lab[outer])
    common = np.intersect1d(a, b, assume_unique=True)
    return bool(np.any(common > 0))


def arm_event(sample, query):
    """Whether one component of the queried side inside the annulus meets
    both the inner and the outer ring of pixels."""
    g = sample.grid
    _check_ball(g, query.center, query.rho2)
    ann, inner, outer = annulus_pixels(g, query.center, query.rho1, query.rho2)
    bits = side_bits(sample.values, query.level, query.side)
    return arm_bits(bits, ann, inner, outer, SIDE_CONNECTIVITY[query.side])


def largest_component(bits, connectivity=4):
    """Mask of the component of greatest area (ties go to the lowest label)."""
    lab, count = ndimage.label(bits, structure=_STRUCTURE[connectivity])
    if count == 0:
        return np.zeros_like(bits, dtype=bool)
    sizes = np.bincount(lab.ravel())[1:]
    return lab == (int(np.argmax(sizes)) + 1)
