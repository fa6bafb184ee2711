"""Convolution kernels and their deterministic analytics.

A kernel ``q`` defines the field ``f = q * W`` driven by planar white noise.
Its covariance is ``kappa = q * q`` and its spectral density is
``rho**2 = F[kappa]`` with ``rho = F[q]``.  Fourier transforms use the
unitary convention ``F[g](s) = int g(x) exp(-2 pi i x.s) dx`` so that
``int rho**2 ds = kappa(0)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize, signal, special
from scipy.interpolate import RegularGridInterpolator

BARGMANN_FOCK = "bargmann_fock"
RATIONAL_QUADRATIC = "rational_quadratic"
TABULATED = "tabulated"
FAMILIES = (BARGMANN_FOCK, RATIONAL_QUADRATIC, TABULATED)

_BF_NORM = math.sqrt(2.0 / math.pi)
INFINITY_TOL = 1e-8


class KernelRangeError(ValueError):
    """A tabulated kernel was queried outside its table."""


class KernelDivergenceError(ArithmeticError):
    """An integral of the kernel does not converge."""


def _smoothstep(t):
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_deriv(t):
    return 30.0 * t * t * (1.0 - t) ** 2


@dataclass(frozen=True)
class CutoffSpec:
    """Radial cut-off ``chi_r``: one on ``|x| <= r/2 - w``, zero on
    ``|x| >= r/2`` and a quintic smoothstep in between."""

    radius: float
    transition_width: float = 0.25

    def __post_init__(self):
        if not self.radius >= 1:
            raise ValueError(f"truncation radius must be >= 1, got {self.radius}")
        if not 0 < self.transition_width < self.radius / 2:
            raise ValueError("transition width must lie in (0, r/2)")

    @property
    def support_radius(self):
        return self.radius / 2.0

    def chi(self, s):
        s = np.asarray(s, dtype=float)
        t = np.clip((self.radius / 2.0 - s) / self.transition_width, 0.0, 1.0)
        return _smoothstep(t)

    def chi_deriv(self, s):
        """Radial derivative of ``chi``."""
        s = np.asarray(s, dtype=float)
        t = np.clip((self.radius / 2.0 - s) / self.transition_width, 0.0, 1.0)
        return -_smoothstep_deriv(t) / self.transition_width


class KernelSpec:
    """Convolution kernel ``q``.

    Built-in radial families are the Bargmann-Fock kernel
    ``sqrt(2/pi) exp(-|x|^2)`` and the rational quadratic kernel
    ``(1 + |x|^2)^(-beta/2)``, both multiplied by ``amplitude``.  A
    tabulated kernel holds an ``n x n`` array of samples at nodes
    ``(j - (n-1)/2) * mesh``; rows run along increasing ``y``.  Values
    between nodes are bilinear.

    Instances are immutable.
    """

    __slots__ = ("family", "beta", "amplitude", "table", "mesh", "_interp", "_grad_interp")

    def __init__(self, family, beta=None, amplitude=1.0, table=None, mesh=None,
                 validate=True):
        if family not in FAMILIES:
            raise ValueError(f"unknown kernel family {family!r}")
        if not amplitude > 0:
            raise ValueError("amplitude must be positive")
        set_ = object.__setattr__
        set_(self, "family", family)
        set_(self, "amplitude", float(amplitude))
        set_(self, "beta", None if beta is None else float(beta))
        set_(self, "table", None)
        set_(self, "mesh", None)
        set_(self, "_interp", None)
        set_(self, "_grad_interp", None)
        if family == RATIONAL_QUADRATIC:
            if beta is None or not beta > 2:
                raise ValueError(f"rational quadratic kernel needs beta > 2, got {beta}")
        elif family == TABULATED:
            t = np.array(table, dtype=float)
            if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
                raise ValueError("tabulated kernel needs a square table")
            if not (mesh is not None and mesh > 0):
                raise ValueError("tabulated kernel needs a positive mesh")
            if not np.all(np.isfinite(t)):
                raise ValueError("tabulated kernel has non-finite entries")
            if validate:
                scale = max(np.abs(t).max(), 1e-300)
                if np.abs(t - t[::-1, ::-1]).max() > 1e-12 * scale:
                    raise ValueError("tabulated kernel is not even: q(-x) != q(x)")
            t = t * self.amplitude
            t.setflags(write=False)
            set_(self, "table", t)
            set_(self, "mesh", float(mesh))
            nodes = self.table_nodes()
            set_(self, "_interp", RegularGridInterpolator(
                (nodes, nodes), t, method="linear", bounds_error=True))
            gy, gx = np.gradient(t, self.mesh)
            set_(self, "_grad_interp", (
                RegularGridInterpolator((nodes, nodes), gx, bounds_error=False, fill_value=0.0),
                RegularGridInterpolator((nodes, nodes), gy, bounds_error=False, fill_value=0.0)))

    def __setattr__(self, name, value):
        raise AttributeError("KernelSpec is immutable")

    def __reduce__(self):
        table = None if self.table is None else np.asarray(self.table) / self.amplitude
        return (_rebuild_kernel, (self.family, self.beta, self.amplitude, table, self.mesh))

    def __repr__(self):
        if self.family == TABULATED:
            return f"KernelSpec(tabulated, n={self.table.shape[0]}, mesh={self.mesh}, amplitude={self.amplitude})"
        if self.family == RATIONAL_QUADRATIC:
            return f"KernelSpec(rational_quadratic, beta={self.beta}, amplitude={self.amplitude})"
        return f"KernelSpec(bargmann_fock, amplitude={self.amplitude})"

    # constructors
    @classmethod
    def bargmann_fock(cls, amplitude=1.0):
        return cls(BARGMANN_FOCK, amplitude=amplitude)

    @classmethod
    def rational_quadratic(cls, beta, amplitude=1.0):
        return cls(RATIONAL_QUADRATIC, beta=beta, amplitude=amplitude)

    @classmethod
    def tabulated(cls, values, mesh, amplitude=1.0, validate=True):
        return cls(TABULATED, amplitude=amplitude, table=values, mesh=mesh, validate=validate)

    @classmethod
    def from_function(cls, func, half_width, mesh, validate=True):
        """Tabulate ``func(x, y)`` on a centred square of nodes."""
        n = 2 * int(round(half_width / mesh)) + 1
        nodes = (np.arange(n) - (n - 1) / 2) * mesh
        return cls.tabulated(func(nodes[None, :], nodes[:, None]), mesh, validate=validate)

    def scaled(self, factor):
        """Same kernel with the amplitude multiplied by ``factor``."""
        if self.family == TABULATED:
            return KernelSpec(TABULATED, amplitude=self.amplitude * factor,
                              table=np.asarray(self.table) / self.amplitude,
                              mesh=self.mesh, validate=False)
        return KernelSpec(self.family, beta=self.beta, amplitude=self.amplitude * factor)

    @property
    def key(self):
        """Hashable identity used for caching."""
        if self.family == TABULATED:
            return (self.family, self.amplitude, self.mesh, self.table.shape,
                    hash(self.table.tobytes()))
        return (self.family, self.beta, self.amplitude)

    def __eq__(self, other):
        return isinstance(other, KernelSpec) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    @property
    def is_radial(self):
        return self.family != TABULATED

    def table_nodes(self):
        n = self.table.shape[0]
        return (np.arange(n) - (n - 1) / 2) * self.mesh

    @property
    def half_width(self):
        """Half-width of the support box (infinite for radial families)."""
        if self.family == TABULATED:
            return (self.table.shape[0] - 1) / 2 * self.mesh
        return math.inf

    # radial profile
    def radial(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == BARGMANN_FOCK:
            return self.amplitude * _BF_NORM * np.exp(-s * s)
        if self.family == RATIONAL_QUADRATIC:
            return self.amplitude * (1.0 + s * s) ** (-self.beta / 2.0)
        raise TypeError("tabulated kernels have no radial profile")

    def radial_deriv(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == BARGMANN_FOCK:
            return -2.0 * s * self.radial(s)
        if self.family == RATIONAL_QUADRATIC:
            return -self.amplitude * self.beta * s * (1.0 + s * s) ** (-self.beta / 2.0 - 1.0)
        raise TypeError("tabulated kernels have no radial profile")

    # planar evaluation
    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.family != TABULATED:
            return self.radial(np.hypot(x, y))
        pts = np.stack([y.ravel(), x.ravel()], axis=-1)
        try:
            out = self._interp(pts)
        except ValueError as exc:
            raise KernelRangeError(
                f"tabulated kernel queried outside |x|,|y| <= {self.half_width}") from exc
        return out.reshape(x.shape)

    def gradient(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.family != TABULATED:
            s = np.hypot(x, y)
            # q'(s)/s is finite at the origin for both families
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(s > 0, self.radial_deriv(s) / np.where(s > 0, s, 1.0),
                                 self._curvature_at_origin())
            return ratio * x, ratio * y
        pts = np.stack([y.ravel(), x.ravel()], axis=-1)
        return (self._grad_interp[0](pts).reshape(x.shape),
                self._grad_interp[1](pts).reshape(x.shape))

    def _curvature_at_origin(self):
        if self.family == BARGMANN_FOCK:
            return -2.0 * self.amplitude * _BF_NORM
        return -self.amplitude * self.beta

    def values(self, x, y, derivative=(0, 0), zero_outside=True):
        """``q`` or one first partial derivative at ``(x, y)``.

        Tabulated kernels are extended by zero outside the table box when
        ``zero_outside`` is set.
        """
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        derivative = tuple(derivative)
        if self.family == TABULATED and zero_outside:
            hw = self.half_width
            inside = (np.abs(x) <= hw) & (np.abs(y) <= hw)
            out = np.zeros(x.shape)
            if inside.any():
                out[inside] = self.values(x[inside], y[inside], derivative, zero_outside=False)
            return out
        if derivative == (0, 0):
            return self(x, y)
        gx, gy = self.gradient(x, y)
        if derivative == (1, 0):
            return gx
        if derivative == (0, 1):
            return gy
        raise ValueError(f"derivative multi-index must have order <= 1, got {derivative}")

    def truncated_values(self, cutoff, x, y, derivative=(0, 0)):
        """``q_r = q chi_r`` or its first partial derivative."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        derivative = tuple(derivative)
        s = np.hypot(x, y)
        chi = cutoff.chi(s)
        live = chi > 0
        out = np.zeros(x.shape)
        if not live.any():
            return out
        xl, yl, sl = x[live], y[live], s[live]
        q = self.values(xl, yl)
        if derivative == (0, 0):
            out[live] = q * chi[live]
            return out
        dq = self.values(xl, yl, derivative)
        comp = xl if derivative == (1, 0) else yl
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(sl > 0, comp / np.where(sl > 0, sl, 1.0), 0.0)
        out[live] = dq * chi[live] + q * cutoff.chi_deriv(sl) * unit
        return out


def _rebuild_kernel(family, beta, amplitude, table, mesh):
    return KernelSpec(family, beta=beta, amplitude=amplitude, table=table, mesh=mesh,
                      validate=False)


def load_qtab(path, validate=True):
    """Read a tabulated kernel from a ``QTAB <n> <mesh>`` text file."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "QTAB":
            raise ValueError(f"{path}: missing 'QTAB <n> <mesh>' header")
        n, mesh = int(header[1]), float(header[2])
        data = np.array(fh.read().split(), dtype=float)
    if data.size != n * n:
        raise ValueError(f"{path}: expected {n * n} values, found {data.size}")
    return KernelSpec.tabulated(data.reshape(n, n), mesh, validate=validate)


def write_qtab(path, spec):
    if spec.family != TABULATED:
        raise TypeError("only tabulated kernels can be written as QTAB")
    n = spec.table.shape[0]
    with open(path, "w") as fh:
        fh.write(f"QTAB {n} {spec.mesh!r}\n")
        for row in spec.table / spec.amplitude:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def eval_q(spec, x):
    """``q(x)`` at a planar point (or an array of points, last axis 2)."""
    x = np.asarray(x, dtype=float)
    out = spec(x[..., 0], x[..., 1])
    return float(out) if out.ndim == 0 else out


def eval_truncated_q(spec, cutoff, x):
    """``q_r(x) = q(x) chi_r(x)``."""
    x = np.asarray(x, dtype=float)
    out = spec.truncated_values(cutoff, x[..., 0], x[..., 1])
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- integrals

_BREAKS = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0)


def _radial_integral(func, a=0.0, b=math.inf):
    """``int_a^b func(s) ds`` split at dyadic break points."""
    pts = [a] + [p for p in _BREAKS if a < p < b] + [b]
    total, err = 0.0, 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, e = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)
        total += val
        err += e
    return total, err


def _table_cutoff_sq_integral(spec, cutoff):
    nodes = spec.table_nodes()
    xx, yy = np.meshgrid(nodes, nodes)
    chi = 1.0 if cutoff is None else cutoff.chi(np.hypot(xx, yy))
    return float(np.sum((spec.table * (1.0 - chi)) ** 2) * spec.mesh ** 2)


def truncation_error_variance(spec, r):
    """``int (q - q_r)^2``, the variance of ``f - f_r`` at any point.

    Non-increasing in ``r``.  Tabulated kernels integrate over their table
    nodes.
    """
    cutoff = CutoffSpec(r)
    if spec.family == TABULATED:
        return _table_cutoff_sq_integral(spec, cutoff)
    a = max(r / 2.0 - cutoff.transition_width, 0.0)

    def integrand(s):
        return 2 * math.pi * s * (spec.radial(s) * (1.0 - cutoff.chi(s))) ** 2

    val, err = _radial_integral(integrand, a)
    if err > 1e-6 * max(val, 1e-300) and err > 1e-14:
        warnings.warn(f"truncation variance quadrature error {err:.2e} at r={r}")
    return val


def numerical_infinity_radius(spec, tol=INFINITY_TOL):
    """Smallest truncation radius ``r`` with ``truncation_error_variance(r) < tol``.

    Synthesis of the untruncated field uses ``q_r`` at this radius.  For a
    tabulated kernel the radius is chosen so that ``chi_r = 1`` on the whole
    table box.
    """
    if spec.family == TABULATED:
        return 2.0 * (math.sqrt(2.0) * spec.half_width + 0.25) + 1e-9
    lo, hi = 1.0, 2.0
    while truncation_error_variance(spec, hi) >= tol:
        lo, hi = hi, 2 * hi
        if hi > 1e7:
            raise KernelDivergenceError("no numerical-infinity radius below 1e7")
    if truncation_error_variance(spec, lo) < tol:
        return lo
    return optimize.brentq(lambda r: math.log(truncation_error_variance(spec, r) / tol),
                           lo, hi, xtol=1e-6) + 1e-5


_INFINITY_CACHE = {}


def infinite_cutoff(spec, tol=INFINITY_TOL):
    """Cut-off used as the proxy for the untruncated kernel."""
    key = (spec.key, tol)
    if key not in _INFINITY_CACHE:
        _INFINITY_CACHE[key] = CutoffSpec(numerical_infinity_radius(spec, tol))
    return _INFINITY_CACHE[key]


def l1_norm(spec):
    """``int |q|`` with a divergence check on the far-field decay."""
    if spec.family == TABULATED:
        return float(np.abs(spec.table).sum() * spec.mesh ** 2)
    s_far = 1e6
    local_slope = s_far * abs(spec.radial_deriv(s_far)) / max(spec.radial(s_far), 1e-300)
    if spec.radial(s_far) > 0 and local_slope <= 2.0 + 1e-6:
        raise KernelDivergenceError(f"|q| decays like |x|^-{local_slope:.3f}: not integrable")
    val, err = _radial_integral(lambda s: 2 * math.pi * s * abs(spec.radial(s)))
    if err > 1e-6 * val:
        raise KernelDivergenceError(f"L1 quadrature did not converge (error {err:.2e})")
    return val


def l2_norm_sq(spec):
    """``kappa(0) = int q^2``."""
    if spec.family == TABULATED:
        return float(np.sum(spec.table ** 2) * spec.mesh ** 2)
    return _radial_integral(lambda s: 2 * math.pi * s * spec.radial(s) ** 2)[0]


def gradient_sq_norm(spec):
    """``int |grad q|^2``, the variance of either partial derivative times two."""
    if spec.family == TABULATED:
        gy, gx = np.gradient(spec.table, spec.mesh)
        return float(np.sum(gx ** 2 + gy ** 2) * spec.mesh ** 2)
    return _radial_integral(lambda s: 2 * math.pi * s * spec.radial_deriv(s) ** 2)[0]


def sup_norm_scale(spec):
    """``m = sqrt(max(kappa(0), -d^2 kappa/dx_1^2 (0)))``.

    For a radial kernel each partial derivative carries half of
    ``int |grad q|^2``.
    """
    return math.sqrt(max(l2_norm_sq(spec), 0.5 * gradient_sq_norm(spec)))


def _cell_variance_rows(func, centers_x, centers_y, eps, order):
    nodes, weights = leggauss(order)
    off = 0.5 * eps * nodes
    w2 = np.outer(weights, weights).ravel() / 4.0
    dx = np.repeat(off, order)
    dy = np.tile(off, order)
    total = 0.0
    rows_per_chunk = max(1, int(2_000_000 // max(1, centers_x.size * order * order)))
    for start in range(0, centers_y.size, rows_per_chunk):
        cy = centers_y[start:start + rows_per_chunk]
        shape = (cy.size, centers_x.size, dx.size)
        X = np.broadcast_to(centers_x[None, :, None] + dx[None, None, :], shape)
        Y = np.broadcast_to(cy[:, None, None] + dy[None, None, :], shape)
        v = func(X, Y)
        d = v - v[..., :1]
        mean = d @ w2
        total += float(np.sum(d * d @ w2 - mean * mean))
    return total


def discretisation_error_l2(spec, eps, order=6, rel_tail=1e-8):
    """``||q - q^{0,eps}||_2^2`` for the cell-average approximation.

    ``q^{0,eps}`` equals the average of ``q`` over each cell
    ``v + [-eps/2, eps/2]^2``, ``v`` in ``eps Z^2``; the squared error
    is the sum over cells of ``eps^2`` times the within-cell variance,
    computed with tensor Gauss-Legendre nodes.  Radial kernels are summed
    over a box outside which the gradient energy is below ``rel_tail`` of
    its total; tabulated kernels over the cells inside the table box.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if spec.family == TABULATED:
        k = int(math.floor((spec.half_width - eps / 2) / eps + 1e-9))
        func = spec
    else:
        total = gradient_sq_norm(spec)

        def tail(h):
            return _radial_integral(lambda s: 2 * math.pi * s * spec.radial_deriv(s) ** 2, h)[0]

        h = 4.0
        while tail(h) > rel_tail * total:
            h *= 1.25
        k = int(math.ceil(h / eps))
        func = spec
    if k < 0:
        return 0.0
    centers = np.arange(-k, k + 1) * eps
    return _cell_variance_rows(func, centers, centers, eps, order) * eps ** 2


def cell_averages(spec, cutoff, derivative, x, y, eps, order=4):
    """Cell averages of ``q_r`` (or its derivative) over ``eps``-cells
    centred at ``(x, y)``, by tensor Gauss-Legendre quadrature."""
    nodes, weights = leggauss(order)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.zeros(x.shape)
    for a, wa in zip(nodes, weights):
        for b, wb in zip(nodes, weights):
            out += wa * wb / 4.0 * spec.truncated_values(
                cutoff, x + 0.5 * eps * a, y + 0.5 * eps * b, derivative)
    return out


# ------------------------------------------------------- tabulated analytics

def _symmetric_nodes(grid):
    x0, x1, y0, y1 = grid.extent
    hw = min(-x0, x1, -y0, y1)
    if hw <= 0:
        raise ValueError("analytics grid must contain the origin in its interior")
    n = int(math.floor(hw / grid.eps + 1e-9))
    return np.arange(-n, n + 1) * grid.eps


def _table_on(spec, nodes):
    return spec.values(nodes[None, :], nodes[:, None])


@dataclass(frozen=True)
class CovarianceTable:
    """``kappa`` tabulated at offsets ``offsets[j] * (1, 1)``."""

    offsets: np.ndarray
    values: np.ndarray
    mesh: float
    tail_bound: float
    tail_warning: bool

    def at(self, dx, dy):
        """Value at the tabulated offset nearest ``(dx, dy)``."""
        n = (self.offsets.size - 1) // 2
        i = int(round(dx / self.mesh)) + n
        j = int(round(dy / self.mesh)) + n
        return float(self.values[j, i])

    @property
    def at_zero(self):
        n = (self.offsets.size - 1) // 2
        return float(self.values[n, n])


def _outside_box_sq(spec, hw):
    """Upper bound for ``int q^2`` outside the square of half-width ``hw``."""
    if spec.family == TABULATED:
        nodes = spec.table_nodes()
        xx, yy = np.meshgrid(nodes, nodes)
        out = (np.abs(xx) > hw) | (np.abs(yy) > hw)
        return float(np.sum(spec.table[out] ** 2) * spec.mesh ** 2)
    # the box contains the disc of radius hw
    return _radial_integral(lambda s: 2 * math.pi * s * spec.radial(s) ** 2, hw)[0]


def covariance_table(spec, grid, tol=1e-6):
    """``kappa = q * q`` by midpoint quadrature on the nodes ``eps Z^2``
    inside the largest origin-centred square of ``grid.extent``.

    The table is symmetrised, so ``kappa(-x) = kappa(x)`` holds bit for bit.
    ``tail_warning`` is set when the Cauchy-Schwarz bound on the mass
    missed outside the box exceeds ``tol``.
    """
    nodes = _symmetric_nodes(grid)
    q = _table_on(spec, nodes)
    h = grid.eps
    kap = signal.fftconvolve(q, q, mode="full") * h * h
    kap = 0.5 * (kap + kap[::-1, ::-1])
    n = nodes.size - 1
    offsets = np.arange(-n, n + 1) * h
    tail = _outside_box_sq(spec, nodes[-1])
    bound = 2.0 * math.sqrt(max(tail, 0.0) * float(np.sum(q * q) * h * h)) + tail
    return CovarianceTable(offsets, kap, h, bound, bool(bound > tol))


@dataclass(frozen=True)
class SpectralTable:
    """``rho = F[q]`` on ``freqs`` and ``rho**2 = F[kappa]`` on ``freqs2``
    (both centred, ``np.fft.fftshift`` order)."""

    freqs: np.ndarray
    rho: np.ndarray
    freqs2: np.ndarray
    rho2: np.ndarray
    integral_rho2: float
    kappa0: float

    @property
    def relative_gap(self):
        return abs(self.integral_rho2 - self.kappa0) / self.kappa0

    def rho2_at_zero(self):
        n = self.freqs2.size // 2
        return float(self.rho2[n, n])


def _centred_dft(table, h):
    spec = np.fft.fft2(np.fft.ifftshift(table)) * h * h
    freqs = np.fft.fftshift(np.fft.fftfreq(table.shape[0], h))
    return freqs, np.fft.fftshift(spec.real)


def spectral_table(spec, grid):
    """Discrete Fourier transforms of ``q`` and of ``kappa`` with mesh-area
    weighting; ``integral_rho2`` is the Riemann sum of ``rho**2`` and
    ``kappa0`` the covariance at the origin."""
    cov = covariance_table(spec, grid)
    freqs, rho = _centred_dft(_table_on(spec, _symmetric_nodes(grid)), grid.eps)
    freqs2, rho2 = _centred_dft(cov.values, grid.eps)
    ds = freqs[1] - freqs[0]
    return SpectralTable(freqs, rho, freqs2, rho2,
                         float(np.sum(rho ** 2) * ds * ds), cov.at_zero)


@dataclass(frozen=True)
class AssumptionReport:
    d4_symmetric: bool
    strongly_positive: bool
    weakly_positive: bool
    decay_exponent_ok: bool
    measured_exponent: float
    fitted_constant: float
    spectral_density_nonneg: bool
    spectral_positive_near_zero: bool

    @property
    def all_pass(self):
        return (self.d4_symmetric and self.strongly_positive and self.weakly_positive
                and self.decay_exponent_ok and self.spectral_density_nonneg
                and self.spectral_positive_near_zero)


def _annulus_sup(spec, k):
    """``sup max(|q|, |grad q|)`` over the annulus ``[2^k, 2^(k+1)]``."""
    lo, hi = 2.0 ** k, 2.0 ** (k + 1)
    if spec.is_radial:
        s = np.linspace(lo, hi, 2001)
        return float(np.max(np.maximum(np.abs(spec.radial(s)), np.abs(spec.radial_deriv(s)))))
    nodes = spec.table_nodes()
    xx, yy = np.meshgrid(nodes, nodes)
    rr = np.hypot(xx, yy)
    sel = (rr >= lo) & (rr <= hi)
    if not sel.any() or hi > spec.half_width:
        return math.nan
    gy, gx = np.gradient(spec.table, spec.mesh)
    vals = np.maximum(np.abs(spec.table), np.hypot(gx, gy))[sel]
    return float(vals.max())


def decay_fit(spec, k_range=range(2, 7)):
    """Log-log slope of the dyadic annulus sups, returned as a positive
    exponent.  ``inf`` when fewer than two annuli have non-underflowing
    values (faster than polynomial decay)."""
    vals = [_annulus_sup(spec, k) for k in k_range]
    pos = [(k, v) for k, v in zip(k_range, vals) if np.isfinite(v) and v > 1e-290]
    if len(pos) < 2:
        underflow = any(np.isfinite(v) for v in vals)
        return (math.inf if underflow else math.nan), vals
    x = np.array([k for k, _ in pos]) * math.log(2.0)
    y = np.log([v for _, v in pos])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope), vals


def check_assumptions(spec, grid, beta_claim, tol=1e-10, spectral_floor=1e-9,
                      spectral_ball=0.1):
    """Evaluate the kernel regularity, symmetry, positivity, decay and
    spectral conditions on the square node grid inside ``grid``.

    The decay exponent is compared against ``beta_claim`` with ten percent
    slack; the fitted constant is reported without a gate.
    """
    nodes = _symmetric_nodes(grid)
    if nodes[-1] < 8.0 - 1e-9:
        raise ValueError("assumption grid must cover |x| <= 8")
    q = _table_on(spec, nodes)
    scale = max(np.abs(q).max(), 1e-300)
    d4 = bool(np.abs(q - q[::-1, :]).max() <= tol * scale
              and np.abs(q - np.rot90(q)).max() <= tol * scale)
    strong = bool(q.min() >= -tol * scale)
    cov = covariance_table(spec, grid)
    weak = bool(cov.values.min() >= -tol * cov.at_zero)
    exponent, sups = decay_fit(spec)
    ok = bool(exponent >= 0.9 * beta_claim)
    const = max((v * (2.0 ** k) ** beta_claim for k, v in zip(range(2, 7), sups)
                 if np.isfinite(v)), default=math.nan)
    sp = spectral_table(spec, grid)
    nonneg = bool(sp.rho2.min() >= -tol * max(sp.rho2.max(), 1e-300))
    f2x, f2y = np.meshgrid(sp.freqs2, sp.freqs2)
    near = np.hypot(f2x, f2y) <= spectral_ball
    positive = bool(sp.rho2[near].min() > spectral_floor)
    return AssumptionReport(d4, strong, weak, ok, float(exponent), float(const),
                            nonneg, positive)


# --------------------------------------------------------------- influences

def mills_ratio(a):
    """``P[Z >= a] / E[Z 1{Z >= a}] = (1 - Phi(a)) / phi(a)``."""
    a = np.asarray(a, dtype=float)
    return math.sqrt(math.pi / 2.0) * special.erfcx(a / math.sqrt(2.0))


def mills_constant(return_argmax=False, upper=10.0):
    """``sup_{a >= 0}`` of the Mills ratio, maximised numerically on
    ``[0, upper]``: a grid search refined by bounded scalar minimisation."""
    grid = np.linspace(0.0, upper, 100001)
    vals = mills_ratio(grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda a: -float(mills_ratio(a)), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-10})
    best_a, best = (res.x, -res.fun) if -res.fun > vals[i] else (grid[i], float(vals[i]))
    return (float(best), float(best_a)) if return_argmax else float(best)
