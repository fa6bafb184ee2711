"""Monte Carlo studies of crossing, arm and coupling statistics.

Every experiment takes an :class:`ExperimentConfig` and returns a
:class:`Report`: a table of estimates with standard errors, fitted
quantities, and pass/fail gates.  Trials are independent tasks seeded by
``derive_seed(master_seed, experiment, scale_index, trial)`` and mapped in
order over a process pool, so reports do not depend on the worker count.
"""
from __future__ import annotations

import copy
import functools
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import plotting
from .field import (WhiteNoise, coarsen_noise, required_padding, sample_noise,
                    synthesize)
from .formats import csv_text, json_text
from .grid import GridSpec
from .kernel import (BARGMANN_FOCK, RATIONAL_QUADRATIC, TABULATED, CutoffSpec,
                     KernelSpec, load_qtab, sup_norm_scale)
from .parallel import chunked, ordered_map
from .rng import derive_seed
from .stats import (binomial_se, group_ids, jackknife, linear_fit, mann_kendall,
                    monotone_within, poisson_upper)
from .topology import (BOTTOM_TOP, LEFT_RIGHT, annulus_pixels, arm_bits, crosses)

SCHEMA = "gfperc.experiment/1"


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<="

    def as_dict(self):
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "pass": bool(self.passed)}


def _gate(name, value, threshold, relation):
    ok = {"<=": value <= threshold, ">=": value >= threshold,
          "<": value < threshold, ">": value > threshold}[relation]
    return Gate(name, float(value), float(threshold), bool(ok), relation)


@dataclass
class Report:
    experiment: str
    header: tuple
    rows: list
    gates: list
    fits: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    runtime_s: float = 0.0
    plot: dict | None = None

    @property
    def passed(self):
        return all(g.passed for g in self.gates)

    def gate(self, name):
        for g in self.gates:
            if g.name == name:
                return g
        raise KeyError(name)

    def csv(self):
        return csv_text(self.header, self.rows)

    def summary(self):
        """Gates, fits and notes.  The runtime goes to the run manifest so
        that equal configs give byte-identical summaries."""
        return {"experiment": self.experiment,
                "gates": [g.as_dict() for g in self.gates],
                "fits": self.fits, "notes": self.notes}


def write_report(report, outdir):
    """Write ``<experiment>.csv``, ``<experiment>.json`` and, when the report
    carries a plot, ``<experiment>.png`` into ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    base = os.path.join(outdir, report.experiment)
    paths = {"csv": base + ".csv", "json": base + ".json"}
    with open(paths["csv"], "w", newline="") as fh:
        fh.write(report.csv())
    with open(paths["json"], "w") as fh:
        fh.write(json_text(report.summary()))
    if report.plot is not None:
        paths["png"] = base + ".png"
        plotting.plot_curves(paths["png"], **report.plot)
    return paths


# ------------------------------------------------------------------- config

_TOP_KEYS = ("schema", "experiment", "kernel", "eps", "scales", "levels",
             "truncation_radii", "n_trials", "master_seed", "exponents",
             "tolerances", "options")
_KERNEL_KEYS = ("family", "beta", "amplitude", "path")
_EXPONENT_KEYS = ("theta", "h", "gamma", "c1", "c2")
_FAMILY_ALIASES = {"bf": BARGMANN_FOCK, "bargmann_fock": BARGMANN_FOCK,
                   "rq": RATIONAL_QUADRATIC, "rational_quadratic": RATIONAL_QUADRATIC,
                   "tabulated": TABULATED, "qtab": TABULATED}


def kernel_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("kernel must be an object", "kernel")
    for k in d:
        if k not in _KERNEL_KEYS:
            raise ConfigError(f"unknown kernel key {k!r}", f"kernel.{k}")
    fam = _FAMILY_ALIASES.get(str(d.get("family", "")).lower())
    if fam is None:
        raise ConfigError(f"unknown kernel family {d.get('family')!r}", "kernel.family")
    amp = float(d.get("amplitude", 1.0))
    try:
        if fam == BARGMANN_FOCK:
            return KernelSpec.bargmann_fock(amp)
        if fam == RATIONAL_QUADRATIC:
            if "beta" not in d:
                raise ConfigError("rational quadratic kernel needs beta", "kernel.beta")
            return KernelSpec.rational_quadratic(float(d["beta"]), amp)
        if "path" not in d:
            raise ConfigError("tabulated kernel needs a QTAB path", "kernel.path")
        spec = load_qtab(d["path"])
        return spec.scaled(amp) if amp != 1.0 else spec
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "kernel") from exc


def kernel_beta(kernel, kernel_dict):
    """Decay exponent used by exponent constraints (infinite for the
    Gaussian kernel)."""
    if kernel.family == RATIONAL_QUADRATIC:
        return float(kernel.beta)
    if kernel.family == BARGMANN_FOCK:
        return math.inf
    if "beta" in kernel_dict:
        return float(kernel_dict["beta"])
    raise ConfigError("tabulated kernels need a declared beta here", "kernel.beta")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration of one experiment run.

    Build from JSON-like dictionaries with :meth:`from_dict`; missing keys
    take the experiment's defaults and unknown keys raise
    :class:`ConfigError`.
    """

    experiment: str
    kernel: KernelSpec
    kernel_dict: dict
    eps: float
    scales: tuple
    levels: tuple
    truncation_radii: tuple
    n_trials: int
    master_seed: int
    exponents: dict
    tolerances: dict
    options: dict

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        for k in d:
            if k not in _TOP_KEYS:
                raise ConfigError(f"unknown config key {k!r}", k)
        if d.get("schema", SCHEMA) != SCHEMA:
            raise ConfigError(f"unsupported schema {d.get('schema')!r}", "schema")
        name = d.get("experiment")
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}", "experiment")
        base = copy.deepcopy(EXPERIMENTS[name].defaults)
        merged = {k: base[k] for k in base}
        for k in ("kernel", "eps", "scales", "levels", "truncation_radii", "n_trials",
                  "master_seed"):
            if k in d:
                merged[k] = d[k]
        for k in ("exponents", "tolerances", "options"):
            given = d.get(k, {})
            if not isinstance(given, dict):
                raise ConfigError(f"{k} must be an object", k)
            allowed = _EXPONENT_KEYS if k == "exponents" else tuple(base[k])
            for kk in given:
                if kk not in allowed:
                    raise ConfigError(f"unknown {k} key {kk!r} for {name}", f"{k}.{kk}")
            merged[k] = {**base[k], **given}
        kernel = kernel_from_dict(merged["kernel"])
        try:
            eps = float(merged["eps"])
            scales = tuple(float(s) for s in merged["scales"])
            levels = tuple(float(v) for v in merged["levels"])
            radii = tuple(float(v) for v in merged["truncation_radii"])
            n_trials = int(merged["n_trials"])
            seed = int(merged["master_seed"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric entry: {exc}") from exc
        if not eps > 0:
            raise ConfigError("eps must be positive", "eps")
        if n_trials < 1:
            raise ConfigError("n_trials must be at least 1", "n_trials")
        if any(s <= 0 for s in scales) or any(b <= a for a, b in zip(scales, scales[1:])):
            raise ConfigError("scales must be positive and increasing", "scales")
        cfg = cls(name, kernel, dict(merged["kernel"]), eps, scales, levels, radii,
                  n_trials, seed, dict(merged["exponents"]), dict(merged["tolerances"]),
                  dict(merged["options"]))
        EXPERIMENTS[name].validate(cfg)
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self):
        return {"schema": SCHEMA, "experiment": self.experiment, "kernel": self.kernel_dict,
                "eps": self.eps, "scales": list(self.scales), "levels": list(self.levels),
                "truncation_radii": list(self.truncation_radii), "n_trials": self.n_trials,
                "master_seed": self.master_seed, "exponents": self.exponents,
                "tolerances": self.tolerances, "options": self.options}

    def replace(self, **changes):
        d = self.to_dict()
        for k, v in changes.items():
            if k in ("exponents", "tolerances", "options"):
                d[k] = {**d[k], **v}
            else:
                d[k] = v
        return ExperimentConfig.from_dict(d)


def config(experiment, **overrides):
    """Default configuration of ``experiment`` with keyword overrides."""
    d = {"experiment": experiment}
    d.update(overrides)
    return ExperimentConfig.from_dict(d)


# ----------------------------------------------------------------- machinery

def _trial_seed(cfg, *keys):
    return derive_seed(cfg.master_seed, cfg.experiment, *keys)


def _map_trials(worker, n, threads, chunk=None):
    """Concatenate ``worker((start, stop))`` over contiguous trial blocks."""
    threads = 1 if threads is None else max(1, int(threads))
    size = chunk or max(1, min(100, -(-n // (4 * threads))))
    parts = ordered_map(worker, chunked(n, size), threads)
    return np.concatenate(parts, axis=0)


def _field(kernel, truncation, grid, seed):
    noise = sample_noise(grid, seed)
    return synthesize(kernel, truncation, (0, 0), noise, grid).values


def _padded(grid, kernel, truncation):
    return grid.with_padding(required_padding(kernel, truncation, grid.eps))


def _frac(bits):
    bits = np.asarray(bits, dtype=float)
    n = bits.shape[0]
    p = bits.mean(axis=0)
    if np.all((bits == 0) | (bits == 1)):
        return p, binomial_se(p, n)
    # averaged indicators: plain sample standard error
    return p, bits.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(p.shape, np.inf)


def _worst_decrease(p, se):
    """Largest wrong-way step of a curve meant to be non-decreasing, in
    units of the combined standard error (0 if none)."""
    worst = 0.0
    for i in range(len(p) - 1):
        d = p[i] - p[i + 1]
        if d > 0:
            s = math.hypot(se[i], se[i + 1])
            worst = max(worst, d / s if s > 0 else math.inf)
    return worst


def coupled_meshes(kernel, coarse_cut, fine_cut, eps_fine, extent, seed):
    """Fields on meshes ``eps_fine`` and ``2 eps_fine`` driven by one noise.

    The coarse noise is :func:`~gfperc.field.coarsen_noise` of the fine
    one, so its vertices sit ``eps_fine / 2`` off the fine lattice and the
    coarse pixel grid is the fine extent shifted by the same amount.
    Returns ``(coarse_values, fine_values, coarse_grid, fine_grid)``.
    """
    ec = 2 * eps_fine
    h = eps_fine / 2
    x0, x1, y0, y1 = extent
    cgrid = GridSpec(ec, (x0 + h, x1 + h, y0 + h, y1 + h))
    pad = max(required_padding(kernel, coarse_cut, ec),
              required_padding(kernel, fine_cut, eps_fine)) + 2 * ec
    fgrid = GridSpec(eps_fine, extent, pad)
    noise = sample_noise(fgrid, seed)
    sx, sy = noise.index0[0] % 2, noise.index0[1] % 2
    v = noise.values[sy:, sx:]
    v = v[:v.shape[0] - v.shape[0] % 2, :v.shape[1] - v.shape[1] % 2]
    fine = WhiteNoise(v, noise.seed, eps_fine,
                      (noise.origin[0] + sx * eps_fine, noise.origin[1] + sy * eps_fine),
                      (noise.index0[0] + sx, noise.index0[1] + sy))
    coarse = coarsen_noise(fine)
    fv = synthesize(kernel, fine_cut, (0, 0), fine, fgrid).values
    cv = synthesize(kernel, coarse_cut, (0, 0), coarse, cgrid).values
    return cv, fv, cgrid, fgrid


# ------------------------------------------------------------ crossing curve

def _estimator(name):
    if name not in ("primal", "convention_average"):
        raise ConfigError(f"unknown crossing estimator {name!r}", "options.estimator")
    return name


def _crossing_chunk(kernel, eps, nx, ny, levels, seed_key, duality, refine, averaged, span):
    grid = _padded(GridSpec.rectangle(nx, ny, eps), kernel, None)
    start, stop = span
    ncol = len(levels) + (2 if duality else 0) + (1 if refine else 0)
    # the 8-connected verdicts of the averaged estimator go after the rest
    out = np.zeros((stop - start, ncol + (len(levels) if averaged else 0)), dtype=bool)
    for i, t in enumerate(range(start, stop)):
        seed = derive_seed(*seed_key, t)
        f = _field(kernel, None, grid, seed)
        for j, lev in enumerate(levels):
            out[i, j] = crosses(f >= -lev, LEFT_RIGHT, 4)
            if averaged:
                out[i, j + ncol] = crosses(f >= -lev, LEFT_RIGHT, 8)
        j = len(levels)
        if duality:
            sq = f[:, :ny]
            out[i, j] = crosses(sq >= 0, LEFT_RIGHT, 4)
            out[i, j + 1] = crosses(sq < 0, LEFT_RIGHT, 8)
            j += 2
        if refine and t < refine:
            # same white noise seen at half the mesh: does the verdict flip?
            cv, fv, _, _ = coupled_meshes(kernel, None, None, eps / 2,
                                          (0.0, nx * eps, 0.0, ny * eps), seed)
            out[i, j] = crosses(cv >= 0, LEFT_RIGHT, 4) != crosses(fv >= 0, LEFT_RIGHT, 4)
    return out


def crossing_curve(cfg, threads=None):
    """Crossing probability of ``[0, a s] x [0, s]`` (``s`` in pixels, aspect
    ``a``) from left to right, over a grid of levels.

    The same field serves every level of a trial, so each curve is exactly
    monotone in the level.  ``options.estimator`` is ``"primal"`` (the
    4-connected crossing of ``{f >= -level}``) or ``"convention_average"``,
    the mean of its 4- and 8-connected crossings; the two conventions sit on
    either side of the continuum event on a square lattice, and their mean
    removes most of the pixel shift of the critical level.  With ``self_duality`` the leftmost ``s x s``
    square also records the convention average of the primal 4-connected
    left-right crossing of ``{f >= 0}`` and the dual 8-connected left-right
    crossing of ``{f < 0}``, whose mean is exactly 1/2 for a symmetric,
    rotation-invariant law.

    CSV columns: ``scale, level, event, n, estimate, se``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    levels = sorted(cfg.levels)
    aspect = float(o["aspect"])
    rows, curves, gates, notes = [], {}, [], []
    worst = 0.0
    duality_dev = 0.0
    gap = None
    refine = int(o["refine_trials"])
    averaged = _estimator(o["estimator"]) == "convention_average"
    for si, s in enumerate(cfg.scales):
        ny = int(round(s))
        nx = int(round(aspect * s))
        worker = functools.partial(_crossing_chunk, cfg.kernel, cfg.eps, nx, ny, tuple(levels),
                                   (cfg.master_seed, cfg.experiment, si),
                                   bool(o["self_duality"]), refine, averaged)
        bits = _map_trials(worker, cfg.n_trials, threads)
        lr = bits[:, :len(levels)].astype(float)
        event = "primal_lr"
        if averaged:
            lr = 0.5 * (lr + bits[:, bits.shape[1] - len(levels):])
            event = "convention_average_lr"
        p, se = _frac(lr)
        for lev, pi, si_ in zip(levels, p, se):
            rows.append({"scale": s, "level": lev, "event": event, "n": cfg.n_trials,
                         "estimate": pi, "se": si_})
        curves[f"s={s:g}"] = (levels, p, se)
        worst = max(worst, _worst_decrease(p, se))
        j = len(levels)
        if o["self_duality"]:
            avg = 0.5 * (bits[:, j].astype(float) + bits[:, j + 1].astype(float))
            est = float(avg.mean())
            e_se = float(avg.std(ddof=1) / math.sqrt(avg.size)) if avg.size > 1 else math.inf
            rows.append({"scale": s, "level": 0.0, "event": "convention_average",
                         "n": cfg.n_trials, "estimate": est, "se": e_se})
            duality_dev = max(duality_dev, abs(est - 0.5))
            j += 2
        if refine:
            m = min(refine, cfg.n_trials)
            flips = float(bits[:m, j].mean())
            rows.append({"scale": s, "level": 0.0, "event": "refine_flip", "n": m,
                         "estimate": flips, "se": float(binomial_se(flips, m))})
        lo, hi = (float(v) for v in o["gap_levels"])
        if lo in levels and hi in levels:
            gap = float(p[levels.index(hi)] - p[levels.index(lo)])
    gates.append(_gate("monotone_in_level", worst, tol["monotone_se"], "<="))
    if gap is not None:
        gates.append(_gate("transition_gap", gap, tol["gap_min"], ">="))
    if o["self_duality"]:
        gates.append(_gate("self_duality", duality_dev, tol["duality_dev"], "<="))
    fits = {"transition_gap_largest_scale": gap}
    plot = {"curves": curves, "xlabel": "level", "ylabel": "P[left-right crossing]",
            "title": "crossing probability"}
    return Report(cfg.experiment, ("scale", "level", "event", "n", "estimate", "se"), rows,
                  gates, fits, notes, time.perf_counter() - t0, plot)


# ---------------------------------------------------------------- arm decay

def _arm_chunk(kernel, eps, rho1, ratios, level, seed_key, span):
    rho_max = rho1 * max(ratios)
    side = 2 * rho_max + 2 * eps
    grid = _padded(GridSpec(eps, (0.0, side, 0.0, side)), kernel, None)
    c = (side / 2, side / 2)
    rings = [annulus_pixels(grid, c, rho1, rho1 * q) for q in ratios]
    start, stop = span
    out = np.zeros((stop - start, len(ratios)), dtype=bool)
    for i, t in enumerate(range(start, stop)):
        f = _field(kernel, None, grid, derive_seed(*seed_key, t))
        bits = f >= -level
        for j, (ann, inner, outer) in enumerate(rings):
            out[i, j] = arm_bits(bits, ann, inner, outer, 4)
    return out


def arm_decay(cfg, threads=None):
    """One-arm probabilities across annuli ``rho1 < |x| < q rho1`` on a
    shared field per trial, and the log-log slope ``-d`` against ``q``.

    ``scales`` holds the ratios ``q``; ``options.rho1`` is in length units.
    The slope's standard error is a delete-one-group jackknife.

    CSV columns: ``ratio, rho1, rho2, n, count, estimate, se``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    ratios = [float(q) for q in cfg.scales]
    if len(ratios) < 3:
        raise ConfigError("arm decay needs at least three ratios", "scales")
    if any(q <= 1 for q in ratios):
        raise ConfigError("arm ratios must exceed 1", "scales")
    rho1 = float(o["rho1"])
    level = cfg.levels[0] if cfg.levels else 0.0
    worker = functools.partial(_arm_chunk, cfg.kernel, cfg.eps, rho1, tuple(ratios), level,
                               (cfg.master_seed, cfg.experiment, 0))
    bits = _map_trials(worker, cfg.n_trials, threads)
    n = cfg.n_trials
    counts = bits.sum(axis=0)
    p, se = _frac(bits)
    keep = counts > 0
    notes = [f"ratio {q:g} dropped: no arm observed" for q, k in zip(ratios, keep) if not k]
    rows = [{"ratio": q, "rho1": rho1, "rho2": rho1 * q, "n": n, "count": int(c),
             "estimate": pi, "se": s} for q, c, pi, s in zip(ratios, counts, p, se)]
    gates, fits = [], {}
    x = np.log(np.asarray(ratios)[keep])
    if keep.sum() >= 2:
        groups = int(o["jackknife_groups"])
        gid = group_ids(n, groups)

        def slope(mask):
            sub = bits[mask[gid]][:, keep].mean(axis=0)
            if np.any(sub <= 0):
                return np.nan
            return np.polyfit(x, np.log(sub), 1)[0]

        full, jse = jackknife(slope, groups)
        fit = linear_fit(x, np.log(p[keep]), slope_se=float(jse), dof=groups - 1)
        d = -fit.slope
        fits = {"d": d, "d_se": fit.slope_se, "d_ci": [-fit.ci_high, -fit.ci_low]}
        gates.append(_gate("d_ci_excludes_zero", -fit.ci_high, 0.0, ">"))
    else:
        gates.append(Gate("d_ci_excludes_zero", math.nan, 0.0, False, ">"))
    plot = {"curves": {"arm": (ratios, p, se)}, "xlabel": "rho2 / rho1",
            "ylabel": "P[arm]", "logx": True, "logy": True, "title": "one-arm decay"}
    return Report(cfg.experiment, ("ratio", "rho1", "rho2", "n", "count", "estimate", "se"),
                  rows, gates, fits, notes, time.perf_counter() - t0, plot)


# ---------------------------------------------------------- quasi-independence

def _qi_chunk(kernel, eps, npx, offsets, radius, level, seed_key, span):
    width = (max(offsets) + 1) * npx
    grid = _padded(GridSpec.rectangle(width, npx, eps), kernel, None)
    cut = CutoffSpec(radius) if radius is not None else None
    start, stop = span
    k = len(offsets)
    out = np.zeros((stop - start, 2 * (k + 1)), dtype=bool)
    for i, t in enumerate(range(start, stop)):
        noise = sample_noise(grid, derive_seed(*seed_key, t))
        fields = [synthesize(kernel, None, (0, 0), noise, grid).values]
        if cut is not None:
            fields.append(synthesize(kernel, cut, (0, 0), noise, grid).values)
        for a, f in enumerate(fields):
            bits = f >= -level
            out[i, a * (k + 1)] = crosses(bits[:, :npx], LEFT_RIGHT, 4)
            for j, off in enumerate(offsets):
                out[i, a * (k + 1) + 1 + j] = crosses(bits[:, off * npx:(off + 1) * npx],
                                                      LEFT_RIGHT, 4)
    return out


def _cov_jackknife(a, b, groups):
    gid = group_ids(a.size, groups)

    def cov(mask):
        m = mask[gid]
        aa, bb = a[m], b[m]
        return np.mean(aa * bb) - aa.mean() * bb.mean()

    return jackknife(cov, groups)


def quasi_independence_scan(cfg, threads=None):
    """Covariance of left-right crossings of two ``R x R`` squares (``R`` =
    ``scales[0]`` pixels) whose left edges are ``k R`` apart, for ``k`` in
    ``options.offsets``; ``k = 0`` gives the same square twice.

    The untruncated field and, on the same noise, the field truncated at
    ``truncation_radii[0]`` are both scanned.  For the truncated field the
    two crossings are exactly independent once the gap ``(k - 1) R`` between
    the squares is at least the truncation radius.

    CSV columns: ``field, offset, separation, gap, n, p_a, p_b, cov, se``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    npx = int(round(cfg.scales[0]))
    offsets = tuple(int(k) for k in o["offsets"])
    radius = cfg.truncation_radii[0] if cfg.truncation_radii else None
    level = cfg.levels[0] if cfg.levels else 0.0
    groups = int(o["jackknife_groups"])
    worker = functools.partial(_qi_chunk, cfg.kernel, cfg.eps, npx, offsets, radius, level,
                               (cfg.master_seed, cfg.experiment, 0))
    bits = _map_trials(worker, cfg.n_trials, threads).astype(float)
    R = npx * cfg.eps
    k = len(offsets)
    rows, cov_u, se_u, gates, notes = [], {}, {}, [], []
    indep_worst = 0.0
    n_indep = 0
    for a, name in enumerate(("untruncated", "truncated")):
        if name == "truncated" and radius is None:
            break
        A = bits[:, a * (k + 1)]
        for j, off in enumerate(offsets):
            B = bits[:, a * (k + 1) + 1 + j]
            c, s = _cov_jackknife(A, B, groups)
            gap = max(off - 1, 0) * R if off > 0 else -R
            rows.append({"field": name, "offset": off, "separation": off * R, "gap": gap,
                         "n": A.size, "p_a": A.mean(), "p_b": B.mean(), "cov": float(c),
                         "se": float(s)})
            if name == "untruncated":
                cov_u[off], se_u[off] = float(c), float(s)
            elif gap >= radius:
                n_indep += 1
                z = abs(c) / s if s > 0 else (0.0 if c == 0 else math.inf)
                indep_worst = max(indep_worst, z)
    pos = sorted(off for off in offsets if off > 0)
    fits = {}
    if radius is not None:
        if n_indep:
            gates.append(_gate("truncated_independence", indep_worst, tol["independence_se"],
                               "<="))
        else:
            notes.append("no offset leaves a gap of at least the truncation radius")
    far = max(pos)
    gates.append(_gate("far_covariance", abs(cov_u[far]) - 3 * se_u[far], tol["far_cov"], "<="))
    if len(pos) >= 2:
        covs = [cov_u[p] for p in pos]
        ses = [se_u[p] for p in pos]
        # step-wise non-increase within 3 SE and a significant overall drop
        steps = monotone_within(covs, ses, increasing=False, k=tol["monotone_se"])
        drop = (covs[0] - covs[-1]) / math.hypot(ses[0], ses[-1])
        gates.append(_gate("covariance_decreasing", drop if steps else -math.inf,
                           tol["drop_z"], ">="))
        mk = mann_kendall(covs, "decreasing")
        fits["mann_kendall_tau"] = mk.tau
        fits["mann_kendall_p"] = mk.p_value
        good = [(p, c) for p, c in zip(pos, covs) if c > 0]
        if len(good) >= 2:
            lf = linear_fit(np.log([p * R for p, _ in good]), np.log([c for _, c in good]))
            fits["log_cov_slope"] = lf.slope
            if cfg.kernel.family == RATIONAL_QUADRATIC:
                fits["kernel_slope_1_minus_beta"] = 1 - cfg.kernel.beta
    plot = {"curves": {"untruncated": (pos, [cov_u[p] for p in pos], [se_u[p] for p in pos])},
            "xlabel": "offset / R", "ylabel": "cov(A, B)", "hline": 0.0,
            "title": "crossing covariance vs separation"}
    if radius is not None:
        tr = [r for r in rows if r["field"] == "truncated" and r["offset"] > 0]
        plot["curves"]["truncated"] = ([r["offset"] for r in tr], [r["cov"] for r in tr],
                                       [r["se"] for r in tr])
    header = ("field", "offset", "separation", "gap", "n", "p_a", "p_b", "cov", "se")
    return Report(cfg.experiment, header, rows, gates, fits, notes,
                  time.perf_counter() - t0, plot)


# ------------------------------------------------------- near-critical window

def _scan_levels(s_len, cs, fixed):
    return [s_len ** (-c) for c in cs] + [fixed, 0.0]


def _near_chunk(kernel, eps, s, cs, fixed, aspect, seed_key, span):
    nx = int(round(aspect * s))
    grid = _padded(GridSpec.rectangle(nx, s, eps), kernel, None)
    levels = _scan_levels(s * eps, cs, fixed)
    start, stop = span
    out = np.zeros((stop - start, len(levels) + 1), dtype=bool)
    for i, t in enumerate(range(start, stop)):
        f = _field(kernel, None, grid, derive_seed(*seed_key, t))
        for j, lev in enumerate(levels):
            out[i, j] = crosses(f >= -lev, LEFT_RIGHT, 4)
        out[i, -1] = crosses(f < 0, LEFT_RIGHT, 8)
    return out


def near_critical_scan(cfg, threads=None):
    """Crossing of ``[0, 2s] x [0, s]`` at shrinking levels ``(s eps)^-c``.

    ``scales`` are in pixels; the level uses the side length ``s eps``.
    Curves: ``c = exponents.c1`` (> 1, expected to stay away from 1),
    ``c = exponents.c2`` (small), a fixed level ``options.fixed_level`` and
    level 0.  The level-0 curve is reported convention-averaged (primal
    4-connected crossing of ``{f >= 0}`` and dual 8-connected crossing of
    ``{f < 0}``), which removes the first-order lattice bias of the
    critical level.

    CSV columns: ``curve, scale, level, n, estimate, se``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    cs = (float(cfg.exponents["c1"]), float(cfg.exponents["c2"]))
    fixed = float(o["fixed_level"])
    aspect = float(o["aspect"])
    names = [f"c={cs[0]:g}", f"c={cs[1]:g}", f"level={fixed:g}", "level=0"]
    est = {k: [] for k in names}
    ses = {k: [] for k in names}
    rows = []
    for si, s in enumerate(cfg.scales):
        s_px = int(round(s))
        worker = functools.partial(_near_chunk, cfg.kernel, cfg.eps, s_px, cs, fixed, aspect,
                                   (cfg.master_seed, cfg.experiment, si))
        bits = _map_trials(worker, cfg.n_trials, threads).astype(float)
        levels = _scan_levels(s_px * cfg.eps, cs, fixed)
        n = bits.shape[0]
        for j, name in enumerate(names):
            if name == "level=0":
                x = 0.5 * (bits[:, j] + bits[:, -1])
                p = float(x.mean())
                se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
            else:
                p = float(bits[:, j].mean())
                se = float(binomial_se(p, n))
            est[name].append(p)
            ses[name].append(se)
            rows.append({"curve": name, "scale": s, "level": levels[j], "n": n,
                         "estimate": p, "se": se})
    c1n, c2n, fxn, zn = names
    mk_fixed = mann_kendall(est[fxn], "increasing")
    mk_c2 = mann_kendall(est[c2n], "increasing")
    z = np.asarray(est[zn])
    zse = np.asarray(ses[zn])
    hi, lo = int(np.argmax(z)), int(np.argmin(z))
    spread = (z[hi] - z[lo]) / math.hypot(zse[hi], zse[lo]) if len(z) > 1 else 0.0
    gates = [
        _gate("c1_curve_below", max(est[c1n]), tol["c1_max"], "<"),
        _gate("fixed_level_increasing", mk_fixed.p_value, tol["trend_alpha"], "<"),
        _gate("zero_level_flat", spread, tol["flat_se"], "<="),
    ]
    fits = {"mann_kendall_fixed": [mk_fixed.tau, mk_fixed.p_value],
            "mann_kendall_c2": [mk_c2.tau, mk_c2.p_value]}
    curves = {k: (list(cfg.scales), est[k], ses[k]) for k in names}
    plot = {"curves": curves, "xlabel": "s (pixels)", "ylabel": "P[crossing]", "logx": True,
            "title": "near-critical scan"}
    return Report(cfg.experiment, ("curve", "scale", "level", "n", "estimate", "se"), rows,
                  gates, fits, [], time.perf_counter() - t0, plot)


# ---------------------------------------------------------------- sprinkling

def sprinkling_parameters(R, exponents):
    """``(level, r, eps)`` = ``(R^-theta, R^h, 2^-ceil(gamma log2 R))``; the
    mesh is rounded to a dyadic value so the fine mesh nests."""
    theta, h, gamma = (float(exponents[k]) for k in ("theta", "h", "gamma"))
    level = R ** (-theta)
    r = max(R ** h, 1.0)
    eps = 2.0 ** (-math.ceil(gamma * math.log2(R) - 1e-12))
    return level, r, eps


def _sprinkle_chunk(kernel, R, level, r, eps, coarse_trunc, coarse_mesh, seed_key, span):
    extent = (0.0, 2 * R, 0.0, R)
    start, stop = span
    out = np.zeros((stop - start, 3), dtype=bool)
    cut = CutoffSpec(r) if coarse_trunc == "power" else None
    for i, t in enumerate(range(start, stop)):
        seed = derive_seed(*seed_key, t)
        if coarse_mesh == "fine":
            grid = _padded(GridSpec(eps / 2, extent), kernel, None)
            noise = sample_noise(grid, seed)
            fv = synthesize(kernel, None, (0, 0), noise, grid).values
            cv = fv if cut is None else synthesize(kernel, cut, (0, 0), noise, grid).values
        else:
            cv, fv, _, _ = coupled_meshes(kernel, cut, None, eps / 2, extent, seed)
        approx = not crosses(cv < -level, BOTTOM_TOP, 8)
        target = crosses(fv >= -2 * level, LEFT_RIGHT, 4)
        out[i] = (approx, target, approx and not target)
    return out


def sprinkling_compare(cfg, threads=None):
    """Probability that the truncated, discretised field has no dual
    crossing at level ``l`` while the fine-mesh untruncated field fails to
    cross at ``2 l``, at ``l = R^-theta``, ``r = R^h``, ``eps = R^-gamma``
    (``scales`` are ``R`` in length units).

    The untruncated field lives on mesh ``eps / 2``; the approximation uses
    the coarsened noise.  ``options.level`` overrides the level, and
    ``options.coarse_truncation`` / ``options.coarse_mesh`` switch the
    approximation to the untruncated field or to the fine mesh.

    CSV columns: ``R, level, r, eps, n, p_approx, p_target, estimate, se, upper``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    beta = kernel_beta(cfg.kernel, cfg.kernel_dict)
    ex = cfg.exponents
    bound = min(float(ex["gamma"]), (beta - 1) * float(ex["h"]))
    if float(ex["theta"]) > bound:
        raise ConfigError(f"theta={ex['theta']} exceeds min(gamma, (beta-1) h) = {bound:g}",
                          "exponents.theta")
    rows, est, ses = [], [], []
    for si, R in enumerate(cfg.scales):
        level, r, eps = sprinkling_parameters(R, ex)
        if o["level"] is not None:
            level = float(o["level"])
        worker = functools.partial(_sprinkle_chunk, cfg.kernel, float(R), level, r, eps,
                                   o["coarse_truncation"], o["coarse_mesh"],
                                   (cfg.master_seed, cfg.experiment, si))
        bits = _map_trials(worker, cfg.n_trials, threads)
        n = bits.shape[0]
        p = bits.mean(axis=0)
        k = int(bits[:, 2].sum())
        se = float(binomial_se(p[2], n))
        rows.append({"R": R, "level": level, "r": r, "eps": eps, "n": n, "p_approx": p[0],
                     "p_target": p[1], "estimate": p[2], "se": se,
                     "upper": poisson_upper(k, n)})
        est.append(float(p[2]))
        ses.append(se)
    worst = _worst_decrease([-e for e in est], ses)
    gates = [_gate("non_increasing_in_R", worst, tol["monotone_se"], "<=")]
    plot = {"curves": {"sprinkling": (list(cfg.scales), est, ses)}, "xlabel": "R",
            "ylabel": "P[approx \\ target]", "logx": True, "title": "sprinkling comparison"}
    header = ("R", "level", "r", "eps", "n", "p_approx", "p_target", "estimate", "se", "upper")
    return Report(cfg.experiment, header, rows, gates, {}, [], time.perf_counter() - t0, plot)


# ------------------------------------------------------------ sup-norm tails

def _sup_chunk(kernel, eps, R1, seed_key, span):
    side = 2 * R1 + 2 * eps
    grid = _padded(GridSpec(eps, (0.0, side, 0.0, side)), kernel, None)
    xs, ys = grid.centers_x(), grid.centers_y()
    c = side / 2
    inside = (xs[None, :] - c) ** 2 + (ys[:, None] - c) ** 2 <= R1 * R1
    start, stop = span
    out = np.zeros(stop - start)
    for i, t in enumerate(range(start, stop)):
        f = _field(kernel, None, grid, derive_seed(*seed_key, t))
        out[i] = np.abs(f[inside]).max()
    return out


def sup_norm_tail(cfg, threads=None):
    """Tail of ``sup |f|`` over the ball of radius ``R1 = scales[0]``
    against thresholds ``m R2``, with ``m`` the sup of the standard
    deviations of the field and its first derivatives.

    Thresholds: ``R2`` in ``options.r2_grid`` plus ``log R1, 2 log R1,
    3 log R1`` and ``options.gate_r2``.  Zero counts report a one-sided 95%
    upper bound.  ``c_hat`` is the smallest ``c`` with
    ``P <= exp(-R2^2 / c)`` at every point with ``R2 >= log R1`` and
    ``0 < P <= 1/2`` (in the bulk the bound says nothing).

    CSV columns: ``R2, threshold, n, count, estimate, se, upper``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    R1 = float(cfg.scales[0])
    m = sup_norm_scale(cfg.kernel)
    worker = functools.partial(_sup_chunk, cfg.kernel, cfg.eps, R1,
                               (cfg.master_seed, cfg.experiment, 0))
    sups = _map_trials(worker, cfg.n_trials, threads)
    n = sups.size
    L = math.log(R1)
    gate_r2 = float(o["gate_r2"])
    grid = sorted(set([float(v) for v in o["r2_grid"]] + [L, 2 * L, 3 * L, gate_r2]))
    rows, logs = [], []
    for r2 in grid:
        k = int(np.sum(sups >= m * r2))
        p = k / n
        rows.append({"R2": r2, "threshold": m * r2, "n": n, "count": k, "estimate": p,
                     "se": float(binomial_se(p, n)), "upper": poisson_upper(k, n)})
    # concavity of log P in R2^2 on well-populated points
    mc = int(o["min_count"])
    pts = [(r["R2"] ** 2, r["estimate"], r["count"]) for r in rows
           if mc <= r["count"] < n]
    worst = 0.0
    for (x0, p0, _), (x1, p1, _), (x2, p2, _) in zip(pts, pts[1:], pts[2:]):
        y = np.log([p0, p1, p2])
        d2 = ((y[2] - y[1]) / (x2 - x1) - (y[1] - y[0]) / (x1 - x0)) / (0.5 * (x2 - x0))
        v = [(1 - p) / (n * p) for p in (p0, p1, p2)]
        w = (1 / (x2 - x1), 1 / (x2 - x1) + 1 / (x1 - x0), 1 / (x1 - x0))
        s = math.sqrt(sum(wi * wi * vi for wi, vi in zip(w, v))) / (0.5 * (x2 - x0))
        worst = max(worst, d2 / s)
    est = np.array([r["estimate"] for r in rows])
    decreasing = bool(np.all(np.diff(est) <= 0))
    g6 = next(r for r in rows if r["R2"] == gate_r2)
    c_hat = max([r["R2"] ** 2 / -math.log(r["estimate"]) for r in rows
                 if r["R2"] >= L and 0 < r["estimate"] <= 0.5] or [math.nan])
    gates = [
        _gate("tail_at_gate", g6["upper"], tol["tail_max"], "<="),
        _gate("log_tail_concave", worst, tol["concavity_se"], "<="),
        Gate("tail_decreasing", float(decreasing), 1.0, decreasing, ">="),
    ]
    fits = {"m": m, "c_hat": c_hat, "log_R1": L}
    pos = [r for r in rows if r["count"] > 0]
    plot = {"curves": {"tail": ([r["R2"] ** 2 for r in pos], [r["estimate"] for r in pos],
                                [r["se"] for r in pos])},
            "xlabel": "R2^2", "ylabel": "P[sup |f| >= m R2]", "logy": True,
            "title": f"sup-norm tail, R1={R1:g}"}
    return Report(cfg.experiment, ("R2", "threshold", "n", "count", "estimate", "se", "upper"),
                  rows, gates, fits, [], time.perf_counter() - t0, plot)


# ----------------------------------------------------- level-shift inequality

def _cm_chunk(kernel, eps, sizes, shifts, seed_key, span):
    big = max(sizes)
    grid = _padded(GridSpec.square(big, eps), kernel, None)
    start, stop = span
    out = np.zeros((stop - start, len(sizes), len(shifts)), dtype=bool)
    for i, t in enumerate(range(start, stop)):
        f = _field(kernel, None, grid, derive_seed(*seed_key, t))
        for a, s in enumerate(sizes):
            sq = f[:s, :s]
            for b, sh in enumerate(shifts):
                out[i, a, b] = crosses(sq >= sh, LEFT_RIGHT, 4)
    return out


def cameron_martin_check(cfg, threads=None):
    """``|P[f in A] - P[f - t in A]|`` against ``R t sqrt(P[f in A])`` for
    the left-right crossing ``A`` of an ``R x R`` square at level 0.

    ``scales`` are side lengths in pixels (``R`` in the ratio uses length
    units); ``levels`` are the shifts ``t``.  Shared seeds make ``t = 0``
    exact.

    CSV columns: ``scale, R, t, n, p_base, delta, delta_se, c_hat``.
    """
    t0 = time.perf_counter()
    o, tol = cfg.options, cfg.tolerances
    sizes = tuple(int(round(s)) for s in cfg.scales)
    shifts = tuple(sorted(set([0.0] + [abs(float(t)) for t in cfg.levels])))
    worker = functools.partial(_cm_chunk, cfg.kernel, cfg.eps, sizes, shifts,
                               (cfg.master_seed, cfg.experiment, 0))
    bits = _map_trials(worker, cfg.n_trials, threads).astype(float)
    n = bits.shape[0]
    rows, ratios, notes, curves = [], [], [], {}
    zero_exact = True
    doubling = {}
    for a, s in enumerate(sizes):
        R = s * cfg.eps
        base = bits[:, a, 0]
        pb = base.mean()
        deltas = {}
        xs, ys, es = [], [], []
        for b, t in enumerate(shifts):
            d = base - bits[:, a, b]
            delta = abs(d.mean())
            dse = float(d.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
            deltas[t] = delta
            if t == 0:
                zero_exact = zero_exact and bool(delta == 0.0)
                c_hat = math.nan
            elif pb == 0 or delta == 0:
                c_hat = math.nan
                notes.append(f"R={R:g}, t={t:g}: ratio undefined, cell skipped")
            else:
                c_hat = delta / (R * t * math.sqrt(pb))
                ratios.append(c_hat)
                xs.append(t)
                ys.append(c_hat)
                es.append(dse / (R * t * math.sqrt(pb)))
            rows.append({"scale": s, "R": R, "t": t, "n": n, "p_base": pb, "delta": delta,
                         "delta_se": dse, "c_hat": c_hat})
        for t in shifts:
            if t > 0 and 2 * t in deltas and deltas[t] > 0:
                doubling[f"R={R:g},t={t:g}"] = deltas[2 * t] / deltas[t]
        curves[f"R={R:g}"] = (xs, ys, es)
    med = float(np.median(ratios)) if ratios else math.nan
    spread = max(ratios) / med if ratios else math.nan
    gates = [_gate("c_hat_bounded", spread, tol["max_over_median"], "<="),
             Gate("zero_shift_exact", float(zero_exact), 1.0, zero_exact, ">=")]
    fits = {"c_hat_median": med, "c_hat_max": max(ratios) if ratios else math.nan,
            "doubling_ratio": doubling}
    plot = {"curves": curves, "xlabel": "t", "ylabel": "c_hat", "logx": True,
            "title": "level-shift ratio"}
    header = ("scale", "R", "t", "n", "p_base", "delta", "delta_se", "c_hat")
    return Report(cfg.experiment, header, rows, gates, fits, notes,
                  time.perf_counter() - t0, plot)


# -------------------------------------------------------- bootstrap recursions

@dataclass(frozen=True)
class RecursionResult:
    mode: str
    scales: np.ndarray
    log_a: np.ndarray
    c3: float
    slope: float
    slope_ci: tuple
    scale_constant: float
    certificate: bool
    reason: str


def bootstrap_recursion_demo(c1, c2, a0, mode="exp", R0=None, iterations=None):
    """Iterate a bootstrap recursion with equality and certify decay.

    ``mode="exp"``: ``a(2(R + R / log^2 R)) = c1 a(R)^2 + exp(-c2 R)`` from
    ``R0`` (default 100, 40 steps); certificate ``a(m_n) <= exp(-c3 m_n)``.
    ``mode="poly"``: ``a(3R) = c1 a(R)^2 + R^-c2 a(R) + exp(-c2 log^2 R)``
    from ``R0`` (default 10, 20 steps); certificate
    ``a(m_n) <= exp(-c3 log^2 m_n)``.

    ``c3`` is the largest constant for which the certificate holds at every
    step of the horizon; ``slope`` is the least-squares slope of ``log a``
    against ``m`` (exp) or ``log^2 m`` (poly) over the second half.  A
    certificate needs ``c3 > 0`` and a slope confidence interval below 0.
    Everything runs in log space, so tiny ``a`` do not underflow.
    """
    if not 0 <= a0 < 1:
        raise ValueError("a0 must lie in [0, 1)")
    if not (c1 > 0 and c2 > 0):
        raise ValueError("c1 and c2 must be positive")
    if mode not in ("exp", "poly"):
        raise ValueError(f"unknown mode {mode!r}")
    R = float(R0 if R0 is not None else (100.0 if mode == "exp" else 10.0))
    start = R
    n_it = int(iterations if iterations is not None else (40 if mode == "exp" else 20))
    la = math.log(a0) if a0 > 0 else -math.inf
    lc1 = math.log(c1)
    scales, logs = [R], [la]
    for _ in range(n_it):
        lr = math.log(R)
        if mode == "exp":
            la = float(np.logaddexp(lc1 + 2 * la, -c2 * R))
            R = 2 * (R + R / lr ** 2)
        else:
            terms = [lc1 + 2 * la, -c2 * lr + la, -c2 * lr ** 2]
            la = float(np.logaddexp.reduce(terms))
            R = 3 * R
        la = min(la, 1e300)
        scales.append(R)
        logs.append(la)
    m = np.array(scales)
    y = np.array(logs)
    x = m if mode == "exp" else np.log(m) ** 2
    steps = np.arange(1, m.size)
    c3 = float(np.min(-y[1:] / x[1:]))
    half = steps[steps.size // 2:]
    fit = linear_fit(x[half], y[half])
    base = 2.0 if mode == "exp" else 3.0
    const = float(np.max(m / (start * base ** np.arange(m.size))))
    reason = ""
    if not c3 > 0:
        reason = "no certificate at this horizon: a does not stay below 1"
    elif not fit.ci_high < 0:
        reason = "no certificate at this horizon: no established decay"
    return RecursionResult(mode, m, y, c3, fit.slope, (fit.ci_low, fit.ci_high), const,
                           not reason, reason or "certificate found")


def bootstrap_recursion(cfg, threads=None):
    """Experiment wrapper around :func:`bootstrap_recursion_demo`; ``c1``
    and ``c2`` come from the exponents block.

    CSV columns: ``step, m, log_a``.
    """
    t0 = time.perf_counter()
    o = cfg.options
    res = bootstrap_recursion_demo(float(cfg.exponents["c1"]), float(cfg.exponents["c2"]),
                                   float(o["a0"]), o["mode"], o["R0"], o["iterations"])
    rows = [{"step": i, "m": mi, "log_a": la} for i, (mi, la) in
            enumerate(zip(res.scales, res.log_a))]
    gates = [_gate("c3_positive", res.c3, 0.0, ">"),
             _gate("decay_slope_ci_high", res.slope_ci[1], 0.0, "<")]
    fits = {"c3": res.c3, "slope": res.slope, "slope_ci": list(res.slope_ci),
            "scale_constant": res.scale_constant, "reason": res.reason}
    xs = res.scales if res.mode == "exp" else np.log(res.scales) ** 2
    fin = np.isfinite(res.log_a)
    plot = {"curves": {res.mode: (xs[fin], res.log_a[fin], None)},
            "xlabel": "m" if res.mode == "exp" else "log^2 m", "ylabel": "log a",
            "logx": res.mode == "exp", "title": f"bootstrap recursion ({res.mode})"}
    return Report(cfg.experiment, ("step", "m", "log_a"), rows, gates, fits, [],
                  time.perf_counter() - t0, plot)


# ------------------------------------------------------------------ registry

def _no_check(cfg):
    pass


def _check_near(cfg):
    if not float(cfg.exponents["c1"]) > 1:
        raise ConfigError("near-critical scan needs c1 > 1", "exponents.c1")


def _check_levels(cfg):
    if not cfg.levels:
        raise ConfigError("at least one level is required", "levels")


def _check_qi(cfg):
    if any(int(k) < 0 for k in cfg.options["offsets"]):
        raise ConfigError("offsets must be non-negative", "options.offsets")
    if not any(int(k) > 0 for k in cfg.options["offsets"]):
        raise ConfigError("need a positive offset", "options.offsets")


def _check_boot(cfg):
    if cfg.options["mode"] not in ("exp", "poly"):
        raise ConfigError("mode must be 'exp' or 'poly'", "options.mode")
    if not 0 <= float(cfg.options["a0"]) < 1:
        raise ConfigError("a0 must lie in [0, 1)", "options.a0")


def _check_sprinkle(cfg):
    if cfg.options["coarse_truncation"] not in ("power", "infinite"):
        raise ConfigError("coarse_truncation must be 'power' or 'infinite'",
                          "options.coarse_truncation")
    if cfg.options["coarse_mesh"] not in ("power", "fine"):
        raise ConfigError("coarse_mesh must be 'power' or 'fine'", "options.coarse_mesh")


@dataclass(frozen=True)
class Experiment:
    run: object
    defaults: dict
    validate: object = _no_check


_EXP0 = {"theta": 0.3, "h": 0.5, "gamma": 0.5, "c1": 2.0, "c2": 0.25}
_BF = {"family": "bargmann_fock"}
_RQ4 = {"family": "rational_quadratic", "beta": 4.0}


def _defaults(**kw):
    d = {"kernel": _BF, "eps": 0.25, "scales": [64], "levels": [0.0], "truncation_radii": [],
         "n_trials": 200, "master_seed": 1, "exponents": dict(_EXP0), "tolerances": {},
         "options": {}}
    d.update(kw)
    return d


EXPERIMENTS = {
    "crossing_curve": Experiment(crossing_curve, _defaults(
        eps=0.6875, scales=[128], levels=[-0.2, -0.1, 0.0, 0.1, 0.2], n_trials=1500,
        tolerances={"monotone_se": 3.0, "gap_min": 0.5, "duality_dev": 0.02},
        options={"aspect": 2.0, "self_duality": False, "gap_levels": [-0.1, 0.1],
                 "refine_trials": 0, "estimator": "convention_average"}), _check_levels),
    "arm_decay": Experiment(arm_decay, _defaults(
        scales=[2, 4, 8], n_trials=2000, tolerances={},
        options={"rho1": 2.0, "jackknife_groups": 20})),
    "quasi_independence_scan": Experiment(quasi_independence_scan, _defaults(
        kernel=_RQ4, eps=0.0625, scales=[32], truncation_radii=[1.0], n_trials=2000,
        tolerances={"far_cov": 0.05, "independence_se": 3.0, "monotone_se": 3.0,
                    "drop_z": 1.645},
        options={"offsets": [0, 1, 2, 3, 4], "jackknife_groups": 20}), _check_qi),
    "near_critical_scan": Experiment(near_critical_scan, _defaults(
        eps=0.5, scales=[32, 48, 64, 96, 128], n_trials=1000,
        tolerances={"c1_max": 0.9, "trend_alpha": 0.05, "flat_se": 3.0},
        options={"fixed_level": 0.1, "aspect": 2.0}), _check_near),
    "sprinkling_compare": Experiment(sprinkling_compare, _defaults(
        kernel=_RQ4, scales=[8, 16, 32], n_trials=200, tolerances={"monotone_se": 3.0},
        options={"level": None, "coarse_truncation": "power", "coarse_mesh": "power"}),
        _check_sprinkle),
    "sup_norm_tail": Experiment(sup_norm_tail, _defaults(
        scales=[16], n_trials=2000,
        tolerances={"tail_max": 1e-2, "concavity_se": 3.0},
        options={"r2_grid": [1.0, 1.5, 2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5, 3.75, 4.0,
                             4.5, 5.0],
                 "gate_r2": 6.0, "min_count": 20})),
    "cameron_martin_check": Experiment(cameron_martin_check, _defaults(
        scales=[16, 32, 64], levels=[0.01, 0.02, 0.05], n_trials=4000,
        tolerances={"max_over_median": 5.0})),
    "bootstrap_recursion_demo": Experiment(bootstrap_recursion, _defaults(
        n_trials=1, exponents={**_EXP0, "c1": 49.0, "c2": 0.1},
        options={"mode": "exp", "a0": 1e-3, "R0": None, "iterations": None}), _check_boot),
}


def run_experiment(cfg, threads=None):
    return EXPERIMENTS[cfg.experiment].run(cfg, threads=threads)
