"""The acceptance matrix: sixteen numbered criteria with frozen settings.

Each criterion returns a :class:`CriterionResult` whose ``details`` hold
the measured quantities.  ``run_criteria`` drives either the quick profile
(quadrature and combinatorial checks only) or the full one.
"""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import experiments as ex
from .explorer import (CrossingEvent, CrossingExplorer, DictatorEvent, MajorityEvent,
                       crossing_event, majority_explorer, osss_audit, point_event,
                       reveal_first_explorer, russo_derivative_check)
from .formats import json_text
from .field import (pointwise_variance, required_padding, sample_noise, synthesize)
from .grid import GridSpec
from .kernel import (CutoffSpec, KernelSpec, covariance_table, discretisation_error_l2,
                     l1_norm, mills_constant, truncation_error_variance)
from .rng import derive_seed
from .stats import linear_fit, mean_se
from .topology import BOTTOM_TOP, LEFT_RIGHT, crosses, label_components

MASTER = 20240101


def _seed(number, *keys):
    return derive_seed(MASTER, "criterion", number, *keys)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict
    runtime_s: float = 0.0
    budget_s: float = math.inf

    @property
    def within_budget(self):
        return self.runtime_s <= self.budget_s

    @property
    def ok(self):
        return self.passed and self.within_budget

    def line(self):
        mark = "PASS" if self.ok else "FAIL"
        return (f"criterion {self.number:2d} {mark}  {self.name}  "
                f"({self.runtime_s:.1f}s / {self.budget_s:.0f}s)  {_brief(self.details)}")


def _brief(details):
    parts = []
    for k, v in details.items():
        if isinstance(v, bool):
            parts.append(f"{k}={'yes' if v else 'no'}")
        elif isinstance(v, float):
            parts.append(f"{k}={v:.4g}")
        elif isinstance(v, int):
            parts.append(f"{k}={v}")
    return ", ".join(parts)


# ----------------------------------------------------------- 1: covariance

PROBE_OFFSETS = ((0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (2, 2), (3, 0),
                 (4, 0), (3, 3), (5, 0), (4, 4), (6, 0), (8, 0), (6, 6), (10, 0), (12, 0),
                 (16, 0), (20, 0))


def _lagged_products(f, offsets):
    ny, nx = f.shape
    out = np.empty(len(offsets))
    for i, (dx, dy) in enumerate(offsets):
        a = f[:ny - dy, :nx - dx]
        b = f[dy:, dx:]
        out[i] = np.mean(a * b)
    return out


def covariance_reproduction(kernel, eps, n_pixels, n_seeds, seed, oracle_mesh, oracle_hw):
    """Spatially averaged lagged products per seed against ``kappa`` at the
    probe offsets.  Returns ``(estimate, se, oracle)`` arrays."""
    grid = GridSpec.square(n_pixels, eps)
    grid = grid.with_padding(required_padding(kernel, None, eps))
    prods = np.empty((n_seeds, len(PROBE_OFFSETS)))
    for t in range(n_seeds):
        f = synthesize(kernel, None, (0, 0), sample_noise(grid, derive_seed(seed, t)),
                       grid).values
        prods[t] = _lagged_products(f, PROBE_OFFSETS)
    est = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(n_seeds)
    table = covariance_table(kernel, GridSpec(oracle_mesh, (-oracle_hw, oracle_hw,
                                                            -oracle_hw, oracle_hw)))
    oracle = np.array([table.at(dx * eps, dy * eps) for dx, dy in PROBE_OFFSETS])
    return est, se, oracle


def criterion_1():
    d = {}
    ok = True
    cases = (("bf", KernelSpec.bargmann_fock(), 0.25, 0.125, 12.0),
             ("rq4", KernelSpec.rational_quadratic(4), 0.25, 0.125, 48.0))
    for name, k, eps, mesh, hw in cases:
        est, se, orc = covariance_reproduction(k, eps, 256, 2000, _seed(1, name), mesh, hw)
        z = np.abs(est - orc) / se
        d[f"{name}_max_z"] = float(z.max())
        ok &= bool(np.all(z <= 3))
    return ok, d


# ---------------------------------------------------- 2: variance identities

def criterion_2():
    n = 20000
    eps = 0.25
    bf = KernelSpec.bargmann_fock()
    rq = KernelSpec.rational_quadratic(4)
    cut = CutoffSpec(4.0)
    grid = GridSpec.square(1, eps)
    grid = grid.with_padding(max(required_padding(rq, None, eps), required_padding(bf, None, eps)))
    x_bf = np.empty(n)
    x_diff = np.empty(n)
    for t in range(n):
        noise = sample_noise(grid, _seed(2, t))
        x_bf[t] = synthesize(bf, None, (0, 0), noise, grid, method="direct").values[0, 0]
        a = synthesize(rq, None, (0, 0), noise, grid, method="direct").values[0, 0]
        b = synthesize(rq, cut, (0, 0), noise, grid, method="direct").values[0, 0]
        x_diff[t] = a - b
    v_bf, v_bf_se = mean_se(x_bf ** 2)
    v_diff, v_diff_se = mean_se(x_diff ** 2)
    pred_bf = pointwise_variance(bf, None, eps)
    pred_diff = truncation_error_variance(rq, 4.0)
    z1 = abs(v_bf - pred_bf) / v_bf_se
    z2 = abs(v_diff - pred_diff) / v_diff_se
    d = {"bf_variance": v_bf, "bf_sum_form": pred_bf, "bf_z": z1,
         "diff_second_moment": v_diff, "diff_integral": pred_diff, "diff_z": z2}
    return bool(z1 <= 3 and z2 <= 3), d


# ------------------------------------------------------------ 3: scaling

def criterion_3():
    rq = KernelSpec.rational_quadratic(4)
    radii = np.array([8.0, 16.0, 32.0, 64.0])
    tev = [truncation_error_variance(rq, r) for r in radii]
    s_tev = linear_fit(np.log(radii), np.log(tev)).slope
    meshes = np.array([0.05, 0.1, 0.2, 0.4])
    disc = [discretisation_error_l2(rq, e) for e in meshes]
    s_disc = linear_fit(np.log(meshes), np.log(disc)).slope
    ok = abs(s_tev + 6) <= 0.25 * 6 and abs(s_disc - 2) <= 0.3
    return bool(ok), {"truncation_slope": s_tev, "discretisation_slope": s_disc}


# ------------------------------------------------------------ 4: constants

def criterion_4():
    c = mills_constant()
    l1 = l1_norm(KernelSpec.rational_quadratic(4))
    rq = KernelSpec.rational_quadratic(4)
    k0 = covariance_table(rq, GridSpec(0.05, (-40.0, 40.0, -40.0, 40.0))).at_zero
    d = {"mills_constant": c, "rq4_l1": l1, "rq4_kappa0": k0}
    ok = (abs(c - math.sqrt(math.pi / 2)) < 1e-6 and abs(l1 - math.pi) < 1e-3
          and abs(k0 - math.pi / 3) < 1e-3)
    return bool(ok), d


# --------------------------------------------------------- 5, 6: crossings

def criterion_5():
    cfg = ex.config("crossing_curve", eps=0.25, scales=[64], levels=[0.0], n_trials=4000,
                    master_seed=_seed(5), options={"aspect": 1.0, "self_duality": True})
    rep = ex.run_experiment(cfg)
    row = next(r for r in rep.rows if r["event"] == "convention_average")
    return rep.gate("self_duality").passed, {"average": row["estimate"], "se": row["se"]}


def criterion_6():
    cfg = ex.config("crossing_curve", master_seed=_seed(6))
    rep = ex.run_experiment(cfg)
    g = rep.gate("transition_gap")
    m = rep.gate("monotone_in_level")
    return bool(g.passed and m.passed), {"gap": g.value, "worst_decrease_se": m.value,
                                         "eps": cfg.eps}


# ------------------------------------------------------ 7: combinatorics

def bfs_labels(bits, connectivity):
    """Reference component labels by breadth-first search (-1 off the set)."""
    ny, nx = bits.shape
    if connectivity == 4:
        steps = ((1, 0), (-1, 0), (0, 1), (0, -1))
    else:
        steps = tuple((a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0))
    lab = -np.ones(bits.shape, dtype=int)
    nxt = 0
    for j in range(ny):
        for i in range(nx):
            if not bits[j, i] or lab[j, i] >= 0:
                continue
            lab[j, i] = nxt
            queue = deque([(j, i)])
            while queue:
                y, x = queue.popleft()
                for dy, dx in steps:
                    v, u = y + dy, x + dx
                    if 0 <= v < ny and 0 <= u < nx and bits[v, u] and lab[v, u] < 0:
                        lab[v, u] = nxt
                        queue.append((v, u))
            nxt += 1
    return lab, nxt


def same_partition(a, b):
    if not np.array_equal(a < 0, b < 0):
        return False
    on = a >= 0
    pairs = set(zip(a[on].tolist(), b[on].tolist()))
    return len(pairs) == len(set(a[on].tolist())) == len(set(b[on].tolist()))


def criterion_7():
    rng = np.random.default_rng(_seed(7))
    agree = 0
    n_masks = 1000
    for t in range(n_masks):
        bits = rng.random((12, 12)) < rng.uniform(0.2, 0.8)
        conn = 4 if t % 2 == 0 else 8
        lab, count = label_components(bits, conn)
        ref, rcount = bfs_labels(bits, conn)
        agree += bool(count == rcount and same_partition(lab, ref))
    dual_ok = 0
    total = 0
    for shape in ((3, 3), (3, 4), (4, 3)):
        n = shape[0] * shape[1]
        for code in range(1 << n):
            bits = np.array([(code >> k) & 1 for k in range(n)], dtype=bool).reshape(shape)
            lr = crosses(bits, LEFT_RIGHT, 4)
            bt = crosses(~bits, BOTTOM_TOP, 8)
            dual_ok += lr != bt
            total += 1
    d = {"labels_agree": agree, "labels_total": n_masks, "duality_agree": dual_ok,
         "duality_total": total}
    return bool(agree == n_masks and dual_ok == total), d


# ------------------------------------------------------------ 8: explorer

def revealment_profile(kernel, r, eps, R, n_runs, seed):
    """Per-vertex revealment frequencies, accumulated without keeping the
    traces, and the mask of vertices within ``2 r`` of every seed line."""
    exp = CrossingExplorer(kernel, r, eps, R, 0.0)
    dom = exp.domain
    acc = np.zeros(exp.noise_shape)
    for t in range(n_runs):
        tr = exp.run(dom.noise(derive_seed(seed, t)), derive_seed(seed, "algo", t))
        acc += tr.revealed
    delta = acc / n_runs
    every = np.ones(exp.noise_shape, dtype=bool)
    some = np.zeros(exp.noise_shape, dtype=bool)
    for k in range(dom.n_lines):
        s = dom.strip(k)
        every &= s
        some |= s
    return delta, every, some, dom.n_lines


def criterion_8():
    rq = KernelSpec.rational_quadratic(4)
    exp = CrossingExplorer(rq, 4.0, 1.0, 16.0, 0.0)
    correct = 0
    for t in range(1000):
        v = exp.domain.noise(_seed(8, "inst", t))
        correct += exp.run(v, _seed(8, "algo", t)).output == exp.full_reveal(v)
    maxima, ses = [], []
    floor_ok = True
    strip_ok = True
    n = 2000
    for R in (16.0, 32.0, 64.0):
        delta, every, some, n_lines = revealment_profile(rq, 4.0, 1.0, R, n, _seed(8, R))
        if every.any():
            floor_ok &= bool(np.all(delta[every] == 1.0))
        se = np.sqrt(delta * (1 - delta) / n)
        strip_ok &= bool(np.all(delta[some] >= 1.0 / n_lines - 3 * se[some] - 1e-12))
        i = np.unravel_index(int(np.argmax(delta)), delta.shape)
        maxima.append(float(delta[i]))
        ses.append(float(se[i]))
    steps_down = all(b < a for a, b in zip(maxima, maxima[1:]))
    drop_z = (maxima[0] - maxima[-1]) / max(math.hypot(ses[0], ses[-1]), 1e-12)
    trend = bool(steps_down and drop_z > 1.645)
    d = {"correct": int(correct), "instances": 1000, "floor": floor_ok, "strip_floor": strip_ok,
         "max_delta_16": maxima[0], "max_delta_32": maxima[1], "max_delta_64": maxima[2],
         "trend": trend}
    return bool(correct == 1000 and floor_ok and strip_ok and trend), d


# --------------------------------------------------------------- 9: OSSS

def criterion_9():
    shape = (4, 4)
    dic = DictatorEvent(shape, (1, 2))
    maj = MajorityEvent(shape)
    a1 = osss_audit(dic, reveal_first_explorer(dic), 2000, seed=_seed(9, "dictator"))
    a2 = osss_audit(maj, majority_explorer(maj), 2000, seed=_seed(9, "majority"))
    cr = CrossingEvent(KernelSpec.rational_quadratic(4), 2.0, 1.0, 8.0, 0.0)
    a3 = osss_audit(cr, cr.explorer, 1000, seed=_seed(9, "crossing"))
    d = {"dictator_margin": a1.margin, "majority_margin": a2.margin,
         "crossing_variance": a3.variance, "crossing_rhs": a3.rhs,
         "crossing_margin_se": a3.margin / a3.margin_se}
    return bool(a1.passed and a2.passed and a3.passed), d


# -------------------------------------------------------------- 10: Russo

def criterion_10():
    rq = KernelSpec.rational_quadratic(4)
    cut = CutoffSpec(4.0)
    eps = 0.25
    level = 0.3
    sigma = math.sqrt(pointwise_variance(rq, cut, eps))
    closed = norm.pdf(level / sigma) / sigma
    p = russo_derivative_check(rq, cut, GridSpec.square(1, eps), point_event((0, 0)), level,
                               0.1, 20000, seed=_seed(10, "point"))
    z_l = abs(p.lhs - closed) / p.lhs_se
    z_r = abs(p.rhs - closed) / p.rhs_se
    c = russo_derivative_check(rq, CutoffSpec(8.0), GridSpec.square(24, 1.0), crossing_event(),
                               0.0, 0.1, 16000, seed=_seed(10, "crossing"))
    d = {"closed_form": closed, "point_lhs": p.lhs, "point_rhs": p.rhs, "point_lhs_z": z_l,
         "point_rhs_z": z_r, "crossing_lhs": c.lhs, "crossing_rhs": c.rhs,
         "crossing_gap": c.relative_gap}
    return bool(z_l <= 3 and z_r <= 3 and c.relative_gap <= 0.1), d


# ------------------------------------------------------- 11-15: experiments

def criterion_11():
    rep = ex.run_experiment(ex.config("quasi_independence_scan", master_seed=_seed(11)))
    names = ("truncated_independence", "covariance_decreasing", "far_covariance")
    d = {n: rep.gate(n).value for n in names}
    return all(rep.gate(n).passed for n in names), d


def criterion_12():
    rep = ex.run_experiment(ex.config("arm_decay", master_seed=_seed(12)))
    g = rep.gate("d_ci_excludes_zero")
    return g.passed, {"d": rep.fits["d"], "ci_low": g.value}


def criterion_13():
    rep = ex.run_experiment(ex.config("near_critical_scan", master_seed=_seed(13)))
    a, b = rep.gate("c1_curve_below"), rep.gate("fixed_level_increasing")
    return bool(a.passed and b.passed), {"c1_max": a.value, "trend_p": b.value}


def criterion_14():
    sup = ex.run_experiment(ex.config("sup_norm_tail", master_seed=_seed(14, "sup")))
    cm = ex.run_experiment(ex.config("cameron_martin_check", master_seed=_seed(14, "cm")))
    gates = (sup.gate("tail_at_gate"), sup.gate("log_tail_concave"), cm.gate("c_hat_bounded"))
    d = {"tail_upper_6m": gates[0].value, "concavity_z": gates[1].value,
         "c_hat_max_over_median": gates[2].value}
    return all(g.passed for g in gates), d


def criterion_15():
    a = ex.bootstrap_recursion_demo(49.0, 0.1, 1e-3, "exp", R0=100.0, iterations=40)
    b = ex.bootstrap_recursion_demo(2.0, 1.0, 0.01, "poly", R0=10.0, iterations=20)
    d = {"exp_c3": a.c3, "exp_certificate": a.certificate, "poly_c3": b.c3,
         "poly_slope": b.slope, "poly_certificate": b.certificate}
    return bool(a.certificate and b.certificate and a.c3 > 0 and b.c3 > 0), d


# ---------------------------------------------------------- 16: reproducibility

SMALL_CONFIGS = {
    "crossing_curve": {"scales": [24], "levels": [-0.1, 0.0, 0.1], "n_trials": 24,
                       "options": {"self_duality": True}},
    "arm_decay": {"n_trials": 24},
    "quasi_independence_scan": {"eps": 0.25, "scales": [8], "n_trials": 24},
    "near_critical_scan": {"scales": [16, 24, 32], "n_trials": 24},
    "sprinkling_compare": {"scales": [4, 8], "n_trials": 6},
    "sup_norm_tail": {"scales": [8], "n_trials": 24},
    "cameron_martin_check": {"scales": [8, 16], "n_trials": 24},
    "bootstrap_recursion_demo": {},
}


def _artifact(rep):
    return rep.csv(), json_text(rep.summary())


def criterion_16(threads=(1, 2)):
    same = {}
    for name, over in SMALL_CONFIGS.items():
        cfg = ex.config(name, master_seed=_seed(16, name), **over)
        runs = [_artifact(ex.run_experiment(cfg, threads=t)) for t in threads]
        runs.append(_artifact(ex.run_experiment(cfg, threads=threads[0])))
        same[name] = all(r == runs[0] for r in runs[1:])
    return all(same.values()), same


# ----------------------------------------------------------------- driver

CRITERIA = {
    1: ("covariance reproduction", criterion_1, 600, False),
    2: ("exact variance identities", criterion_2, 300, False),
    3: ("scaling laws", criterion_3, 60, True),
    4: ("derived constants", criterion_4, 60, True),
    5: ("self-duality", criterion_5, 600, False),
    6: ("phase transition", criterion_6, 1200, False),
    7: ("combinatorial oracles", criterion_7, 60, True),
    8: ("exploration correctness and revealment", criterion_8, 900, False),
    9: ("OSSS audit", criterion_9, 900, False),
    10: ("Russo formula", criterion_10, 900, False),
    11: ("quasi-independence", criterion_11, 1200, False),
    12: ("arm decay", criterion_12, 1200, False),
    13: ("near-critical window", criterion_13, 1200, False),
    14: ("Gaussian inequalities", criterion_14, 1200, False),
    15: ("bootstrap recursions", criterion_15, 1, True),
    16: ("reproducibility", criterion_16, 1200, False),
}


def run_criterion(number):
    name, func, budget, _ = CRITERIA[number]
    t0 = time.perf_counter()
    passed, details = func()
    return CriterionResult(number, name, bool(passed), details,
                           time.perf_counter() - t0, float(budget))


def profile_numbers(profile):
    if profile == "quick":
        return [k for k, v in CRITERIA.items() if v[3]]
    if profile == "full":
        return list(CRITERIA)
    raise ValueError(f"unknown profile {profile!r}")


def run_criteria(profile="full", numbers=None, echo=None):
    out = []
    for k in (numbers or profile_numbers(profile)):
        res = run_criterion(k)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out


def verify_summary(results, profile):
    """Machine-readable verdicts; timings are left out so repeated runs
    produce identical files."""
    return {"profile": profile,
            "criteria": [{"number": r.number, "name": r.name, "pass": r.passed,
                          "details": r.details} for r in results],
            "pass": all(r.passed for r in results)}
