import json
import math

import numpy as np
import pytest

from gfperc import experiments as ex
from gfperc.field import coarsen_noise, required_padding, sample_noise, synthesize
from gfperc.formats import json_text
from gfperc.grid import GridSpec
from gfperc.kernel import KernelSpec, sup_norm_scale
from gfperc.topology import ArmQuery

BF = KernelSpec.bargmann_fock()
RQ4 = KernelSpec.rational_quadratic(4)


def run(name, **over):
    return ex.run_experiment(ex.config(name, **over))


# ------------------------------------------------------------------ config

def test_config_roundtrip_and_defaults():
    cfg = ex.config("crossing_curve")
    again = ex.ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert ex.ExperimentConfig.from_json(json.dumps(cfg.to_dict())).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("bad,key", [
    ({"experiment": "nope"}, "experiment"),
    ({"experiment": "arm_decay", "bogus": 1}, "bogus"),
    ({"experiment": "arm_decay", "schema": "other/9"}, "schema"),
    ({"experiment": "arm_decay", "options": {"colour": 1}}, None),
    ({"experiment": "arm_decay", "kernel": {"family": "bf", "width": 2}}, None),
    ({"experiment": "arm_decay", "scales": [4, 2, 8]}, None),
    ({"experiment": "arm_decay", "scales": [-1, 2, 3]}, None),
])
def test_config_rejects(bad, key):
    with pytest.raises(ex.ConfigError) as info:
        ex.ExperimentConfig.from_dict(bad)
    if key is not None:
        assert info.value.key == key


def test_config_malformed_json():
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_json("{not json")


def test_kernel_aliases():
    assert ex.kernel_from_dict({"family": "rq", "beta": 4}) == RQ4
    assert ex.kernel_from_dict({"family": "bf"}) == BF
    assert ex.kernel_beta(BF, {"family": "bf"}) == math.inf


def test_replace_overrides_nested():
    cfg = ex.config("crossing_curve").replace(n_trials=7, options={"aspect": 1.0})
    assert cfg.n_trials == 7 and cfg.options["aspect"] == 1.0
    assert cfg.options["estimator"] == "convention_average"


# ----------------------------------------------------------- determinism

def test_thread_count_independent(tmp_path):
    cfg = ex.config("crossing_curve", scales=[16], n_trials=20, master_seed=3)
    a = ex.run_experiment(cfg, threads=1)
    b = ex.run_experiment(cfg, threads=2)
    assert a.csv() == b.csv()
    assert json_text(a.summary()) == json_text(b.summary())
    paths = ex.write_report(a, tmp_path)
    assert set(paths) == {"csv", "json", "png"}
    assert (tmp_path / "crossing_curve.png").read_bytes()[:4] == b"\x89PNG"


# -------------------------------------------------------- crossing curve

def test_crossing_curve_monotone_and_duality():
    rep = run("crossing_curve", scales=[24], levels=[-0.2, 0.0, 0.2], n_trials=200,
              options={"self_duality": True})
    curve = [r["estimate"] for r in rep.rows if r["event"] == "convention_average_lr"]
    assert curve == sorted(curve)
    duo = next(r for r in rep.rows if r["event"] == "convention_average")
    assert abs(duo["estimate"] - 0.5) <= 4 * duo["se"]


def test_crossing_estimator_choice():
    prim = run("crossing_curve", scales=[16], levels=[0.0], n_trials=40, master_seed=2,
               options={"estimator": "primal"})
    avg = run("crossing_curve", scales=[16], levels=[0.0], n_trials=40, master_seed=2)
    # the 8-connected crossing contains the 4-connected one
    assert avg.rows[0]["estimate"] >= prim.rows[0]["estimate"]
    with pytest.raises(ex.ConfigError):
        run("crossing_curve", n_trials=2, options={"estimator": "median"})


# ------------------------------------------------------------- arm decay

def test_arm_decay_preconditions_and_se():
    with pytest.raises(ValueError):
        ArmQuery((0.0, 0.0), 2.0, 2.0)
    with pytest.raises(ex.ConfigError):
        run("arm_decay", scales=[1, 2, 4], n_trials=4)
    small = run("arm_decay", n_trials=100, master_seed=5)
    large = run("arm_decay", n_trials=400, master_seed=5)
    # four times the trials halves the binomial standard error
    for a, b in zip(small.rows, large.rows):
        if 0 < a["estimate"] < 1:
            assert abs(b["se"] / a["se"] - 0.5) < 0.2 * 0.5 + 0.05


# ----------------------------------------------------- quasi-independence

def test_quasi_independence_small():
    rep = run("quasi_independence_scan", eps=0.25, scales=[8], n_trials=300, master_seed=4)
    same = [r for r in rep.rows if r["offset"] == 0]
    for r in same:
        assert r["cov"] == pytest.approx(r["p_a"] * (1 - r["p_a"]))
        assert r["cov"] > 0
    for r in rep.rows:
        if r["field"] == "truncated" and r["gap"] >= 1.0:
            assert abs(r["cov"]) <= 4 * r["se"]


# ---------------------------------------------------------- near critical

def test_near_critical_shapes():
    with pytest.raises(ex.ConfigError):
        ex.config("near_critical_scan", exponents={"c1": 0.5})
    rep = run("near_critical_scan", scales=[16, 24, 32], n_trials=60)
    assert {g.name for g in rep.gates} == {"c1_curve_below", "fixed_level_increasing",
                                           "zero_level_flat"}


# ------------------------------------------------------------- sprinkling

def test_sprinkling_parameters():
    level, r, eps = ex.sprinkling_parameters(16.0, {"theta": 0.3, "h": 0.5, "gamma": 0.5})
    assert level == pytest.approx(16 ** -0.3)
    assert r == 4.0 and eps == 0.25
    with pytest.raises(ex.ConfigError):
        run("sprinkling_compare", exponents={"theta": 0.9}, n_trials=2)


def test_sprinkling_huge_level_trivial():
    rep = run("sprinkling_compare", scales=[4], n_trials=10, options={"level": 10.0})
    assert rep.rows[0]["estimate"] == 0.0


def test_coupled_meshes_share_noise():
    cv, fv, cg, fg = ex.coupled_meshes(BF, None, None, 0.25, (0.0, 4.0, 0.0, 4.0), 9)
    assert cg.eps == 0.5 and fg.eps == 0.25
    assert cv.shape == (8, 8) and fv.shape == (16, 16)
    # same white noise at two resolutions: the fields are close
    coarse_of_fine = fv.reshape(8, 2, 8, 2).mean(axis=(1, 3))
    assert np.corrcoef(cv.ravel(), coarse_of_fine.ravel())[0, 1] > 0.95


# --------------------------------------------------------------- sup norm

def test_sup_norm_tail_amplitude_invariance():
    a = run("sup_norm_tail", scales=[8], n_trials=60, master_seed=1)
    b = run("sup_norm_tail", scales=[8], n_trials=60, master_seed=1,
            kernel={"family": "bf", "amplitude": 2.0})
    assert b.fits["m"] == pytest.approx(2 * a.fits["m"], rel=1e-12)
    assert [r["count"] for r in a.rows] == [r["count"] for r in b.rows]
    assert sup_norm_scale(BF.scaled(2.0)) == pytest.approx(2.0)


# --------------------------------------------------------- level shifting

def test_cameron_martin_small():
    rep = run("cameron_martin_check", scales=[16, 32], levels=[0.05, 0.1], n_trials=600)
    assert rep.gate("zero_shift_exact").passed
    assert all(r["delta"] == 0 for r in rep.rows if r["t"] == 0)
    for v in rep.fits["doubling_ratio"].values():
        assert 1.0 < v < 3.0


# -------------------------------------------------------------- recursion

def test_bootstrap_examples():
    e = ex.bootstrap_recursion_demo(49, 0.1, 1e-3, "exp", R0=100, iterations=40)
    assert e.certificate and e.c3 > 0
    z = ex.bootstrap_recursion_demo(49, 0.1, 0.0, "exp", R0=100, iterations=5)
    assert z.certificate
    # with a0 = 0 only the additive tail remains after one step
    assert z.log_a[1] == pytest.approx(-0.1 * 100)
    p = ex.bootstrap_recursion_demo(2, 1, 0.01, "poly", R0=10, iterations=20)
    assert p.certificate and p.slope_ci[1] < 0
    bad = ex.bootstrap_recursion_demo(10, 0.01, 0.9, "exp", R0=5, iterations=10)
    assert not bad.certificate and bad.reason.startswith("no certificate")
    with pytest.raises(ValueError):
        ex.bootstrap_recursion_demo(1, 1, 1.5)


def test_bootstrap_experiment_report():
    rep = run("bootstrap_recursion_demo")
    assert rep.passed
    assert rep.header == ("step", "m", "log_a")
