"""Acceptance criteria 1-8, each run through the CLI on the shipped configs.

Every criterion prints one PASS/FAIL line; the lines are repeated in the
terminal summary.
"""

import json
import os
import time

import pytest

from conftest import ACCEPTANCE_LINES, CONFIG_DIR
from dsnld.cli import run_command
from dsnld.config import load_config

# config name -> subcommand
CONFIGS = {
    "linear_exact": "solve-spde",
    "barenblatt_grid": "solve-spde",
    "barenblatt_particles": "solve-particles",
    "representation": "representation",
    "moment_bounds": "moment-bounds",
    "moment_bounds_drift": "moment-bounds",
    "kappa_sweep": "kappa-sweep",
    "fp_uniqueness": "fp-uniqueness",
    "filter_demo": "filter-demo",
}

_RUNS = {}


def run(name, out_root):
    """Run a shipped config once per session; returns (code, report, seconds, out_dir)."""
    if name not in _RUNS:
        out = os.path.join(out_root, name)
        start = time.perf_counter()
        code = run_command([CONFIGS[name], os.path.join(CONFIG_DIR, f"{name}.toml"), "--out", out])
        secs = time.perf_counter() - start
        with open(os.path.join(out, "report.json")) as fh:
            report = json.load(fh)
        _RUNS[name] = (code, report, secs, out)
    return _RUNS[name]


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return str(tmp_path_factory.mktemp("acceptance"))


def metric(report, name, t=None):
    for m in report["metrics"]:
        if m["name"] == name and (t is None or abs(m.get("t", -1) - t) < 1e-9):
            return m
    raise KeyError(name)


def record(crit, checks):
    """checks: list of (label, ok). Prints one line and asserts."""
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{label}{'' if c else ' [FAILED]'}" for label, c in checks)
    line = f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append((crit, ok, detail))
    assert ok, line


def test_criterion_1_linear_exact(out_root):
    cfg = load_config(os.path.join(CONFIG_DIR, "linear_exact.toml"))
    assert (cfg.grid.n_points, cfg.grid.half_width, cfg.time.dt) == (2048, 20.0, 1e-3)
    code, rep, secs, _ = run("linear_exact", out_root)
    m = metric(rep, "l1_vs_oracle", t=1.0)
    record(1, [(f"terminal L1 {m['value']:.3g} <= 1e-3", m["value"] <= 1e-3),
               (f"runtime {secs:.1f}s <= 10s", secs <= 10), ("exit 0", code == 0)])


def test_criterion_2_barenblatt(out_root):
    cg, rg, sg, _ = run("barenblatt_grid", out_root)
    cp, rp, sp, _ = run("barenblatt_particles", out_root)
    assert load_config(os.path.join(CONFIG_DIR, "barenblatt_particles.toml")).particles.count \
        == 100_000
    g = metric(rg, "l1_vs_oracle", t=1.0)["value"]
    p = metric(rp, "l1_vs_oracle", t=1.0)["value"]
    record(2, [(f"grid L1 {g:.3g} <= 1e-2", g <= 1e-2), (f"particle L1 {p:.3g} <= 0.08", p <= 0.08),
               (f"runtime {sg + sp:.1f}s <= 60s", sg + sp <= 60), ("exit 0", cg == cp == 0)])


def test_criterion_3_representation(out_root):
    cfg = load_config(os.path.join(CONFIG_DIR, "representation.toml"))
    assert cfg.realizations == 8 and cfg.particles.count == 100_000
    code, rep, secs, _ = run("representation", out_root)
    m = metric(rep, "median_terminal_l1_grid_vs_particles")["value"]
    record(3, [(f"median L1 {m:.3g} <= 0.08", m <= 0.08),
               (f"runtime {secs:.1f}s <= 300s", secs <= 300), ("exit 0", code == 0)])


def test_criterion_4_moments(out_root):
    c1, r1, s1, _ = run("moment_bounds", out_root)
    c2, r2, s2, _ = run("moment_bounds_drift", out_root)
    mean = metric(r1, "abs_E[M_t]-1", t=1.0)
    sq = metric(r1, "E[M_t^2]", t=1.0)
    mass = metric(r2, "E[weighted_mass_t]", t=1.0)
    record(4, [
        (f"|E M_T - 1| {mean['value']:.3g} <= 4 stderr {mean['tolerance']:.3g}", mean["passed"]),
        (f"E M_T^2 {sq['value']:.4g} <= {sq['tolerance']:.5g}",
         sq["passed"] and sq["tolerance"] <= 20.086),
        (f"mass {mass['value']:.6g} <= {mass['tolerance']:.6g}", mass["passed"]),
        (f"runtime {s1 + s2:.1f}s <= 60s", s1 + s2 <= 60), ("exit 0", c1 == c2 == 0)])


def test_criterion_5_kappa_sweep(out_root):
    cfg = load_config(os.path.join(CONFIG_DIR, "kappa_sweep.toml"))
    assert cfg.kappa_list == [0.2, 0.1, 0.05, 0.025, 0.0125] and cfg.realizations == 8
    code, rep, secs, _ = run("kappa_sweep", out_root)
    mono = [m for m in rep["metrics"] if m["name"].startswith("a_increase")]
    slope = metric(rep, "loglog_slope_a_vs_kappa")["value"]
    record(5, [("H^-1 distance non-increasing", all(m["passed"] for m in mono) and len(mono) == 4),
               (f"log-log slope {slope:.3g} >= 0.8", slope >= 0.8),
               (f"runtime {secs:.1f}s <= 600s", secs <= 600), ("exit 0", code == 0)])


def test_criterion_6_fp_uniqueness(out_root):
    code, rep, secs, _ = run("fp_uniqueness", out_root)
    ms = [m for m in rep["metrics"] if m["name"].endswith("_l1_vs_extrapolated")]
    worst = max(m["value"] for m in ms)
    kinds = {m["name"].split("_")[0] for m in ms}
    record(6, [(f"worst variant L1 {worst:.3g} <= 1e-2 over {len(ms)} variants", worst <= 1e-2),
               ("discontinuous coefficient included", any(k.startswith("indicator") for k in kinds)),
               (f"runtime {secs:.1f}s <= 120s", secs <= 120), ("exit 0", code == 0)])


def test_criterion_7_filter(out_root):
    code, rep, secs, _ = run("filter_demo", out_root)
    l1 = metric(rep, "normalized_l1_grid_vs_particles")["value"]
    dv = metric(rep, "posterior_var_minus_prior_var")["value"]
    record(7, [(f"normalized L1 {l1:.3g} <= 0.1", l1 <= 0.1),
               (f"posterior - prior variance {dv:.3g} < 0", dv < 0),
               (f"runtime {secs:.1f}s <= 120s", secs <= 120), ("exit 0", code == 0)])


def test_criterion_8_determinism(out_root, tmp_path):
    differing = []
    for name, sub in CONFIGS.items():
        first = run(name, out_root)[3]
        again = str(tmp_path / name)
        run_command([sub, os.path.join(CONFIG_DIR, f"{name}.toml"), "--out", again])
        with open(os.path.join(first, "manifest.json"), "rb") as a, \
                open(os.path.join(again, "manifest.json"), "rb") as b:
            if a.read() != b.read():
                differing.append(name)
    record(8, [(f"{len(CONFIGS) - len(differing)}/{len(CONFIGS)} configs byte-identical on rerun",
                not differing)])
