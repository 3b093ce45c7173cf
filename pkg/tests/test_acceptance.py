"""End-to-end acceptance criteria, each checked at its stated tolerance.

Every test records a PASS/FAIL line (see ``conftest.py``); the table is
printed at the end of the session.  Several criteria are expected to fail
honestly -- the numbers they compare against are not reproduced by the
underlying physics -- and are left red on purpose (see the decisions log).

The preset-driven criteria share one run of the full preset suite
(``preset_runs``); criterion 12 reruns it and compares CSV bytes.
"""

import filecmp
import math
import os
import time

import numpy as np
import pytest

from qtrates import bounds, csvio, engine
from qtrates.models import bixon_jortner as bj
from qtrates.models import tfim
from qtrates.models.tls import TlsModel, tls_closed_forms, tls_setup
from qtrates.presets import PRESET_NAMES, preset_config
from qtrates.runner import run
from qtrates.sweeps import random_sweep
from qtrates.tasks import bj_window

pytestmark = pytest.mark.acceptance

SWEEP_SEED = 20240611
SWEEP_COUNT = 300


def _run_all(out_dir):
    runs, start = {}, time.perf_counter()
    for name in PRESET_NAMES:
        t0 = time.perf_counter()
        manifest = run(preset_config(name), str(out_dir))
        runs[name] = {"manifest": manifest, "seconds": time.perf_counter() - t0}
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def preset_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("presets_a")
    runs, total = _run_all(out)
    return {"dir": out, "runs": runs, "total": total}


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    rows = random_sweep(SWEEP_SEED, SWEEP_COUNT, dim_max=8, check_bounds=True)
    return rows, time.perf_counter() - t0


def _summary(preset_runs, name):
    return preset_runs["runs"][name]["manifest"].summary


def _gates(preset_runs, name):
    return {g["name"]: g for g in preset_runs["runs"][name]["manifest"].gates}


# -- 1: oracle equivalence ----------------------------------------------------

def test_criterion_01_oracle_equivalence(sweep, record):
    rows, seconds = sweep
    worst = {}
    for r in rows:
        for route, dev in r["deviations"].items():
            worst[route] = max(worst.get(route, 0.0), dev)
    kinds = {r["kind"] for r in rows}
    ok = (len(rows) >= 300 and max(r["dim"] for r in rows) <= 8
          and {"unitary", "driven", "lindblad", "kraus"} <= kinds
          and set(worst) == {"direct", "general", "flux_flux", "channel"}
          and max(worst.values()) <= 1e-5 and seconds <= 120)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items()))
    assert record(1, "", ok, f"{len(rows)} setups, max |k - FD|: {detail}; {seconds:.0f} s")


# -- 2: TLS closed forms --------------------------------------------------------

def test_criterion_02_tls_closed_forms(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    pairs = [(0.0, 1.0)] + [tuple(rng.uniform(-2.0, 2.0, 2)) for _ in range(49)]
    ts = np.linspace(0.0, 10.0, 201)
    dev = 0.0
    for d, w in pairs:
        m = TlsModel(d, w)
        s = tls_setup(m)
        for t in ts:
            _, p, k = tls_closed_forms(m, t)
            dev = max(dev, abs(engine.transition_probability(s, t) - p),
                      abs(engine.qtr_direct(s, t) - k))
    sat = 0.0
    for w in (0.3, 1.0, 2.5):
        s = tls_setup(TlsModel(0.0, w))
        sat = max(sat, max(abs(bounds.mt_rate_bound(s, t).slack) for t in ts))
    seconds = time.perf_counter() - t0
    ok = dev <= 1e-10 and sat <= 1e-9
    assert record(2, "", ok, f"max |engine - closed| {dev:.1e} over 50 pairs; "
                             f"MT saturation |slack| {sat:.1e} at Delta=0; {seconds:.1f} s")


# -- 3: Bixon-Jortner -------------------------------------------------------------

def test_criterion_03a_closed_form_vs_quadrature(record):
    base = bj.BixonJortnerModel(1.0, 2.0, -1.0, 1.0, 2000)
    dev = 0.0
    for frac in (0.25, 0.35, 0.47, 0.53, 0.75, 1.0):
        m = base.with_window(*bj_window(base, frac))
        for t in np.linspace(0.0, 1.0, 101):
            dev = max(dev, abs(bj.bj_closed_P(m, t) - bj.bj_quadrature_P(m, t)))
    assert record(3, "a", dev <= 1e-8, f"Ei closed form vs quadrature {dev:.1e}")


def test_criterion_03b_discrete_vs_continuum(preset_runs, record):
    devs = {}
    for name in ("bj-pab-negative", "bj-pab-positive"):
        for key, v in _summary(preset_runs, name).items():
            if key.endswith("_max_rel_dev_P"):
                devs[key.split("_")[0]] = v
    seconds = sum(preset_runs["runs"][n]["seconds"] for n in ("bj-pab-negative", "bj-pab-positive"))
    worst = max(devs.values())
    ok = worst <= 0.02 and seconds <= 60
    detail = ", ".join(f"{k} {v:.2%}" for k, v in devs.items())
    assert record(3, "b", ok, f"N=2000 vs continuum, max rel dev {detail}; {seconds:.0f} s")


def test_criterion_03c_survival_exponential(preset_runs, record):
    dev = _summary(preset_runs, "bj-pab-negative")["survival_max_rel_dev"]
    assert record(3, "c", dev <= 0.02,
                  f"survival vs exp(-2 pi W^2 t/Delta), max rel dev {dev:.3g} for t <= 1")


def test_criterion_03d_negative_rate(preset_runs, record):
    s = _summary(preset_runs, "bj-pab-positive")
    e0, e1 = s["dE0.53_window"]
    k_min = s["dE0.53_min_k_closed"]
    ok = e0 < 0 < e1 and k_min < -1e-4
    assert record(3, "d", ok, f"window [{e0:g}, {e1:g}] crosses E=0, min k {k_min:.2e} "
                              f"(discrete {s['dE0.53_min_k_discrete']:.2e})")


# -- 4: Zeno ------------------------------------------------------------------

def test_criterion_04_zeno(preset_runs, record):
    g = _gates(preset_runs, "zeno-suppression")
    ratio = g["zeno_ratio[n=1000]"]["value"]
    quad = csvio.read_csv(os.path.join(preset_runs["dir"], "zeno-suppression_quadratic.csv"))
    rel = quad["rel_err"]
    ok = ratio <= 1e-3 and bool(np.all(rel <= 1e-2)) and set(quad["driven"]) == {0.0, 1.0}
    assert record(4, "", ok, f"P_zeno/P_free at n=1000: {ratio:.2e}; quadratic rel err "
                             f"static {rel[0]:.1e}, driven {rel[1]:.1e}")


# -- 5: bound validity ---------------------------------------------------------------

def test_criterion_05_bounds(sweep, record):
    rows, seconds = sweep
    names = ("mt_rate", "superfidelity", "rate_change", "tau_qtr", "tau_mt")
    worst = {n: math.inf for n in names}
    for r in rows:
        for n, v in r["slacks"].items():
            worst[n] = min(worst[n], v)
    violations = sum(1 for r in rows for v in r["slacks"].values() if v < -1e-9)
    ok = violations == 0 and all(math.isfinite(v) for v in worst.values()) and seconds <= 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert record(5, "", ok, f"{violations} violations; min slack {detail}")


# -- 6: TLS tightness map -----------------------------------------------------------

def test_criterion_06_tls_tightness(record):
    ts = np.linspace(0.0, 10.0, 1000)
    worst = math.inf
    for d, w in [(1.0, 1.0), (2.0, 1.0), (-1.5, 0.5), (1.0, -1.0), (3.0, 2.0), (0.7, 0.0)]:
        s = tls_setup(TlsModel(d, w))
        worst = min(worst, min(bounds.tightness_condition(s, t).slack for t in ts))
    m = TlsModel(1.0, 1.0)
    s = tls_setup(m)
    half = math.pi / m.omega
    dense = np.linspace(0.0, 10.0, 20001)
    window = dense[np.mod(dense, half) <= math.pi / (4 * m.omega)]
    worst_w = min(bounds.tightness_condition(s, t).slack for t in window)
    ok = worst >= -bounds.SLACK_TOL and worst_w >= -bounds.SLACK_TOL
    assert record(6, "", ok, f"|Delta|>=|W|: min slack {worst:.1e} over 10^3 t; "
                             f"Delta=W=1 first quarter of each half-period: {worst_w:.1e} "
                             f"({window.size} t)")


# -- 7: TFIM flux-flux -------------------------------------------------------------

def test_criterion_07a_fluxflux_oracle_and_reconstruction(preset_runs, record):
    g = _gates(preset_runs, "tfim-fluxflux")
    oracle = g["tfim_oracle"]["value"]
    recon = g["tfim_reconstruction"]["value"]
    seconds = preset_runs["runs"]["tfim-fluxflux"]["seconds"]
    ok = oracle <= 1e-7 and recon <= 1e-5 and seconds <= 120
    assert record(7, "a", ok, f"L=400, tau in {{2,8,32}}: oracle {oracle:.1e}, "
                              f"reconstruction {recon:.1e}; {seconds:.0f} s")


def test_criterion_07b_critical_sharpness(preset_runs, record):
    ratio = _summary(preset_runs, "tfim-fluxflux")["tau8_sharpness_ratio"]
    assert record(7, "b", ratio >= 10.0,
                  f"max|C| near g=1 / max|C| at g in [1.5, 2] = {ratio:.3g} (tau=8)")


# -- 8: TFIM counterdiabatic sudden limit ------------------------------------------

def test_criterion_08a_log_probability(preset_runs, record):
    s = _summary(preset_runs, "tfim-cd-pab")
    dev = s["max_rel_dev_reference"]
    assert record(8, "a", dev <= 0.05,
                  f"ln P vs -2.48 L/(pi n): max rel err {dev:.1%} "
                  f"(vs continuum -1.234 L/(pi n): {s['max_rel_dev_continuum']:.1%})")


def test_criterion_08b_rate_scaling(preset_runs, record):
    s = _summary(preset_runs, "tfim-cd-kab")
    dev = s["rel_dev_slope_reference"]
    assert record(8, "b", dev <= 0.10,
                  f"fitted log-slope {s['fitted_log_slope']:.4g} vs {s['reference_log_slope']:.4g}: "
                  f"{dev:.1%}")


# -- 9: TFIM Landau-Zener regime -------------------------------------------------

def test_criterion_09a_lz_excitation(record):
    # tau here is the Landau-Zener sweep time |g/g'| = 64: g0 = 2 ramped over 128
    m = tfim.TfimModel(L=400, tau=128.0, g0=2.0, k_b=0.2, initial="ground")
    k = m.momenta[m.momenta <= 0.2]
    sol = tfim.tfim_mode_solver(m, [0.0, m.tau], k=k)
    rel = np.abs(tfim.mode_excitation(sol) / tfim.lz_excitation_small_k(k, m.sweep_time) - 1.0)
    i = int(np.argmax(rel))
    assert record(9, "a", rel.max() <= 0.05,
                  f"max rel dev {rel.max():.1%} at k={k[i]:.3f} (k <= 0.2, sweep time 64)")


def test_criterion_09b_lz_survival(record):
    devs = []
    for kb in (0.05, 0.1):
        m = tfim.TfimModel(L=400, tau=128.0, g0=2.0, k_b=kb, initial="ground")
        k = m.momenta[m.target_mask]
        sol = tfim.tfim_mode_solver(m, [0.0, m.tau], k=k)
        exact = math.log(tfim.tfim_survival_probability(sol, m.tau, kb))
        reference = math.log(tfim.lz_survival_reference(m))
        devs.append((kb, exact, reference, abs(exact / reference - 1.0)))
    worst = max(d[3] for d in devs)
    detail = ", ".join(f"k_B={kb}: ln P {e:.3g} vs {p:.3g}" for kb, e, p, _ in devs)
    assert record(9, "b", worst <= 0.10, f"{detail}; max log rel dev {worst:.0%}")


def test_criterion_09c_tightness_threshold(record):
    held = []
    for tq in (0.5, 1.0, 1.46, 2.0, 4.0, 8.0):
        kb = min(math.pi, tq ** -0.5)
        m = tfim.TfimModel(L=400, tau=2.0 * tq, g0=2.0, k_b=kb)
        k = m.momenta[m.target_mask]
        sol = tfim.tfim_mode_solver(m, [0.0, m.tau], k=k)
        ok, lhs, rhs = tfim.tfim_tightness(sol)
        held.append((tq, ok, rhs - lhs))
    ok = all(h for tq, h, _ in held if tq >= 1.46)
    detail = ", ".join(f"{tq:g}:{'y' if h else 'n'}" for tq, h, _ in held)
    assert record(9, "c", ok, f"target-based QSL >= MT QSL at sweep times {detail}")


# -- 10: delta potential in a box -------------------------------------------------------

def test_criterion_10_deltabox(preset_runs, record):
    g = _gates(preset_runs, "deltabox-transition")
    s = _summary(preset_runs, "deltabox-transition")
    tight = csvio.read_csv(os.path.join(preset_runs["dir"], "deltabox-transition_tightness.csv"))
    seconds = preset_runs["runs"]["deltabox-transition"]["seconds"]
    ok = (g["deltabox_residual"]["value"] <= 1e-10
          and g["deltabox_completeness"]["value"] <= 1e-6
          and g["deltabox_oracle"]["value"] <= 1e-5
          and tight["n"].size == 20 and tight["n"][0] == s["threshold_n"]
          and bool(np.all(tight["min_slack"] >= -1e-9)) and seconds <= 60)
    assert record(10, "", ok,
                  f"residual {g['deltabox_residual']['value']:.1e}, completeness deficit "
                  f"{g['deltabox_completeness']['value']:.1e}, oracle {g['deltabox_oracle']['value']:.1e}, "
                  f"n*={s['threshold_n']} holds over {tight['n'].size} n; {seconds:.0f} s")


# -- 11: counterdiabatic engine --------------------------------------------------------------

def test_criterion_11_counterdiabatic(preset_runs, record):
    g = _gates(preset_runs, "cd-geometric-bound")
    ok = (g["transitionless"]["value"] <= 1e-8 and g["cd_direct"]["value"] <= 1e-5
          and g["variance_identity"]["value"] <= 1e-7 and g["bound[geometric]"]["passed"])
    assert record(11, "", ok,
                  f"transitionless {g['transitionless']['value']:.1e}, CD vs direct "
                  f"{g['cd_direct']['value']:.1e}, variance identity "
                  f"{g['variance_identity']['value']:.1e}, geometric min slack "
                  f"{g['bound[geometric]']['value']:.1e}")


# -- 12: reproducibility and budget --------------------------------------------------------

def test_criterion_12_reproducibility(preset_runs, tmp_path_factory, record):
    out_b = tmp_path_factory.mktemp("presets_b")
    runs_b, total_b = _run_all(out_b)
    names = sorted(f for f in os.listdir(preset_runs["dir"]) if f.endswith(".csv"))
    same, diff, errors = filecmp.cmpfiles(preset_runs["dir"], out_b, names, shallow=False)
    ok = not diff and not errors and len(same) == len(names) and max(preset_runs["total"], total_b) <= 600
    assert record(12, "", ok, f"{len(same)}/{len(names)} CSVs byte-identical; suite "
                              f"{preset_runs['total']:.0f} s / {total_b:.0f} s")
