"""Acceptance criteria, each checked at its stated tolerance and runtime budget.

One ``ACCEPTANCE <n> PASS|FAIL`` line per criterion is printed at the end of
the pytest run (see ``conftest.pytest_terminal_summary``).  Run alone with::

    pytest tests/test_acceptance.py -v
"""

import filecmp
import time

import numpy as np

from lenscal import cli
from lenscal.analysis import (default_scan_axes, fit_exponent, fit_sequence, profile_exponent,
                              scan_profiles, vc_independence, window_grid)
from lenscal.geometry import PerfectSphere, make_fig1_profile, sector_flattening
from lenscal.oracle import fd
from lenscal.oracle.series import exact_capacitance, pfa_ratio
from lenscal.oscillator import NoiseSpec, fig3_campaign, generate_sequence, sigma_for_target_sem
from lenscal.pfa import k_el, k_el_perfect, k_el_piecewise, k_el_quadrature, k_el_reference_17

from conftest import random_profile

RESULTS: list[str] = []

R = 0.0309
WINDOW = (30e-9, 100e-9)


def report(n: int, ok: bool, detail: str, elapsed: float, budget: float | None = None) -> None:
    timing = f"{elapsed:.2f} s" + (f" (budget {budget:g} s)" if budget is not None else "")
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}; {timing}"
    RESULTS.append(line)
    print(line)


def test_1_closed_form_quadrature_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    d = np.geomspace(20e-9, 3e-6, 20)
    worst = 0.0
    for _ in range(50):
        p = random_profile(rng)
        worst = max(worst, float(np.max(np.abs(k_el_quadrature(d, p, tol=1e-8) / k_el_piecewise(d, p) - 1))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed <= 10.0
    report(1, ok, f"max |quadrature/closed - 1| = {worst:.2e} over 50 profiles x 20 d (<= 1e-6)", elapsed, 10)
    assert ok


def test_2_fig2_crossing():
    t0 = time.perf_counter()
    ratio = k_el_piecewise(30e-9, make_fig1_profile()) / k_el_perfect(30e-9, R)
    elapsed = time.perf_counter() - t0
    ok = abs(ratio - 1) <= 0.015
    report(2, ok, f"k_mod/k_el at 30 nm = {ratio:.6f}, |ratio - 1| = {abs(ratio - 1):.4f} (<= 0.015)", elapsed)
    assert ok


def test_3_anomalous_exponent():
    t0 = time.perf_counter()
    d = window_grid(WINDOW)
    a_fig1 = profile_exponent(make_fig1_profile(), WINDOW).alpha
    a_ref = fit_exponent(d, k_el_reference_17(d, R, 30e-9), WINDOW).alpha
    a_per = fit_exponent(d, k_el_perfect(d, R), WINDOW).alpha
    elapsed = time.perf_counter() - t0
    ok = (-1.85 <= a_fig1 <= -1.65 and abs(a_ref + 1.7) <= 1e-3 and abs(a_per + 2.0) <= 1e-3
          and elapsed <= 1.0)
    report(3, ok, f"alpha fig1 = {a_fig1:.4f} in [-1.85, -1.65], reference = {a_ref:.4f}, "
                  f"perfect = {a_per:.4f} (+-0.001)", elapsed, 1)
    assert ok


def test_4_exponent_range_scan():
    t0 = time.perf_counter()
    rows = scan_profiles(*default_scan_axes(8), window=WINDOW)
    alphas = np.array([r.alpha for r in rows])
    elapsed = time.perf_counter() - t0
    hits = {t: int(np.sum(np.abs(alphas - t) <= 0.05)) for t in (-1.70, -1.77, -1.80, -1.54)}
    ok = all(h > 0 for h in hits.values()) and elapsed <= 60.0
    desc = ", ".join(f"{t:+.2f}: {h}" for t, h in hits.items())
    report(4, ok, f"{len(rows)} profiles, alpha in [{alphas.min():.3f}, {alphas.max():.3f}], "
                  f"profiles within 0.05 of {desc}", elapsed, 60)
    assert ok


def test_5_oracle_convergence():
    t0 = time.perf_counter()
    x = np.geomspace(1e-5, 1e-1, 13)
    ratios = np.array([pfa_ratio(1.0, v, tol=1e-12) for v in x])
    at_1e4 = pfa_ratio(1.0, 1e-4, tol=1e-12)
    converged = exact_capacitance(1.0, 1e-4, tol=1e-12).last_term_relative <= 1e-12
    elapsed = time.perf_counter() - t0
    monotone = bool(np.all(np.diff(ratios) < 0))
    ok = abs(at_1e4 - 1) <= 0.01 and monotone and converged and elapsed <= 1.0
    report(5, ok, f"exact/PFA at d/R=1e-4 = {at_1e4:.8f}, monotone over [1e-5, 1e-1]: {monotone}, "
                  f"series tolerance met: {converged}", elapsed, 1)
    assert ok


def test_6_fd_solver():
    t0 = time.perf_counter()
    sph = fd.sphere(1.0)
    errors = {}
    for x in (0.05, 0.1, 0.2):
        c = fd.fd_solve(sph, x).capacitance
        errors[x] = c / exact_capacitance(1.0, x).capacitance - 1
    caps = [fd.fd_solve(sph, 0.1, fd.make_grid(sph, 0.1, refine=k)).capacitance for k in (0, 1, 2)]
    order = fd.convergence_order(caps)
    exact = exact_capacitance(1.0, 0.1).capacitance
    elapsed = time.perf_counter() - t0
    ok = all(abs(e) <= 0.02 for e in errors.values()) and order >= 1.0 and elapsed <= 300.0
    desc = ", ".join(f"d/R={x:g}: {e:+.3%}" for x, e in errors.items())
    refine = ", ".join(f"{c / exact - 1:+.3%}" for c in caps)
    report(6, ok, f"capacitance error {desc} (<= 2%); refinement errors {refine}, "
                  f"observed order {order:.2f} (>= 1)", elapsed, 300)
    assert ok


def test_7_calibration_round_trip():
    t0 = time.perf_counter()
    camp = fig3_campaign()
    # noiseless
    p = PerfectSphere(10e-6)
    d = np.geomspace(1e-7, 1e-6, 20)
    fits = fit_sequence(generate_sequence(p, camp.params, 0.02, d, camp.v_grid))
    rt = max(max(abs(f.vc_hat / 0.02 - 1), abs(f.k_hat / k_el(f.distance, p, camp.params) - 1),
                 abs(f.nu0_hat / camp.params.rest_frequency - 1)) for f in fits)
    # campaign
    sigma = sigma_for_target_sem(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid, 0.13e-3)
    seq = generate_sequence(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid, NoiseSpec(sigma), seed=0)
    s = vc_independence(fit_sequence(seq))
    dev = abs(s.mean - camp.vc) / s.sem
    drift = generate_sequence(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid,
                              NoiseSpec(sigma, vc_drift=5e-3), seed=0)
    sd = vc_independence(fit_sequence(drift))
    elapsed = time.perf_counter() - t0
    ok = rt <= 1e-9 and dev <= 3.0 and s.independent and not sd.independent and elapsed <= 30.0
    report(7, ok, f"noiseless max rel error {rt:.1e} (<= 1e-9); campaign {s.summary_line()}, "
                  f"{dev:.2f} SEM from 15.29 mV (<= 3), verdict independent={s.independent}; "
                  f"5 mV/decade drift verdict independent={sd.independent}", elapsed, 30)
    assert ok


def test_8_fig1_geometry():
    t0 = time.perf_counter()
    H, flat = sector_flattening(make_fig1_profile())
    elapsed = time.perf_counter() - t0
    eH, ef = abs(H / 400e-9 - 1), abs(flat / 150e-9 - 1)
    ok = eH <= 0.01 and ef <= 0.01
    report(8, ok, f"perfect-sphere sector height {H * 1e9:.3f} nm ({eH:.2e} from 400), "
                  f"flattening {flat * 1e9:.3f} nm ({ef:.2e} from 150) (<= 1%)", elapsed)
    assert ok


CLI_RUNS = [
    ["profile", "--preset", "fig1"],
    ["profile", "--preset", "perfect", "--radius", "0.0309"],
    ["curve", "--figure", "fig2"],
    ["curve", "--profile", "fig1", "--dmin", "2e-8", "--dmax", "3e-6", "--normalization", "si"],
    ["simulate", "--campaign", "fig3", "--seed", "7"],
    ["simulate", "--campaign", "fig3", "--seed", "7", "--blind", "--drift", "5e-3", "--creep-amplitude", "1e-9"],
    ["calibrate", "--input", "{input}"],
    ["fit-exponent", "--dmin", "30e-9", "--dmax", "100e-9"],
    ["fit-exponent", "--dmin", "30e-9", "--dmax", "100e-9", "--method", "nonlinear"],
    ["oracle", "series"],
    ["oracle", "fd", "--ratio", "0.2", "--export"],
    ["scan"],
]


def test_9_cli_determinism(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    monkeypatch.delenv(cli.OUTPUT_ENV, raising=False)
    seq_dir = tmp_path / "seq"
    assert cli.main(["simulate", "--campaign", "fig3", "--seed", "3", "--out", str(seq_dir)]) == 0
    failures = []
    n_files = 0
    for i, argv in enumerate(CLI_RUNS):
        argv = [a.replace("{input}", str(seq_dir / "sequence.csv")) for a in argv]
        dirs = [tmp_path / f"run{i}_{k}" for k in (0, 1)]
        for out in dirs:
            code = cli.main(argv + ["--out", str(out)])
            if code != 0:
                failures.append(f"{' '.join(argv)} exited {code}")
        names = sorted(p.name for p in dirs[0].iterdir())
        if names != sorted(p.name for p in dirs[1].iterdir()) or not names:
            failures.append(f"{argv[0]}: file sets differ")
            continue
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        n_files += len(match)
        failures.extend(f"{argv[0]}: {n} differs" for n in mismatch + errors)
    elapsed = time.perf_counter() - t0
    ok = not failures
    report(9, ok, f"{len(CLI_RUNS)} command lines run twice, {n_files} output files byte-identical"
                  + (f"; failures: {failures}" if failures else ""), elapsed)
    assert ok
