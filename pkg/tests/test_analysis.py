import math

import numpy as np
import pytest
from scipy import stats
from hypothesis import given, strategies as st

from lenscal.analysis import (
    ParabolaFitResult,
    default_scan_axes,
    fit_exponent,
    fit_parabola,
    fit_sequence,
    profile_exponent,
    scan_profiles,
    three_zone_profile,
    vc_independence,
    window_grid,
)
from lenscal.errors import FitError
from lenscal.geometry import PerfectSphere, make_fig1_profile
from lenscal.oscillator import NoiseSpec, fig3_campaign, generate_sequence, sigma_for_target_sem
from lenscal.pfa import k_el, k_el_perfect, k_el_piecewise, k_el_reference_17

R = 0.0309
FIG1 = make_fig1_profile()
WINDOW = (30e-9, 100e-9)


def parabola_data(vc, k, nu0, v):
    return np.sqrt(nu0 ** 2 - k * (v - vc) ** 2)


def test_reparameterisation_exact_random_draws():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        vc = rng.uniform(-0.1, 0.1)
        nu0 = rng.uniform(1e2, 1e5)
        dv = rng.uniform(0.05, 1.0)
        offset = rng.uniform(-0.3, 0.3)
        # keep the largest softening between 1% and 50% of nu0^2
        k = rng.uniform(0.01, 0.5) * nu0 ** 2 / (dv + abs(offset)) ** 2
        v = vc + offset + np.linspace(-dv, dv, 9)
        d = 10 ** rng.uniform(-8, -5)
        f = fit_parabola(v, parabola_data(vc, k, nu0, v), d)
        worst = max(worst, abs(f.vc_hat - vc) / max(abs(vc), 1e-3), abs(f.k_hat / k - 1), abs(f.nu0_hat / nu0 - 1))
        assert f.distance == d
    assert worst <= 1e-9


def test_symmetric_voltages_recover_centre_exactly():
    for k in (1e3, 1e5, 3e6):
        v = 0.0153 + np.array([-0.2, -0.1, 0.0, 0.1, 0.2])
        f = fit_parabola(v, parabola_data(0.0153, k, 1e3, v))
        # only the rounding of nu**2 separates the estimate from the centre
        assert f.vc_hat == pytest.approx(0.0153, abs=1e-11)


def test_three_voltages_gives_nan_stderr():
    v = np.array([-0.1, 0.0, 0.1])
    f = fit_parabola(v, parabola_data(0.0, 1e4, 1e3, v))
    assert f.vc_hat == pytest.approx(0.0, abs=1e-15)
    assert math.isnan(f.vc_stderr) and math.isnan(f.k_stderr)


def test_parabola_errors():
    with pytest.raises(FitError):
        fit_parabola([0.0, 0.1, 0.1, 0.0], [1, 2, 3, 4])
    with pytest.raises(FitError, match="non-concave"):
        v = np.linspace(-1, 1, 7)
        fit_parabola(v, np.sqrt(1 + v ** 2))
    with pytest.raises(FitError):
        fit_parabola([0.0, 0.1], [1.0])


def test_stderrs_non_negative_and_scale_with_noise():
    rng = np.random.default_rng(2)
    v = np.linspace(-0.25, 0.25, 9)
    clean = parabola_data(0.01, 2e6, 1e3, v)
    f1 = fit_parabola(v, clean + rng.normal(0, 0.01, 9))
    f2 = fit_parabola(v, clean + rng.normal(0, 0.1, 9))
    for f in (f1, f2):
        assert f.vc_stderr >= 0 and f.k_stderr >= 0 and f.nu0_stderr >= 0
    assert f2.vc_stderr > f1.vc_stderr


def test_vc_scatter_matches_stderr():
    rng = np.random.default_rng(5)
    v = np.linspace(-0.25, 0.25, 9)
    clean = parabola_data(0.01, 2e6, 1e3, v)
    fits = [fit_parabola(v, clean + rng.normal(0, 0.05, 9)) for _ in range(2000)]
    z = np.array([(f.vc_hat - 0.01) / f.vc_stderr for f in fits])
    # studentised with 9 - 3 = 6 residual degrees of freedom
    assert np.mean(np.abs(z) < 2) == pytest.approx(2 * stats.t.cdf(2.0, 6) - 1, abs=0.02)


# -- exponents -------------------------------------------------------------------

def test_pure_power_laws():
    d = window_grid(WINDOW)
    assert fit_exponent(d, k_el_perfect(d, R), WINDOW).alpha == pytest.approx(-2.0, abs=1e-12)
    assert fit_exponent(d, k_el_reference_17(d, R, 30e-9), WINDOW).alpha == pytest.approx(-1.7, abs=1e-12)


def test_fig1_exponent_frozen():
    res = profile_exponent(FIG1, WINDOW)
    assert -1.85 <= res.alpha <= -1.65
    assert res.alpha == pytest.approx(-1.76147, abs=1e-5)
    assert res.n_points == 20
    assert 0.99 < res.r_squared < 1.0
    d = window_grid(WINDOW)
    direct = fit_exponent(d, k_el_piecewise(d, FIG1), WINDOW)
    assert direct.alpha == pytest.approx(res.alpha, abs=1e-12)


def test_two_point_slope():
    a, b = WINDOW
    s = math.log(k_el_piecewise(b, FIG1) / k_el_piecewise(a, FIG1)) / math.log(b / a)
    assert s == pytest.approx(-1.7588, abs=1e-4)


def test_window_monotonicity():
    alphas = [profile_exponent(FIG1, (30e-9, hi)).alpha for hi in (100e-9, 300e-9, 1000e-9)]
    assert alphas[0] > alphas[1] > alphas[2]
    assert alphas == pytest.approx([-1.76147, -1.8745, -1.9622], abs=1e-4)


@given(st.floats(1e-6, 1e6))
def test_amplitude_scaling_leaves_alpha(c):
    d = window_grid(WINDOW)
    k = np.asarray(k_el_piecewise(d, FIG1))
    a = fit_exponent(d, k, WINDOW)
    b = fit_exponent(d, c * k, WINDOW)
    assert abs(a.alpha - b.alpha) <= 1e-12
    assert b.amplitude == pytest.approx(a.amplitude + math.log(c), abs=1e-9)


def test_window_selection_and_errors():
    d = np.geomspace(1e-8, 1e-6, 50)
    k = k_el_perfect(d, R)
    res = fit_exponent(d, k, WINDOW)
    assert res.n_points == int(np.sum((d >= 30e-9) & (d <= 100e-9)))
    with pytest.raises(FitError):
        fit_exponent(d, k, (30e-9, 31e-9))
    with pytest.raises(FitError):
        fit_exponent(d, -k, WINDOW)
    with pytest.raises(FitError):
        fit_exponent(d, k, (1e-7, 1e-8))


def test_nonlinear_cross_check():
    d = window_grid(WINDOW)
    k = np.asarray(k_el_piecewise(d, FIG1))
    ols = fit_exponent(d, k, WINDOW)
    nl = fit_exponent(d, k, WINDOW, method="nonlinear")
    assert nl.method == "nonlinear"
    # linear-scale residuals weight the short-distance end, where the curve is flatter
    assert nl.alpha > ols.alpha
    assert abs(nl.alpha - ols.alpha) < 0.1
    pure = fit_exponent(d, k_el_reference_17(d, R, 30e-9), WINDOW, method="nonlinear")
    assert pure.alpha == pytest.approx(-1.7, abs=1e-8)


def test_exponent_coverage_monte_carlo():
    d = window_grid(WINDOW)
    k = np.asarray(k_el_piecewise(d, FIG1))
    truth = fit_exponent(d, k, WINDOW).alpha
    rng = np.random.default_rng(99)
    hits = 0
    n = 400
    for _ in range(n):
        noisy = k * np.exp(rng.normal(0.0, 0.02, d.size))
        r = fit_exponent(d, noisy, WINDOW)
        hits += abs(r.alpha - truth) <= 2 * r.alpha_stderr
    assert hits / n >= 0.90


# -- contact potential -----------------------------------------------------------

def make_fits(values, d=None):
    d = np.geomspace(1e-7, 5e-6, len(values)) if d is None else d
    return [ParabolaFitResult(float(x), float(v), 1e-4, 1.0, 0.0, 1e3, 0.0, 0.0, 9) for x, v in zip(d, values)]


def test_constant_input_exact_zero_trend():
    s = vc_independence(make_fits([0.01529] * 50))
    assert s.trend == 0.0
    assert s.independent
    assert s.mean == 0.01529
    assert s.sem == 0.0


def test_summary_line_format():
    s = vc_independence(make_fits(0.01529 + 1e-4 * np.sin(np.arange(40))))
    assert s.summary_line().startswith("V_c = 15.29 ± ")
    assert s.summary_line().endswith(" mV")
    assert s.to_dict()["summary"] == s.summary_line()


def test_independence_needs_ten():
    with pytest.raises(FitError):
        vc_independence(make_fits([0.0] * 9))


def test_weighted_summary():
    s = vc_independence(make_fits(0.01 + 1e-5 * np.cos(np.arange(20))), weighted=True)
    assert s.weighted
    assert s.sem == pytest.approx(1e-4 / math.sqrt(20))


def test_fig3_campaign_statistics():
    camp = fig3_campaign()
    sigma = sigma_for_target_sem(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid, 0.13e-3)
    seq = generate_sequence(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid, NoiseSpec(sigma), seed=1)
    s = vc_independence(fit_sequence(seq))
    assert s.summary_line() == "V_c = 15.29 ± 0.13 mV"
    assert s.independent


def test_drift_detected():
    camp = fig3_campaign()
    sigma = sigma_for_target_sem(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid, 0.13e-3)
    detected = 0
    for seed in range(5):
        seq = generate_sequence(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid,
                                NoiseSpec(sigma, vc_drift=5e-3), seed=seed)
        s = vc_independence(fit_sequence(seq))
        detected += not s.independent
        assert s.trend == pytest.approx(5e-3, abs=4 * s.trend_stderr)
    assert detected == 5


def test_false_alarm_rate():
    camp = fig3_campaign()
    sigma = sigma_for_target_sem(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid, 0.13e-3)
    alarms = 0
    for seed in range(20):
        seq = generate_sequence(camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid,
                                NoiseSpec(sigma), seed=100 + seed)
        alarms += not vc_independence(fit_sequence(seq)).independent
    assert alarms <= 4


def test_noiseless_round_trip():
    p = PerfectSphere(10e-6)
    d = np.geomspace(1e-7, 1e-6, 12)
    camp = fig3_campaign()
    seq = generate_sequence(p, camp.params, 0.02, d, camp.v_grid)
    fits = fit_sequence(seq)
    for f in fits:
        assert f.vc_hat == pytest.approx(0.02, rel=1e-9)
        assert f.k_hat == pytest.approx(k_el(f.distance, p, camp.params), rel=1e-9)
        assert f.nu0_hat == pytest.approx(1e3, rel=1e-9)
    assert vc_independence(fits).independent


# -- scan -------------------------------------------------------------------------

def test_scan_reproduces_fig1():
    rows = scan_profiles([30e-6], [8e-9], [1.6], [250e-9])
    assert len(rows) == 1
    assert rows[0].alpha == profile_exponent(FIG1, WINDOW).alpha
    assert three_zone_profile(30e-6, 8e-9, 1.6, 250e-9) == FIG1


def test_degenerate_scan_is_minus_two():
    rows = scan_profiles([R], [5e-9, 2e-8], [1.0], [1e-7, 3e-7])
    assert len(rows) == 4
    for r in rows:
        assert r.alpha == pytest.approx(-2.0, abs=1e-12)


def test_scan_skips_invalid_and_sorts(caplog):
    with caplog.at_level("INFO", logger="lenscal"):
        rows = scan_profiles([-1e-6, 30e-6], [8e-9], [1.6, 2.0], [250e-9])
    assert len(rows) == 2
    assert rows[0].alpha <= rows[1].alpha
    assert "skipping" in caplog.text


def test_scan_covers_reported_exponents():
    rows = scan_profiles(*default_scan_axes(8))
    alphas = np.array([r.alpha for r in rows])
    assert len(rows) == 8 ** 4
    assert np.all(np.diff(alphas) >= 0)
    for target in (-1.70, -1.77, -1.80, -1.54):
        assert np.any(np.abs(alphas - target) <= 0.05)
