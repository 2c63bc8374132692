"""
Calibration analysis: parabola fits, exponent estimation, contact-potential statistics.

Per distance, ``nu**2`` is quadratic in the applied voltage,

    nu**2 = a V**2 + b V + c,   k = -a,   Vc = -b / (2 a),   nu0**2 = c - b**2 / (4 a)

and the distance dependence of ``k`` is summarised by a power-law exponent
fitted on log-log axes.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, FitError
from .geometry import FIG1_GLOBAL_RADIUS, PiecewiseSpherical
from .oscillator import CalibrationSequence
from .pfa import gap_integral_closed

log = logging.getLogger(__name__)

DEFAULT_WINDOW = (30e-9, 100e-9)
WINDOW_POINTS = 20


@dataclass(frozen=True)
class ParabolaFitResult:
    distance: float
    vc_hat: float
    vc_stderr: float
    k_hat: float
    k_stderr: float
    nu0_hat: float
    nu0_stderr: float
    residual_rms: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "distance_m": self.distance,
            "vc_volt": self.vc_hat,
            "vc_stderr": self.vc_stderr,
            "k": self.k_hat,
            "k_stderr": self.k_stderr,
            "nu0_hz": self.nu0_hat,
            "nu0_stderr": self.nu0_stderr,
            "residual_rms": self.residual_rms,
        }


def fit_parabola(V, nu, distance: float = float("nan")) -> ParabolaFitResult:
    """Least-squares parabola through ``(V, nu**2)`` at one distance.

    The voltage axis is centred and scaled before fitting; standard errors
    come from the linear-model covariance propagated to ``(Vc, k, nu0)`` to
    first order.  With exactly three voltages there are no residual degrees
    of freedom and the standard errors are NaN.

    Raises
    ------
    FitError
        Fewer than three distinct voltages, or a non-concave parabola
        (``a >= 0``), which no attractive force gradient can produce.
    """
    V = np.asarray(V, dtype=float)
    y = np.asarray(nu, dtype=float) ** 2
    if V.shape != y.shape or V.ndim != 1:
        raise FitError("V and nu must be 1-D arrays of equal length")
    if np.unique(V).size < 3:
        raise FitError(f"need at least 3 distinct voltages, got {np.unique(V).size}")
    Vm = 0.5 * (V.max() + V.min())
    Vs = 0.5 * (V.max() - V.min())
    x = (V - Vm) / Vs
    X = np.column_stack([x * x, x, np.ones_like(x)])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 3:
        raise FitError("rank-deficient voltage design")
    alpha, beta, gamma = coef
    if not alpha < 0.0:
        raise FitError(f"non-concave parabola at d={distance:g} (curvature {alpha:g} >= 0)")

    resid = y - X @ coef
    n = y.size
    dof = n - 3
    rss = float(resid @ resid)
    vc = Vm - Vs * beta / (2.0 * alpha)
    k = -alpha / (Vs * Vs)
    nu0_sq = gamma - beta * beta / (4.0 * alpha)
    if not nu0_sq > 0.0:
        raise FitError(f"fitted rest frequency squared is non-positive at d={distance:g}")
    nu0 = math.sqrt(nu0_sq)

    if dof > 0:
        cov = rss / dof * np.linalg.inv(X.T @ X)
        J = np.array([
            [Vs * beta / (2.0 * alpha ** 2), -Vs / (2.0 * alpha), 0.0],
            [-1.0 / (Vs * Vs), 0.0, 0.0],
            [beta ** 2 / (8.0 * alpha ** 2 * nu0), -beta / (4.0 * alpha * nu0), 1.0 / (2.0 * nu0)],
        ])
        var = np.einsum("ij,jk,ik->i", J, cov, J)
        se = np.sqrt(np.maximum(var, 0.0))
    else:
        se = np.full(3, np.nan)
    return ParabolaFitResult(
        distance=float(distance),
        vc_hat=float(vc),
        vc_stderr=float(se[0]),
        k_hat=float(k),
        k_stderr=float(se[1]),
        nu0_hat=nu0,
        nu0_stderr=float(se[2]),
        residual_rms=math.sqrt(rss / n),
        n_points=n,
    )


def fit_sequence(seq: CalibrationSequence) -> list[ParabolaFitResult]:
    """One parabola fit per distance, in order of first appearance."""
    return [fit_parabola(V, nu, d) for d, V, nu in seq.groups()]


# -- exponents ---------------------------------------------------------------

@dataclass(frozen=True)
class ExponentFitResult:
    alpha: float
    alpha_stderr: float
    amplitude: float
    window: tuple[float, float]
    n_points: int
    r_squared: float
    method: str = "loglog_ols"

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "log_amplitude": self.amplitude,
            "window_m": [self.window[0], self.window[1]],
            "n_points": self.n_points,
            "r_squared": self.r_squared,
            "method": self.method,
        }


def window_grid(window: tuple[float, float] = DEFAULT_WINDOW, n: int = WINDOW_POINTS) -> np.ndarray:
    """Log-spaced sample distances spanning ``window`` inclusive."""
    lo, hi = window
    if not 0.0 < lo < hi:
        raise DomainError("window must satisfy 0 < d_min < d_max")
    return np.geomspace(lo, hi, n)


def fit_exponent(d, k, window: tuple[float, float] | None = None,
                 method: str = "loglog_ols") -> ExponentFitResult:
    """Power-law exponent of ``k(d)`` inside ``window``.

    ``"loglog_ols"`` regresses ``ln k`` on ``ln d``; ``amplitude`` is the
    intercept.  ``"nonlinear"`` fits ``A d**alpha`` on the linear scale
    (seeded from the log-log fit); it weights the short-distance points more
    heavily and is intended as a cross-check.
    """
    d = np.asarray(d, dtype=float)
    k = np.asarray(k, dtype=float)
    if d.shape != k.shape:
        raise FitError("d and k must have equal shapes")
    if np.any(~(d > 0.0)) or np.any(~(k > 0.0)):
        raise FitError("power-law fit needs strictly positive d and k")
    if window is None:
        window = (float(d.min()), float(d.max()))
    lo, hi = window
    if not lo < hi:
        raise FitError("window must satisfy d_min < d_max")
    m = (d >= lo * (1 - 1e-12)) & (d <= hi * (1 + 1e-12))
    n = int(m.sum())
    if n < 5:
        raise FitError(f"only {n} points inside window [{lo:g}, {hi:g}]; need at least 5")
    x = np.log(d[m])
    y = np.log(k[m])
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    syy = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - rss / syy if syy > 0.0 else 1.0
    se = math.sqrt(rss / (n - 2) / sxx)
    if method == "loglog_ols":
        return ExponentFitResult(slope, se, intercept, (float(lo), float(hi)), n, r2, method)
    if method == "nonlinear":
        dd, kk = d[m], k[m]
        d_ref = math.exp(xm)

        def model(x, logA, a):
            return np.exp(logA + a * np.log(x / d_ref))

        p0 = (intercept + slope * xm, slope)
        popt, pcov = optimize.curve_fit(model, dd, kk, p0=p0, maxfev=10_000)
        fit = model(dd, *popt)
        r2_lin = 1.0 - np.sum((kk - fit) ** 2) / np.sum((kk - kk.mean()) ** 2)
        return ExponentFitResult(
            float(popt[1]), float(math.sqrt(max(pcov[1, 1], 0.0))),
            float(popt[0] - popt[1] * xm), (float(lo), float(hi)), n, float(r2_lin), method,
        )
    raise DomainError(f"unknown method {method!r}")


# -- contact potential statistics -----------------------------------------------

# slopes below 1 nV per decade are treated as zero
TREND_FLOOR = 1e-9

@dataclass(frozen=True)
class VcSummary:
    mean: float
    sem: float
    distances: np.ndarray
    values: np.ndarray
    trend: float
    trend_stderr: float
    independent: bool
    weighted: bool = False

    def summary_line(self) -> str:
        return f"V_c = {self.mean * 1e3:.2f} ± {self.sem * 1e3:.2f} mV"

    def to_dict(self) -> dict:
        return {
            "mean_volt": self.mean,
            "sem_volt": self.sem,
            "n_distances": int(self.values.size),
            "trend_volt_per_decade": self.trend,
            "trend_stderr": self.trend_stderr,
            "independent": bool(self.independent),
            "weighted": self.weighted,
            "summary": self.summary_line(),
        }


def vc_independence(fits: Sequence[ParabolaFitResult], weighted: bool = False) -> VcSummary:
    """Mean contact potential and a test for separation dependence.

    The trend is the least-squares slope of ``vc_hat`` against
    ``log10(distance)``; the verdict is *independent* unless that slope
    exceeds two standard errors in magnitude and ``TREND_FLOOR`` (so that
    rounding noise in exact data cannot flip the verdict).  ``weighted=True`` uses
    inverse-variance weights from the per-fit standard errors.
    """
    if len(fits) < 10:
        raise FitError(f"need at least 10 distances, got {len(fits)}")
    d = np.array([f.distance for f in fits], dtype=float)
    v = np.array([f.vc_hat for f in fits], dtype=float)
    if np.any(~(d > 0.0)):
        raise FitError("distances must be positive")
    n = v.size
    # offsets from the first value keep a constant input exactly constant
    v0 = v[0]
    y = v - v0
    x = np.log10(d)
    if weighted:
        se = np.array([f.vc_stderr for f in fits], dtype=float)
        if np.any(~(se > 0.0)):
            raise FitError("weighted summary needs positive per-fit standard errors")
        w = 1.0 / se ** 2
    else:
        w = np.ones(n)
    W = w.sum()
    ym = float(np.sum(w * y) / W)
    mean = v0 + ym
    if weighted:
        sem = math.sqrt(1.0 / W)
    else:
        sem = float(np.std(y, ddof=1) / math.sqrt(n))
    xm = float(np.sum(w * x) / W)
    sxx = float(np.sum(w * (x - xm) ** 2))
    if sxx == 0.0:
        raise FitError("all distances are identical; no trend can be estimated")
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    resid = y - ym - slope * (x - xm)
    if weighted:
        slope_se = math.sqrt(1.0 / sxx)
    else:
        slope_se = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    independent = not (abs(slope) > 2.0 * slope_se and abs(slope) > TREND_FLOOR)
    return VcSummary(mean, sem, d, v, slope, slope_se, independent, weighted)


# -- profile scan -----------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    bubble_radius: float
    bubble_height: float
    sector_radius_factor: float
    sector_height: float
    alpha: float
    alpha_stderr: float
    r_squared: float

    def to_dict(self) -> dict:
        return {
            "bubble_radius_m": self.bubble_radius,
            "bubble_height_m": self.bubble_height,
            "sector_radius_factor": self.sector_radius_factor,
            "sector_height_m": self.sector_height,
            "alpha": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "r_squared": self.r_squared,
        }


def three_zone_profile(bubble_radius: float, bubble_height: float, sector_radius_factor: float,
                       sector_height: float, R: float = FIG1_GLOBAL_RADIUS) -> PiecewiseSpherical:
    """Bubble / flattened sector / global sphere, parameterised like the imperfect-lens model."""
    return PiecewiseSpherical.from_heights(
        [bubble_radius, sector_radius_factor * R, R],
        [bubble_height, bubble_height + sector_height],
    )


def profile_exponent(profile, window: tuple[float, float] = DEFAULT_WINDOW,
                     n: int = WINDOW_POINTS) -> ExponentFitResult:
    """Log-log exponent of the closed-form coefficient over ``window``."""
    d = window_grid(window, n)
    return fit_exponent(d, np.asarray(gap_integral_closed(d, profile)), window)


def scan_profiles(
    bubble_radii: Iterable[float],
    bubble_heights: Iterable[float],
    sector_factors: Iterable[float],
    sector_heights: Iterable[float],
    window: tuple[float, float] = DEFAULT_WINDOW,
    R: float = FIG1_GLOBAL_RADIUS,
    n: int = WINDOW_POINTS,
) -> list[ScanRow]:
    """Exponent of every three-zone profile on the parameter grid, sorted by alpha.

    Invalid combinations (non-positive radii or heights) are skipped and
    logged.  Rows are ordered by ``alpha`` and then by parameters, so the
    output is deterministic.
    """
    rows = []
    for rcd, h, fac, H in itertools.product(bubble_radii, bubble_heights, sector_factors, sector_heights):
        try:
            prof = three_zone_profile(rcd, h, fac, H, R)
            fit = profile_exponent(prof, window, n)
        except (DomainError, FitError) as exc:
            log.info("skipping R_CD=%g h=%g factor=%g H=%g: %s", rcd, h, fac, H, exc)
            continue
        rows.append(ScanRow(float(rcd), float(h), float(fac), float(H), fit.alpha, fit.alpha_stderr, fit.r_squared))
    rows.sort(key=lambda r: (r.alpha, r.bubble_radius, r.bubble_height, r.sector_radius_factor, r.sector_height))
    return rows


def default_scan_axes(n: int = 8) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Imperfection ranges motivated by optical surface-quality tolerances."""
    return (
        np.geomspace(5e-6, 100e-6, n),
        np.geomspace(2e-9, 50e-9, n),
        np.linspace(1.1, 3.0, n),
        np.linspace(100e-9, 600e-9, n),
    )
