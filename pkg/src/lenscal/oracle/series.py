"""
Exact sphere-plane capacitance from the image-charge (bispherical) series.

For a sphere of radius ``R`` whose surface is ``d`` above a grounded plane::

    C(d) = 4 pi eps0 R sinh(mu) * sum_{n>=1} 1 / sinh(n mu),   cosh(mu) = 1 + d/R

The electrostatic force is ``F = (1/2) V**2 dC/dd`` and its gradient
``F'(d) = (1/2) V**2 d2C/dd2``.  Here ``C''`` is obtained by differentiating
the series term by term with respect to ``mu`` and applying the chain rule;
a Richardson-extrapolated central difference of ``C(d)`` is kept as a
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NumericError
from ..geometry import EPSILON0
from ..pfa import VoltageState

MAX_TERMS = 5_000_000
# sinh overflows near 710; terms beyond n*mu ~ 60 are below 1e-26 relative anyway
_MAX_ARG = 600.0


@dataclass(frozen=True)
class SeriesResult:
    """Capacitance (F) together with convergence bookkeeping."""

    capacitance: float
    terms_used: int
    last_term_relative: float


def _mu(R: float, d: float) -> float:
    x = d / R
    # acosh(1 + x) without cancellation for small x
    return math.log1p(x + math.sqrt(x * (x + 2.0)))


def _n_terms(mu: float, tol: float) -> int:
    # terms decay like exp(-(n-1) mu); need exp(-(n-1) mu) < tol * (sum ~ 1/mu scale)
    n = int(math.ceil((math.log(1.0 / tol) + 5.0) / mu)) + 2
    return min(n, int(_MAX_ARG / mu))


def _check(R: float, d: float, tol: float) -> None:
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainError("R must be positive and finite")
    if not (d > 0.0 and math.isfinite(d)):
        raise DomainError("d must be positive and finite")
    if not (0.0 < tol < 1.0):
        raise DomainError("tol must be in (0, 1)")


def _series_terms(mu: float, n: np.ndarray):
    """g_n = sinh(mu)/sinh(n mu) and its first two mu-derivatives."""
    s, c = math.sinh(mu), math.cosh(mu)
    x = n * mu
    S = np.sinh(x)
    Cn = np.cosh(x)
    cothn = Cn / S
    g = s / S
    g1 = (c - n * s * cothn) / S
    g2 = (s - 2.0 * n * c * cothn - n * n * s + 2.0 * n * n * s * cothn * cothn) / S
    return g, g1, g2


def _sum(R: float, d: float, tol: float):
    _check(R, d, tol)
    mu = _mu(R, d)
    N = _n_terms(mu, tol)
    if N > MAX_TERMS:
        raise NumericError(
            f"series needs ~{N} terms at d/R={d / R:g}; this is the asymptotic regime, "
            "use the proximity-force expression instead",
            {"mu": mu, "terms_needed": N, "budget": MAX_TERMS},
        )
    n = np.arange(1, N + 1, dtype=float)
    g, g1, g2 = _series_terms(mu, n)
    total = math.fsum(g)
    last = float(g[-1] / total)
    if not last < tol:
        raise NumericError("series truncated before reaching the requested tolerance",
                           {"mu": mu, "terms": N, "last_term_relative": last})
    return mu, N, last, total, math.fsum(g1), math.fsum(g2)


def exact_capacitance(R: float, d: float, tol: float = 1e-12) -> SeriesResult:
    """Sphere-plane capacitance in farads, summed until a term falls below ``tol`` relative."""
    mu, N, last, f, _, _ = _sum(R, d, tol)
    # trim the reported count to the first term below tolerance
    n = np.arange(1, N + 1, dtype=float)
    g = math.sinh(mu) / np.sinh(n * mu)
    below = np.nonzero(g < tol * f)[0]
    used = int(below[0]) + 1 if below.size else N
    return SeriesResult(4.0 * math.pi * EPSILON0 * R * f, used, float(g[used - 1] / f))


def capacitance_derivatives(R: float, d: float, tol: float = 1e-12) -> tuple[float, float, float]:
    """``(C, dC/dd, d2C/dd2)`` by term-by-term differentiation of the series."""
    mu, _, _, f, f1, f2 = _sum(R, d, tol)
    s, c = math.sinh(mu), math.cosh(mu)
    mu1 = 1.0 / (R * s)
    mu2 = -c / (R * R * s ** 3)
    k = 4.0 * math.pi * EPSILON0 * R
    return k * f, k * f1 * mu1, k * (f2 * mu1 * mu1 + f1 * mu2)


def _capacitance_fd2(R: float, d: float, tol: float) -> float:
    def c(x):
        return exact_capacitance(R, x, tol).capacitance

    def central(h):
        return (c(d + h) - 2.0 * c(d) + c(d - h)) / (h * h)

    h = 0.02 * d
    # one Richardson step removes the h**2 error term
    return (4.0 * central(h / 2.0) - central(h)) / 3.0


def exact_force_gradient(R: float, d: float, voltage: VoltageState, tol: float = 1e-12,
                         method: str = "analytic") -> tuple[float, str]:
    """Exact force-gradient magnitude ``(1/2) (V - Vc)**2 C''(d)`` in N/m.

    Returns ``(value, method)`` so the differentiation route is recorded.
    ``method`` is ``"analytic"`` (term-by-term) or ``"richardson"``.
    """
    dv = voltage.effective
    if method == "analytic":
        c2 = capacitance_derivatives(R, d, tol)[2]
    elif method == "richardson":
        c2 = _capacitance_fd2(R, d, tol)
    else:
        raise DomainError(f"unknown method {method!r}")
    if not (math.isfinite(c2) and c2 > 0.0):
        raise NumericError("second derivative of the capacitance is not positive",
                           {"R": R, "d": d, "c2": c2, "method": method})
    return 0.5 * dv * dv * c2, method


def pfa_force_gradient_perfect(R: float, d: float, voltage: VoltageState) -> float:
    """``pi eps0 R (V - Vc)**2 / d**2``, the proximity-force value for a perfect sphere."""
    dv = voltage.effective
    return math.pi * EPSILON0 * R * dv * dv / (d * d)


def pfa_ratio(R: float, d: float, tol: float = 1e-12) -> float:
    """Exact over proximity-force force gradient (voltage independent)."""
    v = VoltageState(1.0, 0.0)
    return exact_force_gradient(R, d, v, tol)[0] / pfa_force_gradient_perfect(R, d, v)
