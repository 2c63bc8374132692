"""
Proximity-force-approximation (PFA) force gradients for lens-plate gaps.

Under the PFA, the electrostatic force gradient between a plate and an
axisymmetric lens at closest separation ``d`` is the sum of parallel-plate
gradients over the local gap ``d + z(r)``::

    F'(d) = pi * eps0 * (V - Vc)**2 * G(d),    G(d) = 2 * int_0^inf r / (d + z(r))**3 dr

and the frequency-shift coefficient of an oscillator of effective mass
``m_eff`` is ``k(d) = eps0 / (4 pi m_eff) * G(d)``.

For stacked spherical segments with paraxial sagitta the integral
telescopes::

    G(d) = R_1 / d**2 + sum_{i>=2} (R_i - R_{i-1}) / (d + z_{i-1})**2

which reduces to ``R / d**2`` for a perfect sphere.  Gradients are reported
as positive magnitudes of the attractive interaction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError
from .geometry import (
    EPSILON0,
    SurfaceProfile,
    breakpoints,
    segment_height_function,
)

Normalization = Literal["si", "n0"]
Provenance = Literal["closed_form", "quadrature", "oracle_series", "oracle_fd"]
NORMALIZATIONS = ("si", "n0")
PROVENANCES = ("closed_form", "quadrature", "oracle_series", "oracle_fd")

# Plotting normalisation: N0 = eps0 / (4 pi m_eff) * 1e13.
N0_SCALE = 1e13


@dataclass(frozen=True)
class VoltageState:
    """Applied bias and contact potential (volts)."""

    applied: float
    contact: float = 0.0

    @property
    def effective(self) -> float:
        return self.applied - self.contact


@dataclass(frozen=True)
class OscillatorParams:
    """Effective mass (kg) and unperturbed resonance frequency (Hz).

    There is no measured value for ``effective_mass``; 1e-9 kg is a
    microcantilever-scale default.  Normalised outputs do not depend on it.
    """

    effective_mass: float = 1e-9
    rest_frequency: float = 1e3

    def __post_init__(self):
        if not (self.effective_mass > 0.0 and math.isfinite(self.effective_mass)):
            raise DomainError("effective_mass must be positive and finite")
        if not (self.rest_frequency > 0.0 and math.isfinite(self.rest_frequency)):
            raise DomainError("rest_frequency must be positive and finite")


DEFAULT_PARAMS = OscillatorParams()


@dataclass(frozen=True)
class ForceGradientCurve:
    """Sampled ``k(d)`` (or ``F'(d)``) with its normalisation and provenance."""

    d: np.ndarray
    values: np.ndarray
    normalization: str = "si"
    provenance: str = "closed_form"

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.ndim != 1 or d.shape != v.shape or d.size == 0:
            raise DomainError("curve needs matching non-empty 1-D d and values")
        if np.any(np.diff(d) <= 0.0):
            raise DomainError("curve distances must be strictly increasing")
        if np.any(~(v > 0.0)):
            raise DomainError("curve values must be positive")
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(f"unknown normalization {self.normalization!r}")
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "values", v)


def k_prefactor(params: OscillatorParams = DEFAULT_PARAMS) -> float:
    """``eps0 / (4 pi m_eff)`` in F/(kg m)."""
    return EPSILON0 / (4.0 * math.pi * params.effective_mass)


def n0(params: OscillatorParams = DEFAULT_PARAMS) -> float:
    """Plot normalisation factor ``eps0 / (4 pi m_eff) * 1e13``."""
    return k_prefactor(params) * N0_SCALE


def _positive(d, name: str = "d") -> np.ndarray:
    arr = np.asarray(d, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(~np.isfinite(arr)):
        raise DomainError(f"{name} must be positive and finite")
    return arr


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def k_el_perfect(d, R: float, params: OscillatorParams = DEFAULT_PARAMS):
    """Frequency-shift coefficient for a perfect sphere, ``eps0 R / (4 pi m_eff d**2)``."""
    d = _positive(d)
    _positive(R, "R")
    return _out(k_prefactor(params) * (R / (d * d)))


def gap_integral_closed(d, profile: SurfaceProfile):
    """Telescoped paraxial value of ``G(d) = 2 int r/(d+z)^3 dr`` (units 1/m)."""
    d = _positive(d)
    if profile.sagitta_mode != "paraxial":
        raise DomainError("the closed form holds for paraxial profiles only; use quadrature")
    segs = profile.segments
    g = segs[0].curvature_radius / (d * d)
    for prev, seg in zip(segs[:-1], segs[1:]):
        u = d + seg.start_height
        g = g + (seg.curvature_radius - prev.curvature_radius) / (u * u)
    return _out(g)


def k_el_piecewise(d, profile: SurfaceProfile, params: OscillatorParams = DEFAULT_PARAMS):
    """Closed-form coefficient for a (paraxial) piecewise-spherical lens.

    For the three-zone model this is
    ``R_CD/d^2 + (R_AB - R_CD)/(d+h)^2 - (R_AB - R)/(d+h+H)^2`` times the prefactor.
    """
    return _out(k_prefactor(params) * np.asarray(gap_integral_closed(d, profile)))


def _quad(f, a, b, epsrel, points=None, limit=400):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, abserr, info, *msg = integrate.quad(
            f, a, b, epsabs=0.0, epsrel=epsrel, limit=limit, points=points, full_output=1
        )
    ier = 0 if not msg else msg[0]
    return val, abserr, info, ier, (msg[1] if len(msg) > 1 else "")


def gap_integral_quadrature(d: float, profile: SurfaceProfile, tol: float = 1e-8,
                            max_subintervals: int = 400) -> float:
    """Adaptive quadrature of ``G(d)`` directly over ``r``, split at radial breakpoints.

    Works for either sagitta mode.  In exact mode the integral stops at the
    hemisphere rim of the outer sphere.  Each finite panel is integrated with
    QAGS; the unbounded paraxial tail is mapped to ``[0, inf)`` on the natural
    length scale ``sqrt(2 R (d + z_last))`` and integrated with QAGI.
    ``max_subintervals`` bounds the adaptive bisection of each panel.

    Raises
    ------
    NumericError
        If any panel fails to converge within its budget; ``diagnostics``
        lists the per-panel estimates, error bounds and QUADPACK codes.
    """
    d = float(_positive(d))
    if not tol >= 1e-12:
        raise DomainError("tol must be at least 1e-12 (double precision limit)")
    if max_subintervals < 4:
        raise DomainError("max_subintervals must be at least 4")
    epsrel = tol * 0.1
    radii = breakpoints(profile).radii
    segs = profile.segments

    total = 0.0
    err = 0.0
    diagnostics = []
    for i, seg in enumerate(segs):
        zf = segment_height_function(profile, i)

        def f(r, zf=zf):
            u = d + zf(r)
            return r / (u * u * u)

        a = radii[i]
        R = seg.curvature_radius
        scale = math.sqrt(a * a + 2.0 * R * (d + seg.start_height))
        if seg.bounded:
            b = radii[i + 1]
            pts = [p for p in (scale, 3.0 * scale) if a < p < b] or None
            val, abserr, info, ier, msg = _quad(f, a, b, epsrel, pts, max_subintervals)
        elif profile.sagitta_mode == "exact":
            b = R
            pts = [p for p in (scale, 3.0 * scale) if a < p < b] or None
            val, abserr, info, ier, msg = _quad(f, a, b, epsrel, pts, max_subintervals)
        else:
            ell = scale

            def g(s, a=a, ell=ell):
                return f(a + ell * s) * ell

            val, abserr, info, ier, msg = _quad(g, 0.0, np.inf, epsrel, None, max_subintervals)
        diagnostics.append({"segment": i, "value": val, "abserr": abserr, "ier": ier,
                            "neval": info.get("neval"), "message": msg})
        total += val
        err += abserr
    if any(x["ier"] not in (0,) for x in diagnostics) or not err <= tol * abs(total):
        raise NumericError(
            f"quadrature did not reach relative tolerance {tol:g} at d={d:g}",
            {"panels": diagnostics, "estimate": 2.0 * total, "abserr": 2.0 * err},
        )
    return 2.0 * total


def k_el_quadrature(d, profile: SurfaceProfile, params: OscillatorParams = DEFAULT_PARAMS,
                    tol: float = 1e-8):
    """Coefficient ``k(d)`` by numerical quadrature (any profile, any sagitta mode)."""
    d_arr = np.atleast_1d(_positive(d))
    g = np.array([gap_integral_quadrature(x, profile, tol) for x in d_arr])
    out = k_prefactor(params) * g
    return float(out[0]) if np.ndim(d) == 0 else out


def k_el_reference_17(d, R: float, d0: float, params: OscillatorParams = DEFAULT_PARAMS):
    """Empirical ``d**-1.7`` law pinned to the perfect-sphere value at ``d0``."""
    d = _positive(d)
    _positive(R, "R")
    d0 = float(_positive(d0, "d0"))
    # written as a ratio so that d == d0 reproduces the perfect-sphere value bit for bit
    return _out(k_prefactor(params) * (R / (d0 * d0)) * (d0 / d) ** 1.7)


def gap_integral(d, profile: SurfaceProfile, method: str = "auto", tol: float = 1e-8):
    if method == "auto":
        method = "closed_form" if profile.sagitta_mode == "paraxial" else "quadrature"
    if method == "closed_form":
        return gap_integral_closed(d, profile)
    if method == "quadrature":
        d_arr = np.atleast_1d(_positive(d))
        g = np.array([gap_integral_quadrature(x, profile, tol) for x in d_arr])
        return float(g[0]) if np.ndim(d) == 0 else g
    raise DomainError(f"unknown method {method!r}")


def k_el(d, profile: SurfaceProfile, params: OscillatorParams = DEFAULT_PARAMS,
         method: str = "auto"):
    """Coefficient ``k(d)`` for any profile; closed form when paraxial, quadrature otherwise."""
    return _out(k_prefactor(params) * np.asarray(gap_integral(d, profile, method)))


def force_gradient(d, profile: SurfaceProfile, voltage: VoltageState, method: str = "auto"):
    """Electrostatic force gradient magnitude in N/m.

    For a perfect sphere this is ``pi eps0 R (V - Vc)**2 / d**2``.
    """
    dv = voltage.effective
    return _out(math.pi * EPSILON0 * dv * dv * np.asarray(gap_integral(d, profile, method)))


def sample_curve(
    profile: SurfaceProfile,
    d_grid,
    normalization: Normalization = "si",
    params: OscillatorParams = DEFAULT_PARAMS,
    method: str = "auto",
) -> ForceGradientCurve:
    """Evaluate ``k`` over ``d_grid``; ``"n0"`` divides by :func:`n0` (mass independent)."""
    d = _positive(np.atleast_1d(np.asarray(d_grid, dtype=float)))
    if np.any(np.diff(d) <= 0.0):
        raise DomainError("d_grid must be strictly increasing")
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"unknown normalization {normalization!r}")
    if method == "auto":
        method = "closed_form" if profile.sagitta_mode == "paraxial" else "quadrature"
    g = np.atleast_1d(gap_integral(d, profile, method))
    if normalization == "n0":
        values = g / N0_SCALE
    else:
        values = k_prefactor(params) * g
    return ForceGradientCurve(d, values, normalization, method)


def sample_reference_curve(
    d_grid,
    R: float,
    d0: float,
    normalization: Normalization = "si",
    params: OscillatorParams = DEFAULT_PARAMS,
) -> ForceGradientCurve:
    """The ``d**-1.7`` reference law sampled over ``d_grid``."""
    d = np.atleast_1d(np.asarray(d_grid, dtype=float))
    if np.any(np.diff(d) <= 0.0):
        raise DomainError("d_grid must be strictly increasing")
    k = np.atleast_1d(k_el_reference_17(d, R, d0, params))
    values = k / n0(params) if normalization == "n0" else k
    return ForceGradientCurve(d, values, normalization, "closed_form")


def default_fig2_grid(n: int = 200) -> np.ndarray:
    """200 log-spaced separations from 20 nm to 3 um."""
    return np.geomspace(20e-9, 3e-6, n)

