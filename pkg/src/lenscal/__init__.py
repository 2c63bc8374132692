"""Sphere-plane electrostatic calibration with imperfect lens geometry.

Submodules
----------
geometry     lens surface profiles built from spherical segments
pfa          proximity-force coefficients and force gradients
oracle       exact bispherical series and an axisymmetric finite-difference solver
oscillator   cantilever frequency shifts and synthetic calibration sequences
analysis     parabola fits, contact-potential statistics, exponent fits and scans
io, cli      file formats and the ``lenscal`` command
"""

from .errors import ConfigError, DomainError, FitError, LenscalError, NumericError
from .geometry import (
    EPSILON0,
    PerfectSphere,
    PiecewiseSpherical,
    SphericalSegment,
    breakpoints,
    height_at,
    make_fig1_profile,
    profile_from_dict,
    profile_to_dict,
    radius_at,
    sector_flattening,
)
from .pfa import (
    ForceGradientCurve,
    OscillatorParams,
    VoltageState,
    force_gradient,
    gap_integral,
    k_el,
    k_el_perfect,
    k_el_piecewise,
    k_el_quadrature,
    k_el_reference_17,
    n0,
    sample_curve,
)
from .oscillator import CalibrationSequence, NoiseSpec, fig3_campaign, frequency_at, generate_sequence
from .analysis import fit_exponent, fit_parabola, fit_sequence, scan_profiles, vc_independence

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "FitError", "LenscalError", "NumericError",
    "EPSILON0", "PerfectSphere", "PiecewiseSpherical", "SphericalSegment",
    "breakpoints", "height_at", "make_fig1_profile", "profile_from_dict", "profile_to_dict",
    "radius_at", "sector_flattening",
    "ForceGradientCurve", "OscillatorParams", "VoltageState", "force_gradient", "gap_integral",
    "k_el", "k_el_perfect", "k_el_piecewise", "k_el_quadrature", "k_el_reference_17", "n0",
    "sample_curve",
    "CalibrationSequence", "NoiseSpec", "fig3_campaign", "frequency_at", "generate_sequence",
    "fit_exponent", "fit_parabola", "fit_sequence", "scan_profiles", "vc_independence",
]
