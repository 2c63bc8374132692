"""
Cantilever frequency shifts and synthetic calibration sequences.

An electrostatic force gradient pulls the resonance of an oscillator of
effective mass ``m_eff`` down according to

    nu**2 = nu0**2 - k(d) * (V - Vc)**2

with ``k(d)`` from :mod:`lenscal.pfa`.  A calibration sequence sweeps the
applied voltage at each of a set of separations.  Perturbations are applied
in a fixed order: piezo creep biases the distance, the contact potential
drifts with distance, and Gaussian noise is added to the measured frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DomainError
from .geometry import PerfectSphere, SurfaceProfile, profile_to_dict
from .pfa import DEFAULT_PARAMS, OscillatorParams, k_el

# Sphere used for the long-range contact-potential campaign (151.3 um).
FIG3_SPHERE_RADIUS = 151.3e-6
FIG3_DMIN = 160.4e-9
FIG3_DMAX = 5150.1e-9
FIG3_N_DISTANCES = 500
FIG3_VC = 15.29e-3
FIG3_VC_SEM = 0.13e-3


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbations applied by :func:`generate_sequence`.

    ``vc_drift`` is a slope in volts per decade of distance, relative to
    ``vc_drift_ref`` (defaults to the smallest commanded distance).  Creep
    shifts the true distance by ``creep_amplitude * (d / creep_ref)**creep_exponent``.
    """

    frequency_noise_sigma: float = 0.0
    vc_drift: float | None = None
    vc_drift_ref: float | None = None
    creep_amplitude: float | None = None
    creep_exponent: float = 1.0
    creep_ref: float = 1e-6

    def __post_init__(self):
        if not (self.frequency_noise_sigma >= 0.0 and math.isfinite(self.frequency_noise_sigma)):
            raise DomainError("frequency_noise_sigma must be finite and >= 0")
        if self.vc_drift_ref is not None and not self.vc_drift_ref > 0.0:
            raise DomainError("vc_drift_ref must be positive")
        if not self.creep_ref > 0.0:
            raise DomainError("creep_ref must be positive")

    def to_dict(self) -> dict:
        return {
            "frequency_noise_sigma_hz": self.frequency_noise_sigma,
            "vc_drift_volt_per_decade": self.vc_drift,
            "vc_drift_ref_m": self.vc_drift_ref,
            "creep_amplitude_m": self.creep_amplitude,
            "creep_exponent": self.creep_exponent,
            "creep_ref_m": self.creep_ref,
        }


NOISELESS = NoiseSpec()


@dataclass(frozen=True)
class CalibrationPoint:
    commanded_distance: float
    applied_voltage: float
    measured_frequency: float


@dataclass
class CalibrationSequence:
    """Flat arrays of (distance, voltage, frequency) records plus generation metadata."""

    d: np.ndarray
    V: np.ndarray
    nu: np.ndarray
    seq_id: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        if not (self.d.shape == self.V.shape == self.nu.shape) or self.d.ndim != 1:
            raise DomainError("d, V and nu must be 1-D arrays of equal length")
        if np.any(~(self.d > 0.0)):
            raise DomainError("distances must be positive")
        if np.any(~(self.nu >= 0.0)):
            raise DomainError("frequencies must be >= 0")

    def __len__(self) -> int:
        return self.d.size

    def points(self) -> Iterator[CalibrationPoint]:
        for d, V, nu in zip(self.d, self.V, self.nu):
            yield CalibrationPoint(float(d), float(V), float(nu))

    def groups(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """``(distance, V, nu)`` per distinct distance, in order of first appearance."""
        out = []
        _, first, inv = np.unique(self.d, return_index=True, return_inverse=True)
        for g in np.argsort(first):
            m = inv == g
            out.append((float(self.d[first[g]]), self.V[m], self.nu[m]))
        return out


def frequency_at(d, V, profile: SurfaceProfile, params: OscillatorParams = DEFAULT_PARAMS,
                 vc: float = 0.0):
    """Shifted resonance frequency in Hz (broadcasts over ``d`` and ``V``).

    Raises
    ------
    DomainError
        When the electrostatic softening exceeds ``nu0**2``; the message names
        the offending ``(d, V)``.
    """
    d_arr, V_arr = np.broadcast_arrays(np.asarray(d, dtype=float), np.asarray(V, dtype=float))
    vc_arr = np.broadcast_to(np.asarray(vc, dtype=float), d_arr.shape)
    k = np.asarray(k_el(d_arr.ravel(), profile, params)).reshape(d_arr.shape)
    nu2 = params.rest_frequency ** 2 - k * (V_arr - vc_arr) ** 2
    bad = ~(nu2 > 0.0)
    if np.any(bad):
        pairs = [(float(a), float(b)) for a, b in zip(d_arr[bad][:10], V_arr[bad][:10])]
        raise DomainError(
            f"oscillator destabilised at {int(bad.sum())} point(s) (d, V): {pairs}; shrink the voltage range"
        )
    nu = np.sqrt(nu2)
    return float(nu) if nu.ndim == 0 else nu


def default_voltage_grid(center: float = 0.0, half_span: float = 0.25, n: int = 9) -> np.ndarray:
    """``n`` voltages spaced evenly and symmetrically about ``center``."""
    if n < 5:
        raise DomainError("at least 5 voltage settings are needed per distance")
    return center + np.linspace(-half_span, half_span, n)


def apply_creep(d: np.ndarray, noise: NoiseSpec) -> np.ndarray:
    if noise.creep_amplitude is None:
        return d
    return d + noise.creep_amplitude * (d / noise.creep_ref) ** noise.creep_exponent


def contact_potential_at(d_actual: np.ndarray, vc: float, noise: NoiseSpec, d_ref: float) -> np.ndarray:
    if noise.vc_drift is None:
        return np.full(d_actual.shape, float(vc))
    return vc + noise.vc_drift * np.log10(d_actual / d_ref)


def generate_sequence(
    profile: SurfaceProfile,
    params: OscillatorParams,
    vc: float,
    d_grid,
    v_grid,
    noise: NoiseSpec = NOISELESS,
    seed: int = 0,
    seq_id: int = 0,
) -> CalibrationSequence:
    """Voltage sweeps at each commanded distance.

    Deterministic for a given ``seed``: the RNG (PCG64) draws one normal
    variate per record, in record order (distance-major), and nothing else.
    """
    d_grid = np.atleast_1d(np.asarray(d_grid, dtype=float))
    v_grid = np.atleast_1d(np.asarray(v_grid, dtype=float))
    if d_grid.size == 0 or v_grid.size == 0:
        raise DomainError("distance and voltage grids must be non-empty")
    if np.unique(v_grid).size < 5:
        raise DomainError("at least 5 distinct voltages per distance are required")
    if np.any(~(d_grid > 0.0)):
        raise DomainError("distances must be positive")
    d_cmd = np.repeat(d_grid, v_grid.size)
    V = np.tile(v_grid, d_grid.size)

    d_act = apply_creep(d_cmd, noise)
    if np.any(~(d_act > 0.0)):
        raise DomainError("creep drives the separation non-positive")
    d_ref = noise.vc_drift_ref if noise.vc_drift_ref is not None else float(d_grid.min())
    vc_eff = contact_potential_at(d_act, vc, noise, d_ref)
    nu = np.asarray(frequency_at(d_act, V, profile, params, vc_eff), dtype=float)

    rng = np.random.default_rng(seed)
    if noise.frequency_noise_sigma > 0.0:
        nu = nu + rng.normal(0.0, noise.frequency_noise_sigma, size=nu.size)
        nu = np.maximum(nu, 0.0)

    meta = {
        "profile": profile_to_dict(profile),
        "oscillator": {
            "effective_mass_kg": params.effective_mass,
            "rest_frequency_hz": params.rest_frequency,
        },
        "true_contact_potential_volt": float(vc),
        "noise": noise.to_dict(),
        "vc_drift_ref_m": d_ref,
        "seed": int(seed),
        "n_distances": int(d_grid.size),
        "voltages_volt": [float(v) for v in v_grid],
    }
    return CalibrationSequence(d_cmd, V, nu, seq_id, meta)


def vc_variance_per_unit_sigma(profile: SurfaceProfile, params: OscillatorParams, vc: float,
                               d_grid, v_grid) -> np.ndarray:
    """Delta-method variance of the fitted contact potential per unit frequency noise.

    For each distance, the ordinary least-squares covariance of the parabola
    coefficients under independent frequency noise (``var(nu**2) = 4 nu**2
    sigma**2``) is propagated to ``vc = -b / (2 a)``.  Multiply by
    ``sigma**2`` to get ``var(vc_hat)``.
    """
    v = np.asarray(v_grid, dtype=float)
    X = np.column_stack([v * v, v, np.ones_like(v)])
    XtX_inv = np.linalg.inv(X.T @ X)
    H = XtX_inv @ X.T
    out = []
    for d in np.atleast_1d(np.asarray(d_grid, dtype=float)):
        nu = np.asarray(frequency_at(np.full(v.shape, d), v, profile, params, vc))
        k = float(k_el(d, profile, params))
        a, b = -k, 2.0 * k * vc
        cov = (H * (4.0 * nu * nu)) @ H.T
        grad = np.array([b / (2.0 * a * a), -1.0 / (2.0 * a), 0.0])
        out.append(float(grad @ cov @ grad))
    return np.asarray(out)


def sigma_for_target_sem(profile: SurfaceProfile, params: OscillatorParams, vc: float,
                         d_grid, v_grid, target_sem: float) -> float:
    """Frequency noise (Hz) giving an expected standard error ``target_sem`` of the mean contact potential.

    With ``N`` distances and per-distance variances ``s_i**2 sigma**2`` the
    unweighted mean has ``SEM = sigma sqrt(sum s_i**2) / N``.  Equivalently
    the RMS scatter of the per-distance estimates is ``target_sem * sqrt(N)``.
    """
    g = vc_variance_per_unit_sigma(profile, params, vc, d_grid, v_grid)
    return float(target_sem * g.size / math.sqrt(g.sum()))


@dataclass(frozen=True)
class Campaign:
    """A ready-made calibration setup."""

    profile: SurfaceProfile
    params: OscillatorParams
    vc: float
    d_grid: np.ndarray
    v_grid: np.ndarray


def fig3_campaign() -> Campaign:
    """500 separations from 160.4 nm to 5150.1 nm over a 151.3 um sphere, V_c = 15.29 mV.

    The oscillator parameters and the +-0.25 V sweep are choices; nothing
    about them is known beyond the sphere radius and separation range.
    """
    return Campaign(
        profile=PerfectSphere(FIG3_SPHERE_RADIUS),
        params=OscillatorParams(effective_mass=1e-9, rest_frequency=1e3),
        vc=FIG3_VC,
        d_grid=np.linspace(FIG3_DMIN, FIG3_DMAX, FIG3_N_DISTANCES),
        v_grid=default_voltage_grid(0.0, 0.25, 9),
    )
