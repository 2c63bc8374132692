"""
Axisymmetric lens surface profiles.

A profile describes the height ``z(r)`` of the lens surface above its lowest
point as a function of the radial coordinate ``r``.  Two variants exist:

* :class:`PerfectSphere` -- a single sphere of radius ``R``.
* :class:`PiecewiseSpherical` -- a stack of spherical segments, each with its
  own curvature radius, joined continuously at prescribed heights.  The
  outermost segment extends to unbounded height.

Segments are parameterised by heights; the radial breakpoints follow from
the sagitta relation of the chosen mode:

* ``"paraxial"``: ``z - z0 = (r**2 - r0**2) / (2 R)``
* ``"exact"``:    ``z - z0 = sqrt(R**2 - r0**2) - sqrt(R**2 - r**2)``

All lengths are SI metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError

SagittaMode = Literal["paraxial", "exact"]
SAGITTA_MODES = ("paraxial", "exact")

UNBOUNDED = math.inf

# Global lens radius of the large-lens calibration (30.9 mm).
FIG1_GLOBAL_RADIUS = 0.0309
FIG1_BUBBLE_RADIUS = 30e-6
FIG1_BUBBLE_HEIGHT = 8e-9
FIG1_SECTOR_RADIUS_FACTOR = 1.6
FIG1_SECTOR_HEIGHT = 250e-9

PROFILE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants used throughout (SI)."""

    epsilon0: float = 8.8541878128e-12

    def __post_init__(self):
        if not (self.epsilon0 > 0.0 and math.isfinite(self.epsilon0)):
            raise DomainError("epsilon0 must be positive and finite.")


CONSTANTS = PhysicalConstants()
EPSILON0 = CONSTANTS.epsilon0


@dataclass(frozen=True)
class SphericalSegment:
    """One spherical zone of a lens, between two heights above the apex.

    ``end_height`` is :data:`UNBOUNDED` (``math.inf``) for the outermost zone.
    """

    curvature_radius: float
    start_height: float
    end_height: float = UNBOUNDED

    def __post_init__(self):
        if not (self.curvature_radius > 0.0 and math.isfinite(self.curvature_radius)):
            raise DomainError(f"curvature_radius must be positive and finite, got {self.curvature_radius!r}")
        if not (self.start_height >= 0.0 and math.isfinite(self.start_height)):
            raise DomainError(f"start_height must be finite and >= 0, got {self.start_height!r}")
        if not self.end_height > self.start_height:
            raise DomainError(
                f"end_height ({self.end_height!r}) must exceed start_height ({self.start_height!r})"
            )

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.end_height)


def _check_mode(mode: str) -> None:
    if mode not in SAGITTA_MODES:
        raise DomainError(f"sagitta_mode must be one of {SAGITTA_MODES}, got {mode!r}")


@dataclass(frozen=True)
class PerfectSphere:
    """A lens with one curvature radius everywhere."""

    radius: float
    sagitta_mode: SagittaMode = "paraxial"

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise DomainError(f"radius must be positive and finite, got {self.radius!r}")
        _check_mode(self.sagitta_mode)

    @property
    def segments(self) -> tuple[SphericalSegment, ...]:
        return (SphericalSegment(self.radius, 0.0, UNBOUNDED),)

    @property
    def global_radius(self) -> float:
        return self.radius


@dataclass(frozen=True)
class PiecewiseSpherical:
    """A lens built from contiguous spherical segments, innermost first."""

    segments: tuple[SphericalSegment, ...]
    sagitta_mode: SagittaMode = "paraxial"
    _breaks: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        _check_mode(self.sagitta_mode)
        if not segs:
            raise DomainError("a piecewise profile needs at least one segment")
        if segs[0].start_height != 0.0:
            raise DomainError("the first segment must start at height 0")
        for i, (a, b) in enumerate(zip(segs[:-1], segs[1:])):
            if not a.bounded:
                raise DomainError(f"segment {i} is unbounded but is not the last segment")
            if a.end_height != b.start_height:
                raise DomainError(
                    f"segments {i} and {i + 1} are not contiguous "
                    f"({a.end_height!r} != {b.start_height!r})"
                )
        if segs[-1].bounded:
            raise DomainError("the last segment must extend to unbounded height")
        object.__setattr__(self, "_breaks", _compute_breakpoints(segs, self.sagitta_mode))

    @property
    def global_radius(self) -> float:
        return self.segments[-1].curvature_radius

    @classmethod
    def from_heights(
        cls,
        radii: Sequence[float],
        boundary_heights: Sequence[float],
        sagitta_mode: SagittaMode = "paraxial",
    ) -> "PiecewiseSpherical":
        """Build from curvature radii (innermost first) and the finite segment boundaries.

        ``len(boundary_heights)`` must be ``len(radii) - 1``.
        """
        if len(boundary_heights) != len(radii) - 1:
            raise DomainError("need exactly one boundary height fewer than radii")
        starts = [0.0, *map(float, boundary_heights)]
        ends = [*map(float, boundary_heights), UNBOUNDED]
        segs = tuple(SphericalSegment(float(R), s, e) for R, s, e in zip(radii, starts, ends))
        return cls(segs, sagitta_mode)


SurfaceProfile = Union[PerfectSphere, PiecewiseSpherical]


@dataclass(frozen=True)
class RadialBreakpoints:
    """Radii at which each finite segment boundary height is reached (``radii[0] == 0``)."""

    radii: tuple[float, ...]
    heights: tuple[float, ...]


def _compute_breakpoints(segs: Sequence[SphericalSegment], mode: str) -> tuple[float, ...]:
    radii = [0.0]
    for seg in segs:
        if not seg.bounded:
            break
        R = seg.curvature_radius
        dz = seg.end_height - seg.start_height
        r0 = radii[-1]
        if mode == "paraxial":
            radii.append(math.sqrt(r0 * r0 + 2.0 * R * dz))
        else:
            if r0 > R:
                raise DomainError("segment boundary lies outside the hemisphere of its sphere")
            c = math.sqrt(R * R - r0 * r0) - dz
            if c < 0.0:
                raise DomainError(
                    f"segment of radius {R!r} cannot rise by {dz!r} in exact sagitta mode"
                )
            radii.append(math.sqrt(R * R - c * c))
    return tuple(radii)


def breakpoints(profile: SurfaceProfile) -> RadialBreakpoints:
    """Radial breakpoints of a profile, derived from its segment heights."""
    if isinstance(profile, PerfectSphere):
        return RadialBreakpoints((0.0,), (0.0,))
    heights = (0.0,) + tuple(s.end_height for s in profile.segments if s.bounded)
    return RadialBreakpoints(profile._breaks, heights)


def make_fig1_profile(sagitta_mode: SagittaMode = "paraxial") -> PiecewiseSpherical:
    """The imperfect large-lens model: bubble, flattened sector, global sphere.

    A 30 um bubble rising 8 nm, then a 250 nm high sector with curvature
    radius 1.6 R, then the 30.9 mm sphere.  ``1.6 * R`` is used exactly
    (49.44 mm).
    """
    R = FIG1_GLOBAL_RADIUS
    h = FIG1_BUBBLE_HEIGHT
    H = FIG1_SECTOR_HEIGHT
    return PiecewiseSpherical.from_heights(
        [FIG1_BUBBLE_RADIUS, FIG1_SECTOR_RADIUS_FACTOR * R, R],
        [h, h + H],
        sagitta_mode,
    )


def _segment_index(edges: np.ndarray, x: np.ndarray) -> np.ndarray:
    # edges[0] == 0; index of segment containing x (last segment is open-ended)
    return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 1)


def height_at(profile: SurfaceProfile, r):
    """Surface height above the apex at radial coordinate ``r`` (scalar or array).

    Raises
    ------
    DomainError
        If ``r < 0``, or in exact mode if ``r`` exceeds the curvature radius
        of the segment it falls in.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or np.any(~np.isfinite(r_arr)):
        raise DomainError("r must be finite and >= 0")
    bp = breakpoints(profile)
    edges = np.asarray(bp.radii)
    z_edges = np.asarray(bp.heights)
    R_seg = np.asarray([s.curvature_radius for s in profile.segments])
    idx = _segment_index(edges, r_arr)
    R = R_seg[idx]
    r0 = edges[idx]
    z0 = z_edges[idx]
    if profile.sagitta_mode == "paraxial":
        z = z0 + (r_arr * r_arr - r0 * r0) / (2.0 * R)
    else:
        if np.any(r_arr > R):
            raise DomainError("r exceeds the curvature radius of its segment in exact sagitta mode")
        z = z0 + (np.sqrt(R * R - r0 * r0) - np.sqrt(R * R - r_arr * r_arr))
    return float(z) if np.ndim(z) == 0 else z


def segment_height_function(profile: SurfaceProfile, index: int):
    """Scalar ``z(r)`` restricted to segment ``index`` (no bounds checks; for hot loops)."""
    bp = breakpoints(profile)
    R = profile.segments[index].curvature_radius
    r0 = bp.radii[index]
    z0 = bp.heights[index]
    if profile.sagitta_mode == "paraxial":
        inv2R = 0.5 / R
        base = z0 - r0 * r0 * inv2R
        return lambda r: base + r * r * inv2R
    R2 = R * R
    base = z0 + math.sqrt(R2 - r0 * r0)
    return lambda r: base - math.sqrt(R2 - r * r)


def radius_at(profile: SurfaceProfile, z):
    """Inverse of :func:`height_at`: radial coordinate where the surface reaches height ``z``."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0.0) or np.any(~np.isfinite(z_arr)):
        raise DomainError("z must be finite and >= 0")
    bp = breakpoints(profile)
    edges = np.asarray(bp.radii)
    z_edges = np.asarray(bp.heights)
    R_seg = np.asarray([s.curvature_radius for s in profile.segments])
    idx = _segment_index(z_edges, z_arr)
    R = R_seg[idx]
    r0 = edges[idx]
    dz = z_arr - z_edges[idx]
    if profile.sagitta_mode == "paraxial":
        r = np.sqrt(r0 * r0 + 2.0 * R * dz)
    else:
        c = np.sqrt(R * R - r0 * r0) - dz
        if np.any(c < 0.0):
            raise DomainError("height exceeds the hemisphere of its segment in exact sagitta mode")
        r = np.sqrt(R * R - c * c)
    return float(r) if np.ndim(r) == 0 else r


def perfect_sphere_sector_height(R: float, radial_extent: float) -> float:
    """Paraxial height of a perfect sphere of radius ``R`` at ``radial_extent``."""
    if radial_extent < 0.0:
        raise DomainError("radial_extent must be >= 0")
    if R <= 0.0:
        raise DomainError("R must be > 0")
    return radial_extent * radial_extent / (2.0 * R)


def sector_flattening(profile: PiecewiseSpherical, index: int = 1) -> tuple[float, float]:
    """Compare segment ``index`` against a perfect sphere of the global radius.

    Returns ``(perfect_height, flattening)`` where ``perfect_height`` is the
    height a perfect sphere reaches at the outer breakpoint of the segment and
    ``flattening = perfect_height - segment_height``.
    """
    seg = profile.segments[index]
    if not seg.bounded:
        raise DomainError("cannot measure flattening of the unbounded segment")
    r_out = breakpoints(profile).radii[index + 1]
    perfect = perfect_sphere_sector_height(profile.global_radius, r_out)
    return perfect, perfect - (seg.end_height - seg.start_height)


# -- JSON representation ------------------------------------------------------

def profile_to_dict(profile: SurfaceProfile) -> dict:
    if isinstance(profile, PerfectSphere):
        return {
            "schema_version": PROFILE_SCHEMA_VERSION,
            "type": "perfect_sphere",
            "radius_m": profile.radius,
            "sagitta_mode": profile.sagitta_mode,
        }
    return {
        "schema_version": PROFILE_SCHEMA_VERSION,
        "type": "piecewise_spherical",
        "sagitta_mode": profile.sagitta_mode,
        "segments": [
            {
                "curvature_radius_m": s.curvature_radius,
                "end_height_m": s.end_height if s.bounded else None,
            }
            for s in profile.segments
        ],
    }


def _number(obj: dict, key: str, where: str) -> float:
    if key not in obj:
        raise ConfigError(f"{where}: missing field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: field {key!r} must be a number, got {v!r}")
    return float(v)


def profile_from_dict(obj: dict) -> SurfaceProfile:
    """Parse the JSON profile schema, raising :class:`ConfigError` with field diagnostics."""
    if not isinstance(obj, dict):
        raise ConfigError("profile: expected a JSON object")
    version = obj.get("schema_version", PROFILE_SCHEMA_VERSION)
    if version != PROFILE_SCHEMA_VERSION:
        raise ConfigError(f"profile: unsupported schema_version {version!r}")
    kind = obj.get("type")
    mode = obj.get("sagitta_mode", "paraxial")
    if mode not in SAGITTA_MODES:
        raise ConfigError(f"profile: field 'sagitta_mode' must be one of {SAGITTA_MODES}, got {mode!r}")
    try:
        if kind == "perfect_sphere":
            allowed = {"schema_version", "type", "radius_m", "sagitta_mode"}
            _reject_unknown(obj, allowed, "profile")
            return PerfectSphere(_number(obj, "radius_m", "profile"), mode)
        if kind == "piecewise_spherical":
            allowed = {"schema_version", "type", "segments", "sagitta_mode"}
            _reject_unknown(obj, allowed, "profile")
            raw = obj.get("segments")
            if not isinstance(raw, list) or not raw:
                raise ConfigError("profile: field 'segments' must be a non-empty list")
            segs = []
            start = 0.0
            for i, s in enumerate(raw):
                where = f"profile.segments[{i}]"
                if not isinstance(s, dict):
                    raise ConfigError(f"{where}: expected an object")
                _reject_unknown(s, {"curvature_radius_m", "end_height_m"}, where)
                R = _number(s, "curvature_radius_m", where)
                if "end_height_m" not in s:
                    raise ConfigError(f"{where}: missing field 'end_height_m'")
                end = UNBOUNDED if s["end_height_m"] is None else _number(s, "end_height_m", where)
                segs.append(SphericalSegment(R, start, end))
                start = end
            return PiecewiseSpherical(tuple(segs), mode)
    except DomainError as exc:
        raise ConfigError(f"profile: {exc}") from exc
    raise ConfigError(f"profile: field 'type' must be 'perfect_sphere' or 'piecewise_spherical', got {kind!r}")


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(map(repr, extra))}")
