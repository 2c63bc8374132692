"""
Axisymmetric finite-difference Laplace solver for a lens above a grounded plate.

The lens is the solid of revolution

    { (r, z) : r <= r_t,  d + z(r) <= z <= d + 2 z(r_t) - z(r) }

i.e. the profile ``z(r)`` truncated at ``r_t`` and closed by its mirror image
about the rim plane.  A perfect sphere in exact sagitta mode truncated at
``r_t = R`` is therefore the full sphere.  The lens is held at potential
``V``, the plate ``z = 0`` and the far boundary of the box are grounded.

Discretisation is finite-volume on a tensor grid graded geometrically away
from the gap: every edge carries a conductance ``w = area / length`` of its
dual face, so the discrete operator is a weighted graph Laplacian.  Edges cut
by the lens surface are shortened to the intersection point, where the
boundary value is imposed (a Shortley-Weller-type treatment).  The system is
solved by red-black successive over-relaxation.

Capacitance follows from the field energy, ``W = (1/2) C V**2``; because the
operator is a graph Laplacian, the same number also equals the flux through
the cut edges (lens charge) and, with opposite sign, the charge induced on
the grounded boundaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DomainError, NumericError
from ..geometry import (
    EPSILON0,
    PerfectSphere,
    SurfaceProfile,
    height_at,
    profile_to_dict,
    radius_at,
)

FEASIBLE_GAP_RATIO = 0.01
_THETA_MIN = 1e-3


@dataclass(frozen=True)
class FdGrid:
    """Tensor grid in (r, z), metres, plus the parameters that produced it."""

    r: np.ndarray
    z: np.ndarray
    d: float
    truncation_radius: float
    gap_nodes: int
    growth: float
    max_spacing: float
    extent_factor: float
    outer_boundary: str = "dirichlet"

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        z = np.asarray(self.z, dtype=float)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "z", z)
        if r.size < 16 or z.size < 16:
            raise ConfigError("grid needs at least 16 nodes in each direction")
        if r[0] != 0.0 or z[0] != 0.0 or np.any(np.diff(r) <= 0) or np.any(np.diff(z) <= 0):
            raise ConfigError("grid coordinates must start at 0 and increase strictly")
        if np.count_nonzero(z <= self.d * (1 + 1e-12)) < 21:
            raise ConfigError("the gap at the apex must be resolved by at least 20 axial cells")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.z.size, self.r.size)

    @property
    def radial_extent(self) -> float:
        return float(self.r[-1])

    @property
    def axial_extent(self) -> float:
        return float(self.z[-1])

    def metadata(self) -> dict:
        return {
            "n_r": int(self.r.size),
            "n_z": int(self.z.size),
            "radial_extent_m": self.radial_extent,
            "axial_extent_m": self.axial_extent,
            "d_m": self.d,
            "truncation_radius_m": self.truncation_radius,
            "gap_nodes": self.gap_nodes,
            "growth": self.growth,
            "max_spacing_m": self.max_spacing,
            "extent_factor": self.extent_factor,
            "outer_boundary": self.outer_boundary,
        }


@dataclass
class FdSolution:
    """Converged potential and derived quantities."""

    grid: FdGrid
    potential: np.ndarray
    inside: np.ndarray
    voltage: float
    iterations: int
    residual: float
    capacitance: float
    energy: float
    capacitance_charge: float
    capacitance_induced: float
    omega: float
    residual_history: list = field(default_factory=list)
    extrema_history: list = field(default_factory=list)

    def metadata(self) -> dict:
        return {
            "grid": self.grid.metadata(),
            "voltage_V": self.voltage,
            "iterations": self.iterations,
            "residual": self.residual,
            "omega": self.omega,
            "capacitance_F": self.capacitance,
            "capacitance_charge_F": self.capacitance_charge,
            "capacitance_induced_F": self.capacitance_induced,
            "energy_J": self.energy,
        }


def default_truncation(profile: SurfaceProfile) -> float:
    """Rim radius used when none is given: the outer sphere's radius."""
    return profile.global_radius


def _graded(h0: float, growth: float, cap: float, cap_until: float, end: float) -> np.ndarray:
    xs = [0.0]
    step = min(h0, cap)
    while xs[-1] < end:
        nxt = xs[-1] + step
        if nxt >= end or end - nxt < 0.5 * step:
            xs.append(end)
            break
        xs.append(nxt)
        step *= growth
        if nxt < cap_until:
            step = min(step, cap)
    return np.asarray(xs)


def make_grid(
    profile: SurfaceProfile,
    d: float,
    gap_nodes: int = 20,
    growth: float = 1.12,
    max_spacing: float | None = None,
    extent_factor: float = 30.0,
    truncation_radius: float | None = None,
    refine: int = 0,
) -> FdGrid:
    """Graded grid for ``fd_solve``.

    ``gap_nodes`` uniform cells span the apex gap ``[0, d]``; spacing then
    grows by ``growth`` per cell up to ``max_spacing`` (default 1/25 of the
    lens size) across the lens, and grows uncapped beyond it out to
    ``extent_factor`` lens sizes.  Each ``refine`` step halves every spacing.
    """
    if not d > 0.0:
        raise DomainError("d must be positive")
    r_t = default_truncation(profile) if truncation_radius is None else float(truncation_radius)
    z_t = float(height_at(profile, r_t))
    size = max(r_t, z_t)
    if max_spacing is None:
        max_spacing = size / 25.0
    factor = 2 ** refine
    gap_nodes = gap_nodes * factor
    max_spacing = max_spacing / factor
    growth = growth ** (1.0 / factor)

    hz0 = d / gap_nodes
    gap = np.linspace(0.0, d, gap_nodes + 1)
    top = d + 2.0 * z_t
    extent = extent_factor * size
    if extent <= top:
        raise ConfigError("extent_factor too small: the box does not enclose the lens")
    above = d + _graded(hz0, growth, max_spacing, top - d, extent - d)
    z = np.concatenate([gap, above[1:]])

    R_apex = profile.segments[0].curvature_radius
    hr0 = min(math.sqrt(2.0 * R_apex * d), r_t) / gap_nodes
    r = _graded(hr0, growth, max_spacing, r_t, extent)
    return FdGrid(r, z, float(d), r_t, gap_nodes, growth, max_spacing, extent_factor)


def _body_extent_r(profile: SurfaceProfile, d: float, r_t: float, z: np.ndarray) -> np.ndarray:
    """Radial half-width of the lens at each height (``-1`` where absent)."""
    z_t = float(height_at(profile, r_t))
    rel = z - d
    h = np.minimum(rel, 2.0 * z_t - rel)
    out = np.full(z.shape, -1.0)
    ok = h >= 0.0
    if np.any(ok):
        out[ok] = np.minimum(np.atleast_1d(radius_at(profile, np.minimum(h[ok], z_t))), r_t)
    return out


def _assemble(profile: SurfaceProfile, grid: FdGrid, voltage: float):
    r, z = grid.r, grid.z
    nz, nr = z.size, r.size
    d, r_t = grid.d, grid.truncation_radius
    z_t = float(height_at(profile, r_t))

    rho = _body_extent_r(profile, d, r_t, z)  # (nz,)
    R2, Z2 = np.meshgrid(r, z)
    inside = R2 <= rho[:, None]
    low = np.full(nr, np.inf)
    high = np.full(nr, -np.inf)
    in_col = r <= r_t
    zr = np.atleast_1d(height_at(profile, np.minimum(r, r_t)))
    low[in_col] = d + zr[in_col]
    high[in_col] = d + 2.0 * z_t - zr[in_col]

    dirichlet = np.zeros((nz, nr), bool)
    dirichlet[0, :] = True
    dirichlet[-1, :] = True
    dirichlet[:, -1] = True
    unknown = ~(dirichlet | inside)

    # dual-cell faces
    rh = 0.5 * (r[1:] + r[:-1])  # r_{i+1/2}
    r_lo = np.concatenate([[0.0], rh])
    r_hi = np.concatenate([rh, [r[-1]]])
    zh = 0.5 * (z[1:] + z[:-1])
    z_lo = np.concatenate([[0.0], zh])
    z_hi = np.concatenate([zh, [z[-1]]])
    dzc = z_hi - z_lo
    annulus = math.pi * (r_hi ** 2 - r_lo ** 2)
    hr = np.diff(r)
    hz = np.diff(z)

    wE = np.zeros((nz, nr))
    wW = np.zeros((nz, nr))
    wN = np.zeros((nz, nr))
    wS = np.zeros((nz, nr))
    wE[:, :-1] = 2.0 * math.pi * rh[None, :] * dzc[:, None] / hr[None, :]
    wW[:, 1:] = wE[:, :-1]
    wN[:-1, :] = annulus[None, :] / hz[:, None]
    wS[1:, :] = wN[:-1, :]

    rhs = np.zeros((nz, nr))
    cut = np.zeros((nz, nr))  # total cut-edge conductance per node

    # west neighbour inside the lens: surface at r = rho(z_j)
    m = unknown.copy()
    m[:, 0] = False
    m[:, 1:] &= inside[:, :-1]
    jj, ii = np.nonzero(m)
    theta = np.maximum((r[ii] - rho[jj]) / (r[ii] - r[ii - 1]), _THETA_MIN)
    w = wW[jj, ii] / theta
    cut[jj, ii] += w
    wW[jj, ii] = 0.0

    # north neighbour inside: lens lower surface above this node
    m = unknown.copy()
    m[-1, :] = False
    m[:-1, :] &= inside[1:, :]
    jj, ii = np.nonzero(m)
    theta = np.maximum((low[ii] - z[jj]) / (z[jj + 1] - z[jj]), _THETA_MIN)
    w = wN[jj, ii] / theta
    cut[jj, ii] += w
    wN[jj, ii] = 0.0

    # south neighbour inside: lens upper surface below this node
    m = unknown.copy()
    m[0, :] = False
    m[1:, :] &= inside[:-1, :]
    jj, ii = np.nonzero(m)
    theta = np.maximum((z[jj] - high[ii]) / (z[jj] - z[jj - 1]), _THETA_MIN)
    w = wS[jj, ii] / theta
    cut[jj, ii] += w
    wS[jj, ii] = 0.0

    # an east neighbour can only be inside if the node itself is, by construction
    m = unknown.copy()
    m[:, -1] = False
    m[:, :-1] &= inside[:, 1:]
    if np.any(m):
        raise NumericError("lens geometry is not radially star-shaped on this grid")

    diag = wE + wW + wN + wS + cut
    rhs = cut * voltage
    # edges from unknowns to the grounded/Dirichlet nodes keep their weight in diag;
    # neighbours inside the lens have been zeroed above
    for wt in (wE, wW, wN, wS):
        wt[~unknown] = 0.0
    return unknown, inside, dirichlet, wE, wW, wN, wS, diag, rhs, cut


def _apply(phi, wE, wW, wN, wS):
    s = np.zeros_like(phi)
    s[:, :-1] += wE[:, :-1] * phi[:, 1:]
    s[:, 1:] += wW[:, 1:] * phi[:, :-1]
    s[:-1, :] += wN[:-1, :] * phi[1:, :]
    s[1:, :] += wS[1:, :] * phi[:-1, :]
    return s


def fd_solve(
    profile: SurfaceProfile,
    d: float,
    grid: FdGrid | None = None,
    tol: float = 1e-9,
    voltage: float = 1.0,
    omega: float | None = None,
    max_iter: int = 200_000,
    check_every: int = 50,
    project: bool = True,
) -> FdSolution:
    """Solve Laplace's equation around the lens and return its capacitance.

    Parameters
    ----------
    profile : SurfaceProfile
        Lens profile.  Use exact sagitta mode for a true sphere.
    d : float
        Apex-plate gap in metres.  Must satisfy ``d / R >= 0.01`` where
        ``R`` is the outer curvature radius.
    grid : FdGrid, optional
        Defaults to :func:`make_grid` ``(profile, d)``.
    tol : float
        Stop when the largest Jacobi correction ``|(b - A phi)_k / A_kk|``,
        in units of ``voltage``, falls below this value.
    voltage : float
        Lens potential in volts.
    omega : float, optional
        Over-relaxation factor; defaults to ``2 / (1 + pi / max(n_r, n_z))``.
    project : bool
        Clip over-relaxed iterates to the boundary-value range (projected
        SOR).  The converged solution is unaffected.

    Raises
    ------
    DomainError
        Gap below the feasibility bound.
    ConfigError
        Grid built for a different gap or lens.
    NumericError
        No convergence within ``max_iter`` sweeps (carries the residual history).
    """
    if not d > 0.0:
        raise DomainError("d must be positive")
    if d / profile.global_radius < FEASIBLE_GAP_RATIO:
        raise DomainError(
            f"d/R = {d / profile.global_radius:.3g} is below the feasibility bound "
            f"{FEASIBLE_GAP_RATIO}; the gap cannot be resolved on a desk-scale grid. "
            "Scale the geometry up or use the series oracle."
        )
    if grid is None:
        grid = make_grid(profile, d)
    if not math.isclose(grid.d, d, rel_tol=1e-12):
        raise ConfigError(f"grid was built for d={grid.d!r}, not d={d!r}")
    z_t = float(height_at(profile, grid.truncation_radius))
    if grid.axial_extent <= d + 2.0 * z_t or grid.radial_extent <= grid.truncation_radius:
        raise ConfigError("grid does not enclose the lens")

    unknown, inside, dirichlet, wE, wW, wN, wS, diag, rhs, cut = _assemble(profile, grid, voltage)
    nz, nr = grid.shape
    if omega is None:
        omega = 2.0 / (1.0 + math.pi / max(nr, nz))
    if not 0.0 < omega < 2.0:
        raise DomainError("omega must lie in (0, 2)")

    phi = np.zeros((nz, nr))
    phi[inside] = voltage
    jj, ii = np.indices((nz, nr))
    colours = [unknown & ((jj + ii) % 2 == c) for c in (0, 1)]
    inv_diag = np.zeros_like(diag)
    inv_diag[unknown] = 1.0 / diag[unknown]
    vscale = abs(voltage) if voltage != 0.0 else 1.0
    lo, hi = min(0.0, voltage), max(0.0, voltage)

    history: list[float] = []
    extrema: list[tuple[float, float]] = []
    residual = 0.0
    it = 0
    while True:
        s = _apply(phi, wE, wW, wN, wS)
        res = np.where(unknown, (rhs + s) * inv_diag - phi, 0.0)
        residual = float(np.max(np.abs(res))) / vscale
        if it % check_every == 0 or residual <= tol:
            history.append(residual)
            extrema.append((float(phi[unknown].min()), float(phi[unknown].max())))
        if residual <= tol:
            break
        if it >= max_iter:
            raise NumericError(
                f"SOR did not converge in {max_iter} sweeps (residual {residual:.3e})",
                {"residual_history": history, "omega": omega},
            )
        for mask in colours:
            s = _apply(phi, wE, wW, wN, wS)
            gs = (s + rhs) * inv_diag
            upd = phi[mask] + omega * (gs[mask] - phi[mask])
            if project:
                # the solution lies in [lo, hi] (discrete maximum principle); over-relaxed
                # iterates are projected back so every snapshot respects it too
                np.clip(upd, lo, hi, out=upd)
            phi[mask] = upd
        it += 1

    energy_dimless = _discrete_energy(phi, unknown, inside, grid, cut, voltage)
    charge = float(np.sum(cut[unknown] * (voltage - phi[unknown])))
    induced = _induced_charge(phi, unknown, grid)
    if voltage != 0.0:
        cap = EPSILON0 * 2.0 * energy_dimless / voltage ** 2
        cap_q = EPSILON0 * charge / voltage
        cap_ind = EPSILON0 * induced / voltage
    else:
        cap = cap_q = cap_ind = 0.0
    return FdSolution(
        grid=grid,
        potential=phi,
        inside=inside,
        voltage=voltage,
        iterations=it,
        residual=residual,
        capacitance=cap,
        energy=EPSILON0 * energy_dimless,
        capacitance_charge=cap_q,
        capacitance_induced=cap_ind,
        omega=omega,
        residual_history=history,
        extrema_history=extrema,
    )


def _full_weights(grid: FdGrid):
    r, z = grid.r, grid.z
    rh = 0.5 * (r[1:] + r[:-1])
    r_lo = np.concatenate([[0.0], rh])
    r_hi = np.concatenate([rh, [r[-1]]])
    zh = 0.5 * (z[1:] + z[:-1])
    z_lo = np.concatenate([[0.0], zh])
    z_hi = np.concatenate([zh, [z[-1]]])
    wr = 2.0 * math.pi * rh[None, :] * (z_hi - z_lo)[:, None] / np.diff(r)[None, :]
    wz = (math.pi * (r_hi ** 2 - r_lo ** 2))[None, :] / np.diff(z)[:, None]
    return wr, wz


def _discrete_energy(phi, unknown, inside, grid: FdGrid, cut, voltage) -> float:
    """``(1/2) sum_edges w (dphi)**2`` over all edges touching an unknown node (eps0 = 1)."""
    wr, wz = _full_weights(grid)
    # radial edges (j, i)-(j, i+1); skip edges with a lens endpoint (handled as cut edges)
    a, b = unknown[:, :-1], unknown[:, 1:]
    ia, ib = inside[:, :-1], inside[:, 1:]
    use = (a | b) & ~ia & ~ib
    e = np.sum(wr[use] * (phi[:, 1:] - phi[:, :-1])[use] ** 2)
    a, b = unknown[:-1, :], unknown[1:, :]
    ia, ib = inside[:-1, :], inside[1:, :]
    use = (a | b) & ~ia & ~ib
    e += np.sum(wz[use] * (phi[1:, :] - phi[:-1, :])[use] ** 2)
    e += np.sum(cut[unknown] * (voltage - phi[unknown]) ** 2)
    return 0.5 * float(e)


def _induced_charge(phi, unknown, grid: FdGrid) -> float:
    """Flux from unknown nodes into the grounded plate and box walls (eps0 = 1)."""
    wr, wz = _full_weights(grid)
    q = 0.0
    q += float(np.sum((wz[0, :] * phi[1, :])[unknown[1, :]]))       # plate
    q += float(np.sum((wz[-1, :] * phi[-2, :])[unknown[-2, :]]))     # top wall
    q += float(np.sum((wr[:, -1] * phi[:, -2])[unknown[:, -2]]))     # side wall
    return q


def convergence_order(values: list[float]) -> float:
    """Observed order from three successively 2x-refined results."""
    c1, c2, c3 = values
    num, den = abs(c1 - c2), abs(c2 - c3)
    if den == 0.0:
        return math.inf
    return math.log(num / den, 2.0)


def write_solution(sol: FdSolution, csv_path, json_path, profile: SurfaceProfile) -> None:
    """Export the potential as ``r_m,z_m,potential_V`` rows plus a JSON sidecar."""
    R, Z = np.meshgrid(sol.grid.r, sol.grid.z)
    with open(csv_path, "w", newline="") as fh:
        fh.write("r_m,z_m,potential_V\n")
        for r, z, p in zip(R.ravel(), Z.ravel(), sol.potential.ravel()):
            fh.write(f"{r:.17g},{z:.17g},{p:.17g}\n")
    meta = {"schema_version": 1, "profile": profile_to_dict(profile), **sol.metadata()}
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sphere(R: float) -> PerfectSphere:
    """A true sphere (exact sagitta) for comparisons with the series oracle."""
    return PerfectSphere(R, "exact")
