"""
Command-line interface.

    lenscal profile       lens profile JSON and sampled heights
    lenscal curve         k(d) curves (``--figure fig2`` for the three comparison series)
    lenscal simulate      synthetic calibration sequence
    lenscal calibrate     parabola fits and contact-potential summary
    lenscal fit-exponent  power-law exponent of a curve
    lenscal oracle        exact series / finite-difference comparisons with the PFA
    lenscal scan          exponent scan over imperfection geometries

Every subcommand accepts ``--config file.json`` (keys are the long option
names with dashes replaced by underscores) and ``--out DIR``; explicit flags
override the config file.  The output directory defaults to
``$LENSCAL_OUTPUT_DIR`` or the current directory.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, io, oscillator, pfa
from .errors import ConfigError, DomainError, FitError, NumericError
from .geometry import (
    FIG1_GLOBAL_RADIUS,
    PerfectSphere,
    PiecewiseSpherical,
    breakpoints,
    height_at,
    make_fig1_profile,
    profile_from_dict,
    profile_to_dict,
)
from .oracle import fd, series

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

OUTPUT_ENV = "LENSCAL_OUTPUT_DIR"
TARGET_EXPONENTS = (-1.70, -1.77, -1.80, -1.54)

log = logging.getLogger("lenscal")


class UsageError(ConfigError):
    pass


# -- helpers --------------------------------------------------------------------------

def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _profile_from_args(args):
    """Resolve ``--profile`` (preset name or JSON path) plus ``--radius``/``--sagitta``."""
    spec = args.profile
    mode = args.sagitta
    if spec in (None, "fig1"):
        return make_fig1_profile(mode or "paraxial")
    if spec == "perfect":
        R = FIG1_GLOBAL_RADIUS if args.radius is None else args.radius
        return PerfectSphere(R, mode or "paraxial")
    obj = io.load_json(spec)
    prof = profile_from_dict(obj)
    if mode and mode != prof.sagitta_mode:
        if isinstance(prof, PerfectSphere):
            prof = PerfectSphere(prof.radius, mode)
        else:
            prof = PiecewiseSpherical(prof.segments, mode)
    return prof


def _params(args) -> pfa.OscillatorParams:
    return pfa.OscillatorParams(
        effective_mass=args.mass if args.mass is not None else pfa.DEFAULT_PARAMS.effective_mass,
        rest_frequency=args.nu0 if getattr(args, "nu0", None) is not None else pfa.DEFAULT_PARAMS.rest_frequency,
    )


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _grid(dmin, dmax, n, spacing="log") -> np.ndarray:
    if not (dmin > 0.0 and dmax > dmin):
        raise DomainError(f"need 0 < dmin < dmax (got dmin={dmin!r}, dmax={dmax!r})")
    if n < 2:
        raise DomainError("need at least 2 grid points")
    return np.geomspace(dmin, dmax, n) if spacing == "log" else np.linspace(dmin, dmax, n)


# -- commands -------------------------------------------------------------------------

def cmd_profile(args) -> int:
    prof = _profile_from_args(args)
    out = _out_dir(args)
    io.write_json(out / "profile.json", profile_to_dict(prof))
    radii = breakpoints(prof).radii
    if args.rmax is not None:
        rmax = args.rmax
    elif len(radii) > 1:
        rmax = 2.0 * radii[-1]
    else:
        rmax = 0.01 * prof.global_radius
    r = np.linspace(0.0, rmax, args.samples)
    z = np.atleast_1d(height_at(prof, r))
    with open(out / "profile_heights.csv", "w") as fh:
        fh.write("r_m,z_m\n")
        for a, b in zip(r, z):
            fh.write(f"{io.fmt(a)},{io.fmt(b)}\n")
    heights = [s.end_height for s in prof.segments if s.bounded]
    print(f"profile: {len(prof.segments)} segment(s), boundary heights {heights}, breakpoints {list(radii)}")
    return EXIT_OK


def cmd_curve(args) -> int:
    out = _out_dir(args)
    params = _params(args)
    if args.figure == "fig2":
        d = _grid(args.dmin or 20e-9, args.dmax or 3e-6, args.n or 200)
        norm = args.normalization or "n0"
        R = FIG1_GLOBAL_RADIUS
        d0 = args.d0
        curves = {
            "perfect": pfa.sample_curve(PerfectSphere(R), d, norm, params),
            "fig1": pfa.sample_curve(make_fig1_profile(), d, norm, params),
            "reference_1p7": pfa.sample_reference_curve(d, R, d0, norm, params),
        }
        for name, c in curves.items():
            io.write_curve_csv(out / f"fig2_{name}.csv", c)
        ds = io.FigureDataset(
            title="Normalised frequency-shift coefficient",
            x_label="d_m",
            y_label="k/N0" if norm == "n0" else "k",
            series=tuple(io.FigureSeries(n, c.d, c.values) for n, c in curves.items()),
            notes={"normalization": norm, "d0_m": d0, "global_radius_m": R},
        )
        io.write_json(out / "fig2.json", ds.to_dict())
        kp = pfa.k_el_perfect(d0, R, params)
        km = pfa.k_el_piecewise(d0, make_fig1_profile(), params)
        print(f"fig2: k_mod/k_el at d0={d0:g} m = {km / kp:.6f}")
        return EXIT_OK
    _require(args, "dmin", "dmax")
    prof = _profile_from_args(args)
    d = _grid(args.dmin, args.dmax, args.n or 200, args.spacing)
    c = pfa.sample_curve(prof, d, args.normalization or "si", params, args.method)
    io.write_curve_csv(out / (args.name + ".csv"), c)
    print(f"curve: {d.size} points -> {out / (args.name + '.csv')}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    campaign = args.campaign
    if campaign is None:
        campaign = "custom" if (args.dmin is not None or args.dmax is not None) else "fig3"
    if campaign == "fig3":
        camp = oscillator.fig3_campaign()
        prof, params, vc, d_grid, v_grid = camp.profile, camp.params, camp.vc, camp.d_grid, camp.v_grid
        if args.mass is not None or args.nu0 is not None:
            params = pfa.OscillatorParams(args.mass or params.effective_mass, args.nu0 or params.rest_frequency)
        if args.vc is not None:
            vc = args.vc
    else:
        prof = _profile_from_args(args)
        params = _params(args)
        _require(args, "dmin", "dmax")
        vc = 0.0 if args.vc is None else args.vc
        d_grid = _grid(args.dmin, args.dmax, args.n_distances or 50, args.spacing)
        v_grid = None
    if args.vmin is not None or args.vmax is not None or args.nv is not None or v_grid is None:
        vmin = -0.25 if args.vmin is None else args.vmin
        vmax = 0.25 if args.vmax is None else args.vmax
        v_grid = np.linspace(vmin, vmax, args.nv or 9)
    if args.noise is not None:
        sigma = args.noise
    elif args.target_sem is not None or campaign == "fig3":
        target = args.target_sem if args.target_sem is not None else oscillator.FIG3_VC_SEM
        sigma = oscillator.sigma_for_target_sem(prof, params, vc, d_grid, v_grid, target)
    else:
        sigma = 0.0
    noise = oscillator.NoiseSpec(
        frequency_noise_sigma=sigma,
        vc_drift=args.drift,
        vc_drift_ref=args.drift_ref,
        creep_amplitude=args.creep_amplitude,
        creep_exponent=args.creep_exponent,
        creep_ref=args.creep_ref,
    )
    seq = oscillator.generate_sequence(prof, params, vc, d_grid, v_grid, noise, args.seed, args.seq_id)
    io.write_sequence_csv(out / "sequence.csv", [seq])
    meta = dict(seq.metadata)
    meta["seq_id"] = args.seq_id
    meta["campaign"] = campaign
    if args.blind:
        for key in ("true_contact_potential_volt", "noise", "profile", "vc_drift_ref_m"):
            meta.pop(key, None)
        meta["blind"] = True
    io.write_json(out / "sequence.json", meta)
    print(f"simulate: {len(seq)} records at {d_grid.size} distances, sigma={sigma:.6g} Hz, seed={args.seed}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    _require(args, "input")
    out = _out_dir(args)
    seqs = io.read_sequence_csv(args.input)
    fits_out, summaries = [], []
    for seq in seqs:
        fits = analysis.fit_sequence(seq)
        fits_out.append({"seq_id": seq.seq_id, "fits": [f.to_dict() for f in fits]})
        s = analysis.vc_independence(fits, weighted=args.weighted)
        summaries.append({"seq_id": seq.seq_id, **s.to_dict()})
        verdict = "independent of separation" if s.independent else "SEPARATION DEPENDENT"
        print(f"seq {seq.seq_id}: {s.summary_line()}; trend {s.trend * 1e3:.3f} ± "
              f"{s.trend_stderr * 1e3:.3f} mV/decade; {verdict}")
    io.write_json(out / "fits.json", {"sequences": fits_out})
    io.write_json(out / "summary.json", {"sequences": summaries})
    return EXIT_OK


def cmd_fit_exponent(args) -> int:
    _require(args, "dmin", "dmax")
    out = _out_dir(args)
    window = (args.dmin, args.dmax)
    if args.curve:
        c = io.read_curve_csv(args.curve)
        d, k = c.d, c.values
    else:
        d = analysis.window_grid(window, args.n)
        if args.profile == "reference":
            R = FIG1_GLOBAL_RADIUS if args.radius is None else args.radius
            k = np.asarray(pfa.k_el_reference_17(d, R, args.d0))
        else:
            k = np.asarray(pfa.k_el(d, _profile_from_args(args)))
    res = analysis.fit_exponent(d, k, window, args.method)
    io.write_json(out / "exponent.json", res.to_dict())
    print(f"alpha = {res.alpha:.4f} ± {res.alpha_stderr:.4f} over [{window[0]:g}, {window[1]:g}] m "
          f"({res.n_points} points, r^2={res.r_squared:.6f})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    out = _out_dir(args)
    if args.kind == "series":
        R = 1.0 if args.radius is None else args.radius
        ratios = args.ratio or list(np.geomspace(1e-5, 1e-1, 9))
        tol = 1e-12 if args.tol is None else args.tol
        v = pfa.VoltageState(1.0, 0.0)
        with open(out / "oracle_series.csv", "w") as fh:
            fh.write("d_over_R,d_m,capacitance_F,capacitance_over_4pi_eps0_R,terms_used,"
                     "force_gradient_exact_N_per_m,force_gradient_pfa_N_per_m,ratio\n")
            for x in ratios:
                d = x * R
                c = series.exact_capacitance(R, d, tol)
                iso = 4.0 * math.pi * pfa.EPSILON0 * R
                try:
                    fe = series.exact_force_gradient(R, d, v, tol)[0]
                    fp = series.pfa_force_gradient_perfect(R, d, v)
                    vals = (fe, fp, fe / fp)
                except NumericError:
                    vals = (math.nan,) * 3
                fh.write(",".join([io.fmt(x), io.fmt(d), io.fmt(c.capacitance), io.fmt(c.capacitance / iso),
                                   str(c.terms_used), *map(io.fmt, vals)]) + "\n")
                print(f"d/R={x:.3g}: C/(4 pi eps0 R)={c.capacitance / iso:.9f}  F'_exact/F'_PFA={vals[2]:.9f}")
        return EXIT_OK

    # finite differences
    if args.profile in (None, "perfect"):
        R = 1.0 if args.radius is None else args.radius
        prof = fd.sphere(R)
    else:
        prof = _profile_from_args(args)
    ratios = args.ratio or [0.1]
    low = [x for x in ratios if x < fd.FEASIBLE_GAP_RATIO]
    if low:
        raise UsageError(
            f"d/R={low[0]:g} is below the finite-difference feasibility bound {fd.FEASIBLE_GAP_RATIO}; "
            "use 'oracle series' for small gaps or scale the geometry"
        )
    tol = 1e-9 if args.tol is None else args.tol
    with open(out / "oracle_fd.csv", "w") as fh:
        fh.write("d_over_R,d_m,capacitance_fd_F,capacitance_series_F,ratio,iterations,residual,n_r,n_z\n")
        for x in ratios:
            d = x * prof.global_radius
            grid = fd.make_grid(prof, d, gap_nodes=args.gap_nodes, refine=args.refine)
            sol = fd.fd_solve(prof, d, grid, tol=tol)
            if isinstance(prof, PerfectSphere) and prof.sagitta_mode == "exact":
                cs = series.exact_capacitance(prof.radius, d).capacitance
                ratio = sol.capacitance / cs
            else:
                cs = ratio = math.nan
            fh.write(",".join([io.fmt(x), io.fmt(d), io.fmt(sol.capacitance), io.fmt(cs), io.fmt(ratio),
                               str(sol.iterations), io.fmt(sol.residual),
                               str(grid.r.size), str(grid.z.size)]) + "\n")
            if args.export:
                tag = f"{x:g}".replace(".", "p")
                fd.write_solution(sol, out / f"fd_potential_{tag}.csv", out / f"fd_potential_{tag}.json", prof)
            print(f"d/R={x:g}: C_fd={sol.capacitance:.9e} F  C_series={cs:.9e} F  ratio={ratio:.6f}  "
                  f"({sol.iterations} sweeps, grid {grid.r.size}x{grid.z.size})")
    return EXIT_OK


def cmd_scan(args) -> int:
    out = _out_dir(args)
    n = args.n
    axes = list(analysis.default_scan_axes(n))
    for i, name in enumerate(("rcd", "h", "rab_factor", "H")):
        rng = getattr(args, name)
        if rng is not None:
            lo, hi = rng
            axes[i] = np.geomspace(lo, hi, n) if name in ("rcd", "h") else np.linspace(lo, hi, n)
    window = tuple(args.window) if args.window else analysis.DEFAULT_WINDOW
    rows = analysis.scan_profiles(*axes, window=window)
    with open(out / "scan.csv", "w") as fh:
        fh.write("bubble_radius_m,bubble_height_m,sector_radius_factor,sector_height_m,alpha,alpha_stderr,r_squared\n")
        for r in rows:
            fh.write(",".join(io.fmt(v) for v in r.to_dict().values()) + "\n")
    alphas = np.array([r.alpha for r in rows])
    print(f"scan: {len(rows)} profiles, alpha in [{alphas.min():.4f}, {alphas.max():.4f}]")
    for t in TARGET_EXPONENTS:
        hits = int(np.sum(np.abs(alphas - t) <= 0.05))
        print(f"  within 0.05 of {t:+.2f}: {hits}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")


def _add_profile_opts(p: argparse.ArgumentParser, default: str | None = "fig1") -> None:
    p.add_argument("--profile", "--preset", dest="profile", default=default,
                   help="preset name (fig1, perfect) or path to a profile JSON file")
    p.add_argument("--radius", type=float, help="radius in m for the perfect preset")
    p.add_argument("--sagitta", choices=("paraxial", "exact"))


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="lenscal", description="Sphere-plane electrostatic calibration toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("profile", help="write a lens profile and its sampled heights")
    _add_common(p)
    _add_profile_opts(p)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--rmax", type=float)
    p.set_defaults(func=cmd_profile)
    subs["profile"] = p

    p = sub.add_parser("curve", help="sample k(d)")
    _add_common(p)
    _add_profile_opts(p)
    p.add_argument("--figure", choices=("fig2",))
    p.add_argument("--dmin", type=float)
    p.add_argument("--dmax", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--normalization", choices=pfa.NORMALIZATIONS)
    p.add_argument("--method", choices=("auto", "closed_form", "quadrature"), default="auto")
    p.add_argument("--mass", type=float, help="effective mass in kg")
    p.add_argument("--d0", type=float, default=30e-9)
    p.add_argument("--name", default="curve")
    p.set_defaults(func=cmd_curve)
    subs["curve"] = p

    p = sub.add_parser("simulate", help="generate a synthetic calibration sequence")
    _add_common(p)
    _add_profile_opts(p)
    p.add_argument("--campaign", choices=("fig3", "custom"),
                   help="fig3 (default unless --dmin/--dmax given) or custom")
    p.add_argument("--vc", type=float, help="true contact potential in V")
    p.add_argument("--dmin", type=float)
    p.add_argument("--dmax", type=float)
    p.add_argument("--n-distances", type=int)
    p.add_argument("--spacing", choices=("log", "linear"), default="linear")
    p.add_argument("--vmin", type=float)
    p.add_argument("--vmax", type=float)
    p.add_argument("--nv", type=int)
    p.add_argument("--mass", type=float)
    p.add_argument("--nu0", type=float)
    p.add_argument("--noise", type=float, help="frequency noise sigma in Hz")
    p.add_argument("--target-sem", type=float, help="derive sigma from a target SEM of V_c (V)")
    p.add_argument("--drift", type=float, help="contact-potential drift in V per decade of distance")
    p.add_argument("--drift-ref", type=float)
    p.add_argument("--creep-amplitude", type=float)
    p.add_argument("--creep-exponent", type=float, default=1.0)
    p.add_argument("--creep-ref", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seq-id", type=int, default=0)
    p.add_argument("--blind", action="store_true", help="omit ground truth from the sidecar")
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("calibrate", help="fit parabolas and summarise V_c")
    _add_common(p)
    p.add_argument("--input", help="sequence CSV")
    p.add_argument("--weighted", action="store_true")
    p.set_defaults(func=cmd_calibrate)
    subs["calibrate"] = p

    p = sub.add_parser("fit-exponent", help="power-law exponent of a curve")
    _add_common(p)
    _add_profile_opts(p)
    p.add_argument("--curve", help="curve CSV; otherwise the profile is sampled")
    p.add_argument("--dmin", type=float)
    p.add_argument("--dmax", type=float)
    p.add_argument("--n", type=int, default=analysis.WINDOW_POINTS)
    p.add_argument("--d0", type=float, default=30e-9)
    p.add_argument("--method", choices=("loglog_ols", "nonlinear"), default="loglog_ols")
    p.set_defaults(func=cmd_fit_exponent)
    subs["fit-exponent"] = p

    p = sub.add_parser("oracle", help="compare the PFA with exact electrostatics")
    _add_common(p)
    p.add_argument("kind", choices=("series", "fd"))
    _add_profile_opts(p, default=None)
    p.add_argument("--ratio", type=float, nargs="+", help="gap over radius values")
    p.add_argument("--tol", type=float, help="series term tolerance (1e-12) or FD residual tolerance (1e-9)")
    p.add_argument("--gap-nodes", type=int, default=20)
    p.add_argument("--refine", type=int, default=0)
    p.add_argument("--export", action="store_true", help="write the FD potential field")
    p.set_defaults(func=cmd_oracle)
    subs["oracle"] = p

    p = sub.add_parser("scan", help="exponent scan over imperfection parameters")
    _add_common(p)
    p.add_argument("--n", type=int, default=8, help="grid points per axis")
    p.add_argument("--rcd", type=float, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--h", type=float, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--rab-factor", type=float, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--H", type=float, nargs=2, metavar=("MIN", "MAX"), dest="H")
    p.add_argument("--window", type=float, nargs=2, metavar=("DMIN", "DMAX"))
    p.set_defaults(func=cmd_scan)
    subs["scan"] = p
    return parser, subs


def _apply_config(argv, parser, subs):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = io.load_json(args.config)
    if not isinstance(cfg, dict):
        raise UsageError(f"{args.config}: expected a JSON object")
    cfg.pop("schema_version", None)
    sp = subs[args.command]
    known = {a.dest for a in sp._actions} - {"help", "config", "func"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"{args.config}: unknown key(s) for '{args.command}': {', '.join(unknown)}")
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _apply_config(argv, parser, subs)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"lenscal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, FitError) as exc:
        print(f"lenscal: numerical failure: {exc}", file=sys.stderr)
        if isinstance(exc, NumericError) and exc.diagnostics:
            print(f"lenscal: diagnostics: {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
