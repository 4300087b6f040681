"""Command-line front end: canned scattering runs and convergence studies.

Three subcommands, all driven by a plain-text config file:

* ``run``          solve one scattering scenario, write density norms,
                   field histories at the observation points and optional
                   planar field snapshots as CSV.
* ``convergence``  ladder of runs against the spherical semi-analytic
                   reference, time (N doublings) or space (subdivision
                   levels) mode; writes the error/EOC table.
* ``reference``    the semi-analytic sphere solution alone.

Every artifact directory gets a manifest.json recording all resolved
configuration values (including applied defaults), derived quantities
and timings.  CSV files use a fixed column contract: header row, '.'
decimal separator, scientific notation with 17 significant digits; with
a fixed thread count reruns are bit-identical (timings live only in the
manifest).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .cq import CQScheme
from .mesh import make_icosphere, points_inside
from .scattering import ScatterRun, evaluate_field, solve_densities
from .sphere_reference import (
    downsample,
    reference_field_at,
    solve_reference_density,
)
from .transfer import sigma0


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for r in range(rows):
            fh.write(",".join(_fmt(float(col[r])) for col in columns) + "\n")


def _manifest(outdir, cfg: RunConfig, extra: dict) -> None:
    payload = {
        "package": "cqbem",
        "version": __version__,
        "config_source": cfg.source,
        "config": dict(sorted(cfg.raw.items())),
        "applied_defaults": dict(sorted(cfg.applied_defaults.items())),
    }
    payload.update(extra)
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _progress_printer(label, quiet):
    if quiet:
        return None

    def progress(done, total):
        if done == total or done % 8 == 0:
            print(f"  {label}: {done}/{total} frequencies", flush=True)
    return progress


def _snapshot_points(plan):
    axes = {"x": (1, 2, 0), "y": (0, 2, 1), "z": (0, 1, 2)}
    iu, iv, iw = axes[plan["axis"]]
    umin, umax, vmin, vmax = plan["extent"]
    n = plan["resolution"]
    us = np.linspace(umin, umax, n)
    vs = np.linspace(vmin, vmax, n)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    pts = np.empty((n * n, 3))
    pts[:, iu] = uu.ravel()
    pts[:, iv] = vv.ravel()
    pts[:, iw] = plan["offset"]
    return pts


def cmd_run(cfg: RunConfig, outdir: str, quiet: bool = False) -> int:
    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    mesh = cfg.mesh()
    spaces = cfg.spaces(mesh)
    spec = cfg.transfer_spec()
    scheme = cfg.scheme()
    wave = cfg.wave()
    quad = cfg.quadrature()
    run = ScatterRun(mesh, spaces, spec, scheme, wave, quad=quad,
                     cache_dir=os.environ.get("CQBEM_CACHE_DIR") or None)
    points = cfg.observation_points()
    times = scheme.times()

    if not quiet:
        print(f"mesh: {mesh.num_triangles} triangles, "
              f"{mesh.num_vertices} vertices, h = {mesh.meshwidth:.4f}")
        print(f"time grid: N = {scheme.N}, tau = {scheme.tau:.6f}, "
              f"BDF{scheme.p}, contour radius {scheme.lam:.6f}")

    t0 = time.perf_counter()
    densities = solve_densities(run, progress=_progress_printer("solve", quiet))
    timings["solve_densities_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    history = evaluate_field(densities, points, mesh, quad,
                             progress=_progress_printer("field", quiet))
    timings["evaluate_field_s"] = time.perf_counter() - t0

    os.makedirs(outdir, exist_ok=True)
    areas = mesh.areas
    m1 = spaces.mass_p1
    phi_l2 = np.sqrt(np.einsum("nt,t,nt->n", densities.phi, areas,
                               densities.phi))
    psi_l2 = np.sqrt(np.einsum("nv,nv->n", densities.psi,
                               densities.psi @ m1.toarray()))
    area = areas.sum()
    phi_mean = densities.phi @ areas / area
    psi_mean = (densities.psi @ (m1 @ np.ones(spaces.psi_dim))) / area
    write_csv(os.path.join(outdir, "densities.csv"),
              ["t", "phi_l2", "psi_l2", "phi_mean", "psi_mean"],
              [times, phi_l2, psi_l2, phi_mean, psi_mean])

    headers = ["t"] + [f"p{k}" for k in range(len(points))]
    write_csv(os.path.join(outdir, "field_points.csv"), headers,
              [times] + [history.values[:, k] for k in range(len(points))])

    snapshot_files = []
    plan = cfg.snapshot_plan()
    if plan is not None:
        pts = _snapshot_points(plan)
        inside = points_inside(mesh, pts)
        t0 = time.perf_counter()
        import warnings as _warnings
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")   # near-surface grid points expected
            snap_hist = evaluate_field(densities, pts, mesh, quad,
                                       progress=_progress_printer("snapshot", quiet))
        timings["snapshots_s"] = time.perf_counter() - t0
        for t_req in plan["times"]:
            n_idx = int(round(t_req / scheme.tau))
            n_idx = min(max(n_idx, 0), scheme.N)
            frame = snap_hist.values[n_idx].copy()
            frame[inside] = np.nan
            name = f"snapshot_t{times[n_idx]:.6f}.csv"
            write_csv(os.path.join(outdir, name), ["x", "y", "z", "u"],
                      [pts[:, 0], pts[:, 1], pts[:, 2], frame])
            snapshot_files.append(name)

    timings["total_s"] = time.perf_counter() - t_start
    curv = mesh.vertex_curvature
    hmax = float(np.max(curv)) if curv is not None else 0.0
    _manifest(outdir, cfg, {
        "command": "run",
        "derived": {
            "num_triangles": mesh.num_triangles,
            "num_vertices": mesh.num_vertices,
            "meshwidth": mesh.meshwidth,
            "tau": scheme.tau,
            "contour_radius": scheme.lam,
            "positivity_abscissa": sigma0(spec, hmax),
            "distinct_frequencies": scheme.num_distinct_frequencies(),
            "max_imag_residual": history.max_imag_residual,
            "near_surface_points": int(history.near_surface.sum()),
        },
        "artifacts": ["densities.csv", "field_points.csv"] + snapshot_files,
        "timings": timings,
    })
    if not quiet:
        print(f"wrote {outdir}/ in {timings['total_s']:.1f}s")
    return 0


def _reference_for(cfg: RunConfig, steps: int):
    mesh_kind = cfg.raw["mesh.kind"]
    wave = cfg.wave()
    if mesh_kind != "icosphere" or cfg.raw["wave.kind"] != "spherical":
        raise ConfigError(
            "reference solutions require mesh.kind = icosphere and "
            "wave.kind = spherical (spherically symmetric scenario)")
    if abs(cfg._float("mesh.radius") - 1.0) > 1e-12:
        raise ConfigError("reference solutions require the unit sphere")
    scheme = CQScheme(p=cfg._int("time.order"),
                      tau=cfg._float("time.final") / steps, N=steps)
    return solve_reference_density(cfg.transfer_spec(), scheme, wave=wave)


def cmd_reference(cfg: RunConfig, outdir: str, quiet: bool = False) -> int:
    t_start = time.perf_counter()
    steps = cfg._int("reference.steps")
    result = _reference_for(cfg, steps)
    points = cfg.observation_points()
    radii = np.linalg.norm(points, axis=1)
    os.makedirs(outdir, exist_ok=True)
    cols = [result.scheme.times(), result.psi]
    header = ["t", "psi_ref"]
    for k, r in enumerate(radii):
        cols.append(reference_field_at(result, float(r)))
        header.append(f"u_p{k}")
    write_csv(os.path.join(outdir, "reference.csv"), header, cols)
    _manifest(outdir, cfg, {
        "command": "reference",
        "derived": {
            "reference_steps": steps,
            "tau": result.scheme.tau,
            "observation_radii": [float(r) for r in radii],
        },
        "artifacts": ["reference.csv"],
        "timings": {"total_s": time.perf_counter() - t_start},
    })
    if not quiet:
        print(f"wrote {outdir}/reference.csv (N = {steps})")
    return 0


def cmd_convergence(cfg: RunConfig, outdir: str, mode: str, levels: int,
                    quiet: bool = False) -> int:
    if levels < 3:
        raise ConfigError("convergence studies need at least 3 levels for EOC")
    if cfg.raw["mesh.kind"] != "icosphere" or cfg.raw["wave.kind"] != "spherical":
        raise ConfigError(
            "convergence mode compares against the spherical reference; "
            "mesh.kind must be icosphere and wave.kind spherical")
    t_start = time.perf_counter()
    spec = cfg.transfer_spec()
    wave = cfg.wave()
    quad = cfg.quadrature()
    point = cfg.observation_points()[:1]
    radius = float(np.linalg.norm(point[0]))

    ref = _reference_for(cfg, cfg._int("reference.steps"))
    ref_field = reference_field_at(ref, radius)

    rows = []
    for level in range(levels):
        if mode == "time":
            n_steps = cfg._int("time.steps") * 2**level
            sub = cfg._int("mesh.subdivisions")
        elif mode == "space":
            n_steps = cfg._int("time.steps")
            sub = cfg._int("mesh.subdivisions") + level
        else:
            raise ConfigError("mode must be 'time' or 'space'")
        mesh = make_icosphere(sub, cfg._float("mesh.radius"))
        spaces = cfg.spaces(mesh)
        scheme = cfg.scheme(steps=n_steps)
        run = ScatterRun(mesh, spaces, spec, scheme, wave, quad=quad)
        if not quiet:
            print(f"level {level}: subdivisions={sub}, N={n_steps}")
        densities = solve_densities(run)
        hist = evaluate_field(densities, point, mesh, quad)
        target = downsample(ref_field, ref.scheme, scheme)
        err = float(np.max(np.abs(hist.values[:, 0] - target)))
        x = scheme.tau if mode == "time" else mesh.meshwidth
        rows.append((level, x, err))

    eocs = [np.nan]
    for k in range(1, len(rows)):
        num = np.log(rows[k - 1][2] / rows[k][2])
        den = np.log(rows[k - 1][1] / rows[k][1])
        eocs.append(num / den if den != 0 else np.nan)

    os.makedirs(outdir, exist_ok=True)
    write_csv(os.path.join(outdir, "convergence.csv"),
              ["level", "h_or_tau", "error", "eoc"],
              [np.array([r[0] for r in rows], dtype=float),
               np.array([r[1] for r in rows]),
               np.array([r[2] for r in rows]),
               np.array(eocs)])
    _manifest(outdir, cfg, {
        "command": "convergence",
        "derived": {"mode": mode, "levels": levels,
                    "observation_radius": radius},
        "artifacts": ["convergence.csv"],
        "timings": {"total_s": time.perf_counter() - t_start},
    })
    if not quiet:
        for (level, x, err), eoc in zip(rows, eocs):
            print(f"level {level}: h_or_tau={x:.5f} error={err:.4e} "
                  f"eoc={eoc:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqbem",
        description="time-domain acoustic scattering with impedance-type "
                    "boundary conditions (Galerkin BEM + convolution "
                    "quadrature)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default=None,
                       help="output directory (default: output.dir from config)")
        p.add_argument("--threads", type=int, default=None,
                       help="numba thread count (dense LAPACK threading "
                            "follows the BLAS environment variables)")
        p.add_argument("--quiet", action="store_true")

    common(sub.add_parser("run", help="solve one scattering scenario"))
    conv = sub.add_parser("convergence", help="error ladder vs the sphere reference")
    common(conv)
    conv.add_argument("--mode", choices=("time", "space"), required=True)
    conv.add_argument("--levels", type=int, default=3)
    common(sub.add_parser("reference", help="semi-analytic sphere solution"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        try:
            import numba
            numba.set_num_threads(max(1, args.threads))
        except Exception:
            pass
    try:
        cfg = RunConfig.from_file(args.config)
        outdir = args.out or cfg.output_dir()
        if args.command == "run":
            return cmd_run(cfg, outdir, quiet=args.quiet)
        if args.command == "reference":
            return cmd_reference(cfg, outdir, quiet=args.quiet)
        return cmd_convergence(cfg, outdir, mode=args.mode,
                               levels=args.levels, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
