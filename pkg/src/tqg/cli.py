"""Command-line interface: run, sweep, dispersion and check subcommands."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .elliptic import SolverSettings, StreamSolver
from .harness import SimConfig, alpha_sweep, parse_config, run
from .mesh import build_periodic_mesh
from .spaces import FemSpace
from .stability import DispersionParams, growth_rate_scan, write_scan_csv
from .transport import lax_friedrichs


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="configuration file (key = value)")
    p.add_argument("--n", type=int, help="cells per side")
    p.add_argument("--degree", type=int, help="polynomial degree")
    p.add_argument("--alpha", type=float, help="regularisation parameter")
    p.add_argument("--dt", type=float, help="time increment")
    p.add_argument("--steps", type=int, help="number of time steps")
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    p.add_argument("--diag-every", type=int, dest="diag_every")
    p.add_argument("--elliptic-tol", type=float, dest="elliptic_tol")
    p.add_argument("--preset", type=str, help="initial-condition preset name")
    p.add_argument("--buoyancy", type=str, help="buoyancy expression override")
    p.add_argument("--pv", type=str, help="potential-vorticity expression override")
    p.add_argument("--bathymetry", type=str, help="bathymetry expression override")
    p.add_argument("--rotation", type=str, help="rotation expression override")


def _config_from_args(args) -> SimConfig:
    cfg = parse_config(args.config.read_text()) if args.config else SimConfig()
    overrides = {}
    for key in ("n", "degree", "alpha", "dt", "steps", "snapshot_every",
                "diag_every", "elliptic_tol", "preset", "buoyancy", "pv",
                "bathymetry", "rotation"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    return dataclasses.replace(cfg, **overrides)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = run(cfg, quiet=False)
    rec = result.records[-1]
    print(f"completed {cfg.steps} steps to t={result.final_state.t:.4f}")
    print(f"energy={rec.energy:.9e}  mass_b={rec.mass_b:.9e}  "
          f"mass_omega={rec.mass_omega:.9e}")
    print(f"output in {result.out_dir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    alphas = [float(a) for a in args.alphas.split(",")]
    checkpoints = [float(t) for t in args.checkpoints.split(",")]
    result = alpha_sweep(cfg, alphas, checkpoints)
    print(f"report: {result.report_path}")
    for t in result.checkpoints:
        s = result.slopes[t]
        if s is None:
            print(f"  T={t:g}: slope undefined (single alpha)")
        else:
            print(f"  T={t:g}: slope e_b={s[0]:.3f}  slope e_omega={s[1]:.3f}")
    return 0


def cmd_dispersion(args) -> int:
    if args.params:
        text = Path(args.params).read_text()
        kv = dict(
            line.split("=", 1)
            for line in (l.split("#")[0].strip() for l in text.splitlines())
            if line
        )
        params = DispersionParams(
            U=float(kv.get("U", 1.0)), beta=float(kv.get("beta", 0.0)),
            B=float(kv.get("B", 1.0)), H=float(kv.get("H", 0.0)),
        )
    else:
        params = DispersionParams(U=args.u, beta=args.beta, B=args.b_grad,
                                  H=args.h_grad)
    alphas = [float(a) for a in args.alphas.split(",")]
    kgrid = np.linspace(args.k_min, args.k_max, args.k_points)
    scan = growth_rate_scan(params, alphas, kgrid)
    write_scan_csv(scan, args.out)
    print(f"wrote {args.out}")
    for alpha in alphas:
        print(f"  alpha={alpha:g}: |k|_max = {scan.k_max(alpha):.4f}")
    return 0


def cmd_check(args) -> int:
    """Manufactured-solution self-test plus flux-axiom spot checks."""
    lam = 8.0 * np.pi**2
    ok = True
    for alpha in (0.0, 1.0 / 64**2):
        errs = []
        for n in (8, 16, 32):
            space = FemSpace(build_periodic_mesh(n), args.degree)
            solver = StreamSolver(space, alpha, SolverSettings(rtol=1e-12))
            omega = space.project_dg(
                lambda x, y: -(lam + 1) * (1 + alpha * lam)
                * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
            )
            zero = space.interpolate_cg(lambda x, y: 0.0 * x)
            _, psi = solver.solve(omega, zero)
            exact = space.project_dg(
                lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
            )
            diff = space.cg_to_dg(psi)
            diff.coeffs -= exact.coeffs
            errs.append(space.norm_l2(diff))
        rate = np.polyfit(np.log([8, 16, 32]), np.log(errs), 1)[0]
        passed = -rate >= args.degree + 0.9
        ok &= passed
        print(f"helmholtz alpha={alpha:.3e}: L2 rate {-rate:.2f} "
              f"({'ok' if passed else 'FAIL'})")

    rng = np.random.default_rng(0)
    vm, vp, un = rng.standard_normal((3, 1000))
    cons = np.max(np.abs(lax_friedrichs(vm, vm, un) - vm * un))
    anti = np.max(np.abs(lax_friedrichs(vp, vm, un)
                         + lax_friedrichs(vm, vp, -un)))
    flux_ok = cons < 1e-14 and anti < 1e-14
    ok &= flux_ok
    print(f"flux axioms: consistency {cons:.1e}, conservativity {anti:.1e} "
          f"({'ok' if flux_ok else 'FAIL'})")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tqg",
        description="Finite-element solver for the thermal quasi-geostrophic "
                    "model and its alpha-regularised variant",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="advance a single simulation")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="alpha-convergence study")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--alphas", type=str, required=True,
                         help="comma-separated alpha list, must include 0")
    p_sweep.add_argument("--checkpoints", type=str, required=True,
                         help="comma-separated checkpoint times")
    p_sweep.set_defaults(func=cmd_sweep)

    p_disp = sub.add_parser("dispersion", help="thermal Rossby-wave scan")
    p_disp.add_argument("--params", type=str, help="parameter file U/beta/B/H")
    p_disp.add_argument("--u", type=float, default=1.0)
    p_disp.add_argument("--beta", type=float, default=0.0)
    p_disp.add_argument("--b-grad", type=float, default=1.0, dest="b_grad")
    p_disp.add_argument("--h-grad", type=float, default=0.0, dest="h_grad")
    p_disp.add_argument("--alphas", type=str, default="0,0.00390625")
    p_disp.add_argument("--k-min", type=float, default=0.0, dest="k_min")
    p_disp.add_argument("--k-max", type=float, default=32.0, dest="k_max")
    p_disp.add_argument("--k-points", type=int, default=200, dest="k_points")
    p_disp.add_argument("--out", type=str, default="dispersion.csv")
    p_disp.set_defaults(func=cmd_dispersion)

    p_check = sub.add_parser("check", help="manufactured-solution self-test")
    p_check.add_argument("--degree", type=int, default=1)
    p_check.set_defaults(func=cmd_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
