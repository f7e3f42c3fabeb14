"""Command-line entry points: simulate, diagnose, toy-ode, verify.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as config_mod
from . import diagnostics, initial_data, snapshots, solver, sym3, toy_ode, verify
from .exceptions import ConfigError, NumericalFailureError, StrainflowError
from .spectral import Grid

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems map to exit code 1
        raise ConfigError(message)


_CONFIG_FLAGS = ("n", "viscosity", "dt", "t_end", "dealias", "record_every",
                 "initial_data", "seed", "max_wavenumber", "amplitude",
                 "initial_file", "force", "q_list", "csv", "snapshot_dir",
                 "snapshot_every", "adaptive_cfl")


def _add_config_flags(parser):
    parser.add_argument("--config", metavar="PATH", help="key = value config file")
    for key in _CONFIG_FLAGS:
        parser.add_argument("--" + key.replace("_", "-"), dest=f"cfg_{key}",
                            metavar="VALUE", help=f"override the {key} setting")


def _build_config(args) -> config_mod.RunConfig:
    overrides = {key: getattr(args, f"cfg_{key}") for key in _CONFIG_FLAGS}
    return config_mod.build_config(args.config, overrides)


def _write_snapshots(grid, state, run_config, final=False):
    if run_config.snapshot_dir is None:
        return
    os.makedirs(run_config.snapshot_dir, exist_ok=True)
    name = "state_final.snap" if final else f"state_{state.step_count:08d}.snap"
    path = os.path.join(run_config.snapshot_dir, name)
    snapshots.save_snapshot(path, "velocity", state.t, run_config.viscosity,
                            grid.ifft(state.u_hat))


def cmd_simulate(args) -> int:
    run_config = _build_config(args)
    grid = Grid(run_config.n)
    u0 = initial_data.generate_initial(
        grid, run_config.initial_data, seed=run_config.seed,
        max_wavenumber=run_config.max_wavenumber, amplitude=run_config.amplitude,
        initial_file=run_config.initial_file)
    force = solver.make_force(grid, run_config.force)
    collector = diagnostics.RecordCollector(grid, q_list=run_config.q_list,
                                            force=force,
                                            viscosity=run_config.viscosity)

    def on_record(state):
        collector(state)
        if run_config.snapshot_every and state.step_count % run_config.snapshot_every == 0:
            _write_snapshots(grid, state, run_config)

    solver_config = run_config.solver_config()
    try:
        result = solver.run(solver_config, u0, grid=grid, on_record=on_record)
    except NumericalFailureError as exc:
        records = collector.finalize()
        if records:
            diagnostics.write_csv(records, run_config.csv)
        last_t = exc.last_state.t if exc.last_state is not None else float("nan")
        print(f"numerical failure: {exc} (last stable time t={last_t:.9g})",
              file=sys.stderr)
        return EXIT_NUMERICAL
    records = collector.finalize()
    diagnostics.write_csv(records, run_config.csv)
    _write_snapshots(grid, result.final_state, run_config, final=True)
    print(f"simulated to t={result.final_state.t:.9g} "
          f"({result.final_state.step_count} steps, {len(records)} records) "
          f"-> {run_config.csv}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    run_config = _build_config(args)
    snaps = [snapshots.load_snapshot(path) for path in args.snapshots]
    if not snaps:
        raise ConfigError("diagnose needs at least one snapshot")
    n = snaps[0].n
    for snap, path in zip(snaps, args.snapshots):
        if snap.kind != "velocity":
            raise ConfigError(f"{path}: diagnose expects velocity snapshots")
        if snap.n != n:
            raise ConfigError(f"{path}: mixed grid sizes {snap.n} vs {n}")
    snaps.sort(key=lambda s: s.time)
    grid = Grid(n)
    collector = diagnostics.RecordCollector(grid, q_list=run_config.q_list,
                                            viscosity=snaps[0].viscosity)
    for index, snap in enumerate(snaps):
        u_hat = grid.fft(snap.data)
        u_hat[:, 0, 0, 0] = 0.0
        collector(solver.SolverState(u_hat, snap.time, index))
    records = collector.finalize()
    diagnostics.write_csv(records, run_config.csv)
    print(f"diagnosed {len(records)} snapshots -> {run_config.csv}")
    return EXIT_OK


def _parse_matrix(text) -> sym3.TraceFreeSym3:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 5:
        raise ConfigError("matrix needs 5 entries: m11,m22,m12,m13,m23")
    return sym3.TraceFreeSym3(*parts)


def _parse_range(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("range needs min,max,count")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    return np.linspace(lo, hi, count)


def cmd_toy_ode(args) -> int:
    if args.sweep:
        cells = toy_ode.phase_sweep(_parse_range(args.sweep_lambda3),
                                    _parse_range(args.sweep_r),
                                    t_end=args.sweep_t_end,
                                    blowup_threshold=args.blowup_threshold)
        toy_ode.write_sweep_csv(cells, args.sweep_out)
        blown = sum(c.outcome == "blew_up" for c in cells)
        print(f"sweep: {blown}/{len(cells)} cells blew up -> {args.sweep_out}")
        return EXIT_OK
    if args.matrix is not None:
        state = toy_ode.ToyState.from_matrix(_parse_matrix(args.matrix))
    elif args.lambda3 is not None and args.r is not None:
        state = toy_ode.ToyState.from_reduced(args.lambda3, args.r)
    else:
        raise ConfigError("toy-ode needs --matrix or both --lambda3 and --r")
    result = toy_ode.integrate(state, t_end=args.t_end,
                               blowup_threshold=args.blowup_threshold)
    if args.trajectory_out:
        toy_ode.write_trajectory_csv(result.trajectory, args.trajectory_out)
    if result.outcome == "blew_up":
        print(f"blew_up: T_est = {result.t_est:.12g} "
              f"(terminal r = {result.trajectory.r[-1]:.9g})")
    else:
        print(f"{result.outcome}: lambda3({result.trajectory.t[-1]:.6g}) = "
              f"{result.trajectory.lambda3[-1]:.12g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify.run_checks(n=args.n, dt=args.dt, t_end=args.t_end)
    print(verify.format_table(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def build_parser() -> _Parser:
    parser = _Parser(prog="strainflow",
                     description="Periodic-box flow solver and strain diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate a configured run",
                           description="Integrate and write diagnostics CSV/snapshots.")
    _add_config_flags(p_sim)
    p_sim.set_defaults(fn=cmd_simulate)

    p_diag = sub.add_parser("diagnose", help="diagnostics over snapshot files")
    _add_config_flags(p_diag)
    p_diag.add_argument("snapshots", nargs="+", metavar="SNAPSHOT")
    p_diag.set_defaults(fn=cmd_diagnose)

    p_toy = sub.add_parser("toy-ode", help="integrate the blow-up toy model")
    p_toy.add_argument("--lambda3", type=float, help="reduced initial lambda3 > 0")
    p_toy.add_argument("--r", type=float, help="reduced initial ratio in [1/2, 2]")
    p_toy.add_argument("--matrix", metavar="M11,M22,M12,M13,M23",
                       help="initial matrix entries (use --matrix=-2,1,0,0,0 "
                            "when the first entry is negative)")
    p_toy.add_argument("--t-end", type=float, default=10.0)
    p_toy.add_argument("--blowup-threshold", type=float,
                       default=toy_ode.DEFAULT_BLOWUP_THRESHOLD)
    p_toy.add_argument("--trajectory-out", metavar="CSV")
    p_toy.add_argument("--sweep", action="store_true", help="run an outcome sweep")
    p_toy.add_argument("--sweep-lambda3", default="0.1,10,20", metavar="MIN,MAX,COUNT")
    p_toy.add_argument("--sweep-r", default="0.51,2,20", metavar="MIN,MAX,COUNT")
    p_toy.add_argument("--sweep-t-end", type=float, default=1e7)
    p_toy.add_argument("--sweep-out", default="toy_sweep.csv", metavar="CSV")
    p_toy.set_defaults(fn=cmd_toy_ode)

    p_ver = sub.add_parser("verify", help="run the built-in check suite")
    p_ver.add_argument("--n", type=int, default=32)
    p_ver.add_argument("--dt", type=float, default=1e-3)
    p_ver.add_argument("--t-end", type=float, default=1.0)
    p_ver.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StrainflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
