"""Command-line surface tying the modules into reproducible experiments.

Subcommands: simulate, simulate-incompressible, decompose, sweep, verify,
probe.  Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 certificate failure.  Diagnostics go to stderr; result files go to the
configured output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import csvio, presets
from .basis import VelocityCoeffs, build_basis, norms
from .compressible import (
    CompressibleParams,
    InvalidParams,
    StepFailure,
    energy_ledger,
    simulate_compressible,
)
from .config import (
    ConfigError,
    ExpressionError,
    RunConfig,
    parse_config,
    realize_scalar_field,
    realize_vector_field,
)
from .incompressible import EmptyKernel, nullspace_basis, simulate_incompressible
from .inequalities import GridMismatch, ScalarTrajectory, verify_mixed
from .limits import SweepConfig, sweep_alpha
from .operators import assemble, leray_project

__all__ = ["run_cli", "main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CERTIFICATE = 3


def _err(message: str) -> None:
    print(f"complim: {message}", file=sys.stderr)


def _load_config(path: str) -> RunConfig:
    with open(path) as handle:
        return parse_config(handle.read())


def _resolve_velocity(value: str, spec, operator_set):
    if value in presets.VELOCITY_PRESETS:
        return presets.velocity_preset(value, spec, operator_set)
    return realize_vector_field(value)


def _resolve_pressure(value: str, spec, operator_set, cfg: RunConfig):
    if value in presets.PRESSURE_PRESETS:
        f = realize_vector_field(cfg.f) if cfg.f not in presets.VELOCITY_PRESETS else None
        return presets.pressure_preset(
            value, spec, operator_set, f=f, rho0=cfg.rho0, mu=cfg.mu
        )
    return realize_scalar_field(value)


def _build_params(cfg: RunConfig, spec, operator_set) -> CompressibleParams:
    f = realize_vector_field(cfg.f)
    s = realize_vector_field(cfg.s, cfg.s_time)
    if s is None and f is not None:
        # homogeneous problem: the momentum source is rho0 * f
        s = realize_vector_field(cfg.f)
        s = dataclasses.replace(
            s, spatial=lambda x, y, _inner=s.spatial: cfg.rho0 * np.asarray(_inner(x, y))
        )
    return CompressibleParams(
        rho0=cfg.rho0,
        mu=cfg.mu,
        eta=cfg.eta,
        alpha=cfg.alpha,
        T=cfg.T,
        dt=cfg.dt,
        f=f,
        sigma=realize_scalar_field(cfg.sigma, cfg.sigma_time),
        s=s,
        u0=_resolve_velocity(cfg.u0, spec, operator_set),
        p0=_resolve_pressure(cfg.p0, spec, operator_set, cfg),
    )


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    spec = build_basis(cfg.n_u, cfg.n_p)
    operator_set = assemble(spec)
    params = _build_params(cfg, spec, operator_set)
    traj = simulate_compressible(spec, operator_set, params)
    ledger = energy_ledger(operator_set, params, traj)
    out = cfg.directory
    csvio.write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj, ledger.per_step)
    csvio.write_csv(
        os.path.join(out, "ledger.csv"),
        ["t_mid", "per_step", "cumulative", "dissipation", "work"],
        zip(
            ledger.interval_midpoints,
            ledger.per_step,
            ledger.cumulative,
            ledger.dissipation,
            ledger.work,
        ),
    )
    if cfg.dump_coefficients:
        csvio.write_coefficients_csv(os.path.join(out, "coefficients.csv"), traj)
    print(f"wrote {out}/trajectory.csv ({traj.n_steps} steps, dt={traj.dt:.6g})")
    return EXIT_OK


def _cmd_simulate_incompressible(args) -> int:
    cfg = _load_config(args.config)
    spec = build_basis(cfg.n_u, cfg.n_p)
    operator_set = assemble(spec)
    params = _build_params(cfg, spec, operator_set)
    traj = simulate_incompressible(spec, operator_set, nullspace_basis(operator_set), params)
    out = cfg.directory
    csvio.write_incompressible_csv(os.path.join(out, "trajectory.csv"), traj)
    if cfg.dump_coefficients:
        csvio.write_coefficients_csv(os.path.join(out, "coefficients.csv"), traj)
    print(f"wrote {out}/trajectory.csv ({traj.n_steps} steps, dt={traj.dt:.6g})")
    return EXIT_OK


def _cmd_decompose(args) -> int:
    cfg = _load_config(args.config)
    spec = build_basis(cfg.n_u, cfg.n_p)
    operator_set = assemble(spec)
    source = args.field if args.field is not None else cfg.u0
    coeffs = _resolve_velocity(source, spec, operator_set)
    if coeffs is None:
        coeffs = VelocityCoeffs(spec, np.zeros(spec.m_u))
    elif not isinstance(coeffs, VelocityCoeffs):
        from .basis import project_velocity

        coeffs = project_velocity(spec, coeffs)
    parts = leray_project(operator_set, coeffs)
    out = cfg.directory
    rows = []
    for flat in range(spec.m_u):
        comp, i, j = spec.velocity_mode(flat)
        rows.append(
            [
                str(flat),
                str(comp),
                str(i),
                str(j),
                coeffs.values[flat],
                parts.solenoidal.values[flat],
                parts.gradient.values[flat],
            ]
        )
    csvio.write_csv(
        os.path.join(out, "decompose.csv"),
        ["flat", "component", "i", "j", "input", "solenoidal", "gradient"],
        rows,
    )
    summary = {
        name: norms(spec, operator_set, VelocityCoeffs(spec, vec))
        for name, vec in (
            ("input", coeffs.values),
            ("solenoidal", parts.solenoidal.values),
            ("gradient", parts.gradient.values),
        )
    }
    csvio.write_json(os.path.join(out, "decompose_norms.json"), summary)
    for name, vals in summary.items():
        print(
            f"{name}: l2={vals['l2']:.12g} h01={vals['h01']:.12g} div_l2={vals['div_l2']:.12g}"
        )
    return EXIT_OK


def _sweep_config(cfg: RunConfig) -> SweepConfig:
    return SweepConfig(
        n_u=cfg.n_u,
        n_p=cfg.n_p,
        rho0=cfg.rho0,
        mu=cfg.mu,
        eta=cfg.eta,
        T=cfg.T,
        dt=cfg.dt,
        f=realize_vector_field(cfg.f),
        u0=cfg.u0 if cfg.u0 in presets.VELOCITY_PRESETS else realize_vector_field(cfg.u0),
        p0=cfg.p0 if cfg.p0 in presets.PRESSURE_PRESETS else realize_scalar_field(cfg.p0),
        alphas=cfg.alphas,
        kind=cfg.kind,
        probes=cfg.probes,
        seed=cfg.seed,
    )


def _run_sweep(cfg: RunConfig):
    result = sweep_alpha(_sweep_config(cfg))
    meta = {
        "config": {
            f.name: (list(getattr(cfg, f.name)) if f.name == "alphas" else getattr(cfg, f.name))
            for f in dataclasses.fields(cfg)
        },
        "seed": result.seed,
        "dt": result.dt,
        "n_u": cfg.n_u,
        "n_p": cfg.n_p,
        "x_limit": result.x_limit,
        "probe_labels": result.probe_labels,
        "fits": {
            name: {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}
            for name, fit in result.fits.items()
        },
        "row_errors": {csvio.fmt17(r.alpha): r.error for r in result.rows if r.failed},
    }
    return result, meta


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    result, meta = _run_sweep(cfg)
    out = cfg.directory
    csvio.write_sweep_csv(os.path.join(out, "sweep.csv"), result)
    csvio.write_json(os.path.join(out, "sweep_meta.json"), meta)
    print(f"wrote {out}/sweep.csv ({len(result.rows)} rows, dt={result.dt:.6g})")
    if any(r.failed for r in result.rows):
        for row in result.rows:
            if row.failed:
                _err(f"alpha={row.alpha:g} failed: {row.error}")
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_probe(args) -> int:
    cfg = _load_config(args.config)
    result, _ = _run_sweep(cfg)
    rows = []
    for row in result.rows:
        for k, delta in enumerate(row.probe_deltas):
            rows.append([row.alpha, str(k), result.probe_labels[k], delta])
    csvio.write_csv(
        os.path.join(cfg.directory, "probe_deltas.csv"),
        ["alpha", "probe", "label", "delta"],
        rows,
    )
    print(f"wrote {cfg.directory}/probe_deltas.csv")
    return EXIT_SOLVER if any(r.failed for r in result.rows) else EXIT_OK


def _cmd_verify(args) -> int:
    if args.energy is not None:
        cols = csvio.read_csv_columns(args.energy)
        if "energy_residual" not in cols:
            _err(f"{args.energy}: no energy_residual column")
            return EXIT_CONFIG
        total = float(np.sum(cols["energy_residual"]))
        worst = float(np.abs(cols["energy_residual"]).max())
        print(f"cumulative residual {total:.3e}, worst step {worst:.3e}, tol {args.tol:.1e}")
        return EXIT_OK if abs(total) <= args.tol else EXIT_CERTIFICATE
    series = {}
    for name in ("i", "j", "a", "b", "c"):
        path = getattr(args, name)
        if path is None:
            _err("verify needs either --energy or all of --i --j --a --b --c")
            return EXIT_CONFIG
        t, v = csvio.read_series_csv(path)
        series[name] = ScalarTrajectory(t, v, label=name.upper())
    report = verify_mixed(series["i"], series["j"], series["a"], series["b"], series["c"])
    print(
        f"hypothesis: {'ok' if report.hypothesis_ok else 'VIOLATED'} "
        f"(margin {report.hypothesis_margin:.3e}, tol {report.hypothesis_tol:.3e})"
    )
    if report.conclusions_checked:
        print(f"|J|_L2 = {report.j_l2:.6g} <= {report.j_l2_bound:.6g} (margin {report.j_l2_margin:.3e})")
        print(f"|I|_inf = {report.i_inf:.6g} <= {report.i_inf_bound:.6g} (margin {report.i_inf_margin:.3e})")
    return EXIT_OK if report.ok else EXIT_CERTIFICATE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complim",
        description="spectral Galerkin experiments for the low-compressibility limit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (
        ("simulate", _cmd_simulate),
        ("simulate-incompressible", _cmd_simulate_incompressible),
        ("sweep", _cmd_sweep),
        ("probe", _cmd_probe),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a run configuration")
        p.set_defaults(fn=fn)

    p = sub.add_parser("decompose")
    p.add_argument("--config", required=True)
    p.add_argument("--field", help="vector expression 'ex ; ey' (default: the u0 entry)")
    p.set_defaults(fn=_cmd_decompose)

    p = sub.add_parser("verify")
    p.add_argument("--energy", help="trajectory CSV whose energy ledger to certify")
    p.add_argument("--tol", type=float, default=1e-6)
    for name in ("i", "j", "a", "b", "c"):
        p.add_argument(f"--{name}", help=f"CSV t,value series for {name.upper()}")
    p.set_defaults(fn=_cmd_verify)
    return parser


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.fn(args)
    except (ConfigError, ExpressionError, FileNotFoundError, EmptyKernel) as exc:
        if isinstance(exc, ConfigError):
            for issue in exc.issues:
                _err(issue)
        else:
            _err(str(exc))
        return EXIT_CONFIG
    except (InvalidParams,) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (StepFailure, GridMismatch, ValueError) as exc:
        _err(str(exc))
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
