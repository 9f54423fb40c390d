"""
Command-line entry points.

Usage:
    python -m lambdipole dipole --lambda 2 --w 1
    python -m lambdipole verify --lambda 2 --divisions 32 64 128
    python -m lambdipole maximize --config runs/maximize.json
    python -m lambdipole evolve --lambda 2 --t-end 0
    python -m lambdipole stability --amplitudes 0.005 0.01 0.02

Every command writes into its --out directory and finishes with manifest.json.
Exit codes: 0 ok, 1 I/O, 2 domain / infeasible, 3 verification failed,
4 not converged, 5 numerical abort, 64 usage.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import console
from .config import (
    DipoleRunConfig,
    EvolveRunConfig,
    MaximizeRunConfig,
    StabilityRunConfig,
    VerifyRunConfig,
    config_to_dict,
    load_run_config,
)
from .dipole import (
    box_for,
    dipole_integrals,
    interface_jump,
    locate_radius,
    make_params,
    pde_residual,
    sample_dipole,
)
from .errors import (
    EXIT_IO,
    EXIT_OK,
    ConvergenceFailure,
    LambDipoleError,
    NumericalAbort,
    UsageError,
    VerificationFailed,
)
from .evolve import (
    EvolutionState,
    cfl_timestep,
    dealias,
    dipole_initial_state,
    perturb,
    reference_dipole,
    report_drifts,
    run,
)
from .field import decay_check
from .maximizer import (
    MaximizerConfig,
    compare_with_dipole,
    default_admissible_spec,
    grid_for,
    maximize,
    orbit_norm,
)
from .records import RunRecorder, write_csv, write_json

INTERFACE_TOLERANCE = 1e-8


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors become UsageError (exit 64)."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ----------------------------
# Commands
# ----------------------------

def cmd_dipole(cfg: DipoleRunConfig) -> int:
    console.banner("DIPOLE")
    out = Path(cfg.out)
    rec = RunRecorder(out, "dipole", config_to_dict(cfg))

    solution = locate_radius(cfg.lam, verbose=True)
    params = make_params(cfg.lam, cfg.W)
    console.ok(f"a = {params.a:.12f}, A_L = {params.A_L:.12g} "
               f"(J1 interval {solution.interval})")

    grid = box_for(params, cfg.box_factor, cfg.nx, cfg.ny)
    stream_field = sample_dipole(params, grid, "stream")
    omega = sample_dipole(params, grid, "vorticity")
    u1, u2 = sample_dipole(params, grid, "velocity")
    for name, fld in (("stream", stream_field), ("vorticity", omega),
                      ("velocity_x1", u1), ("velocity_x2", u2)):
        rec.add(fld.save(out, name))
        rec.add(out / f"{name}.json")

    integrals = dipole_integrals(params)
    report = dict(params.to_dict(),
                  impulse=integrals["impulse"],
                  mass=integrals["mass"],
                  E=integrals["E"],
                  E_lambda=integrals["E_lambda"],
                  matching_residual=params.matching_residual(),
                  root_interval=solution.interval,
                  boundary_ring=decay_check(omega))
    rec.add(write_json(report, out / "params.json"))
    console.ok(f"matching residual {report['matching_residual']:.2e}, "
               f"impulse {report['impulse']:.10g}")
    rec.finish()
    return EXIT_OK


def cmd_verify(cfg: VerifyRunConfig) -> int:
    console.banner("VERIFY")
    out = Path(cfg.out)
    rec = RunRecorder(out, "verify", config_to_dict(cfg))
    params = make_params(cfg.lam, cfg.W)
    jump_psi, jump_dr = interface_jump(params, cfg.n_angles)

    rows = []
    for d in tqdm(sorted(cfg.divisions), desc="Resolutions", unit=" grids"):
        h = params.a / d
        rows.append({
            "division": d,
            "h": h,
            "residual": pde_residual(params, h),
            "residual_exterior": pde_residual(params, h, region="exterior"),
        })
    table = pd.DataFrame(rows)
    orders = [math.nan]
    for prev, cur in zip(rows[:-1], rows[1:]):
        orders.append(math.log(prev["residual"] / cur["residual"]) / math.log(prev["h"] / cur["h"]))
    table["order"] = orders
    table["interface_jump_psi"] = jump_psi
    table["interface_jump_dr"] = jump_dr
    rec.add(write_csv(table, out / "convergence.csv"))

    for row in table.itertuples():
        console.info("verify", f"h=a/{row.division}: residual {row.residual:.3e}, order {row.order:.3f}")

    failures = []
    observed = min(orders[1:])
    if observed < cfg.min_order:
        failures.append(f"observed order {observed:.3f} below {cfg.min_order}")
    limit = INTERFACE_TOLERANCE * cfg.W
    if jump_psi > limit or jump_dr > limit:
        failures.append(f"interface jumps {jump_psi:.2e}, {jump_dr:.2e} exceed {limit:.1e}")

    rec.finish(status="failed" if failures else "ok",
               extra={"observed_order": observed, "interface_jump_psi": jump_psi,
                      "interface_jump_dr": jump_dr})
    if failures:
        raise VerificationFailed("; ".join(failures))
    console.ok(f"observed order {observed:.3f}, interface jumps {jump_psi:.1e} / {jump_dr:.1e}")
    return EXIT_OK


def cmd_maximize(cfg: MaximizeRunConfig) -> int:
    console.banner("MAXIMIZE")
    out = Path(cfg.out)
    rec = RunRecorder(out, "maximize", config_to_dict(cfg))

    spec = default_admissible_spec(cfg.lam, cfg.mu, cfg.nu, cfg.nu_factor)
    grid = grid_for(cfg.lam, cfg.box_factor, cfg.nx, cfg.ny)
    console.info("maximize", f"mu={spec.mu:.10g}, nu={spec.nu:.10g}, grid {grid.nx}x{grid.ny}")

    mcfg = MaximizerConfig(spec=spec, grid=grid, max_iters=cfg.max_iters,
                           tol_rel=cfg.tol_rel, seed=cfg.seed, initial=cfg.initial_guess)
    result = maximize(mcfg, verbose=True)

    rec.add(result.omega.save(out, "omega"))
    rec.add(out / "omega.json")
    rec.add(write_csv(result.history, out / "iterates.csv"))
    comparison = compare_with_dipole(result, spec)
    rec.add(write_json(comparison, out / "comparison.json"))

    console.info("maximize", f"W={comparison['W']:.8g} (analytic {comparison['W_analytic']:.8g}), "
                             f"L2 distance {comparison['l2_distance']:.3e}")
    rec.finish(status="ok" if result.converged else "not_converged")
    if not result.converged:
        raise ConvergenceFailure(
            f"no convergence after {result.iters} iterations (residual {result.residual:.2e})"
        )
    console.ok("relaxation converged")
    return EXIT_OK


def cmd_evolve(cfg: EvolveRunConfig) -> int:
    console.banner("EVOLVE")
    out = Path(cfg.out)
    rec = RunRecorder(out, "evolve", config_to_dict(cfg))

    params = make_params(cfg.lam, cfg.W)
    grid = box_for(params, cfg.box_factor, cfg.nx, cfg.ny)
    state = dipole_initial_state(cfg.lam, cfg.W, grid, cfg.start_offset)
    if cfg.perturbation:
        q = perturb(state.q, cfg.perturbation, cfg.amplitude, cfg.seed)
        state = EvolutionState(dealias(q), 0.0)

    t_end = cfg.t_end if cfg.t_end is not None else cfg.t_end_units * params.a / params.W
    dt = cfg.dt if cfg.dt is not None else cfl_timestep(state, cfg.cfl)
    console.info("evolve", f"t_end={t_end:.6g}, dt={dt:.6g}, grid {grid.nx}x{grid.ny}")

    reference = reference_dipole(cfg.lam, cfg.W, grid)
    rec.add(state.q.save(out, "q_initial"))
    rec.add(out / "q_initial.json")
    try:
        series = run(state, t_end, dt, cfg.diag_every, reference=reference,
                     hyperviscosity=cfg.hyperviscosity,
                     checkpoint_every=cfg.checkpoint_every,
                     checkpoint_dir=out / "checkpoints")
    except NumericalAbort:
        rec.finish(status="aborted")
        raise
    rec.add(write_csv(series.to_frame(), out / "diagnostics.csv"))

    drifts = report_drifts(series)
    rec.finish(extra={"drifts": drifts, "steps_dt": dt, "t_end": t_end})
    console.ok(f"{len(series)} diagnostic rows written")
    return EXIT_OK


def cmd_stability(cfg: StabilityRunConfig) -> int:
    console.banner("STABILITY")
    out = Path(cfg.out)
    rec = RunRecorder(out, "stability", config_to_dict(cfg))

    params = make_params(cfg.lam, cfg.W)
    grid = box_for(params, cfg.box_factor, cfg.nx, cfg.ny)
    base = dipole_initial_state(cfg.lam, cfg.W, grid, cfg.start_offset)
    reference = reference_dipole(cfg.lam, cfg.W, grid)
    scale = orbit_norm(reference)
    t_end = cfg.t_end_units * params.a / params.W

    rows = []
    for amplitude in sorted(cfg.amplitudes):
        console.step(len(rows) + 1, len(cfg.amplitudes), f"perturbation {cfg.perturbation} {amplitude:g}")
        q = perturb(base.q, cfg.perturbation, amplitude, cfg.seed)
        state = EvolutionState(dealias(q), 0.0)
        dt = cfl_timestep(state, cfg.cfl)
        series = run(state, t_end, dt, cfg.diag_every, reference=reference)
        dist = np.asarray(series.orbit_dist) / scale
        peak = float(dist.max())
        rows.append({
            "delta_target": amplitude,
            "delta_in": float(dist[0]),
            "max_orbit_dist": peak,
            "envelope_ratio": peak / amplitude if amplitude > 0 else math.nan,
            # the unperturbed run has no envelope
            "within_envelope": amplitude == 0.0 or peak <= cfg.envelope_factor * amplitude,
        })

    table = pd.DataFrame(rows)
    rec.add(write_csv(table, out / "stability.csv"))

    monotone = bool(np.all(np.diff(table["max_orbit_dist"].to_numpy()) >= 0.0))
    within = bool(table["within_envelope"].all())
    failures = []
    if not monotone:
        failures.append("max orbit distance is not nondecreasing in the perturbation size")
    for row in rows:
        if not row["within_envelope"]:
            failures.append(f"delta={row['delta_target']:g}: max orbit distance {row['max_orbit_dist']:.3e} "
                            f"exceeds {cfg.envelope_factor:g} x delta")
    for failure in failures:
        console.warn(failure)

    rec.finish(status="ok" if not failures else "failed",
               extra={"monotone": monotone, "within_envelope": within,
                      "envelope_factor": cfg.envelope_factor})
    if failures:
        raise VerificationFailed("; ".join(failures))
    console.ok(f"{len(rows)} perturbation runs within {cfg.envelope_factor:g} x delta")
    return EXIT_OK


# ----------------------------
# Parser
# ----------------------------

def _add_common(p: argparse.ArgumentParser, with_w: bool = True, grid: bool = True) -> None:
    p.add_argument('--config', type=Path, default=None, help='JSON run configuration')
    p.add_argument('--lambda', dest='lam', type=float, default=None,
                   help='vortex-strength parameter (> 1)')
    if with_w:
        p.add_argument('--w', dest='W', type=float, default=None, help='translation speed')
    if grid:
        p.add_argument('--nx', type=int, default=None, help='x1 nodes (power of two)')
        p.add_argument('--ny', type=int, default=None, help='x2 nodes (power of two)')
        p.add_argument('--box-factor', dest='box_factor', type=float, default=None,
                       help='box half-width and height in units of the dipole radius')
    p.add_argument('--out', type=str, default=None, help='output directory')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lambdipole",
                     description="Lamb dipole of the QGSW equations: construction, "
                                 "variational recovery and stability experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser('dipole', help='closed-form dipole fields and parameters')
    _add_common(p)
    p.set_defaults(config_class=DipoleRunConfig, handler=cmd_dipole)

    p = sub.add_parser('verify', help='PDE residual convergence and interface continuity')
    _add_common(p, grid=False)
    p.add_argument('--divisions', nargs='+', type=int, default=None,
                   help='grid spacings a/d for each d')
    p.add_argument('--n-angles', dest='n_angles', type=int, default=None)
    p.add_argument('--min-order', dest='min_order', type=float, default=None)
    p.set_defaults(config_class=VerifyRunConfig, handler=cmd_verify)

    p = sub.add_parser('maximize', help='relax toward the energy maximizer')
    _add_common(p, with_w=False)
    p.add_argument('--mu', type=float, default=None, help='target impulse')
    p.add_argument('--nu', type=float, default=None, help='mass cap')
    p.add_argument('--nu-factor', dest='nu_factor', type=float, default=None)
    p.add_argument('--max-iters', dest='max_iters', type=int, default=None)
    p.add_argument('--tol-rel', dest='tol_rel', type=float, default=None)
    p.add_argument('--initial', dest='initial_guess', choices=['blob', 'dipole'], default=None)
    p.add_argument('--seed', type=int, default=None)
    p.set_defaults(config_class=MaximizeRunConfig, handler=cmd_maximize)

    p = sub.add_parser('evolve', help='time-integrate the dipole')
    _add_common(p)
    p.add_argument('--t-end', dest='t_end', type=float, default=None)
    p.add_argument('--t-end-units', dest='t_end_units', type=float, default=None,
                   help='horizon in units of a/W when --t-end is absent')
    p.add_argument('--dt', type=float, default=None)
    p.add_argument('--cfl', type=float, default=None)
    p.add_argument('--start-offset', dest='start_offset', type=float, default=None)
    p.add_argument('--diag-every', dest='diag_every', type=int, default=None)
    p.add_argument('--checkpoint-every', dest='checkpoint_every', type=int, default=None)
    p.add_argument('--hyperviscosity', type=float, default=None)
    p.add_argument('--perturbation', choices=['smooth-noise', 'shift', 'dilate'], default=None)
    p.add_argument('--amplitude', type=float, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.set_defaults(config_class=EvolveRunConfig, handler=cmd_evolve)

    p = sub.add_parser('stability', help='perturbation sweep of orbit distances')
    _add_common(p)
    p.add_argument('--amplitudes', nargs='+', type=float, default=None)
    p.add_argument('--envelope-factor', dest='envelope_factor', type=float, default=None,
                   help='pass when max orbit distance <= factor * amplitude')
    p.add_argument('--perturbation', choices=['smooth-noise', 'shift', 'dilate'], default=None)
    p.add_argument('--t-end-units', dest='t_end_units', type=float, default=None)
    p.add_argument('--cfl', type=float, default=None)
    p.add_argument('--start-offset', dest='start_offset', type=float, default=None)
    p.add_argument('--diag-every', dest='diag_every', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.set_defaults(config_class=StabilityRunConfig, handler=cmd_stability)

    return parser


_NOT_CONFIG = {"command", "config", "config_class", "handler"}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = load_run_config(args.config_class, args.config, overrides)
        return args.handler(cfg)
    except LambDipoleError as e:
        console.fail(str(e))
        return e.exit_code
    except OSError as e:
        console.fail(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
