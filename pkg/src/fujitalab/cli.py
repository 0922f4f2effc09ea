"""Command-line lab driver.

Subcommands fall in two groups.  Simulation commands (simulate-rescaled,
simulate-physical, recenter, modes) run one computation and write its
trajectory CSV / report JSON / snapshot files; they exit 0 when the
computation itself succeeds.  Scenario commands (basis-check,
profile-convergence, dichotomy, stability-sweep, time-continuity,
recenter-drift) evaluate named pass/fail predicates, print one line per
predicate, write the scenario report JSON, and exit 0 iff every predicate
passed.

All settings come from layered configuration: built-in defaults, then an
INI file given with --config, then individual --set section.key=value
overrides.  Outputs land in the configured [output] directory.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .experiments import (
    ScenarioConfig,
    basis_report,
    bump_datum,
    orthogonal_noise,
    scenario_blowup_time_continuity,
    scenario_dichotomy,
    scenario_profile_convergence,
    scenario_recenter_drift,
    scenario_stability_sweep,
)
from .physical_solver import (
    load_snapshot,
    report_to_json,
    rescale_to_similarity,
    run_to_blowup,
    save_snapshot,
)
from .recenter import solve_center
from .reduced_dynamics import ModeODEState, integrate_modes
from .rescaled_solver import (
    canonical_profile_modes,
    make_profile_field,
    prepare_profile_b0,
    run_rescaled,
)
from .weighted_space import FrameParams, Grid


def _parse_overrides(pairs) -> dict:
    out: dict = {}
    for item in pairs or []:
        key, _, value = item.partition("=")
        section, _, name = key.partition(".")
        if not (section and name and _):
            raise SystemExit(f"--set expects section.key=value, got {item!r}")
        out.setdefault(section.strip(), {})[name.strip()] = value.strip()
    return out


def _config(args) -> ScenarioConfig:
    return ScenarioConfig.load(args.config, _parse_overrides(args.set))


def _emit_report(report, outdir: str, filename: str) -> int:
    for name, ok in report.predicates.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    for case in report.cases:
        if not case.passed:
            print(f"FAIL case {case.name}")
    path = os.path.join(outdir, filename)
    report.to_json(path)
    print(f"report: {path}")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# simulation commands


def _cmd_simulate_rescaled(args) -> int:
    cfg = _config(args)
    outdir = cfg.ensure_outdir()
    fp = cfg.frame()
    grid = cfg.rescaled_grid()
    tau0 = cfg.getfloat("rescaled", "tau0")
    horizon = cfg.getfloat("rescaled", "horizon")
    dtau = cfg.getfloat("rescaled", "dtau")

    noise = None
    amp = 0.0
    if not args.no_noise:
        noise = orthogonal_noise(
            grid, fp, cfg.getint("noise", "seed"), cfg.getint("noise", "fourier_modes")
        )
        amp = cfg.getfloat("noise", "amplitude")

    b0 = args.b0
    if args.balance:
        # shooting horizons past ~18 are unreachable in float64, so shoot at
        # the configured [shooting] horizon even when the run is longer
        b0 = prepare_profile_b0(
            fp,
            grid,
            tau0,
            noise=noise,
            noise_amp=amp,
            dtau=dtau,
            horizon=min(horizon, cfg.getfloat("shooting", "horizon")),
            bracket=cfg.getfloat("shooting", "bracket"),
            cap=cfg.getfloat("rescaled", "blowup_cap"),
            max_probes=cfg.getint("shooting", "max_probes"),
            center=cfg.getfloat("shooting", "center"),
        )
        print(f"balanced b0 = {b0:.17g}")

    w0 = make_profile_field(fp, grid, tau0, b0=b0, noise=noise, noise_amp=amp)
    traj = run_rescaled(
        w0,
        tau0,
        tau0 + horizon,
        fp,
        drift_mode=args.drift,
        dtau=dtau,
        dtau_out=cfg.getfloat("rescaled", "sample_interval"),
        cap=cfg.getfloat("rescaled", "blowup_cap"),
        stabilize_b0=args.stabilize,
    )
    path = os.path.join(outdir, "rescaled-trajectory.csv")
    traj.to_csv(path)
    last = traj.samples[-1]
    print(f"exit: {traj.exit_reason} at tau = {traj.exit_tau:.6g}")
    print(f"final b0 = {last.modes.b0:.6g}, sup w = {last.sup_w:.6g}")
    print(f"trajectory: {path}")
    return 0


def _cmd_simulate_physical(args) -> int:
    cfg = _config(args)
    outdir = cfg.ensure_outdir()
    fp = cfg.frame()
    grid = Grid.make(
        fp.n, cfg.getfloat("physical", "extent"), cfg.getfloat("physical", "spacing")
    )
    u0 = bump_datum(
        grid, cfg.getfloat("physical", "amplitude"), cfg.getfloat("physical", "shift")
    )
    report = run_to_blowup(
        u0,
        fp,
        M_stop=cfg.getfloat("physical", "m_stop"),
        t_max=cfg.getfloat("physical", "t_max"),
        safety=cfg.getfloat("physical", "safety"),
        rate_factor=cfg.getfloat("physical", "rate_factor"),
    )
    for k, (t_snap, field) in enumerate(report.snapshots):
        save_snapshot(os.path.join(outdir, f"physical-snapshot-{k}.bin"), field, t_snap, fp)
    path = os.path.join(outdir, "physical-report.json")
    report_to_json(report, path)
    if report.blew_up:
        point = ", ".join(f"{a:.6g}" for a in report.point_est)
        print(f"blowup: T_est = {report.T_est:.12g}, point = ({point})")
        print(f"rate slope = {report.rate_slope:.6g}, R^2 = {report.r_squared:.8g}")
    else:
        print(f"no blowup: {report.message}")
    for warning in report.warnings:
        print(f"warning: {warning}")
    print(f"report: {path} ({len(report.snapshots)} snapshots)")
    return 0


def _cmd_recenter(args) -> int:
    cfg = _config(args)
    fp = cfg.frame()
    u, t, p = load_snapshot(args.snapshot)
    if p != fp.p:
        print(f"note: snapshot was taken at p = {p:g}, config says {fp.p:g}; using {p:g}")
        fp = FrameParams(p=p, n=fp.n)
    center = np.zeros(fp.n)
    if args.center is not None:
        center = np.array([float(tok) for tok in args.center.split(",")], dtype=float)
        if center.shape != (fp.n,):
            raise SystemExit(f"--center needs {fp.n} comma-separated values")
    w, tau = rescale_to_similarity(
        u,
        t,
        args.blowup_time,
        center,
        fp,
        L=cfg.getfloat("grid", "extent"),
        h=cfg.getfloat("grid", "spacing"),
    )
    sol = solve_center(w, fp=fp)
    scale = float(np.sqrt(args.blowup_time - t))
    refined = center + sol.xi * scale
    xi_txt = ", ".join(f"{v:.12g}" for v in sol.xi)
    ref_txt = ", ".join(f"{v:.12g}" for v in refined)
    print(f"converged: {sol.converged} in {sol.iterations} iterations")
    print(f"xi = ({xi_txt}), residual = {sol.residual:.3g}")
    print(f"refined physical center = ({ref_txt})")
    return 0 if sol.converged else 1


def _cmd_modes(args) -> int:
    cfg = _config(args)
    outdir = cfg.ensure_outdir()
    fp = cfg.frame()
    tau0 = cfg.getfloat("rescaled", "tau0")
    modes = canonical_profile_modes(fp, tau0, b0=args.b0)
    if args.b2_diag is not None:
        vals = [float(tok) for tok in args.b2_diag.split(",")]
        if len(vals) != fp.n:
            raise SystemExit(f"--b2-diag needs {fp.n} comma-separated values")
        modes.b2_diag[:] = vals
    if args.b1 is not None:
        vals = [float(tok) for tok in args.b1.split(",")]
        if len(vals) != fp.n:
            raise SystemExit(f"--b1 needs {fp.n} comma-separated values")
        modes.b1[:] = vals
    if args.b2_off is not None:
        vals = [float(tok) for tok in args.b2_off.split(",")]
        if len(vals) != modes.b2_off.size:
            raise SystemExit(f"--b2-off needs {modes.b2_off.size} comma-separated values")
        modes.b2_off[:] = vals
    horizon = cfg.getfloat("rescaled", "horizon")
    traj = integrate_modes(
        ModeODEState(tau=tau0, modes=modes),
        tau0 + horizon,
        fp,
        dtau=cfg.getfloat("rescaled", "dtau"),
    )
    path = os.path.join(outdir, "modes-trajectory.csv")
    traj.to_csv(path)
    print(f"exit: {traj.exit_reason} at tau = {traj.exit_tau:.6g}")
    print(f"trajectory: {path}")
    return 0


# ---------------------------------------------------------------------------
# scenario commands


def _scenario_cmd(fn, filename):
    def run(args) -> int:
        cfg = _config(args)
        outdir = cfg.ensure_outdir()
        return _emit_report(fn(cfg), outdir, filename)

    return run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fujitalab",
        description="Numerical laboratory for ODE-type blowup in u_t = Lap u + |u|^(p-1) u.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI file overriding the defaults")
    common.add_argument(
        "--set",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="single-value override, repeatable",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser(
        "basis-check", parents=[common], help="Gram, eigen-relation, and moment identities"
    ).set_defaults(fn=_scenario_cmd(basis_report, "basis-check-report.json"))

    p = sub.add_parser(
        "simulate-rescaled", parents=[common], help="one rescaled-frame profile run"
    )
    p.add_argument("--b0", type=float, default=0.0, help="initial unstable coefficient")
    p.add_argument(
        "--balance", action="store_true", help="shoot for the balanced b0 before running"
    )
    p.add_argument(
        "--stabilize",
        action="store_true",
        help="hold b0 at its quasi-static balance at every sample (long runs)",
    )
    p.add_argument(
        "--drift",
        choices=["none", "fixed", "orthogonality"],
        default="orthogonality",
        help="recentring drift mode",
    )
    p.add_argument("--no-noise", action="store_true", help="omit the seeded perturbation")
    p.set_defaults(fn=_cmd_simulate_rescaled)

    p = sub.add_parser(
        "simulate-physical", parents=[common], help="physical-frame run to blowup"
    )
    p.set_defaults(fn=_cmd_simulate_physical)

    p = sub.add_parser(
        "recenter", parents=[common], help="refine a blowup center from a snapshot"
    )
    p.add_argument("--snapshot", required=True, help="snapshot file from simulate-physical")
    p.add_argument(
        "--blowup-time", type=float, required=True, help="estimated blowup time T"
    )
    p.add_argument("--center", help="initial center guess, comma-separated")
    p.set_defaults(fn=_cmd_recenter)

    p = sub.add_parser(
        "modes", parents=[common], help="reduced mode system from the canonical profile"
    )
    p.add_argument("--b0", type=float, default=0.0)
    p.add_argument("--b1", help="comma-separated initial first modes")
    p.add_argument("--b2-diag", help="comma-separated initial diagonal second modes")
    p.add_argument("--b2-off", help="comma-separated initial off-diagonal second modes")
    p.set_defaults(fn=_cmd_modes)

    for name, fn, filename in (
        (
            "profile-convergence",
            scenario_profile_convergence,
            "profile-convergence-report.json",
        ),
        ("dichotomy", scenario_dichotomy, "dichotomy-report.json"),
        ("stability-sweep", scenario_stability_sweep, "stability-sweep-report.json"),
        (
            "time-continuity",
            scenario_blowup_time_continuity,
            "time-continuity-report.json",
        ),
        ("recenter-drift", scenario_recenter_drift, "recenter-drift-report.json"),
    ):
        sub.add_parser(name, parents=[common], help=fn.__doc__.splitlines()[0]).set_defaults(
            fn=_scenario_cmd(fn, filename)
        )

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
