"""Command-line entry points: run, sweep, check, entropy-table."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .entropy import GENERATOR_FACTORIES, get_kernel
from .errors import NozzleflowError
from .harness import (RunConfig, single_run, sweep, write_snapshot_csv,
                      write_sweep_outputs)
from .schedule import certify
from .thermo import GasLaw


def _cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = single_run(cfg, label="run")
    g = cfg.build_gas(result.eps)
    profile = cfg.build_profile()
    write_snapshot_csv(out / "final.csv", result.field, g, profile,
                       result.eps, cfg.bc, cfg.cfl)
    result.report.to_csv(out / "report.csv")
    ok = result.report.all_checks_pass()
    lines = [f"run finished at t={result.field.t:g} "
             f"(eps={result.eps:g}, delta={result.delta:g})"]
    for key, val in sorted(result.report.checks.items()):
        lines.append(f"  check {key}: {'pass' if val else 'FAIL'}")
    text = "\n".join(lines)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return 0 if ok else 1


def _cmd_sweep(args) -> int:
    cfg = RunConfig.from_file(args.config)
    result = sweep(cfg)
    out = write_sweep_outputs(result, cfg)
    print(result.summary())
    print(f"outputs in {out}")
    checks_ok = all(r.report.all_checks_pass() for r in result.runs)
    ok = result.converging and result.certificate.passed and checks_ok \
        and not result.failures
    return 0 if ok else 1


def _cmd_check(args) -> int:
    cfg = RunConfig.from_file(args.config)
    sched = cfg.build_schedule()
    profile = cfg.build_profile()
    kappa = cfg.kappa if cfg.kappa is not None else -1.0
    cert = certify(sched, profile, GasLaw(cfg.gamma, kappa))
    print(cert.summary())
    ok = cert.passed
    if args.with_run:
        result = single_run(cfg, label="check", collect_snapshots=False)
        for key, val in sorted(result.report.checks.items()):
            print(f"  check {key}: {'pass' if val else 'FAIL'}")
        ok = ok and result.report.all_checks_pass()
    return 0 if ok else 1


def _cmd_entropy_table(args) -> int:
    g = GasLaw(args.gamma)
    factory = GENERATOR_FACTORIES.get(args.generator)
    if factory is None:
        print(f"unknown generator {args.generator!r}; choose from "
              f"{sorted(GENERATOR_FACTORIES)}", file=sys.stderr)
        return 2
    gen = factory()
    kern = get_kernel(g)
    rho = np.linspace(args.rho_max / args.n, args.rho_max, args.n)
    u = np.linspace(-args.u_max, args.u_max, args.n)
    rr, uu = np.meshgrid(rho, u, indexing="ij")
    eta, q = kern.pair(gen, rr, rr * uu)
    dest = open(args.out, "w") if args.out else sys.stdout
    try:
        dest.write(f"# gamma={args.gamma:g} generator={args.generator}\n")
        dest.write("rho,u,eta,q\n")
        for i in range(args.n):
            for j in range(args.n):
                dest.write(f"{rr[i, j]:.10g},{uu[i, j]:.10g},"
                           f"{eta[i, j]:.12g},{q[i, j]:.12g}\n")
    finally:
        if args.out:
            dest.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nozzleflow",
        description="viscous quasi-1D compressible flow laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single solver run from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="viscosity-ladder sweep")
    p_sweep.add_argument("config")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_check = sub.add_parser("check", help="certify the ladder (and optionally "
                                           "run the inequality checks)")
    p_check.add_argument("config")
    p_check.add_argument("--with-run", action="store_true",
                         help="also run the solver and evaluate its checks")
    p_check.set_defaults(func=_cmd_check)

    p_tab = sub.add_parser("entropy-table",
                           help="CSV table of (rho, u, eta, q) for a generator")
    p_tab.add_argument("--gamma", type=float, required=True)
    p_tab.add_argument("--generator", default="half_square")
    p_tab.add_argument("--rho-max", type=float, default=2.0)
    p_tab.add_argument("--u-max", type=float, default=2.0)
    p_tab.add_argument("--n", type=int, default=16)
    p_tab.add_argument("--out", default=None)
    p_tab.set_defaults(func=_cmd_entropy_table)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NozzleflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
