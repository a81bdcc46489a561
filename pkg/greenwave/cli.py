"""
Command-line interface entry point
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from tabulate import tabulate

from .config import DEFAULT_THREADS, ConfigError, RunConfig
from .physics import winding_number
from .reduction import MatchingViolation, ParityViolation, Periodic
from .solver import IterationDiverged, NonFiniteSource, SolveResult, solve
from .verification import (
    AuditReport,
    audit_kernel_ode,
    audit_lemma,
    audit_prop1,
    audit_prop2,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_AUDIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_MATCHING = 3
EXIT_DIVERGED = 4


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def write_solve_outputs(
    result: SolveResult, out_dir: Path, stride: int, ring: bool
) -> List[Path]:
    """snapshots.csv, iterations.csv, certificate.json (+ winding.csv)"""
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = result.trajectory
    written = []

    path = out_dir / "snapshots.csv"
    header = ("t", "x", "u", "u_x", "u_t")
    _write_rows(path, header, traj.snapshot_rows(stride))
    written.append(path)

    path = out_dir / "iterations.csv"
    _write_rows(
        path,
        ("k", "weighted_norm", "plain_norm", "ratio"),
        (record.to_row() for record in result.iterations),
    )
    written.append(path)

    path = out_dir / "certificate.json"
    summary = result.certificate.to_dict()
    summary["iterations"] = len(result.iterations)
    summary["flags"] = sorted(result.flags)
    path.write_text(json.dumps(summary, indent=2) + "\n")
    written.append(path)

    if ring:
        path = out_dir / "winding.csv"
        counts = winding_number(traj)
        jumps = (traj.u[:, -1] - traj.u[:, 0]) / (2.0 * np.pi)
        _write_rows(
            path,
            ("t", "winding", "turns"),
            zip(traj.times.tolist(), counts.tolist(), jumps.tolist()),
        )
        written.append(path)
    return written


def run_solve(config: RunConfig, threads: int = 1, quiet: bool = False):
    """Solve the configured problem and write its artifacts"""
    problem = config.build_problem()
    settings = config.solver_settings()
    try:
        result = solve(problem, threads=threads, **settings)
    except MatchingViolation as e:
        logger.error("%s", e)
        return EXIT_MATCHING
    except (IterationDiverged, NonFiniteSource) as e:
        logger.error("%s", e)
        return EXIT_DIVERGED
    except ParityViolation as e:
        raise ConfigError(f"initial: {e}")
    except ValueError as e:
        raise ConfigError(f"solver: {e}")

    ring = isinstance(problem.bc, Periodic)
    stride = config.section("output")["snapshot_stride"]
    written = write_solve_outputs(result, config.output_dir(), stride, ring)
    for path in written:
        logger.info("Wrote %s", path)

    if not quiet:
        cert = result.certificate
        print(
            tabulate(
                [
                    ["lambda", cert.lam],
                    ["mu", cert.mu],
                    ["factor", cert.factor],
                    ["valid", cert.valid],
                    ["iterations", len(result.iterations)],
                    ["flags", ", ".join(sorted(result.flags)) or "-"],
                ],
                headers=["certificate", "value"],
                tablefmt="grid",
            )
        )
    return EXIT_OK


def run_audit(
    config: RunConfig,
    threads: int = 1,
    seed: int = 0,
    quiet: bool = False,
):
    """Run the kernel, theta and initial-layer audits and the ODE oracle"""
    s = config.audit_settings()
    report = AuditReport(name="audit")
    for params in s["params"]:
        report.merge(
            audit_lemma(
                params,
                s["n_range"],
                s["t_grid"],
                kernel_scale=s["kernel_scale"],
                threads=threads,
            )
        )
        report.merge(audit_prop1(params, s["theta_t"], s["theta_N"]))
        try:
            report.merge(
                audit_prop2(
                    s["initial_g"],
                    s["initial_bc"],
                    s["initial_t"],
                    params,
                    N=s["initial_N"],
                )
            )
        except ParityViolation as e:
            raise ConfigError(f"audit.initial_g: {e}")
    if s["ode_samples"] > 0:
        report.merge(audit_kernel_ode(s["ode_samples"], seed=seed))

    out_dir = config.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_dir / "audit.csv")
    report.write_summary(out_dir / "audit_summary.csv")
    logger.info(
        "Audit: %d checks, %d failures -> %s",
        report.checked,
        len(report.failure_rows()),
        out_dir / "audit.csv",
    )
    if not quiet:
        print(report.summary_table())
    return EXIT_OK if report.passed else EXIT_AUDIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Greenwave: damped wave equation solver and audits"
    )
    parser.add_argument("--config", required=True, help="Run config (JSON)")
    parser.add_argument(
        "--mode", choices=["solve", "audit"], default="solve", help="Task"
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=DEFAULT_THREADS,
        help="Worker threads (0 = one per CPU)",
    )
    parser.add_argument(
        "--seed", type=int, default=0, help="Seed for random audit tuples"
    )
    parser.add_argument(
        "--quiet", action="store_true", help="Warnings only, no tables"
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 0:
        logger.error("--threads must be >= 0")
        return EXIT_CONFIG

    try:
        config = RunConfig.from_file(args.config)
        config.require(args.mode)
        if args.mode == "audit":
            return run_audit(config, args.threads, args.seed, args.quiet)
        return run_solve(config, args.threads, args.quiet)
    except ConfigError as e:
        logger.error("Config error: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
