"""Command-line entry points.

Subcommands: validate, solve, check, run, learn, report.  Exit codes:
0 success, 2 validation failure (bad inputs, failed model validation, or a
check that found a counterexample), 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .controller import check_approachable_convex, check_approachable_nonconvex, box_sampler
from .game import check_irreducibility, load_model, validate_model
from .planner import scalarize, solve_minmax
from .reporting import BatchError, read_trajectory_csv, render_svg, run_batch
from .targets import Union, load_target

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _cmd_validate(args) -> int:
    model = load_model(args.model)
    report = validate_model(model)
    if not report.ok:
        for violation in report.violations:
            print(violation)
        return EXIT_VALIDATION
    print(f"ok: {model.n_states} states, {model.n_actions1}x{model.n_actions2} actions, K={model.K}")
    if args.irreducibility:
        irr = check_irreducibility(model)
        print(f"irreducibility: {'pass' if irr.ok else 'FAIL'} ({irr.n_pairs_checked} pairs)")
        if not irr.ok:
            print(f"witness pair: {irr.witness}")
            return EXIT_VALIDATION
    return EXIT_OK


def _cmd_solve(args) -> int:
    model = load_model(args.model)
    lam = np.array([float(v) for v in args.direction.split(",")])
    norm = np.linalg.norm(lam)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    solution = solve_minmax(scalarize(model, lam / norm))
    print(
        json.dumps(
            {
                "lambda": (lam / norm).tolist(),
                "value": solution.value,
                "leader_policy": solution.leader_policy.tolist(),
                "follower_response": solution.follower_response.tolist(),
                "iterations": solution.iterations,
            },
            indent=1,
        )
    )
    return EXIT_OK


def _cmd_check(args) -> int:
    model = load_model(args.model)
    target = load_target(args.target)
    if isinstance(target, Union):
        lo = np.full(model.K, -1.5)
        hi = np.full(model.K, 1.5)
        cert = check_approachable_nonconvex(
            model, target, box_sampler(lo, hi), n_points=args.points,
            rng=np.random.default_rng(args.seed),
        )
    else:
        cert = check_approachable_convex(model, target, n_directions=args.directions)
    print(json.dumps(cert.to_dict(), indent=1))
    return EXIT_OK if cert.passed else EXIT_VALIDATION


def _cmd_run(args, expected_leader: str) -> int:
    cfg = load_config(args.config)
    if cfg.leader != expected_leader:
        raise ConfigError(
            f"config leader is {cfg.leader!r}; use the "
            f"{'run' if cfg.leader == 'exact' else 'learn'} command"
        )
    _, aggregate = run_batch(cfg)
    print(json.dumps({"output_dir": str(cfg.output_dir), "final_dists": aggregate["final_dists"]}, indent=1))
    return EXIT_OK


def _cmd_report(args) -> int:
    paths = sorted(Path(args.in_dir).glob("run_seed*.csv"))
    if not paths:
        raise FileNotFoundError(f"no run_seed*.csv files in {args.in_dir}")
    records = [read_trajectory_csv(p) for p in paths]
    render_svg(records, args.out)
    print(f"wrote {args.out} ({len(records)} trajectories)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steergame")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--irreducibility", action="store_true")

    p = sub.add_parser("solve", help="solve the min-max game for one direction")
    p.add_argument("--model", required=True)
    p.add_argument("--lambda", dest="direction", required=True, help="comma-separated direction")

    p = sub.add_parser("check", help="approachability condition check")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--directions", type=int, default=720)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="batch runs with the exact controller")
    p.add_argument("--config", required=True)

    p = sub.add_parser("learn", help="batch runs with the unknown-kernel learner")
    p.add_argument("--config", required=True)

    p = sub.add_parser("report", help="render a log-log convergence chart from CSVs")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "run":
            return _cmd_run(args, "exact")
        if args.command == "learn":
            return _cmd_run(args, "learn")
        if args.command == "report":
            return _cmd_report(args)
        raise AssertionError(f"unknown command {args.command}")
    except (ConfigError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - one-line diagnostic, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
