"""Command line entry point: ``python -m backend.app.cli <command>``.

Exit codes: 0 on success, 1 when a verification fails, 2 on usage or config errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

import numpy as np

from .best_response import (
    compute_n_t,
    equal_share_check,
    solve_equilibrium,
    spne_oracle,
    threshold_check,
    verify_nash,
)
from .config import DEFAULT_REALIZATIONS, LOG_LEVEL
from .errors import BuffetError, ConfigError, DomainError
from .harness import random_instance, run_experiment, sweep_signal_quality
from .models import STRATEGIES, GameConfig
from .serialization import CSV_HEADERS, emit_csv, parse_config, read_matrix_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _parse_order(text: str, customers: int) -> List[int]:
    try:
        order = [int(part) - 1 for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError([f"--order: {exc}"]) from exc
    if sorted(order) != list(range(customers)):
        raise ConfigError([f"--order: expected a permutation of 1..{customers}"])
    return order


def _parse_grid(text: str) -> List[float]:
    try:
        grid = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError([f"--w-grid: {exc}"]) from exc
    if not grid:
        raise ConfigError(["--w-grid: at least one value is required"])
    return grid


def _load(args: argparse.Namespace) -> GameConfig:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"--config: {exc}"]) from exc
    cfg = parse_config(text)
    if getattr(args, "order", None):
        cfg = cfg.with_updates(order=_parse_order(args.order, cfg.customers))
    return cfg


def _write(args: argparse.Namespace, write) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as sink:
            write(sink)
        logger.info("Wrote %s", args.out)
    else:
        write(sys.stdout)


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run_experiment(cfg, args.strategy, args.realizations, args.seed, args.workers)
    _write(args, lambda sink: emit_csv(result, args.kind, sink))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    strategies = args.strategy or list(STRATEGIES)
    rows = sweep_signal_quality(
        cfg, _parse_grid(args.w_grid), strategies, args.realizations, args.seed, args.workers
    )
    _write(args, lambda sink: emit_csv(rows, "welfare", sink))
    return EXIT_OK


def _cmd_learning_curve(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run_experiment(
        cfg, args.strategy, args.realizations, args.seed, args.workers, keep_traces=False
    )
    passage = result.convergence.first_passage(args.threshold)
    logger.info("Strong distance first below %g at slot %s", args.threshold, passage)
    _write(args, lambda sink: emit_csv(result, "learning-curve", sink))
    return EXIT_OK


def _report(line: str, stream: Optional[TextIO] = None) -> None:
    print(line, file=stream or sys.stderr)


def _cmd_verify(args: argparse.Namespace) -> int:
    cfg = _load(args)
    belief = cfg.prior
    order = cfg.initial_order()
    if args.matrix:
        try:
            text = Path(args.matrix).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"--matrix: {exc}"]) from exc
        matrix = read_matrix_csv(text).by_position(order)
    else:
        matrix = solve_equilibrium(cfg, belief, order)

    ok = True
    report = verify_nash(matrix, belief, cfg, order)
    if report.ok:
        _report("nash: ok")
    else:
        ok = False
        deviation = report.violation
        _report(
            f"nash: violated by customer {order[deviation.customer] + 1} "
            f"({deviation.reason}, gain {deviation.gain:.6g})"
        )

    homogeneous = cfg.utility.is_homogeneous()
    if homogeneous and cfg.unconstrained:
        threshold = threshold_check(matrix)
        ok = ok and threshold
        _report(f"threshold structure: {'ok' if threshold else 'violated'}")
    identical_beliefs = all(row == belief.probs[0] for row in belief.probs)
    if homogeneous and not cfg.unconstrained and identical_beliefs:
        try:
            n_t = compute_n_t(belief.row(0), cfg)
            shared = equal_share_check(matrix, n_t, cfg)
        except DomainError as exc:
            _report(f"equal sharing: skipped ({exc})")
        else:
            ok = ok and shared
            _report(f"equal sharing (n_T={n_t}): {'ok' if shared else 'violated'}")

    if args.out:
        _write(args, lambda sink: emit_csv(matrix.by_customer(order), "ne-matrix", sink))
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    mismatches = 0
    for k in range(args.count):
        cfg = random_instance(rng)
        solved = solve_equilibrium(cfg, cfg.prior)
        oracle = spne_oracle(cfg, cfg.prior)
        nash = verify_nash(solved, cfg.prior, cfg)
        if solved.entries != oracle.entries or not nash.ok:
            mismatches += 1
            logger.warning("Instance %d disagrees (N=%d, M=%d, L=%d)",
                           k, cfg.customers, cfg.dishes, cfg.effective_budget)
    _report(f"oracle check: {args.count - mismatches}/{args.count} instances agree")
    return EXIT_OK if mismatches == 0 else EXIT_FAILED


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("backend.app.main:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="buffetlab", description="Indian buffet game simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--realizations", type=int, default=DEFAULT_REALIZATIONS)
        cmd.add_argument("--workers", type=int, default=None)
        cmd.add_argument("--order", default=None, help="decision order, 1-based ids")
        cmd.add_argument("--out", default=None)
        return cmd

    simulate = experiment("simulate", "run one strategy and emit a CSV table")
    simulate.add_argument("--strategy", choices=STRATEGIES, default="best-response")
    simulate.add_argument("--kind", choices=sorted(CSV_HEADERS), default="welfare")
    simulate.set_defaults(handler=_cmd_simulate)

    sweep = experiment("sweep", "welfare table over a grid of signal qualities")
    sweep.add_argument("--w-grid", required=True, help="comma separated w values")
    sweep.add_argument("--strategy", choices=STRATEGIES, action="append")
    sweep.set_defaults(handler=_cmd_sweep)

    curve = experiment("learning-curve", "belief convergence per slot and dish")
    curve.add_argument("--strategy", choices=STRATEGIES, default="best-response")
    curve.add_argument("--threshold", type=float, default=0.2)
    curve.set_defaults(handler=_cmd_learning_curve)

    verify = sub.add_parser("verify", help="solve (or load) a matrix and check equilibrium")
    verify.add_argument("--config", required=True)
    verify.add_argument("--matrix", default=None, help="ne-matrix CSV to check instead")
    verify.add_argument("--order", default=None)
    verify.add_argument("--out", default=None)
    verify.set_defaults(handler=_cmd_verify)

    oracle = sub.add_parser("oracle-check", help="solver against brute force on random games")
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--count", type=int, default=200)
    oracle.set_defaults(handler=_cmd_oracle_check)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=_cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ConfigError as exc:
        for problem in exc.problems:
            _report(f"config error: {problem}")
        return EXIT_USAGE
    except BuffetError as exc:
        _report(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
