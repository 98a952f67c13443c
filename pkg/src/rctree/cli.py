"""Command-line interface: ``rctree {fit,infer,simulate,validate}``.

Exit codes: 0 success, 1 input or usage error, 2 internal error.
``RCT_LOG`` (error, info, debug) sets logging verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .dataset import DatasetError, load_csv
from .impurity import measure_by_name
from .inference import infer_all_leaves
from .mechanism import Adaptive, Fixed
from .simulate import GenConfig, parse_method, run_experiment, write_metrics_csv
from .tree import grow_rct
from .treeio import TreeFormatError, file_sha256, load_tree, save_tree
from .validate import run_oracles

log = logging.getLogger("rctree")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2
INTERVAL_COLUMNS = ["leaf_id", "n_leaf", "pi_hat", "sigma_hat", "ci_lower", "ci_upper", "flags"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; usage errors here map to 1
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 0.5:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 0.5], got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rctree", description="Randomized classification trees with selective inference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="grow a randomized tree and write it as JSON")
    fit.add_argument("--input", required=True, type=Path)
    fit.add_argument("--outcome", required=True, help="name (or index) of the 0/1 outcome column")
    fit.add_argument("--depth", type=int, default=3)
    fit.add_argument("--min-samples", type=_positive_int, default=10)
    temp = fit.add_mutually_exclusive_group(required=True)
    temp.add_argument("--epsilon", type=float, help="fixed temperature at every node")
    temp.add_argument("--tau", type=float, help="adaptive temperature tau * k / sum(gains)")
    fit.add_argument("--measure", default="gini")
    fit.add_argument("--seed", type=int, required=True)
    fit.add_argument("--out", required=True, type=Path)

    inf = sub.add_parser("infer", help="selective confidence intervals for every leaf")
    inf.add_argument("--input", required=True, type=Path)
    inf.add_argument("--outcome", required=True)
    inf.add_argument("--tree", required=True, type=Path)
    inf.add_argument("--alpha", type=_alpha, default=0.1)
    inf.add_argument("--quad-points", type=int, default=2049)
    inf.add_argument("--out", required=True, type=Path)

    sim = sub.add_parser("simulate", help="Monte-Carlo comparison of Naive, DS and RCT")
    sim.add_argument("--k", type=float, default=3.0)
    sim.add_argument("--reps", type=_positive_int, default=200)
    sim.add_argument("--methods", default="naive,ds:0.3,rct:0.1,rct:1/15,rct:0.05")
    sim.add_argument("--alpha", type=_alpha, default=0.1)
    sim.add_argument("--min-samples", type=_positive_int, default=10)
    sim.add_argument("--depth", type=_positive_int, default=3)
    sim.add_argument("--quad-points", type=int, default=2049)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--workers", type=_positive_int, default=1)
    sim.add_argument("--out", required=True, type=Path)

    val = sub.add_parser("validate", help="run the built-in oracle suite")
    val.add_argument("--quick", action="store_true", help="skip the pivot-uniformity mini-study")
    return parser


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_fit(args) -> int:
    data = load_csv(args.input, args.outcome)
    if args.depth < 0:
        raise UsageError(f"--depth must be >= 0, got {args.depth}")
    policy = Fixed(args.epsilon) if args.epsilon is not None else Adaptive(args.tau)
    fit = grow_rct(data, args.depth, args.min_samples, policy, measure_by_name(args.measure), seed=args.seed)
    save_tree(fit, data, args.out, file_sha256(args.input))
    log.info("wrote %s: %d leaves", args.out, len(fit.leaves))
    return EXIT_OK


def cmd_infer(args) -> int:
    data = load_csv(args.input, args.outcome)
    fit = load_tree(args.tree, data, file_sha256(args.input))
    if fit.config.policy is None:
        raise TreeFormatError("tree has no temperature policy; selective inference needs a randomized tree")
    results = infer_all_leaves(fit, data, args.alpha, num_points=args.quad_points)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INTERVAL_COLUMNS)
        for r in results:
            ci = r.interval
            lo, hi = (ci.lower, ci.upper) if ci is not None else (float("nan"), float("nan"))
            w.writerow([r.leaf_id, r.n_leaf, _fmt(r.pi_hat), _fmt(r.sigma_hat), _fmt(lo), _fmt(hi), ";".join(r.flags)])
    log.info("wrote %s: %d leaves", args.out, len(results))
    return EXIT_OK


def cmd_simulate(args) -> int:
    kwargs = dict(depth=args.depth, min_samples=args.min_samples, alpha=args.alpha, quad_points=args.quad_points)
    try:
        methods = [parse_method(m, **kwargs) for m in args.methods.split(",") if m.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--methods: {exc}") from exc
    if not methods:
        raise UsageError("--methods is empty")
    gen = GenConfig(k=args.k, seed=args.seed, replications=args.reps)
    table = run_experiment(gen, methods, workers=args.workers)
    summary = write_metrics_csv(table, args.out)
    for row in table.summary():
        if row["metric"] != "n_leaves":
            print(f"{row['method']:>12s}  {row['metric']:<15s} mean={row['mean']:.4f} sd={row['std']:.4f}")
    log.info("wrote %s and %s", args.out, summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_oracles(quick=args.quick)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_INTERNAL


COMMANDS = {"fit": cmd_fit, "infer": cmd_infer, "simulate": cmd_simulate, "validate": cmd_validate}


def _configure_logging() -> None:
    level = os.environ.get("RCT_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DatasetError, TreeFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
