"""Command line interface: track, bench, validate.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from circtrack.graph_model import read_graph_dump, validate_network
from circtrack.tracking_pipeline import (
    FORMATS,
    SOLVERS,
    PipelineConfig,
    benchmark,
    config_from_mapping,
    format_benchmark_table,
    merge_config,
    parse_config_file,
    run_tracking,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circtrack", exit_on_error=False)
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser("track", help="run the tracking pipeline", exit_on_error=False)
    track.add_argument("--input", help="detection file")
    track.add_argument("--format", choices=FORMATS)
    track.add_argument("--solver", choices=SOLVERS)
    track.add_argument("--iters", type=int, dest="iterations")
    track.add_argument("--config", help="flat key=value config file")
    track.add_argument("--output", help="trajectory CSV path")
    track.add_argument("--report", help="run report path")

    bench = sub.add_parser("bench", help="compare solver wall time", exit_on_error=False)
    bench.add_argument("--solvers", default="cinda,ssp,dssp",
                       help="comma separated subset of cinda,ssp,dssp")
    bench.add_argument("--sizes", default="1000",
                       help="comma separated detection counts")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--frames", type=int, default=100)

    val = sub.add_parser("validate", help="check a graph dump", exit_on_error=False)
    val.add_argument("--input", required=True, help="graph dump path")
    return parser


def _cmd_track(args) -> int:
    values = parse_config_file(args.config) if args.config else {}
    config = config_from_mapping(values) if values else PipelineConfig(input="")
    overrides = {}
    for key in ("input", "format", "solver", "iterations", "output", "report"):
        flag = getattr(args, key, None)
        if flag is not None:
            overrides[key] = flag
    config = merge_config(config, overrides)
    if not config.input:
        raise ValueError("no input file given (use --input or a config file)")
    ts, report = run_tracking(config)
    print(f"tracked {report.detection_count} detections into "
          f"{report.trajectory_count} trajectories "
          f"(cost {report.total_cost_scaled}, {report.total_cost:.6f} unscaled)")
    if config.output:
        print(f"trajectories written to {config.output}")
    if config.report:
        print(f"report written to {config.report}")
    return 0


def _cmd_bench(args) -> int:
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ValueError(f"bad --sizes value {args.sizes!r}") from None
    if not solvers or not sizes:
        raise ValueError("bench needs at least one solver and one size")
    rows = benchmark(solvers, sizes, seed=args.seed, frames=args.frames)
    print(format_benchmark_table(rows))
    return 0


def _cmd_validate(args) -> int:
    net = read_graph_dump(args.input)
    report = validate_network(net)
    for name, ok in report.checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    if report.ok:
        print(f"valid network: n={net.node_count} m={net.arc_count} C={net.max_abs_cost}")
        return 0
    print(f"invalid network: {report.first_violation}", file=sys.stderr)
    return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "track":
            return _cmd_track(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_validate(args)
    except (argparse.ArgumentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
