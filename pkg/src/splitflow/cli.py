"""Command line: ``splitflow gen | run | sweep``.

Exit codes: 0 ok, 2 usage, 3 I/O or unreadable trace, 4 incompatible
traffic, 5 failed ``--check``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from splitflow.core import Call, IncompatibleTraffic, MalformedTrace, U, WeightError, validate_weights
from splitflow.harness import (
    DEFAULT_GRID,
    FIGURES,
    dominance_violations,
    label_for,
    replay,
    results_to_csv,
    run_figure,
)
from splitflow.splitters import RrMode, SplitterKind
from splitflow.traffic import ParseError, TrafficConfig, generate, load_trace, parse_distribution, save_trace

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INCOMPATIBLE = 4
EXIT_CHECK = 5

_DEFAULTS = TrafficConfig()


def _default_seed() -> int:
    raw = os.environ.get("SPLITFLOW_SEED")
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        sys.exit(f"splitflow: SPLITFLOW_SEED must be an integer, got {raw!r}")


def _mix(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be within [0, 1], got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return value


def _dist(text: str):
    try:
        dist = parse_distribution(text)
        dist.validate(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return dist


def _weights(text: str):
    try:
        return validate_weights(float(x) for x in text.split(","))
    except (ValueError, WeightError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(text: str) -> list[float]:
    values = [float(x) for x in text.split(",") if x]
    for v in values:
        if not 0.001 <= v <= 0.5:
            raise argparse.ArgumentTypeError(f"grid value {v} outside [0.001, 0.5]")
    return values


def _seeds(text: str) -> list[int]:
    return [_seed(x) for x in text.split(",") if x]


def _figure(text: str) -> int:
    try:
        number = int(text)
    except ValueError:
        number = -1
    if number not in FIGURES:
        known = ", ".join(str(k) for k in FIGURES)
        raise argparse.ArgumentTypeError(f"unknown figure {text!r}; choose from {known}")
    return number


def _add_traffic_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("traffic")
    g.add_argument("--packets", type=_positive_int, default=_DEFAULTS.n_packets, help="packets per trace")
    g.add_argument("--mix", type=_mix, default=_DEFAULTS.class_mix, help="fraction of connectionless packets")
    g.add_argument("--seed", type=_seed, default=_default_seed(), help="PRNG seed (env SPLITFLOW_SEED)")
    g.add_argument("--size-dist", type=_dist, default=str(_DEFAULTS.size_dist), help="packet size in bytes")
    g.add_argument(
        "--bandwidth-dist", type=_dist, default=str(_DEFAULTS.call_bandwidth_dist), help="call bandwidth Q"
    )
    g.add_argument(
        "--call-length-dist",
        type=_dist,
        default=str(_DEFAULTS.packets_per_call_dist),
        help="packets per call (at mean bandwidth)",
    )
    g.add_argument(
        "--max-calls", type=_positive_int, default=_DEFAULTS.max_concurrent_calls, help="concurrent call cap"
    )
    g.add_argument("--uniform-call-sizes", action="store_true", help="one packet size per call")
    g.add_argument(
        "--fixed-call-length",
        action="store_true",
        help="do not scale a call's packet count by its bandwidth",
    )


def _traffic_from(args) -> TrafficConfig:
    return TrafficConfig(
        class_mix=args.mix,
        n_packets=args.packets,
        size_dist=args.size_dist,
        call_bandwidth_dist=args.bandwidth_dist,
        packets_per_call_dist=args.call_length_dist,
        max_concurrent_calls=args.max_calls,
        seed=args.seed,
        uniform_call_sizes=args.uniform_call_sizes,
        length_scales_with_bandwidth=not args.fixed_call_length,
    )


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="splitflow", description=__doc__, formatter_class=fmt)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of flag defaults (keys are flag names)")
    parser.add_argument("--config", type=Path, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a trace file", formatter_class=fmt, parents=[common])
    _add_traffic_flags(gen)
    gen.add_argument("-o", "--output", type=Path, required=True, help="trace file to write")

    run = sub.add_parser("run", help="replay one scenario, print a CSV row", formatter_class=fmt, parents=[common])
    run.add_argument("--algo", type=str.lower, choices=[k.value for k in SplitterKind], default="pwfr")
    run.add_argument("--weights", type=_weights, default="0.5,0.5", help="comma-separated routing weights")
    run.add_argument("--rr-mode", choices=[m.value for m in RrMode], default=RrMode.WEIGHTED_COUNT.value)
    run.add_argument("--trace", type=Path, help="trace file; if absent a trace is generated from the traffic flags")
    run.add_argument("--log-decisions", type=Path, help="write per-packet decisions as CSV")
    _add_traffic_flags(run)

    sweep = sub.add_parser("sweep", help="reproduce a figure's curves as CSV", formatter_class=fmt, parents=[common])
    sweep.add_argument("--figure", type=_figure, required=True, help=f"one of {sorted(FIGURES)}")
    sweep.add_argument("--check", action="store_true", help="exit 5 unless the figure's ordering holds")
    sweep.add_argument("--grid", type=_grid, default=",".join(str(x) for x in DEFAULT_GRID), help="p1 values")
    sweep.add_argument("--seeds", type=_seeds, default="1,2,3,4,5,6,7,8,9,10", help="seeds for 5-path figures")
    sweep.add_argument("--rr-mode", choices=[m.value for m in RrMode], default=RrMode.WEIGHTED_COUNT.value)
    sweep.add_argument("--workers", type=_positive_int, default=1, help="parallel worker processes")
    sweep.add_argument("-o", "--output", type=Path, help="CSV file (default stdout)")
    _add_traffic_flags(sweep)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Overlay defaults from ``--config``; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    try:
        data = json.loads(known.config.read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"splitflow: cannot read config: {exc}", file=sys.stderr)
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        parser.error(f"--config: {exc}")
    if not isinstance(data, dict):
        parser.error("--config: expected a JSON object")
    defaults = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        defaults[key.replace("-", "_")] = value if isinstance(value, bool) else str(value)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        known_dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in defaults.items() if k in known_dests})
        # string defaults are converted by the flag's type, so config values are validated too
        for action in sp._actions:
            if action.dest in defaults and isinstance(defaults[action.dest], str) and action.type:
                try:
                    sp.set_defaults(**{action.dest: action.type(defaults[action.dest])})
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    parser.error(f"--config {action.dest}: {exc}")


def _summary(trace) -> str:
    packets = trace.packets
    n_u = sum(1 for p in packets if p.cls is U)
    calls = sum(1 for e in trace.events if type(e) is Call)
    return (
        f"packets={len(packets)} connectionless={n_u} connection_oriented={len(packets) - n_u} "
        f"calls={calls} bytes={sum(p.size for p in packets)}"
    )


def cmd_gen(args) -> int:
    trace = generate(_traffic_from(args))
    try:
        save_trace(trace, args.output)
    except OSError as exc:
        print(f"splitflow: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_summary(trace))
    return 0


def cmd_run(args) -> int:
    if args.trace is not None:
        try:
            trace = load_trace(args.trace)
        except OSError as exc:
            print(f"splitflow: {exc}", file=sys.stderr)
            return EXIT_IO
        except (ParseError, MalformedTrace) as exc:
            print(f"splitflow: {args.trace}: {exc}", file=sys.stderr)
            return EXIT_IO
        traffic = "trace"
    else:
        trace = generate(_traffic_from(args))
        traffic = {1.0: "U", 0.0: "T"}.get(args.mix, "Mixed")
    algo = SplitterKind(args.algo)
    decisions: Optional[list] = [] if args.log_decisions else None
    try:
        result = replay(
            trace, args.weights, algo, RrMode(args.rr_mode), decisions, label_for(traffic, algo, args.weights), traffic
        )
    except IncompatibleTraffic as exc:
        print(f"splitflow: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    if decisions is not None:
        try:
            with open(args.log_decisions, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["seq", "call_id", "class", "path"])
                for packet, path in decisions:
                    cid = "-" if packet.call_id is None else packet.call_id
                    writer.writerow([packet.seq, cid, packet.cls.value, path])
        except OSError as exc:
            print(f"splitflow: {exc}", file=sys.stderr)
            return EXIT_IO
    sys.stdout.write(results_to_csv([result]))
    return 0


def cmd_sweep(args) -> int:
    fig = FIGURES[args.figure]
    results = run_figure(fig, _traffic_from(args), args.grid, args.seeds, RrMode(args.rr_mode), args.workers)
    n_paths = 3 if fig.family == "sweep" else 5
    text = results_to_csv(results, n_paths)
    if args.output is None:
        sys.stdout.write(text)
    else:
        try:
            args.output.write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            print(f"splitflow: {exc}", file=sys.stderr)
            return EXIT_IO
    if args.check:
        problems = dominance_violations(results, fig.better, fig.worse, fig.uniform_tie)
        for line in problems:
            print(f"FAIL {line}", file=sys.stderr)
        verdict = "holds" if not problems else "violated"
        print(f"figure {fig.number}: {fig.better.name} < {fig.worse.name} {verdict}", file=sys.stderr)
        if problems:
            return EXIT_CHECK
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    handler = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
