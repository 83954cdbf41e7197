"""``contextserv`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import socket
import sys
import time
from pathlib import Path

from .bench import bench_aspect_vs_inline, bench_empty_activation, bench_selection
from .bundle import parse_bundle
from .community.broker import SelectionConstraint
from .control import ControlChannel, open_control, parse_command
from .errors import ContextServError, NoEligibleProvider
from .process.engine import EXIT_CODES
from .process.ir import Mode, dump_ir
from .process.transform import transform
from .runtime import build_runtime, prepare_run
from .validation import validate_bundle

DEFAULT_SEED = 0


def _ints(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one value")
    return vals


def _constraint(text: str) -> SelectionConstraint:
    try:
        return SelectionConstraint.parse(text)
    except (ValueError, ContextServError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_valid(path: str):
    bundle = parse_bundle(path)
    report = validate_bundle(bundle)
    for line in report.lines():
        print(line, file=sys.stderr)
    return bundle, report.ok


def cmd_validate(args) -> int:
    bundle = parse_bundle(args.bundle)
    report = validate_bundle(bundle)
    for line in report.lines():
        print(line)
    print(f"VALID {len(report.violations)} error(s) {len(report.warnings)} warning(s)")
    return 0 if report.ok else 1


def cmd_transform(args) -> int:
    bundle, ok = _load_valid(args.bundle)
    if not ok:
        return 1
    text = dump_ir(transform(bundle, Mode(args.mode), args.process))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    bundle, ok = _load_valid(args.bundle)
    if not ok:
        print("error: bundle failed validation; nothing was executed", file=sys.stderr)
        return 1
    rt = build_runtime(bundle, args.seed, log_dir=args.log_dir)
    channel = closer = None
    engine, inst, exe = prepare_run(bundle, Mode(args.mode), args.seed, process=args.process, runtime=rt)
    if args.control:
        channel = ControlChannel(engine.store, rt.broker, clock=rt.clock,
                                 out=lambda s: print(f"CONTROL {s}", file=sys.stderr))
        closer = open_control(args.control, channel)
        engine.hooks.append(channel.hook)
    if args.pace_ms:
        engine.hooks.append(lambda e, i, n: time.sleep(args.pace_ms / 1000))
    try:
        engine.run(inst)
    finally:
        if closer is not None:
            closer()
    for line in inst.trace_lines():
        print(line)
    for line in inst.activation_lines():
        print(line)
    if channel is not None:
        for r in channel.responses:
            print(f"CONTROL {r}")
        for c in channel.pending:
            print(f"CONTROL PENDING {c}")
    for name in sorted(inst.env):
        print(f"VAR {name} {json.dumps(inst.env[name], sort_keys=True)}")
    tail = f" {inst.fault_node} {inst.fault_reason}" if inst.fault_reason else ""
    print(f"RESULT {inst.id} {inst.status.value}{tail}")
    return EXIT_CODES[inst.status]


def cmd_select(args) -> int:
    bundle, ok = _load_valid(args.bundle)
    if not ok:
        return 1
    rt = build_runtime(bundle, args.seed, log_dir=args.log_dir)
    rt.clock.set(args.at)
    constraints = args.constraint if args.constraint else None
    try:
        result = rt.broker.select_context_source(args.community, constraints, args.at)
    except NoEligibleProvider as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for pid, u in result.ranked:
        print(f"RANK {pid} {u:.10f}")
    print(f"CHOSEN {result.chosen}")
    return 0


def _emit(report, args):
    for line in report.to_lines():
        print(line)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(report.to_csv())
    if args.plot:
        from .plotting import plot_report

        print(f"PLOT {plot_report(report, args.plot)}")


def cmd_bench_selection(args) -> int:
    _emit(bench_selection(args.n, args.reps, args.seed, full=args.full), args)
    return 0


def cmd_bench_aspect(args) -> int:
    if args.vars:
        _emit(bench_empty_activation(args.vars, args.reps), args if not args.csv else _suffixed(args, "empty"))
    if args.rules:
        _emit(bench_aspect_vs_inline(args.rules, args.levels, args.reps, seed=args.seed),
              args if not args.csv else _suffixed(args, "inline"))
    return 0


def _suffixed(args, tag: str):
    p = Path(args.csv)
    return argparse.Namespace(**{**vars(args), "csv": str(p.with_name(f"{p.stem}-{tag}{p.suffix}"))})


def cmd_rules(args) -> int:
    line = " ".join((f"rule-{args.action}", *args.args))
    try:
        parse_command(line)
    except ContextServError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with socket.socket(socket.AF_UNIX, socket.SOCK_STREAM) as s:
        try:
            s.connect(args.socket)
        except OSError as exc:
            print(f"error: cannot reach control socket {args.socket}: {exc}", file=sys.stderr)
            return 1
        with s.makefile("rw", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            reply = fh.readline().strip()
    print(reply)
    return 0 if reply.startswith("OK") else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contextserv", description="Context-aware service processes with hot-swappable rules.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a bundle's well-formedness")
    v.add_argument("bundle")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("transform", help="lower a bundle to the executable IR")
    t.add_argument("bundle")
    t.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.ASPECT.value)
    t.add_argument("--out")
    t.add_argument("--process")
    t.set_defaults(func=cmd_transform)

    r = sub.add_parser("run", help="execute a process; exit 0 completed, 2 faulted, 3 aborted")
    r.add_argument("bundle")
    r.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.ASPECT.value)
    r.add_argument("--seed", type=int, default=DEFAULT_SEED)
    r.add_argument("--control", help="stdin, socket:PATH, or a command script file")
    r.add_argument("--process")
    r.add_argument("--log-dir", help="monitor-log directory (default: $CONTEXTSERV_LOG_DIR)")
    r.add_argument("--pace-ms", type=int, default=0, help="sleep before each step, for interactive control")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("select", help="rank a community's providers")
    s.add_argument("bundle")
    s.add_argument("--community", required=True)
    s.add_argument("--constraint", type=_constraint, action="append", help="attr:max:v or attr:min:v")
    s.add_argument("--at", type=int, default=0, help="evaluation time in ms")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--log-dir")
    s.set_defaults(func=cmd_select)

    bs = sub.add_parser("bench-selection", help="time provider selection against community size")
    bs.add_argument("--n", type=_ints, default=[100, 250, 500, 1000])
    bs.add_argument("--reps", type=int, default=20)
    bs.add_argument("--seed", type=int, default=DEFAULT_SEED)
    bs.add_argument("--full", action="store_true", help="time the whole retrieve pipeline")
    bs.add_argument("--csv", help="write the CSV table here instead of stdout")
    bs.add_argument("--plot", metavar="DIR", help="also render a PNG figure into DIR")
    bs.set_defaults(func=cmd_bench_selection)

    ba = sub.add_parser("bench-aspect", help="time aspect activation and aspect vs inline rules")
    ba.add_argument("--vars", type=_ints, default=[0, 25, 50, 75, 100])
    ba.add_argument("--rules", type=_ints, default=[10, 100])
    ba.add_argument("--levels", type=_ints, default=[1, 10, 30])
    ba.add_argument("--reps", type=int, default=10)
    ba.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ba.add_argument("--csv")
    ba.add_argument("--plot", metavar="DIR")
    ba.set_defaults(func=cmd_bench_aspect)

    ru = sub.add_parser("rules", help="send a rule command to a running process's control socket")
    ru.add_argument("action", choices=["add", "remove", "replace", "list"])
    ru.add_argument("args", nargs="*")
    ru.add_argument("--socket", required=True)
    ru.set_defaults(func=cmd_rules)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContextServError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
