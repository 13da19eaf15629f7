"""Command-line entry point: ``clinadapt <command> ...``.

Schemas
-------
instance JSON::

    {"c": 2, "k": 4, "tuple": [1, 2, 2], "budget_kbps": 900,
     "streams": [{"id": 1, "name": "ecg", "kbps": 16, "first": true, "second": false}, ...]}

plan JSON::

    {"algorithm": "aggressive",
     "assignment": [{"id": 1, "exponent": 0, "rate": "1/1", "kbps": 16}, ...],
     "total_kbps": 16, "quality": "32/1"}

automaton JSON::

    {"initial": "stable",
     "states": [{"id": "stable", "name": "...", "streams": [<instance stream objects>]}],
     "transitions": [{"from": "stable", "to": "crisis", "trigger": "bp_above_180"}]}

event script JSON::

    [{"t_ms": 12000, "trigger": "bp_above_180"}, ...]

trace CSV (kbps with 1 kilobit = 1024 bits)::

    t_ms,kbps,lat,lon,alt_m,velocity
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from clinadapt import adapt
from clinadapt.metrics import report
from clinadapt.model import (
    Algorithm,
    InsufficientBudget,
    RateLadder,
    SchemaError,
    dumps_plan,
    format_fraction,
    loads_instance,
    parse_rational,
)
from clinadapt.priority import PriorityTuple

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SCHEMA = 3
EXIT_INFEASIBLE = 4
EXIT_NETWORK = 5

ALGO_CHOICES = [a.value for a in Algorithm]


def _tuple_arg(text: str) -> PriorityTuple:
    parts = text.replace(":", ",").replace("-", ",").split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected p0,p1,p2, got {text!r}")
    try:
        return PriorityTuple(*(Fraction(p) for p in parts))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _fraction_list(text: str) -> tuple[Fraction, ...]:
    return tuple(Fraction(x) for x in text.split(","))


def _metrics_dict(rep) -> dict:
    return {
        "total_quality": format_fraction(rep.total_quality),
        "full_quality": format_fraction(rep.full_quality),
        "total_kbps": format_fraction(rep.total_bandwidth),
        "adaptation_ratio": format_fraction(rep.adaptation_ratio),
        "per_class": {
            c.value: {
                "stream_count": st.stream_count,
                "avg_rate": None if st.avg_rate is None else format_fraction(st.avg_rate),
                "avg_quality_per_stream": None if st.avg_quality_per_stream is None
                else format_fraction(st.avg_quality_per_stream),
                "ratio": None if st.ratio is None else format_fraction(st.ratio),
            }
            for c, st in rep.per_class.items()
        },
    }


def cmd_adapt(args) -> int:
    instance = loads_instance(Path(args.instance).read_text())
    if args.c is not None or args.k is not None:
        ladder = instance.ladder
        instance = instance.with_ladder(RateLadder(args.c or ladder.base, args.k or ladder.depth))
    if args.budget is not None:
        instance = instance.with_budget(parse_rational(args.budget, "--budget"))
    plan = adapt.run(args.algo, instance)
    sys.stdout.write(dumps_plan(instance, plan))
    if args.metrics:
        Path(args.metrics).write_text(json.dumps(_metrics_dict(report(instance, plan)), indent=2) + "\n")
    else:
        rep = report(instance, plan)
        print(f"adaptation_ratio={format_fraction(rep.adaptation_ratio)} "
              f"quality={format_fraction(rep.total_quality)}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from clinadapt.sweep import SweepSpec, run_sweep, write_sweep

    spec = SweepSpec(
        w_fractions=args.w_fractions, k_values=args.k_values, tuples=tuple(args.tuple) if args.tuple else
        SweepSpec().tuples, trials=args.trials, states=args.states, max_streams=args.max_streams,
        seed=args.seed, oracle=args.oracle,
    )
    rows = run_sweep(spec)
    paths = write_sweep(rows, args.out_dir)
    print(f"{len(rows)} rows in {len(paths)} files under {args.out_dir}")
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    from clinadapt.sweep import compare_csv, oracle_compare

    rows = oracle_compare(args.instances, args.seed, args.max_n, args.k_values, args.max_size)
    text = compare_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    worst = {a: max(r.gap(a) for r in rows) for a in (Algorithm.COMPROMISE, Algorithm.ROUND_ROBIN, Algorithm.AGGRESSIVE)}
    print("max gap: " + " ".join(f"{a.value}={float(g):g}" for a, g in worst.items()), file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from clinadapt import simulate as sim

    automaton = sim.loads_automaton(Path(args.automaton).read_text())
    trace = sim.loads_trace(Path(args.trace).read_text())
    events = sim.loads_script(Path(args.script).read_text()) if args.script else []
    run = sim.SimulationRun(automaton, trace, tuple(events), Algorithm(args.algo),
                            RateLadder(args.c, args.k), args.tuple)
    rows = sim.replay(run)
    fmt = args.format or ("jsonl" if str(args.out).endswith((".jsonl", ".json")) else "csv")
    text = sim.dumps_timeline_jsonl(rows) if fmt == "jsonl" else sim.dumps_timeline_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = sim.summarize(rows)
    print(summary.line(), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_trace_synth(args) -> int:
    from clinadapt.simulate import dumps_trace, synth_trace

    trace = synth_trace(args.profile, args.duration_min, args.seed, args.level)
    text = dumps_trace(trace)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_probe_serve(args) -> int:
    from clinadapt.probe import serve

    serve(args.port, args.throttle_kbps, args.host)
    return EXIT_OK


def cmd_probe_run(args) -> int:
    from clinadapt.probe import ProbeConfig, run_probe

    config = ProbeConfig(args.host, args.port, args.connections, args.window_ms, args.chunk_bytes, args.samples)
    trace, results = run_probe(config, args.out)
    for s, r in zip(trace.samples, results):
        print(f"t_ms={s.t_ms} kbps={s.kbps}{' flag=' + r.flag if r.flag else ''}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="clinadapt",
        description="Priority-aware bandwidth adaptation for clinical multimedia streams.",
        epilog=__doc__.split("Schemas", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("adapt", help="adapt one instance and print the plan JSON")
    a.add_argument("instance", help="instance JSON file")
    a.add_argument("--budget", help="override budget_kbps (number or n/d)")
    a.add_argument("--algo", choices=ALGO_CHOICES, default="compromise")
    a.add_argument("--c", type=int, help="override ladder base c")
    a.add_argument("--k", type=int, help="override ladder depth k")
    a.add_argument("--metrics", help="write the metrics report JSON here instead of a stderr summary")
    a.set_defaults(func=cmd_adapt)

    s = sub.add_parser("sweep", help="budget sweep over random clinical models, CSV per (algorithm, k, tuple)")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--w-fractions", type=_fraction_list, default=tuple(Fraction(i, 10) for i in range(1, 11)))
    s.add_argument("--k-values", type=_int_list, default=(4, 6))
    s.add_argument("--tuple", type=_tuple_arg, action="append", help="repeatable; default 1,1,1 1,2,2 1,3,3")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--states", type=int, default=30)
    s.add_argument("--max-streams", type=int, default=15)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--oracle", action="store_true", help="also emit exact-optimum rows (slow)")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle-compare", help="heuristics vs exact optimum on small random instances")
    o.add_argument("--instances", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--max-n", type=int, default=6)
    o.add_argument("--k-values", type=_int_list, default=(1, 2, 3))
    o.add_argument("--max-size", type=int, default=64)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle_compare)

    m = sub.add_parser("simulate", help="replay a bandwidth trace through a clinical automaton")
    m.add_argument("automaton")
    m.add_argument("trace")
    m.add_argument("script", nargs="?", help="event script JSON")
    m.add_argument("--algo", choices=ALGO_CHOICES, default="compromise")
    m.add_argument("--c", type=int, default=2)
    m.add_argument("--k", type=int, default=4)
    m.add_argument("--tuple", type=_tuple_arg, default=PriorityTuple.of(1, 2, 2))
    m.add_argument("--out")
    m.add_argument("--format", choices=["csv", "jsonl"])
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("trace", help="bandwidth trace tools")
    tsub = t.add_subparsers(dest="trace_command", required=True)
    ts = tsub.add_parser("synth", help="synthesize a 4-second bandwidth trace")
    ts.add_argument("--profile", choices=["rural", "urban", "flat"], default="rural")
    ts.add_argument("--duration-min", type=float, default=47)
    ts.add_argument("--seed", type=int, default=0)
    ts.add_argument("--level", type=float, default=1000, help="kbps for the flat profile")
    ts.add_argument("--out")
    ts.set_defaults(func=cmd_trace_synth)

    pr = sub.add_parser("probe", help="bandwidth profiler server and client")
    psub = pr.add_subparsers(dest="probe_command", required=True)
    ps = psub.add_parser("serve", help="run the chunk server")
    ps.add_argument("--host", default="0.0.0.0")
    ps.add_argument("--port", type=int, default=8080)
    ps.add_argument("--throttle-kbps", type=float)
    ps.set_defaults(func=cmd_probe_serve)
    pc = psub.add_parser("run", help="sample throughput and write a trace CSV")
    pc.add_argument("--host", default="127.0.0.1")
    pc.add_argument("--port", type=int, default=8080)
    pc.add_argument("--samples", type=int, default=10)
    pc.add_argument("--window-ms", type=int, default=4000)
    pc.add_argument("--connections", type=int, default=4)
    pc.add_argument("--chunk-bytes", type=int, default=125_000)
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=cmd_probe_run)
    return p


def main(argv=None) -> int:
    from clinadapt.probe import BindFailure, ConnectFailure

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InsufficientBudget as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SchemaError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ConnectFailure, BindFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
