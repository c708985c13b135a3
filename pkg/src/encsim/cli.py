"""Command line entry point: ``encsim <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
file-system errors. Diagnostics go to stderr; ``ENCSIM_LOG`` sets the log
level (default WARNING).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import ConfigError, EncsimError
from .harness import (
    FidelityConfig,
    evaluate_fidelity,
    load_config,
    read_encounter_events_csv,
    read_messages_csv,
    compute_metrics,
    replay_route,
    run_scenario,
    source_components,
    trace_from_events,
    write_encounter_events_csv,
    write_messages_csv,
    write_positions_csv,
)
from .mobility import Arena
from .personality import FitConfig, fit_personality
from .plausible import InferConfig, infer_plausible_positions
from .spectrum import PeakPolicy, analyze_trace
from .trace import parse_encounter_csv

logger = logging.getLogger("encsim")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([("argv", message)])


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text, out_dir=None, name=None):
    if out_dir is not None and name is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        Path(out_dir, name).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _write(out_dir, name, data: bytes):
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    Path(out_dir, name).write_bytes(data)


def _overrides(args):
    return {
        "seed": getattr(args, "seed", None),
        "mode": getattr(args, "mode", None),
        "sigma": getattr(args, "sigma", None),
        "epsilon": getattr(args, "epsilon", None),
    }


def cmd_analyze(args):
    trace = parse_encounter_csv(Path(args.trace).read_bytes())
    report = analyze_trace(trace, args.bin, PeakPolicy(args.c, args.max_peaks))
    _emit(_dump(report), args.out_dir, "spectrum.json")


def cmd_fit(args):
    trace = parse_encounter_csv(Path(args.trace).read_bytes())
    cfg = FitConfig(args.bin, PeakPolicy(args.c, args.max_peaks), args.top_m, args.drag)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for node in sorted(trace.nodes):
        pers = fit_personality(trace, node, cfg)
        (out_dir / f"{node}.json").write_text(pers.dumps(), encoding="utf-8")
        written.append(f"{node}.json")
    sys.stdout.write(_dump({"personalities": written}))


def cmd_simulate(args):
    cfg = load_config(args.config, overrides=_overrides(args))
    result = run_scenario(cfg)
    if args.out_dir:
        _write(args.out_dir, "positions.csv", write_positions_csv(result.positions))
        _write(args.out_dir, "encounters.csv", write_encounter_events_csv(result.encounters))
        _write(args.out_dir, "messages.csv", write_messages_csv(result.messages))
    _emit(_dump(result.metrics.to_dict()), args.out_dir, "metrics.json")


def cmd_infer(args):
    trace = parse_encounter_csv(Path(args.trace).read_bytes())
    arena = load_config(args.config).arena if args.config else Arena()
    cfg = InferConfig(args.bin, args.max_iters, args.step_size, seed=args.seed or 0)
    pt = infer_plausible_positions(trace, arena, cfg)
    summary = {
        "nodes": list(pt.nodes),
        "slots": pt.n_slots,
        "slot_width_s": pt.slot_width,
        "satisfaction_ratio": pt.satisfaction_ratio,
        "infeasible_slots": list(pt.infeasible_slots),
    }
    if args.out_dir:
        _write(args.out_dir, "plausible_positions.csv", pt.to_csv())
        _emit(_dump(summary), args.out_dir, "plausible_summary.json")
    else:
        sys.stdout.write(pt.to_csv().decode("utf-8"))


def cmd_route(args):
    cfg = load_config(args.config, overrides=_overrides(args))
    events = read_encounter_events_csv(Path(args.encounters).read_bytes())
    messages, metrics = replay_route(cfg, events)
    if args.out_dir:
        _write(args.out_dir, "messages.csv", write_messages_csv(messages))
    _emit(_dump(metrics.to_dict()), args.out_dir, "metrics.json")


def cmd_report(args):
    cfg = load_config(args.config, overrides=_overrides(args))
    logs = Path(args.out_dir)
    events = read_encounter_events_csv((logs / "encounters.csv").read_bytes())
    messages_path = logs / "messages.csv"
    messages = read_messages_csv(messages_path.read_bytes()) if messages_path.exists() else []
    metrics = compute_metrics(cfg, events, messages)
    trace = trace_from_events(events, cfg.duration, cfg.node_ids)
    fidelity = evaluate_fidelity(
        trace, source_components(cfg.personalities), FidelityConfig(args.bin, PeakPolicy(args.c, args.max_peaks))
    )
    _emit(_dump({"metrics": metrics.to_dict(), "fidelity": fidelity.to_dict()}), logs, "report.json")


def build_parser():
    parser = _Parser(prog="encsim", description="Personality-driven DTN mobility simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def peaks(p):
        p.add_argument("--c", type=float, default=2.0, help="peak threshold: mean + c*std")
        p.add_argument("--max-peaks", type=int, default=4)

    p = sub.add_parser("analyze", help="per-pair encounter spectra")
    p.add_argument("--trace", required=True)
    p.add_argument("--bin", type=float, default=86400.0, help="bin width in seconds")
    p.add_argument("--out-dir")
    peaks(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit personality files from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--bin", type=float, default=86400.0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--top-m", type=int, default=1)
    p.add_argument("--drag", type=float, default=0.0)
    peaks(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run a scenario config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--mode", choices=["targeted", "dissemination"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="plausible positions from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--config", help="scenario config supplying the arena")
    p.add_argument("--bin", type=float, default=60.0, help="slot width in seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--step-size", type=float, default=0.5)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("route", help="replay an encounter log through profile-cast")
    p.add_argument("--config", required=True)
    p.add_argument("--encounters", required=True)
    p.add_argument("--mode", choices=["targeted", "dissemination"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("report", help="metrics and fidelity from simulate logs")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True, help="directory holding the simulate logs")
    p.add_argument("--bin", type=float, default=60.0)
    p.add_argument("--seed", type=int)
    peaks(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("ENCSIM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except ConfigError as exc:
        for field, msg in exc.problems:
            print(f"encsim: config error: {field + ': ' if field else ''}{msg}", file=sys.stderr)
        return 1
    except EncsimError as exc:
        print(f"encsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"encsim: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
