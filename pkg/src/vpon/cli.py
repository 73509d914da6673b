"""
Command line entry point.

    vpon run CONFIG [--set key=value ...] [--pcap PATH] [--seed N] [--duration-ns N]
    vpon compare CONFIG [--pcap PATH] [--json PATH] [--seed N] [--duration-ns N]

Exit status: 0 on success, 2 on a config error, 1 on an I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .engine import compare, run
from .errors import ConfigError, IoFailure
from .metrics import export_csv, export_json
from .scenario import Mode, apply_overrides, load_config, scenario_from_config

log = logging.getLogger("vpon")


def _fmt_us(ns):
    return "-" if ns is None else f"{ns / 1000:.1f}"


def format_run_table(doc):
    """Render the summary of one run from its exported JSON document."""
    lines = [f"mode={doc['mode']} frames={doc['frames_emitted']} drops={doc['drops']} "
             f"host_map_slips={doc['host_map_slips']} trace_hash={doc['trace_hash']}",
             f"{'class':<11} {'path':<6} {'count':>7} {'mean_us':>9} {'p50_us':>9} "
             f"{'p95_us':>9} {'p99_us':>9} {'max_us':>9}"]
    for g in doc["summary"]["groups"]:
        s = g["grant_latency_ns"]
        lines.append(f"{g['tcont_class']:<11} {g['path']:<6} {s['count']:>7} "
                     + " ".join(f"{_fmt_us(s[k]):>9}" for k in ("mean", "p50", "p95", "p99", "max")))
    return "\n".join(lines)


def format_compare_table(doc):
    """Render a three-mode comparison from its exported JSON document."""
    classes = sorted({c for m in doc["mean_grant_latency_ns"].values() for c in m})
    base = doc["labels"][0]
    head = f"{'mode':<16}" + "".join(f" {c + '_mean_us':>18} {'delta_us':>9}" for c in classes)
    lines = [f"mean grant latency (delta = {base} minus mode, positive is faster)", head]
    for lbl in doc["labels"]:
        row = f"{lbl:<16}"
        for c in classes:
            row += (f" {_fmt_us(doc['mean_grant_latency_ns'][lbl][c]):>18}"
                    f" {_fmt_us(doc['deltas_ns'][lbl][c]):>9}")
        lines.append(row)
    return "\n".join(lines)


def _load(args, extra_overrides=()):
    doc = load_config(args.config)
    overrides = list(extra_overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.duration_ns is not None:
        overrides.append(f"duration_ns={args.duration_ns}")
    doc = apply_overrides(doc, overrides)
    outputs = doc.pop("outputs", None) or {}
    scenario = scenario_from_config({**doc, "outputs": outputs})
    return scenario, outputs


def cmd_run(args):
    scenario, outputs = _load(args, args.set or ())
    pcap = args.pcap or outputs.get("pcap_path")
    report = run(scenario, {"pcap": pcap} if pcap else None)
    doc = report.to_dict()
    if outputs.get("csv_path"):
        export_csv(report.summary, outputs["csv_path"])
    if outputs.get("samples_path"):
        export_csv(report.samples, outputs["samples_path"])
    if outputs.get("json_path"):
        export_json(doc, outputs["json_path"])
    log.info("outputs written: %s", {k: v for k, v in outputs.items() if v})
    print(format_run_table(json.loads(json.dumps(doc))))
    return 0


def cmd_compare(args):
    scenario, outputs = _load(args)
    scenarios = [scenario.with_mode(m) for m in
                 (Mode.STANDARD, Mode.FAST_INTERCEPT, Mode.FIXED_ALLOCATION)]
    pcap = args.pcap or outputs.get("pcap_path")
    report = compare(scenarios)
    if pcap:
        # capture the fast-path run, the mechanism under demonstration
        run(scenarios[1], {"pcap": pcap})
    doc = json.loads(json.dumps(report.to_dict()))
    json_path = args.json or outputs.get("json_path")
    if json_path:
        export_json(doc, json_path)
    print(format_compare_table(doc))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="vpon", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config")
        sp.add_argument("--pcap", help="write a nanosecond PCAP capture here")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--duration-ns", type=int)

    r = sub.add_parser("run", help="run one scenario")
    common(r)
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, dotted keys allowed")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run Standard, FastIntercept and FixedAllocation")
    common(c)
    c.add_argument("--json", help="combined JSON output path")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (IoFailure, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
