"""Operator entry point: wastage tables, scenario simulation, and the live service.

Exit codes: 0 success, 2 usage error (argparse), 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .energy import EnergyModel, WastageReport, savings_document, table1_report
from .simharness import (
    SystemConfig,
    load_scenario,
    negligence_baseline,
    run_scenario,
    write_trace_jsonl,
)

MS_PER_HOUR = 3_600_000


def _parse_negligence_list(raw: str) -> List[float]:
    try:
        values = [float(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad negligence list: {raw!r}")
    if not values:
        raise argparse.ArgumentTypeError("negligence list is empty")
    for v in values:
        if not 0 <= v <= 100:
            raise argparse.ArgumentTypeError(f"negligence must be in [0, 100], got {v}")
    return values


def _report_row(report: WastageReport) -> dict:
    return {
        "days": report.days,
        "hours_per_day": report.hours_per_day,
        "negligence_pct": report.negligence_pct,
        "wasted_kwh": round(report.wasted_kwh, 4),
        "utilized_kwh": round(report.utilized_kwh, 4),
    }


def cmd_table1(args: argparse.Namespace) -> int:
    model = EnergyModel(n_lights=args.lights, n_fans=args.fans)
    reports = [
        table1_report(model, args.days, args.hours, pct) for pct in args.negligence
    ]
    rows = [_report_row(r) for r in reports]
    if args.json:
        text = json.dumps(rows, indent=2, sort_keys=True)
    else:
        lines = [
            f"Wastage over {args.days} days x {args.hours} h/day "
            f"({model.n_lights} lights, {model.n_fans} fans)",
            f"{'Negligence %':>12}  {'Wasted kWh':>12}  {'Utilized kWh':>12}",
        ]
        for row in rows:
            lines.append(
                f"{row['negligence_pct']:>12g}  {row['wasted_kwh']:>12.4f}  "
                f"{row['utilized_kwh']:>12.4f}"
            )
        text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        schedule, noise = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(
            f"error: {args.scenario}:{exc.lineno}:{exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        return 1
    except (KeyError, ValueError) as exc:
        print(f"error: bad scenario {args.scenario}: {exc}", file=sys.stderr)
        return 1

    if args.seed is not None and noise is not None:
        noise = replace(noise, rng_seed=args.seed)

    config = SystemConfig(min_update_interval_ms=args.interval)
    result = run_scenario(schedule, noise, config)
    baseline = negligence_baseline(schedule, args.negligence, config.model)

    auto_kwh = result.ledger.total_kwh
    baseline_kwh = baseline.total_kwh
    duration_h = schedule.duration_ms / MS_PER_HOUR
    days = args.days if args.days is not None else 1
    hours = args.hours if args.hours is not None else duration_h
    report = WastageReport(
        days=days,
        hours_per_day=hours,
        negligence_pct=args.negligence,
        wasted_kwh=baseline_kwh - auto_kwh,
        utilized_kwh=auto_kwh,
    )
    doc = savings_document(report, baseline_kwh, auto_kwh)

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_trace_jsonl(out / "trace.jsonl", result.trace)
        with open(out / "actuation_log.jsonl", "w", encoding="utf-8") as fh:
            for t_ms, bank in result.actuation_log:
                on_ids = [a.id for a in bank.appliances if a.on]
                fh.write(json.dumps({"t_ms": t_ms, "on": on_ids}) + "\n")
        feed = {
            "channel": {"id": config.channel_id, "field1": "count"},
            "feeds": [e.feed_row() for e in result.telemetry_entries],
        }
        (out / "telemetry.json").write_text(
            json.dumps(feed, indent=2, sort_keys=True) + "\n"
        )
        (out / "savings.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )

    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(f"scenario: {args.scenario}")
        print(f"  crossings detected: {len(result.crossings)}  final count: {result.final_count}")
        print(f"  auto-mode energy:   {auto_kwh:.4f} kWh")
        print(f"  baseline energy:    {baseline_kwh:.4f} kWh ({args.negligence:g}% negligence)")
        if "savings_pct" in doc:
            print(f"  savings:            {doc['savings_pct']:.4f} %")
        else:
            print("  savings:            undefined (zero baseline)")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import threading

    import uvicorn

    from .service import Gateway, GatewayConfig, SimClock, create_app, feed_trace
    from .simharness import read_trace_jsonl

    overrides = {}
    if args.port is not None:
        overrides["port"] = args.port
    if args.user is not None:
        overrides["user"] = args.user
    if args.password is not None:
        overrides["password"] = args.password
    if args.window is not None:
        overrides["window_ms"] = args.window
    if args.debounce is not None:
        overrides["debounce_ms"] = args.debounce
    if args.interval is not None:
        overrides["min_update_interval_ms"] = args.interval
    if args.channel_key is not None:
        overrides["write_api_key"] = args.channel_key
    config = GatewayConfig.from_env(**overrides)

    trace = None
    if args.feed:
        try:
            trace = read_trace_jsonl(args.feed)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    gateway = Gateway(config, clock=SimClock(speed=args.speed)).start()
    app = create_app(gateway)
    if trace:
        threading.Thread(
            target=feed_trace, args=(gateway, trace), daemon=True, name="apcs-feeder"
        ).start()

    try:
        uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"error: could not serve on port {config.port}: {exc}", file=sys.stderr)
        return 1
    finally:
        gateway.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apcs",
        description="Occupancy-driven power conservation: reports, simulation, live service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_table = sub.add_parser("table1", help="print the wastage/utilization table")
    p_table.add_argument("--days", type=int, required=True)
    p_table.add_argument("--hours", type=float, required=True, help="hours per day")
    p_table.add_argument(
        "--negligence",
        type=_parse_negligence_list,
        required=True,
        help="comma-separated negligence percentages, e.g. 90,50,10",
    )
    p_table.add_argument("--lights", type=int, default=4)
    p_table.add_argument("--fans", type=int, default=4)
    p_table.add_argument("--json", action="store_true", help="machine-readable output")
    p_table.add_argument("--out", help="also write the rows as JSON to this file")
    p_table.set_defaults(func=cmd_table1)

    p_sim = sub.add_parser("simulate", help="replay a scenario and report savings")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--negligence", type=float, default=50.0)
    p_sim.add_argument("--seed", type=int, default=None, help="override the noise seed")
    p_sim.add_argument("--interval", type=int, default=0, help="telemetry rate limit (ms)")
    p_sim.add_argument("--days", type=int, default=None, help="period metadata for the report")
    p_sim.add_argument("--hours", type=float, default=None, help="hours/day metadata")
    p_sim.add_argument("--out", help="directory for trace/log/telemetry/savings files")
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_serve = sub.add_parser("serve", help="run the gateway and telemetry endpoints")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--user", default=None)
    p_serve.add_argument("--password", default=None)
    p_serve.add_argument("--feed", default=None, help="trace JSONL to stream in")
    p_serve.add_argument("--speed", type=float, default=1.0, help="clock speedup factor")
    p_serve.add_argument("--window", type=int, default=None, help="pairing window (ms)")
    p_serve.add_argument("--debounce", type=int, default=None)
    p_serve.add_argument("--interval", type=int, default=None, help="telemetry rate limit (ms)")
    p_serve.add_argument("--channel-key", default=None)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
