"""Command-line entry points: run scenarios, serve a session, replay telemetry."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import scenarios
from .config import load_config, merge_config
from .errors import CoilPilotError
from .server import serve_session
from .telemetry import dump_summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coilpilot", description="Balloon-robot anchor delivery simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a deterministic scenario")
    run.add_argument("scenario", choices=scenarios.SCENARIOS)
    run.add_argument("--config", default=None, help="JSON config file merged over defaults")
    run.add_argument("--seed", type=int, default=12345)
    run.add_argument("--out", default="out", help="output directory for telemetry and summary")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=JSON",
        help="override a config value, e.g. contact_test.approach='\"bend45\"'",
    )

    serve = sub.add_parser("serve", help="serve one live cockpit session")
    serve.add_argument("--port", type=int, default=8736)
    serve.add_argument("--config", default=None)
    serve.add_argument("--seed", type=int, default=12345)
    serve.add_argument("--out", default=None, help="write session telemetry here on completion")
    serve.add_argument("--realtime-factor", type=float, default=1.0, help="0 runs as fast as the command stream allows")
    serve.add_argument("--preset", default="implant", choices=list(scenarios.SCENARIO_PRESETS))

    replay = sub.add_parser("replay", help="recompute a summary from a telemetry CSV")
    replay.add_argument("telemetry_csv")
    return parser


def _parse_overrides(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs:
        key, _, raw = pair.partition("=")
        if not _:
            raise CoilPilotError(f"override {pair!r} must look like section.key=value")
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        try:
            node[parts[-1]] = json.loads(raw)
        except json.JSONDecodeError:
            node[parts[-1]] = raw
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            sc = scenarios.ScenarioConfig(
                scenario=args.scenario,
                seed=args.seed,
                overrides=_parse_overrides(args.overrides),
                output_dir=Path(args.out),
                config_path=args.config,
            )
            summary = scenarios.run_scenario(sc)
            sys.stdout.write(dump_summary(summary))
            return 0
        if args.command == "serve":
            cfg = load_config(args.config)
            cfg = merge_config(cfg, scenarios.SCENARIO_PRESETS.get(args.preset, {}))
            cfg["simulation"]["seed"] = args.seed
            print(f"serving one session on port {args.port} (preset {args.preset})", file=sys.stderr)
            serve_session(args.port, cfg, out_dir=args.out, realtime_factor=args.realtime_factor)
            return 0
        if args.command == "replay":
            summary = scenarios.replay(args.telemetry_csv)
            sys.stdout.write(dump_summary(summary))
            return 0
    except CoilPilotError as exc:
        sys.stdout.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}, indent=2) + "\n")
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
