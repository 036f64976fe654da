"""Command-line entry point.

Subcommands:
  serve                     run the gateway (config file optional)
  simulate-time <duration>  advance a running gateway's simulated clock
  ledger verify             check an on-disk block log's hash chain
  ledger replay             rebuild and print the world state from a log
  bench run                 load-test a gateway (self-hosts one when no URL)
"""

from __future__ import annotations

import argparse
import re
import sys
import tempfile
from pathlib import Path

_DURATION_RE = re.compile(r"(\d+)([dhms])")
_DURATION_SECONDS = {"d": 86400, "h": 3600, "m": 60, "s": 1}


def parse_duration(text: str) -> float:
    """Durations like '90s', '15m', '48h', '30d', or combined '1d12h'."""
    matches = _DURATION_RE.findall(text)
    if not matches or "".join(f"{n}{u}" for n, u in matches) != text:
        raise argparse.ArgumentTypeError(f"bad duration: {text!r} (use e.g. 90s, 15m, 1d12h)")
    return float(sum(int(n) * _DURATION_SECONDS[u] for n, u in matches))


def _load_config(path: str | None):
    from .gateway import PlatformConfig

    return PlatformConfig.load(path) if path else PlatformConfig()


def cmd_serve(args) -> int:
    from .server import serve_forever

    config = _load_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    serve_forever(config)
    return 0


def cmd_simulate_time(args) -> int:
    import httpx

    seconds = parse_duration(args.duration)
    with httpx.Client(base_url=args.base_url, timeout=120.0) as client:
        token = client.post("/auth/token", json={"user_id": args.ops_user}).json()["token"]
        response = client.post(
            "/admin/time/advance",
            headers={"Authorization": f"Bearer {token}"},
            json={"seconds": seconds},
        )
        response.raise_for_status()
        body = response.json()
    print(f"advanced {seconds:.0f}s to {body['now']} ({len(body['events'])} events)")
    return 0


def cmd_ledger_verify(args) -> int:
    from .ledger import verify_log_file

    ok, bad_block = verify_log_file(Path(args.log))
    if ok:
        print(f"{args.log}: chain OK")
        return 0
    print(f"{args.log}: chain BROKEN at block {bad_block}")
    return 1


def cmd_ledger_replay(args) -> int:
    from .ledger import replay_log_file

    state_json = replay_log_file(Path(args.log))
    if args.out:
        Path(args.out).write_text(state_json)
        print(f"world state written to {args.out}")
    else:
        print(state_json)
    return 0


def cmd_bench_run(args) -> int:
    from .bench import RunConfig, export_report, run_scenario

    config = RunConfig(
        vu_levels=[int(v) for v in args.vus.split(",")],
        repeats=args.repeats,
        duration=args.duration,
    )
    scenarios = args.scenario.split(",")
    server = None
    base_url = args.base_url
    if base_url is None:
        from .gateway import Platform, PlatformConfig
        from .server import BackgroundServer

        workdir = tempfile.mkdtemp(prefix="rentchain-bench-")
        print(f"self-hosting a gateway (data in {workdir})")
        server = BackgroundServer(Platform(PlatformConfig(data_dir=workdir))).start()
        base_url = server.base_url
    try:
        all_rows, summaries = [], []
        for name in scenarios:
            rows, summary = run_scenario(name, config, base_url)
            all_rows.extend(rows)
            summaries.append(summary)
            for row in rows:
                print(
                    f"{name} vu={row.vu}: sent={row.requests_sent:.0f} "
                    f"rt={row.avg_response_ms:.1f}ms tp={row.throughput_rps:.2f}req/s "
                    f"err={row.error_rate_pct:.2f}%"
                )
        csv_path, summary_path = export_report(all_rows, summaries, Path(args.out))
        print(f"wrote {csv_path} and {summary_path}")
        print(summary_path.read_text())
    finally:
        if server is not None:
            server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rentchain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the gateway services")
    serve.add_argument("--config", help="platform config JSON")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(func=cmd_serve)

    sim = sub.add_parser("simulate-time", help="advance the simulated clock")
    sim.add_argument("duration", help="e.g. 90s, 15m, 48h, 30d, 1d12h")
    sim.add_argument("--base-url", default="http://127.0.0.1:8430")
    sim.add_argument("--ops-user", default="ops")
    sim.set_defaults(func=cmd_simulate_time)

    ledger = sub.add_parser("ledger", help="offline block-log tools")
    ledger_sub = ledger.add_subparsers(dest="ledger_command", required=True)
    verify = ledger_sub.add_parser("verify", help="verify the hash chain")
    verify.add_argument("--log", required=True)
    verify.set_defaults(func=cmd_ledger_verify)
    replay = ledger_sub.add_parser("replay", help="rebuild the world state")
    replay.add_argument("--log", required=True)
    replay.add_argument("--out")
    replay.set_defaults(func=cmd_ledger_replay)

    bench = sub.add_parser("bench", help="load-testing harness")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)
    run = bench_sub.add_parser("run", help="run scenarios against a gateway")
    run.add_argument(
        "--scenario",
        default="PUBLISH_ADVERTISEMENT,SUBMIT_PROPOSAL",
        help="comma-separated scenario names",
    )
    run.add_argument("--vus", default="1,10,20,40,60,80,100", help="comma-separated VU levels")
    run.add_argument("--repeats", type=int, default=10)
    run.add_argument("--duration", type=float, default=60.0, help="seconds per run")
    run.add_argument("--out", default="./bench-out")
    run.add_argument("--base-url", default=None, help="target gateway; self-hosts when omitted")
    run.set_defaults(func=cmd_bench_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
