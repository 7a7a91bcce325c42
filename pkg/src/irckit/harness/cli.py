"""Command-line interface: server daemon, conformance runner, load
generator, curve fitting, and the browser bridge.

Exit codes: 0 success, 1 failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from irckit.harness import conformance, fitting, load
from irckit.server import BindFailure, IrcServer, ServerConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irckit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_server = sub.add_parser("server", help="run the IRC server")
    p_server.add_argument("hostname", nargs="?", default="localhost",
                          help="source prefix used in all replies")
    p_server.add_argument("--port", type=int, default=6667)
    p_server.add_argument("--max-clients", type=int, default=512)
    p_server.add_argument("--audit", action="store_true",
                          help="expose the delivered-message counter")
    p_server.add_argument("--ping-interval", type=float, default=None,
                          help="seconds between server pings (off by default)")

    p_conform = sub.add_parser("conform", help="run the conformance scenarios")
    p_conform.add_argument("--host", default="127.0.0.1")
    p_conform.add_argument("--port", type=int, default=6667)
    p_conform.add_argument("--only", default=None,
                           help="comma-separated scenario names")

    p_load = sub.add_parser("load", help="run load scenarios, emit CSV")
    p_load.add_argument("--n", required=True,
                        help="client counts, comma-separated (e.g. 25,50,100)")
    p_load.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    p_load.add_argument("--csv", default=None, help="output path (default stdout)")
    p_load.add_argument("--host", default="127.0.0.1")
    p_load.add_argument("--port", type=int, default=6667)
    p_load.add_argument("--messages", type=int, default=3)
    p_load.add_argument("--channel", default="#bench")

    p_fit = sub.add_parser("fit", help="least-squares fit over a load CSV")
    p_fit.add_argument("--model", choices=fitting.MODELS, required=True)
    p_fit.add_argument("file", help="CSV with columns n,seconds,delivered")

    p_bridge = sub.add_parser("bridge", help="WebSocket gateway for the web UI")
    p_bridge.add_argument("--listen", type=int, default=9667)
    p_bridge.add_argument("--host", default="127.0.0.1")

    return parser


def _cmd_server(args: argparse.Namespace) -> int:
    config = ServerConfig(
        hostname=args.hostname,
        port=args.port,
        max_clients=args.max_clients,
        audit=args.audit,
        ping_interval=args.ping_interval,
    )
    server = IrcServer(config)
    try:
        server.start()
    except BindFailure as exc:
        print(f"irckit server: {exc}", file=sys.stderr)
        return 1
    print(f"listening on port {server.port} as {config.hostname}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        if config.audit:
            print(f"delivered_privmsg_count={server.delivered_privmsg_count}")
    return 0


def _cmd_conform(args: argparse.Namespace) -> int:
    names = args.only.split(",") if args.only else None
    summary = conformance.run_suite(args.host, args.port, names)
    for result in summary.results:
        if result.ok:
            print(f"ok   {result.name}")
        else:
            print(f"FAIL {result.name}  [{result.failed_step}] {result.detail}")
    print(summary.summary_line())
    return 0 if summary.ok else 1


def _cmd_load(args: argparse.Namespace) -> int:
    counts = [int(n) for n in args.n.split(",") if n]
    rows = []
    dirty = False
    for n in counts:
        run = load.scenario_run(args.scenario, n, args.messages)
        run.channel = args.channel
        result = load.run_load(args.host, args.port, run)
        dirty = dirty or result.dirty
        delivered = "" if result.delivered is None else result.delivered
        rows.append((n, f"{result.wall_clock_s:.3f}", delivered))
        print(
            f"n={n} seconds={result.wall_clock_s:.3f} delivered={delivered}"
            f"{' DIRTY' if result.dirty else ''}",
            file=sys.stderr,
        )
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(("n", "seconds", "delivered"))
        writer.writerows(rows)
    finally:
        if args.csv:
            out.close()
    return 1 if dirty else 0


def _cmd_fit(args: argparse.Namespace) -> int:
    xs: list[float] = []
    ys: list[float] = []
    with open(args.file, newline="") as handle:
        for row in csv.DictReader(handle):
            xs.append(float(row["n"]))
            ys.append(float(row["seconds"]))
    try:
        result = fitting.fit(xs, ys, args.model)
    except fitting.DegenerateInput as exc:
        print(f"irckit fit: {exc}", file=sys.stderr)
        return 1
    print(result.describe())
    return 0


def _cmd_bridge(args: argparse.Namespace) -> int:
    from irckit.bridge import WsBridge

    bridge = WsBridge(listen_host=args.host, listen_port=args.listen)
    bridge.start()
    print(f"bridge listening on ws://{args.host}:{bridge.port}", flush=True)
    try:
        bridge.wait()
    except KeyboardInterrupt:
        bridge.shutdown()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    handlers = {
        "server": _cmd_server,
        "conform": _cmd_conform,
        "load": _cmd_load,
        "fit": _cmd_fit,
        "bridge": _cmd_bridge,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
