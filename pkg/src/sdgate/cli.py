"""sdgate command line: sources, crawl, query, serve, stats."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import socket
import sys
import time
from typing import Sequence
from urllib.parse import quote, urlencode

from . import __version__
from .config import Config, ConfigError, dump_config, load_config, with_overrides
from .crawler import (
    CrawlLog,
    CrawlReport,
    CrawlState,
    SourceError,
    read_source_list,
    run_crawl,
    write_source_list,
)
from .crawler.schedule import VOLATILITY_CLASSES
from .model import compact_iri, to_document
from .retrieval import QueryRejected, query
from .store import EntityStore, StoreError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("sdgate.cli")


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt_time(ts: float | None) -> str:
    return time.strftime("%Y-%m-%d %H:%M:%S", time.localtime(ts)) if ts else "never"


def _table(rows: list[list[str]], header: list[str]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths)).rstrip()]
    lines += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


# --- sources ----------------------------------------------------------------------


def cmd_sources(args, config: Config) -> int:
    path = config.sources_path
    entries = read_source_list(path)
    if args.action == "add":
        if args.volatility not in VOLATILITY_CLASSES:
            raise UsageError(f"invalid volatility class {args.volatility!r}; choose from {', '.join(VOLATILITY_CLASSES)}")
        if any(e["url"] == args.url for e in entries):
            raise UsageError(f"source {args.url} is already registered")
        entry = {"url": args.url, "volatility": args.volatility}
        if args.depth is not None:
            entry["depth"] = args.depth
        if args.budget is not None:
            entry["budget"] = args.budget
        write_source_list(path, entries + [entry])
        print(f"added {args.url} ({args.volatility})")
    elif args.action == "remove":
        remaining = [e for e in entries if e["url"] != args.url]
        if len(remaining) == len(entries):
            raise UsageError(f"source {args.url} is not registered")
        write_source_list(path, remaining)
        print(f"removed {args.url}")
    else:
        state = CrawlState(config.state_path)
        records = [state.source_record(e) for e in entries]
        if args.json:
            print(json.dumps([{"url": r.url, "volatility": r.volatility, "lastFetch": r.last_fetch,
                               "status": r.status, "errorCount": r.error_count, "enabled": r.enabled}
                              for r in records], indent=2))
        elif not records:
            print("no sources registered")
        else:
            print(_table([[r.url, r.volatility, _fmt_time(r.last_fetch), r.status or "-"] for r in records],
                         ["URL", "CLASS", "LAST FETCH", "STATUS"]))
    return EXIT_OK


# --- crawl ------------------------------------------------------------------------


def render_report(report: CrawlReport) -> str:
    rows = [[s.url, s.attempted, s.fetched, s.unchanged, s.errored, s.robots_skipped, s.entities_extracted,
             s.entities_created] for s in report.sources]
    out = _table(rows, ["SOURCE", "ATTEMPTED", "FETCHED", "UNCHANGED", "ERRORS", "ROBOTS", "ENTITIES", "NEW"]) if rows else "nothing due"
    out += (f"\ntotal: {report.attempted} attempted, {report.fetched} fetched, {report.unchanged} unchanged, "
            f"{report.errored} errors, {report.entities_extracted} entities extracted, "
            f"{report.entities_created} new, {report.duration:.2f}s")
    for s in report.sources:
        for err in s.errors:
            out += f"\n  error: {err}"
    return out


def cmd_crawl(args, config: Config) -> int:
    if args.workers is not None:
        config = with_overrides(config, crawl={"workers": args.workers})
    state = CrawlState(config.state_path)
    store = EntityStore(config.store_path)
    log = CrawlLog(config.crawl_log_path)
    settings = config.crawl_settings()

    def cycle(force: bool) -> CrawlReport:
        entries = read_source_list(config.sources_path)
        if not entries:
            raise RuntimeFailure(f"no sources registered in {config.sources_path}; use `sdgate sources add`")
        sources = [state.source_record(e) for e in entries]
        report = run_crawl(sources, store, state, settings, force=force, log=log)
        print(json.dumps(report.to_json(), indent=2) if args.json else render_report(report), flush=True)
        return report

    if not args.loop:
        cycle(args.force)
        return EXIT_OK
    try:
        force = args.force
        while True:
            cycle(force)
            force = False
            time.sleep(config.crawl.loop_interval)
    except KeyboardInterrupt:
        print("crawl loop interrupted", file=sys.stderr)
    return EXIT_OK


# --- query ------------------------------------------------------------------------


def query_string(args) -> str:
    """Encode query flags exactly as the gateway's search endpoint receives them."""
    pairs = []
    for name in ("type", "q"):
        if getattr(args, name):
            pairs.append((name, getattr(args, name)))
    pairs += [("where", w) for w in args.where or ()]
    for name in ("limit", "offset", "threshold"):
        if getattr(args, name) is not None:
            pairs.append((name, str(getattr(args, name))))
    return urlencode(pairs, quote_via=quote)


def cmd_query(args, config: Config) -> int:
    from .gateway import parse_search_query

    try:
        spec = parse_search_query(query_string(args), config.retrieval.threshold)
    except QueryRejected as exc:
        raise UsageError(str(exc)) from None
    if not (config.store_path / "snapshot.json").exists() and not (config.store_path / "commits.jsonl").exists():
        print("empty store: nothing has been crawled yet")
        return EXIT_OK
    snapshot = EntityStore(config.store_path).snapshot()
    if not len(snapshot):
        print("empty store: nothing has been crawled yet")
        return EXIT_OK
    hits = query(spec, snapshot, weights=config.weights())
    if args.json:
        print(json.dumps([{"@id": h.id, "score": h.score, "components": h.components,
                           "item": to_document(h.entity)} for h in hits], indent=2))
        return EXIT_OK
    if not hits:
        print("no results")
        return EXIT_OK
    rows = []
    for rank, h in enumerate(hits, start=spec.offset + 1):
        names = h.entity.literals("https://schema.org/name")
        rows.append([rank, f"{h.score:.4f}", ",".join(compact_iri(t) for t in h.entity.types) or "-",
                     names[0] if names else "-", h.id])
    print(_table(rows, ["#", "SCORE", "TYPE", "NAME", "ID"]))
    return EXIT_OK


# --- serve ------------------------------------------------------------------------


def cmd_serve(args, config: Config) -> int:
    import uvicorn

    from .crawler import HostThrottle
    from .gateway import ActionExecutor, ExecutionLog, create_app

    config = with_overrides(config, gateway={"port": args.port, "host": args.host, "mode": args.mode})
    g = config.gateway
    with socket.socket() as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind((g.host, g.port))
        except OSError as exc:
            raise RuntimeFailure(f"cannot listen on {g.host}:{g.port}: {exc.strerror}") from None
    store = EntityStore(config.store_path)
    log = ExecutionLog(config.execution_log_path)
    executor = ActionExecutor(store.refresh, throttle=HostThrottle(g.rate_limit_delay), log=log,
                              timeout=config.politeness.timeout)
    app = create_app(store.refresh, config.gateway_settings(), executor=executor)
    logger.warning("serving %d entities on http://%s:%d%s (mode %s)", len(store.snapshot()), g.host, g.port,
                   g.api_root, g.mode)
    print(f"sdgate gateway on http://{g.host}:{g.port}{g.api_root} (mode {g.mode}, data {config.data_dir})",
          flush=True)
    try:
        uvicorn.run(app, host=g.host, port=g.port, log_level="warning")
    except KeyboardInterrupt:
        pass
    finally:
        executor.close()
        print(f"gateway stopped; {len(log.records)} execution(s) logged to {config.execution_log_path}")
    return EXIT_OK


# --- stats ------------------------------------------------------------------------


def cmd_stats(args, config: Config) -> int:
    snapshot = EntityStore(config.store_path).snapshot()
    histogram: dict[str, int] = {}
    for ent in snapshot.entities.values():
        for t in ent.types or ("(untyped)",):
            key = compact_iri(t) if t != "(untyped)" else t
            histogram[key] = histogram.get(key, 0) + 1
    if args.json:
        print(json.dumps({"entities": len(snapshot), "aliases": len(snapshot.aliases),
                          "sequence": snapshot.sequence, "types": dict(sorted(histogram.items()))}, indent=2))
        return EXIT_OK
    print(f"entities: {len(snapshot)}\naliases: {len(snapshot.aliases)}\ncommit sequence: {snapshot.sequence}")
    if histogram:
        print(_table([[t, n] for t, n in sorted(histogram.items())], ["TYPE", "COUNT"]))
    return EXIT_OK


# --- harness ----------------------------------------------------------------------


def cmd_fixtures(args, config: Config) -> int:
    from .fixtures import FixtureServer

    with FixtureServer(args.port) as site:
        print(f"fixture site on {site.origin}/ (booking endpoint POST {site.origin}/reserve)", flush=True)
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def cmd_e2e(args, config: Config) -> int:
    from .fixtures import run_e2e

    verdict = run_e2e(args.mode)
    print(verdict.summary())
    return EXIT_OK if verdict.passed else EXIT_RUNTIME


def cmd_config(args, config: Config) -> int:
    print(dump_config(config), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdgate", description="Harvest schema.org annotations and serve them through a gateway.")
    parser.add_argument("--config", help="config file (default: $SDGATE_CONFIG, else built-in defaults)")
    parser.add_argument("--data-dir", help="override data_dir from the config")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=f"sdgate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sources", help="manage the source list")
    ssub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    add = ssub.add_parser("add")
    add.add_argument("url")
    add.add_argument("volatility", help="static | dynamic | active")
    add.add_argument("--depth", type=int)
    add.add_argument("--budget", type=int)
    ls = ssub.add_parser("list")
    ls.add_argument("--json", action="store_true")
    rm = ssub.add_parser("remove")
    rm.add_argument("url")
    p.set_defaults(func=cmd_sources)

    p = sub.add_parser("crawl", help="fetch due sources and ingest their annotations")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--once", action="store_true")
    mode.add_argument("--loop", action="store_true")
    p.add_argument("--force", action="store_true", help="ignore the schedule and fetch every source")
    p.add_argument("--json", action="store_true")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("query", help="search the store (flags mirror the search endpoint)")
    p.add_argument("--type")
    p.add_argument("--q")
    p.add_argument("--where", action="append", help="property:(eq|contains|lt|gt):value, repeatable")
    p.add_argument("--limit", type=int)
    p.add_argument("--offset", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--mode", choices=("proxy", "passthrough"))
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("stats", help="entity and type counts")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("config", help="print the effective configuration")
    p.set_defaults(func=cmd_config)

    p = sub.add_parser("fixtures", help="serve the bundled fixture site")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("e2e", help="run the end-to-end reservation scenario against the fixture site")
    p.add_argument("--mode", choices=("proxy", "passthrough"), default="proxy")
    p.set_defaults(func=cmd_e2e)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.data_dir:
            config = dataclasses.replace(config, data_dir=args.data_dir)
        return args.func(args, config)
    except (UsageError, ConfigError, SourceError) as exc:
        print(f"sdgate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeFailure, StoreError, OSError) as exc:
        print(f"sdgate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
