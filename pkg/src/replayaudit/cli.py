"""Command line entry point.

Exit codes: 0 audit ran, 1 configuration error, 2 ran with partial failures
(or a network failure), 3 cache miss in offline mode.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from datetime import date
from pathlib import Path

from .audit import FORMATS, AuditConfig, emit_report, parse_date_range, probe_corpus, run_audit
from .cdx import FilterSpec, fetch_captures
from .errors import CacheMiss, ConfigError, InvalidUrl, MalformedTimeMap, NetworkError
from .fetch import WAYBACK, Fetcher, ResponseCache, load_roster
from .memento import aggregate_timemaps, fetch_timemap, to_link_format
from .resolution import DEFAULT_THRESHOLD, classify
from .timeutil import day_start, format_duration, iso, parse_datetime, parse_duration
from .zones import DEFAULT_TIMELINE, EraTimeline, ZoneSpec, zone_manager_url

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_CACHE_MISS = 0, 1, 2, 3

log = logging.getLogger("replayaudit")


def _roster(args) -> list:
    archives = load_roster(args.config) if args.config else [WAYBACK]
    if getattr(args, "archive", None):
        archives = [a for a in archives if a.name in args.archive]
        if not archives:
            raise ConfigError(f"no archive named {', '.join(args.archive)} in the roster")
    return archives


def _cache_root(args) -> str:
    if args.cache:
        return args.cache
    if args.config:
        parser = configparser.ConfigParser(interpolation=None)
        parser.read(args.config, encoding="utf-8")
        if parser.has_option("audit", "cache_root"):
            return str(Path(args.config).resolve().parent / parser["audit"]["cache_root"])
    return ".replayaudit-cache"


def _fetcher(args) -> Fetcher:
    return Fetcher(ResponseCache(_cache_root(args)), offline=args.offline)


def cmd_audit(args) -> int:
    if not args.config:
        raise ConfigError("audit needs --config")
    config = AuditConfig.from_file(args.config)
    if args.offline:
        config.offline = True
    if args.thresholds:
        config.thresholds = tuple(parse_duration(t) for t in args.thresholds.split(","))
    if args.range:
        config.date_range = parse_date_range(args.range)
    if args.cache:
        config.cache_root = args.cache
    config.validate()
    report = run_audit(config)
    for path in emit_report(report, args.format.split(","), args.out):
        print(path)
    for line in report.diagnostics:
        log.warning("%s", line)
    return EXIT_PARTIAL if report.partial_failures else EXIT_OK


def cmd_timemap(args) -> int:
    fetcher = _fetcher(args)
    timemaps, failed = [], False
    for archive in _roster(args):
        try:
            timemaps.append(fetch_timemap(archive, args.url, fetcher))
        except (NetworkError, MalformedTimeMap) as exc:
            log.warning("%s: %s", archive.name, exc)
            failed = True
    if not timemaps:
        return EXIT_PARTIAL
    merged = aggregate_timemaps(timemaps)
    if args.after:
        merged = merged.between(day_start(date.fromisoformat(args.after)))
    if args.link:
        sys.stdout.write(to_link_format(merged))
    else:
        print("archive\tmementos")
        for name, count in merged.archive_counts().items():
            print(f"{name}\t{count}")
        print(f"total\t{len(merged)}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_cdx(args) -> int:
    archive = next((a for a in _roster(args) if a.cdx_url_template), None)
    if archive is None:
        raise ConfigError("no archive with a CDX endpoint")
    rng = parse_date_range(args.range) if args.range else (None, None)
    filters = FilterSpec(
        status=None if args.status == "any" else int(args.status),
        start=day_start(rng[0]) if rng[0] else None,
        end=day_start(rng[1]) if rng[1] else None,
        page_size=args.page_size,
    )
    captures = fetch_captures(archive, args.url, filters, _fetcher(args))
    for record in captures:
        print(record.to_line())
    print(f"{len(captures)} captures ({captures.filter_applied}), "
          f"{captures.report.dropped} malformed lines skipped", file=sys.stderr)
    return EXIT_OK


def cmd_probe(args) -> int:
    corpus = probe_corpus(args.html_dir, args.threshold, args.ascii)
    if args.json:
        json.dump({
            "rows": [
                {"stamp": stamp, "has_hero_section_id": r.has_hero_section_id,
                 "content_word_count": r.content_word_count, "csr_verdict": r.csr_verdict.value}
                for stamp, r in corpus.rows
            ],
            "counts": corpus.counts,
            "errors": [{"file": f, "error": e} for f, e in corpus.errors],
        }, sys.stdout, indent=2)
        print()
    else:
        print("stamp\thas_hero_section_id\tcontent_word_count\tcsr_verdict")
        for stamp, r in corpus.rows:
            print(f"{stamp}\t{str(r.has_hero_section_id).lower()}\t{r.content_word_count}\t{r.csr_verdict.value}")
        summary = ", ".join(f"{k}: {v}" for k, v in corpus.counts.items())
        print(f"{summary}; unreadable: {len(corpus.errors)}", file=sys.stderr)
    return EXIT_PARTIAL if corpus.errors else EXIT_OK


def cmd_resolve(args) -> int:
    at = parse_datetime(args.at)
    if args.zone:
        timeline = EraTimeline.load(args.timeline) if args.timeline else DEFAULT_TIMELINE
        zone_url = zone_manager_url(ZoneSpec.parse(args.zone), at, timeline)
        if zone_url is None:
            print(json.dumps({"at": iso(at), "zone": args.zone, "requested": None,
                              "note": "content is in the base HTML at this datetime"}, indent=2))
            return EXIT_OK
        url = zone_url.url
    elif args.url:
        url = args.url
    else:
        raise ConfigError("resolve needs a URL or --zone")
    archive = next((a for a in _roster(args) if a.cdx_url_template), None)
    if archive is None:
        raise ConfigError("no archive with a CDX endpoint")
    captures = fetch_captures(archive, url, FilterSpec(status=200), _fetcher(args))
    threshold = parse_duration(args.threshold)
    result = classify(at, captures, threshold)
    print(json.dumps({
        "at": iso(at),
        "resource_url": url,
        "captures": len(captures),
        "resolved_access_url": result.resolved.access_url if result.resolved else None,
        "resolved_iso": iso(result.resolved.capture_datetime) if result.resolved else None,
        "spread_seconds": result.spread_seconds,
        "spread_days": result.spread_days,
        "threshold": format_duration(threshold),
        "classification": result.classification.value,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replayaudit", description="Audit web archive replay of client-side-rendered pages.",
        epilog="exit codes: 0 ok, 1 config error, 2 partial failure, 3 offline cache miss")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, network=True):
        p.add_argument("-c", "--config", help="audit config / archive roster (INI)")
        if network:
            p.add_argument("--cache", help="cache directory")
            p.add_argument("--offline", action="store_true", help="serve from cache only, never touch the network")

    p = sub.add_parser("audit", help="run the full audit pipeline")
    common(p)
    p.add_argument("--thresholds", help="comma list, e.g. 1h,2h,6h,24h,48h")
    p.add_argument("--range", help="START..END dates (end exclusive)")
    p.add_argument("-o", "--out", default="audit-out", help="output directory")
    p.add_argument("--format", default="json,csv,plotdata", help=f"comma list of {', '.join(FORMATS)}")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("timemap", help="fetch and aggregate TimeMaps")
    common(p)
    p.add_argument("url")
    p.add_argument("--archive", action="append", help="restrict to this archive (repeatable)")
    p.add_argument("--after", help="only count mementos from this date on")
    p.add_argument("--link", action="store_true", help="print the merged TimeMap as link-format")
    p.set_defaults(func=cmd_timemap)

    p = sub.add_parser("cdx", help="fetch a capture set from a CDX API")
    common(p)
    p.add_argument("url")
    p.add_argument("--archive", action="append")
    p.add_argument("--status", default="200", help="status filter or 'any'")
    p.add_argument("--range", help="START..END dates (end exclusive)")
    p.add_argument("--page-size", type=int)
    p.set_defaults(func=cmd_cdx)

    p = sub.add_parser("probe", help="classify a directory of raw memento HTML")
    p.add_argument("html_dir")
    p.add_argument("--threshold", type=int, default=15)
    p.add_argument("--ascii", action="store_true", help="ASCII-only lowercase test")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("resolve", help="what would replay serve for one datetime")
    common(p)
    p.add_argument("url", nargs="?")
    p.add_argument("--at", required=True, help="base datetime (14-digit, ISO-8601 or HTTP date)")
    p.add_argument("--zone", help="zone id (or uri:id); the URL is generated for --at")
    p.add_argument("--timeline", help="era timeline file")
    p.add_argument("--archive", action="append")
    p.add_argument("--threshold", default=format_duration(DEFAULT_THRESHOLD))
    p.set_defaults(func=cmd_resolve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CacheMiss as exc:
        print(f"cache miss in offline mode: {exc}", file=sys.stderr)
        return EXIT_CACHE_MISS
    except (ConfigError, InvalidUrl) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NetworkError as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
