"""End-to-end audits: fetch captures, probe base HTML, resolve zone requests,
and package the results as a versioned report.
"""
from __future__ import annotations

import copy
import configparser
import csv
import hashlib
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from . import __version__
from .cdx import CaptureSet, FilterSpec, fetch_captures
from .errors import ConfigError, InvalidUrl, NetworkError, UncoveredInstant
from .fetch import ArchiveEndpoint, Fetcher, ResponseCache, roster_from_parser
from .memento import MementoRecord, aggregate_timemaps, fetch_timemap, is_absolute_url
from .resolution import (
    DEFAULT_THRESHOLD, IMPACT_THRESHOLDS, Classification, DaySeriesPoint, HeroViolationReport,
    ResolutionResult, ThresholdImpactRow, classify, hero_violation_scan, impact_from_spreads,
    series_from_spreads,
)
from .timeutil import (
    day_start, epoch_seconds, format_duration, format_stamp, iso, parse_datetime,
    parse_duration,
)
from .urlkey import canonical_urlkey
from .zones import (
    DEFAULT_TIMELINE, DEFAULT_WORD_THRESHOLD, HERO_ZONE, EraTimeline, HtmlProbeResult,
    Verdict, ZoneSpec, probe_html, zone_manager_url,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_ZONES = (ZoneSpec("homepage1-zone-1"), ZoneSpec("homepage2-zone-1"), ZoneSpec("homepage3-zone-1"))
SAMPLING_MODES = ("daily-first", "all")

DateRange = tuple[date, date]


def parse_date_range(text: str) -> DateRange:
    """``2015-05-23..2016-07-21`` (end exclusive)."""
    start, sep, end = text.partition("..")
    if not sep:
        raise ConfigError(f"date range {text!r} must look like START..END")
    try:
        return date.fromisoformat(start.strip()), date.fromisoformat(end.strip())
    except ValueError as exc:
        raise ConfigError(f"date range {text!r}: {exc}") from None


def _split_list(text: str) -> list[str]:
    return [item.strip() for item in re.split(r"[,\n]", text) if item.strip()]


@dataclass
class AuditConfig:
    target_url: str
    archives: list[ArchiveEndpoint]
    date_range: DateRange
    base_archive: str | None = None
    zones: list[ZoneSpec] | None = None  # None: extract from probed HTML
    timeline_path: str | None = None
    thresholds: tuple[timedelta, ...] = IMPACT_THRESHOLDS
    violation_threshold: timedelta = DEFAULT_THRESHOLD
    impact_ranges: list[DateRange] = field(default_factory=list)
    cache_root: str = ".replayaudit-cache"
    cache_ttl: float | None = None
    concurrency: int = 4
    offline: bool = False
    sampling: str = "daily-first"
    probe: bool = True
    word_threshold: int = DEFAULT_WORD_THRESHOLD
    timemap_summary: bool = False
    cdx_page_size: int | None = None

    def validate(self) -> None:
        if not is_absolute_url(self.target_url):
            raise ConfigError(f"target_url is not an absolute URL: {self.target_url!r}")
        try:
            canonical_urlkey(self.target_url)
        except InvalidUrl as exc:
            raise ConfigError(str(exc)) from None
        start, end = self.date_range
        if start >= end:
            raise ConfigError(f"empty date range {start}..{end}")
        for lo, hi in self.impact_ranges:
            if lo >= hi:
                raise ConfigError(f"empty impact range {lo}..{hi}")
        if not self.archives:
            raise ConfigError("no archives configured")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigError(f"sampling must be one of {SAMPLING_MODES}")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be at least 1")
        if not self.thresholds:
            raise ConfigError("at least one threshold is required")
        self.base_endpoint()

    def base_endpoint(self) -> ArchiveEndpoint:
        for endpoint in self.archives:
            if self.base_archive in (None, endpoint.name) and endpoint.cdx_url_template:
                return endpoint
        raise ConfigError(f"no archive with a CDX endpoint matches {self.base_archive or 'any'}")

    def timeline(self) -> EraTimeline:
        return EraTimeline.load(self.timeline_path) if self.timeline_path else DEFAULT_TIMELINE

    def ranges(self) -> list[DateRange]:
        return list(self.impact_ranges) or [self.date_range]

    def to_dict(self) -> dict:
        """Everything that affects the analysis (cache location excluded)."""
        return {
            "target_url": self.target_url,
            "archives": [_endpoint_dict(e) for e in self.archives],
            "base_archive": self.base_endpoint().name,
            "date_range": [d.isoformat() for d in self.date_range],
            "zones": None if self.zones is None else [z.section for z in self.zones],
            "timeline": self.timeline().to_text(),
            "thresholds": [format_duration(t) for t in self.thresholds],
            "violation_threshold": format_duration(self.violation_threshold),
            "impact_ranges": [[a.isoformat(), b.isoformat()] for a, b in self.ranges()],
            "sampling": self.sampling,
            "probe": self.probe,
            "word_threshold": self.word_threshold,
            "timemap_summary": self.timemap_summary,
        }

    def config_hash(self) -> str:
        return hashlib.sha256(_canonical_json(self.to_dict())).hexdigest()

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "AuditConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            read = parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not read:
            raise ConfigError(f"cannot read config {path}")
        return cls.from_parser(parser, Path(path).resolve().parent)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser, base_dir: Path = Path(".")) -> "AuditConfig":
        if "audit" not in parser:
            raise ConfigError("config has no [audit] section")
        section = parser["audit"]

        def path_option(key: str, default: str | None = None) -> str | None:
            value = section.get(key, default)
            return None if not value else str(base_dir / value)

        try:
            zones_text = section.get("zones", "auto").strip()
            mode = section.get("mode", "online").strip()
            if mode not in ("online", "offline"):
                raise ConfigError(f"mode must be online or offline, not {mode!r}")
            ttl = section.get("cache_ttl", "").strip()
            page = section.get("cdx_page_size", "").strip()
            config = cls(
                target_url=section.get("target_url", "").strip(),
                archives=roster_from_parser(parser),
                date_range=(
                    date.fromisoformat(section["date_from"].strip()),
                    date.fromisoformat(section["date_to"].strip()),
                ),
                base_archive=section.get("base_archive") or None,
                zones=None if zones_text == "auto" else [ZoneSpec.parse(z) for z in _split_list(zones_text)],
                timeline_path=path_option("timeline"),
                thresholds=tuple(parse_duration(t) for t in _split_list(section.get("thresholds", "1h,2h,6h,24h,48h"))),
                violation_threshold=parse_duration(section.get("violation_threshold", "48h")),
                impact_ranges=[parse_date_range(r) for r in _split_list(section.get("impact_ranges", ""))],
                cache_root=path_option("cache_root", ".replayaudit-cache"),
                cache_ttl=parse_duration(ttl).total_seconds() if ttl else None,
                concurrency=section.getint("concurrency", 4),
                offline=mode == "offline",
                sampling=section.get("sampling", "daily-first").strip(),
                probe=section.getboolean("probe_html", True),
                word_threshold=section.getint("word_threshold", DEFAULT_WORD_THRESHOLD),
                timemap_summary=section.getboolean("timemap_summary", False),
                cdx_page_size=int(page) if page else None,
            )
        except KeyError as exc:
            raise ConfigError(f"[audit] is missing {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        config.validate()
        return config


def _endpoint_dict(e: ArchiveEndpoint) -> dict:
    return {
        "name": e.name,
        "timemap": e.timemap_url_template,
        "cdx": e.cdx_url_template,
        "memento": e.memento_url_template,
        "raw": e.raw_url_template,
        "rate_limit": str(e.rate_limit),
    }


def _canonical_json(data) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


# -- report ------------------------------------------------------------------

@dataclass
class ZoneReport:
    zone: ZoneSpec
    urls: list[str] = field(default_factory=list)
    capture_counts: dict[str, int] = field(default_factory=dict)
    results: list[ResolutionResult] = field(default_factory=list)
    day_series: list[DaySeriesPoint] = field(default_factory=list)
    impact: list[ThresholdImpactRow] = field(default_factory=list)


@dataclass
class ProbeRow:
    memento: MementoRecord
    probe: HtmlProbeResult


@dataclass
class AuditReport:
    target_url: str
    zones: list[ZoneReport] = field(default_factory=list)
    base_total: int = 0
    base_sampled: int = 0
    probes: list[ProbeRow] = field(default_factory=list)
    hero: HeroViolationReport | None = None
    archive_counts: dict[str, int] | None = None
    diagnostics: list[str] = field(default_factory=list)
    partial_failures: bool = False
    provenance: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "target_url": self.target_url,
            "resolution_model": "nearest-instant; exact midpoints resolve to the earlier capture",
            "base": {"total": self.base_total, "sampled": self.base_sampled},
            "zones": [_zone_dict(z) for z in self.zones],
            "probes": [_probe_dict(p) for p in self.probes],
            "hero": None if self.hero is None else _hero_dict(self.hero),
            "archive_counts": None if self.archive_counts is None else dict(self.archive_counts),
            "diagnostics": list(self.diagnostics),
            "partial_failures": self.partial_failures,
            "provenance": copy.deepcopy(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AuditReport":
        """Rebuild a report, ignoring fields this version does not know."""
        version = data.get("schema_version")
        if not isinstance(version, int) or version < 1:
            raise ValueError(f"not an audit report (schema_version={version!r})")
        hero = data.get("hero")
        return cls(
            target_url=data["target_url"],
            zones=[_zone_from_dict(z) for z in data.get("zones", [])],
            base_total=data.get("base", {}).get("total", 0),
            base_sampled=data.get("base", {}).get("sampled", 0),
            probes=[_probe_from_dict(p) for p in data.get("probes", [])],
            hero=None if hero is None else _hero_from_dict(hero),
            archive_counts=data.get("archive_counts"),
            diagnostics=list(data.get("diagnostics", [])),
            partial_failures=bool(data.get("partial_failures", False)),
            provenance=copy.deepcopy(data.get("provenance", {})),
            schema_version=version,
        )


def report_hash(report: AuditReport | dict) -> str:
    """SHA-256 of the canonical JSON report without ``provenance.generated_at``."""
    data = report.to_dict() if isinstance(report, AuditReport) else json.loads(json.dumps(report))
    data.get("provenance", {}).pop("generated_at", None)
    return hashlib.sha256(_canonical_json(data)).hexdigest()


def load_report(path: str | os.PathLike) -> AuditReport:
    with open(path, encoding="utf-8") as fh:
        return AuditReport.from_dict(json.load(fh))


def _stamp_pair(dt: datetime | None) -> dict:
    if dt is None:
        return {"stamp": None, "iso": None}
    return {"stamp": format_stamp(dt), "iso": iso(dt)}


def _memento_dict(m: MementoRecord) -> dict:
    return {
        "capture": _stamp_pair(m.capture_datetime),
        "access_url": m.access_url,
        "original_url": m.original_url,
        "source_archive": m.source_archive,
    }


def _memento_from_dict(d: dict) -> MementoRecord:
    return MementoRecord(parse_datetime(d["capture"]["stamp"]), d["access_url"],
                         d["original_url"], d.get("source_archive", ""))


def _result_dict(r: ResolutionResult) -> dict:
    return {
        "base": _stamp_pair(r.base_datetime),
        "base_access_url": r.base_access_url,
        "resource_url": r.resource_url,
        "resolved": None if r.resolved is None else _memento_dict(r.resolved),
        "spread_seconds": r.spread_seconds,
        "classification": r.classification.value,
        "threshold_seconds": r.threshold_seconds,
    }


def _result_from_dict(d: dict) -> ResolutionResult:
    return ResolutionResult(
        base_datetime=parse_datetime(d["base"]["stamp"]),
        resource_url=d["resource_url"],
        resolved=None if d.get("resolved") is None else _memento_from_dict(d["resolved"]),
        spread_seconds=d.get("spread_seconds"),
        classification=Classification(d["classification"]),
        threshold_seconds=d.get("threshold_seconds", int(DEFAULT_THRESHOLD.total_seconds())),
        base_access_url=d.get("base_access_url"),
    )


def _fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}" if value.denominator != 1 else str(value.numerator)


def _point_dict(p: DaySeriesPoint) -> dict:
    return {
        "day": p.day.isoformat(),
        "day_stamp": format_stamp(day_start(p.day)),
        "mean_spread_days": round(float(p.mean_spread_days), 6),
        "mean_spread_days_exact": _fraction_str(p.mean_spread_days),
        "memento_count": p.memento_count,
    }


def _impact_dict(row: ThresholdImpactRow) -> dict:
    start, end = row.date_range
    return {
        "range_start": _stamp_pair(day_start(start)),
        "range_end": _stamp_pair(day_start(end)),
        "total_mementos": row.total_mementos,
        "total_days": row.total_days,
        "threshold": format_duration(row.threshold),
        "threshold_seconds": int(row.threshold.total_seconds()),
        "affected_mementos": row.affected_mementos,
        "affected_days": row.affected_days,
    }


def _zone_dict(z: ZoneReport) -> dict:
    return {
        "zone": {"id": z.zone.id, "uri": z.zone.uri, "base_uri": z.zone.base_uri, "min_width": z.zone.min_width},
        "urls": list(z.urls),
        "capture_counts": dict(z.capture_counts),
        "results": [_result_dict(r) for r in z.results],
        "day_series": [_point_dict(p) for p in z.day_series],
        "threshold_impact": [_impact_dict(r) for r in z.impact],
    }


def _zone_from_dict(d: dict) -> ZoneReport:
    zd = d["zone"]
    return ZoneReport(
        zone=ZoneSpec(zd["id"], zd.get("uri"), zd.get("base_uri", "index.html"), zd.get("min_width", 800)),
        urls=list(d.get("urls", [])),
        capture_counts=dict(d.get("capture_counts", {})),
        results=[_result_from_dict(r) for r in d.get("results", [])],
        day_series=[
            DaySeriesPoint(date.fromisoformat(p["day"]), Fraction(p["mean_spread_days_exact"]), p["memento_count"])
            for p in d.get("day_series", [])
        ],
        impact=[
            ThresholdImpactRow(
                (parse_datetime(r["range_start"]["stamp"]).date(), parse_datetime(r["range_end"]["stamp"]).date()),
                r["total_mementos"], r["total_days"], timedelta(seconds=r["threshold_seconds"]),
                r["affected_mementos"], r["affected_days"],
            )
            for r in d.get("threshold_impact", [])
        ],
    )


def _probe_dict(p: ProbeRow) -> dict:
    return {
        "memento": _memento_dict(p.memento),
        "has_hero_section_id": p.probe.has_hero_section_id,
        "content_word_count": p.probe.content_word_count,
        "zones_declared": [z.section for z in p.probe.zones_declared],
        "csr_verdict": p.probe.csr_verdict.value,
    }


def _probe_from_dict(d: dict) -> ProbeRow:
    probe = HtmlProbeResult(
        d["has_hero_section_id"], d["content_word_count"],
        tuple(ZoneSpec.parse(z) for z in d.get("zones_declared", [])), Verdict(d["csr_verdict"]),
    )
    return ProbeRow(_memento_from_dict(d["memento"]), probe)


def _hero_dict(h: HeroViolationReport) -> dict:
    return {
        "scanned": h.scanned,
        "violations": h.violation_count,
        "unresolvable": h.unresolvable_count,
        "results": [_result_dict(r) for r in h.results],
        "affected_days": [
            {"day": day.isoformat(), "same_day_server_rendered": flag}
            for day, flag in h.same_day_alternative.items()
        ],
    }


def _hero_from_dict(d: dict) -> HeroViolationReport:
    return HeroViolationReport(
        scanned=d.get("scanned", 0),
        results=[_result_from_dict(r) for r in d.get("results", [])],
        same_day_alternative={
            date.fromisoformat(x["day"]): bool(x["same_day_server_rendered"]) for x in d.get("affected_days", [])
        },
    )


# -- pipeline ----------------------------------------------------------------

def sample_daily_first(captures: CaptureSet) -> list[int]:
    """Index of the first capture of every UTC day."""
    seen, picked = set(), []
    for i, seconds in enumerate(captures.seconds):
        if seconds // 86400 not in seen:
            seen.add(seconds // 86400)
            picked.append(i)
    return picked


def run_audit(config: AuditConfig, transport=None) -> AuditReport:
    """Run the full pipeline. Identical cache contents give identical reports.

    In offline mode a missing response raises :class:`CacheMiss`. Failures
    fetching one zone's captures only degrade that zone to Unresolvable.
    """
    config.validate()
    timeline = config.timeline()
    fetcher = Fetcher(ResponseCache(config.cache_root, config.cache_ttl), transport, offline=config.offline)
    endpoint = config.base_endpoint()
    report = AuditReport(config.target_url)
    start, end = config.date_range

    base_filter = FilterSpec(status=200, start=day_start(start), end=day_start(end),
                             page_size=config.cdx_page_size)
    base = fetch_captures(endpoint, config.target_url, base_filter, fetcher)
    report.base_total = len(base)
    if base.report.dropped:
        report.diagnostics.append(f"base CDX: skipped {base.report.dropped} malformed lines")
    indices = sample_daily_first(base) if config.sampling == "daily-first" else list(range(len(base)))
    mementos = [base.memento(i) for i in indices]
    report.base_sampled = len(mementos)

    if config.timemap_summary:
        report.archive_counts = _timemap_counts(config, fetcher, report)

    pool = ThreadPoolExecutor(max_workers=config.concurrency)
    try:
        probes = _probe_mementos(config, endpoint, fetcher, mementos, pool, report)
        zones = _choose_zones(config, probes, report)
        for zone in zones:
            report.zones.append(_audit_zone(config, endpoint, fetcher, timeline, zone, mementos, probes, pool, report))
        if config.probe and any(probe is not None for probe in probes):
            report.hero = _hero_scan(config, endpoint, fetcher, timeline, mementos, probes, pool, report)
    finally:
        pool.shutdown(wait=True)

    report.probes = [ProbeRow(m, p) for m, p in zip(mementos, probes) if p is not None]
    report.provenance = {
        "tool_version": __version__,
        "config_hash": config.config_hash(),
        "generated_at": iso(datetime.now(timezone.utc)),
        "mode": "offline" if config.offline else "online",
        "endpoints": [_endpoint_dict(e) for e in config.archives],
        "fetches": [
            {"endpoint": name, "url": url, "fetched_at": iso(datetime.fromtimestamp(at, timezone.utc))}
            for name, url, at in sorted(set(fetcher.fetch_log))
        ],
    }
    return report


def _timemap_counts(config: AuditConfig, fetcher: Fetcher, report: AuditReport) -> dict[str, int]:
    timemaps = []
    for archive in config.archives:
        try:
            timemaps.append(fetch_timemap(archive, config.target_url, fetcher))
        except (NetworkError, ValueError) as exc:
            report.partial_failures = True
            report.diagnostics.append(f"timemap {archive.name}: {exc}")
    if not timemaps:
        return {}
    merged = aggregate_timemaps(timemaps)
    start, end = config.date_range
    return merged.between(day_start(start), day_start(end)).archive_counts()


def _probe_mementos(config, endpoint, fetcher, mementos, pool, report) -> list[HtmlProbeResult | None]:
    if not config.probe:
        return [None] * len(mementos)
    if not endpoint.raw_url_template:
        report.diagnostics.append(f"{endpoint.name} has no raw (id_) access pattern; HTML probing skipped")
        return [None] * len(mementos)

    def probe_one(memento: MementoRecord) -> HtmlProbeResult | str:
        url = endpoint.raw_url(memento.stamp, memento.original_url)
        try:
            resp = fetcher.get(endpoint, url)
        except NetworkError as exc:
            return f"raw HTML {memento.stamp}: {exc}"
        if resp.status != 200:
            return f"raw HTML {memento.stamp}: HTTP {resp.status}"
        return probe_html(resp.body.decode("utf-8", errors="replace"), config.word_threshold)

    probes: list[HtmlProbeResult | None] = []
    for outcome in pool.map(probe_one, mementos):
        if isinstance(outcome, str):
            report.partial_failures = True
            report.diagnostics.append(outcome)
            probes.append(None)
        else:
            probes.append(outcome)
    return probes


def _choose_zones(config, probes, report) -> list[ZoneSpec]:
    if config.zones is not None:
        return list(config.zones)
    found: dict[str, ZoneSpec] = {}
    for probe in probes:
        for zone in probe.zones_declared if probe else ():
            found.setdefault(zone.id, zone)
    if found:
        return list(found.values())
    report.diagnostics.append("no CNN.Zones declaration found; auditing the top three zones")
    return list(DEFAULT_ZONES)


def _fetch_zone_captures(endpoint, fetcher, urls, pool, report) -> dict[str, CaptureSet]:
    def fetch_one(url: str) -> CaptureSet | str:
        try:
            return fetch_captures(endpoint, url, FilterSpec(status=200), fetcher)
        except NetworkError as exc:
            return f"zone captures {url}: {exc}"

    captures = {}
    for url, outcome in zip(urls, pool.map(fetch_one, urls)):
        if isinstance(outcome, str):
            report.partial_failures = True
            report.diagnostics.append(outcome)
            outcome = CaptureSet(url, source_archive=endpoint.name)
        captures[url] = outcome
    return captures


def _requests(zone, timeline, mementos, probes, report) -> list[tuple[int, str]]:
    """(memento index, zone URL) for every sampled memento that requests the zone."""
    out = []
    for i, memento in enumerate(mementos):
        if zone.id == HERO_ZONE and probes[i] is not None and probes[i].has_hero_section_id:
            continue  # Hero delivered in the HTML, no zone request
        try:
            zone_url = zone_manager_url(zone, memento.capture_datetime, timeline)
        except UncoveredInstant as exc:
            report.diagnostics.append(f"{zone.id} {memento.stamp}: {exc}")
            continue
        if zone_url is not None:
            out.append((i, zone_url.url))
    return out


def _audit_zone(config, endpoint, fetcher, timeline, zone, mementos, probes, pool, report) -> ZoneReport:
    requests = _requests(zone, timeline, mementos, probes, report)
    urls = sorted({url for _, url in requests})
    captures = _fetch_zone_captures(endpoint, fetcher, urls, pool, report)
    results = [
        classify(mementos[i].capture_datetime, captures[url], config.violation_threshold, mementos[i].access_url)
        for i, url in requests
    ]
    pairs = [(epoch_seconds(r.base_datetime), r.spread_seconds) for r in results]
    impact = []
    for date_range in config.ranges():
        impact.extend(impact_from_spreads(pairs, date_range, config.thresholds))
    return ZoneReport(
        zone=zone,
        urls=urls,
        capture_counts={url: len(captures[url]) for url in urls},
        results=results,
        day_series=series_from_spreads(pairs),
        impact=impact,
    )


def _hero_scan(config, endpoint, fetcher, timeline, mementos, probes, pool, report) -> HeroViolationReport:
    hero = ZoneSpec(HERO_ZONE)
    pairs, urls = [], {}
    for memento, probe in zip(mementos, probes):
        if probe is None:
            continue
        try:
            zone_url = zone_manager_url(hero, memento.capture_datetime, timeline)
        except UncoveredInstant:
            continue
        if zone_url is None:
            continue
        pairs.append((memento, probe))
        urls[memento] = zone_url.url
    captures = _fetch_zone_captures(endpoint, fetcher, sorted(set(urls.values())), pool, report)
    return hero_violation_scan(pairs, lambda m: captures[urls[m]], config.violation_threshold)


# -- emission ----------------------------------------------------------------

RESOLUTION_HEADER = [
    "zone_id", "base_stamp", "base_iso", "base_access_url", "resource_url",
    "resolved_stamp", "resolved_iso", "resolved_access_url",
    "spread_seconds", "spread_days", "classification", "threshold_seconds",
]
DAY_SERIES_HEADER = ["zone_id", "day", "day_stamp", "mean_spread_days", "memento_count"]
THRESHOLD_HEADER = [
    "zone_id", "range_start", "range_start_stamp", "range_end", "range_end_stamp",
    "total_mementos", "total_days", "threshold", "threshold_seconds",
    "affected_mementos", "affected_days",
]
PLOT_HEADER = ["day", "mean_spread_days"]
FORMATS = ("json", "csv", "plotdata")


def _safe_name(zone_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", zone_id)


def _write_csv(path: Path, header: list[str], rows: Iterable[list]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _resolution_rows(report: AuditReport):
    for zone in report.zones:
        for r in zone.results:
            resolved = r.resolved
            yield [
                zone.zone.id, format_stamp(r.base_datetime), iso(r.base_datetime), r.base_access_url or "",
                r.resource_url,
                resolved.stamp if resolved else "", iso(resolved.capture_datetime) if resolved else "",
                resolved.access_url if resolved else "",
                "" if r.spread_seconds is None else r.spread_seconds,
                "" if r.spread_seconds is None else f"{r.spread_seconds / 86400:.6f}",
                r.classification.value, r.threshold_seconds,
            ]


def emit_report(report: AuditReport, formats: Iterable[str], out_dir: str | os.PathLike) -> list[Path]:
    """Write the report in each requested format and return the files written.

    json: ``report.json``; csv: ``resolutions.csv``, ``day_series.csv``,
    ``threshold_impact.csv``; plotdata: ``plotdata/<zone>.csv`` per zone.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        if fmt == "json":
            path = out / "report.json"
            path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
            written.append(path)
        elif fmt == "csv":
            written.append(_write_csv(out / "resolutions.csv", RESOLUTION_HEADER, _resolution_rows(report)))
            written.append(_write_csv(out / "day_series.csv", DAY_SERIES_HEADER, (
                [z.zone.id, p.day.isoformat(), format_stamp(day_start(p.day)),
                 f"{float(p.mean_spread_days):.6f}", p.memento_count]
                for z in report.zones for p in z.day_series
            )))
            written.append(_write_csv(out / "threshold_impact.csv", THRESHOLD_HEADER, (
                [z.zone.id, r.date_range[0].isoformat(), format_stamp(day_start(r.date_range[0])),
                 r.date_range[1].isoformat(), format_stamp(day_start(r.date_range[1])),
                 r.total_mementos, r.total_days, format_duration(r.threshold),
                 int(r.threshold.total_seconds()), r.affected_mementos, r.affected_days]
                for z in report.zones for r in z.impact
            )))
        else:
            plot_dir = out / "plotdata"
            plot_dir.mkdir(exist_ok=True)
            for z in report.zones:
                written.append(_write_csv(plot_dir / f"{_safe_name(z.zone.id)}.csv", PLOT_HEADER, (
                    [p.day.isoformat(), f"{float(p.mean_spread_days):.6f}"] for p in z.day_series
                )))
    return written


# -- corpus probing ----------------------------------------------------------

_CORPUS_NAME = re.compile(r"^(\d{14})\.html?$")


@dataclass
class CorpusProbe:
    rows: list[tuple[str, HtmlProbeResult]] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        counts = {v.value: 0 for v in Verdict}
        for _, result in self.rows:
            counts[result.csr_verdict.value] += 1
        return counts


def probe_corpus(html_dir: str | os.PathLike, threshold: int = DEFAULT_WORD_THRESHOLD,
                 ascii_only: bool = False) -> CorpusProbe:
    """Probe every ``<14-digit-stamp>.html`` file in a directory, oldest first."""
    corpus = CorpusProbe()
    for path in sorted(Path(html_dir).iterdir()):
        match = _CORPUS_NAME.match(path.name)
        if not match:
            continue
        try:
            html = path.read_bytes().decode("utf-8", errors="replace")
        except OSError as exc:
            corpus.errors.append((path.name, str(exc)))
            continue
        corpus.rows.append((match.group(1), probe_html(html, threshold, ascii_only)))
    return corpus
