"""Audit web archives for temporal violations in client-side-rendered pages."""

__version__ = "0.1.0"

from .cdx import CaptureSet, CdxRecord, FilterSpec, fetch_captures, parse_cdx_line
from .urlkey import canonical_urlkey
from .errors import (
    CacheMiss, ConfigError, InvalidRange, InvalidUrl, MalformedCdxLine, MalformedTimeMap,
    MixedOriginals, NetworkError, UncoveredInstant,
)
from .fetch import ArchiveEndpoint, Fetcher, ResponseCache
from .memento import MementoRecord, TimeMap, aggregate_timemaps, fetch_timemap, parse_link_timemap
from .resolution import (
    Classification, ResolutionResult, classify, day_series, hero_violation_scan, resolve_nearest,
    threshold_impact,
)
from .zones import (
    DEFAULT_TIMELINE, EraTimeline, HtmlProbeResult, Verdict, ZoneSpec, extract_zones, probe_html,
    zone_manager_url,
)
from .audit import AuditConfig, AuditReport, emit_report, probe_corpus, run_audit

__all__ = [
    "ArchiveEndpoint", "AuditConfig", "AuditReport", "CacheMiss", "CaptureSet", "CdxRecord",
    "Classification", "ConfigError", "DEFAULT_TIMELINE", "EraTimeline", "Fetcher", "FilterSpec",
    "HtmlProbeResult", "InvalidRange", "InvalidUrl", "MalformedCdxLine", "MalformedTimeMap",
    "MementoRecord", "MixedOriginals", "NetworkError", "ResolutionResult", "ResponseCache", "TimeMap",
    "UncoveredInstant", "Verdict", "ZoneSpec", "aggregate_timemaps", "canonical_urlkey", "classify",
    "day_series", "emit_report", "extract_zones", "fetch_captures", "fetch_timemap",
    "hero_violation_scan", "parse_cdx_line", "parse_link_timemap", "probe_corpus", "probe_html",
    "resolve_nearest", "run_audit", "threshold_impact", "zone_manager_url",
]
