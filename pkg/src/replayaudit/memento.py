"""Memento records, link-format TimeMaps and multi-archive aggregation."""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Iterable
from urllib.parse import urlsplit

from .errors import InvalidTimestamp, InvalidUrl, MalformedTimeMap, MixedOriginals
from .timeutil import (
    format_http_date, format_stamp, from_epoch, parse_http_date, parse_stamp, to_utc,
)
from .urlkey import canonical_urlkey

log = logging.getLogger(__name__)

_URIM_STAMP = re.compile(r"/(\d{14})(?:[a-z]{2}_)?/")
_WHITESPACE = re.compile(r"\s")


def is_absolute_url(url: str) -> bool:
    if not url or _WHITESPACE.search(url):
        return False
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    return bool(parts.scheme) and bool(parts.netloc)


@dataclass(frozen=True, order=True)
class MementoRecord:
    capture_datetime: datetime
    access_url: str
    original_url: str
    source_archive: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.capture_datetime, datetime):
            raise InvalidTimestamp(f"not a datetime: {self.capture_datetime!r}")
        object.__setattr__(self, "capture_datetime", to_utc(self.capture_datetime))
        for name in ("access_url", "original_url"):
            if not is_absolute_url(getattr(self, name)):
                raise InvalidUrl(f"{name} is not an absolute URL: {getattr(self, name)!r}")

    @property
    def stamp(self) -> str:
        return format_stamp(self.capture_datetime)

    def sort_key(self) -> tuple:
        return (self.capture_datetime, self.access_url, self.source_archive)


@dataclass
class ParseReport:
    dropped: int = 0
    reasons: list[str] = field(default_factory=list)

    def drop(self, reason: str) -> None:
        self.dropped += 1
        if len(self.reasons) < 50:
            self.reasons.append(reason)


@dataclass(frozen=True)
class TimeMap:
    original_url: str
    mementos: tuple[MementoRecord, ...] = ()
    retrieved_at: datetime | None = field(default=None, compare=False)
    archive_has_none: bool = field(default=False, compare=False)
    report: ParseReport = field(default_factory=ParseReport, compare=False, repr=False)
    # continuation TimeMap URLs announced in the body (pagination)
    continuations: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.mementos, key=MementoRecord.sort_key))
        object.__setattr__(self, "mementos", ordered)

    def __len__(self) -> int:
        return len(self.mementos)

    def archive_counts(self) -> dict[str, int]:
        """Raw memento counts per source archive, largest first."""
        counts = Counter(m.source_archive for m in self.mementos)
        return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    def between(self, start: datetime | None = None, end: datetime | None = None) -> "TimeMap":
        kept = tuple(
            m for m in self.mementos
            if (start is None or m.capture_datetime >= start)
            and (end is None or m.capture_datetime < end)
        )
        return replace(self, mementos=kept)


# -- link-format -------------------------------------------------------------

def _split_links(text: str) -> Iterable[tuple[str, dict[str, str]]]:
    """Yield ``(uri, params)`` for every ``<uri>; k=v; ...`` entry.

    Raises MalformedTimeMap when the text does not have link-format shape.
    """
    i, n = 0, len(text)
    while True:
        while i < n and (text[i].isspace() or text[i] == ","):
            i += 1
        if i >= n:
            return
        if text[i] != "<":
            raise MalformedTimeMap(f"expected '<' at offset {i}")
        end = text.find(">", i + 1)
        if end < 0:
            raise MalformedTimeMap(f"unterminated URI at offset {i}")
        uri = text[i + 1:end].strip()
        i = end + 1
        params: dict[str, str] = {}
        while True:
            while i < n and text[i] in " \t\r\n":
                i += 1
            if i >= n or text[i] == ",":
                break
            if text[i] != ";":
                raise MalformedTimeMap(f"expected ';' or ',' at offset {i}")
            i += 1
            while i < n and text[i] in " \t\r\n":
                i += 1
            start = i
            while i < n and text[i] not in "=;,\r\n":
                i += 1
            name = text[start:i].strip().lower()
            value = ""
            if i < n and text[i] == "=":
                i += 1
                while i < n and text[i] in " \t":
                    i += 1
                if i < n and text[i] == '"':
                    close = text.find('"', i + 1)
                    if close < 0:
                        raise MalformedTimeMap(f"unterminated quoted value at offset {i}")
                    value = text[i + 1:close]
                    i = close + 1
                else:
                    start = i
                    while i < n and text[i] not in ";,":
                        i += 1
                    value = text[start:i].strip()
            if not name:
                raise MalformedTimeMap(f"empty parameter name at offset {start}")
            params.setdefault(name, value)
        yield uri, params


def _memento_datetime(uri: str, params: dict[str, str]) -> datetime:
    if "datetime" in params:
        return parse_http_date(params["datetime"])
    match = _URIM_STAMP.search(uri)
    if not match:
        raise InvalidTimestamp("no datetime attribute and no stamp in URI-M")
    return parse_stamp(match.group(1))


def parse_link_timemap(body: str | bytes, source_archive: str = "") -> TimeMap:
    """Parse an application/link-format TimeMap body.

    Mementos whose datetime or URLs cannot be parsed are dropped and counted
    in ``TimeMap.report``.
    """
    if isinstance(body, bytes):
        body = body.decode("utf-8", errors="replace")
    report = ParseReport()
    original = None
    entries = []
    continuations = []
    for uri, params in _split_links(body):
        rels = params.get("rel", "").split()
        if "original" in rels and original is None:
            original = uri
        if "timemap" in rels and "self" not in rels:
            continuations.append(uri)
        if "memento" in rels:
            entries.append((uri, params))
    if original is None or not is_absolute_url(original):
        raise MalformedTimeMap("no usable rel=\"original\" link")

    seen = set()
    mementos = []
    for uri, params in entries:
        try:
            dt = _memento_datetime(uri, params)
            record = MementoRecord(dt, uri, original, source_archive)
        except (InvalidTimestamp, InvalidUrl) as exc:
            report.drop(f"{uri}: {exc}")
            continue
        if record.sort_key() in seen:
            continue
        seen.add(record.sort_key())
        mementos.append(record)
    if report.dropped:
        log.info("dropped %d unparseable mementos from %s TimeMap", report.dropped, source_archive)
    return TimeMap(original, tuple(mementos), report=report, continuations=tuple(continuations))


def to_link_format(timemap: TimeMap) -> str:
    lines = [f'<{timemap.original_url}>; rel="original"']
    for m in timemap.mementos:
        lines.append(f'<{m.access_url}>; rel="memento"; datetime="{format_http_date(m.capture_datetime)}"')
    return ",\n".join(lines) + "\n"


def aggregate_timemaps(timemaps: Iterable[TimeMap]) -> TimeMap:
    """Union TimeMaps for one original URL from several archives.

    Deduplication is on ``(capture_datetime, access_url)`` only, so copies
    held by different archives at the same instant are all kept. The result
    does not depend on input order.
    """
    timemaps = list(timemaps)
    if not timemaps:
        raise ValueError("nothing to aggregate")
    keys = {canonical_urlkey(t.original_url) for t in timemaps}
    if len(keys) > 1:
        raise MixedOriginals(f"TimeMaps disagree on original URL: {sorted(keys)}")

    chosen: dict[tuple, MementoRecord] = {}
    for tm in timemaps:
        for m in tm.mementos:
            key = (m.capture_datetime, m.access_url)
            if key not in chosen or m.source_archive < chosen[key].source_archive:
                chosen[key] = m
    retrieved = [t.retrieved_at for t in timemaps if t.retrieved_at is not None]
    report = ParseReport(sum(t.report.dropped for t in timemaps))
    return TimeMap(
        original_url=min(t.original_url for t in timemaps),
        mementos=tuple(chosen.values()),
        retrieved_at=max(retrieved) if retrieved else None,
        archive_has_none=all(t.archive_has_none for t in timemaps),
        report=report,
    )


def fetch_timemap(endpoint, original_url: str, fetcher) -> TimeMap:
    """Fetch, parse and merge every page of an archive's TimeMap.

    ``fetcher`` is a :class:`replayaudit.fetch.Fetcher`; responses are cached
    by it. A 404 from the archive yields an empty TimeMap flagged
    ``archive_has_none``.
    """
    first_url = endpoint.timemap_url(original_url)
    pending = [first_url]
    visited: set[str] = set()
    pages: list[TimeMap] = []
    fetched_at: list[float] = []
    while pending:
        url = pending.pop(0)
        if url in visited:
            continue
        visited.add(url)
        resp = fetcher.get(endpoint, url)
        fetched_at.append(resp.fetched_at)
        if resp.status == 404:
            if url == first_url:
                return TimeMap(original_url, archive_has_none=True,
                               retrieved_at=_utc_from_epoch(resp.fetched_at))
            continue
        if resp.status >= 400:
            raise MalformedTimeMap(f"{endpoint.name} answered HTTP {resp.status} for {url}")
        page = parse_link_timemap(resp.body, endpoint.name)
        pages.append(page)
        pending.extend(u for u in page.continuations if u not in visited)

    merged = aggregate_timemaps(pages)
    return replace(merged, retrieved_at=_utc_from_epoch(max(fetched_at)))


def _utc_from_epoch(seconds: float) -> datetime:
    return from_epoch(int(seconds))
