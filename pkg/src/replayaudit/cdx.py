"""CDX / CDXJ line parsing and CDX API capture queries."""
from __future__ import annotations

import bisect
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Sequence
from urllib.parse import quote

from .errors import InvalidTimestamp, InvalidUrl, MalformedCdxLine, NetworkError
from .memento import MementoRecord, ParseReport, is_absolute_url
from .timeutil import epoch_seconds, format_stamp, parse_stamp
from .urlkey import canonical_urlkey

log = logging.getLogger(__name__)

DEFAULT_ACCESS_TEMPLATE = "https://web.archive.org/web/{timestamp}/{url}"

# Field layouts by token count. 7 is the CDX server default output,
# 9 and 11 are the classic "CDX N b a m s k r V g" / "N b a m s k r M S V g".
LAYOUTS = {
    7: ("urlkey", "timestamp", "original", "mimetype", "status", "digest", "length"),
    9: ("urlkey", "timestamp", "original", "mimetype", "status", "digest",
        "redirect", "offset", "filename"),
    11: ("urlkey", "timestamp", "original", "mimetype", "status", "digest",
         "redirect", "robotflags", "length", "offset", "filename"),
}
_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class CdxRecord:
    urlkey: str
    timestamp: datetime
    original: str
    mimetype: str = "-"
    status_code: int | None = None
    digest: str | None = None
    length: int | None = None
    fmt: str = "cdx7"
    # redirect/robotflags/offset/filename for classic lines, the JSON
    # object for CDXJ; kept verbatim so lines re-serialize unchanged
    extra: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    @property
    def stamp(self) -> str:
        return format_stamp(self.timestamp)

    def to_line(self) -> str:
        if self.fmt == "cdxj":
            data = dict(json.loads(dict(self.extra).get("json", "{}")))
            return f"{self.urlkey} {self.stamp} {json.dumps(data, separators=(', ', ': '))}"
        values = {
            "urlkey": self.urlkey,
            "timestamp": self.stamp,
            "original": self.original,
            "mimetype": self.mimetype,
            "status": "-" if self.status_code is None else str(self.status_code),
            "digest": self.digest or "-",
            "length": "-" if self.length is None else str(self.length),
        }
        values.update(self.extra)
        return " ".join(values[name] for name in LAYOUTS[int(self.fmt[3:])])


def _byte_offset(line: str, char_offset: int) -> int:
    return len(line[:char_offset].encode("utf-8"))


def _status(token: str) -> int | None:
    if token == "-":
        return None
    if len(token) == 3 and token.isdigit() and 100 <= int(token) <= 599:
        return int(token)
    raise ValueError(token)


def _length(token: str) -> int | None:
    if token == "-":
        return None
    if token.isdigit():
        return int(token)
    raise ValueError(token)


def parse_cdx_line(line: str) -> CdxRecord:
    """Parse one classic CDX (7, 9 or 11 fields) or CDXJ line."""
    line = line.rstrip("\r\n")
    tokens = [(m.start(), m.group()) for m in _TOKEN.finditer(line)]
    if len(tokens) < 3:
        raise MalformedCdxLine(f"expected at least 3 fields, got {len(tokens)}", _byte_offset(line, len(line)))

    (_, urlkey), (ts_at, ts) = tokens[0], tokens[1]
    try:
        timestamp = parse_stamp(ts)
    except InvalidTimestamp:
        raise MalformedCdxLine(f"bad timestamp {ts!r}", _byte_offset(line, ts_at)) from None

    third_at = tokens[2][0]
    if line[third_at] == "{":
        return _parse_cdxj(line, urlkey, timestamp, third_at)

    layout = LAYOUTS.get(len(tokens))
    if layout is None:
        bad = tokens[7][0] if len(tokens) > 7 else len(line)
        raise MalformedCdxLine(f"unsupported field count {len(tokens)}", _byte_offset(line, bad))
    values = {}
    for (at, token), name in zip(tokens, layout):
        values[name] = token
        try:
            if name == "original" and not is_absolute_url(token):
                raise ValueError(token)
            if name == "status":
                _status(token)
            elif name == "length":
                _length(token)
        except ValueError:
            raise MalformedCdxLine(f"bad {name} field {token!r}", _byte_offset(line, at)) from None
    return CdxRecord(
        urlkey=urlkey,
        timestamp=timestamp,
        original=values["original"],
        mimetype=values["mimetype"],
        status_code=_status(values["status"]),
        digest=None if values["digest"] == "-" else values["digest"],
        length=_length(values.get("length", "-")),
        fmt=f"cdx{len(tokens)}",
        extra=tuple((k, v) for k, v in values.items()
                    if k in ("redirect", "robotflags", "offset", "filename")),
    )


def _parse_cdxj(line: str, urlkey: str, timestamp: datetime, at: int) -> CdxRecord:
    try:
        data = json.loads(line[at:])
    except ValueError:
        raise MalformedCdxLine("bad CDXJ JSON block", _byte_offset(line, at)) from None
    if not isinstance(data, dict):
        raise MalformedCdxLine("CDXJ block is not an object", _byte_offset(line, at))
    original = data.get("url")
    if not isinstance(original, str) or not is_absolute_url(original):
        raise MalformedCdxLine("CDXJ block has no absolute url", _byte_offset(line, at))
    try:
        status = _status(str(data.get("status", "-")))
        length = _length(str(data.get("length", "-")))
    except ValueError:
        raise MalformedCdxLine("bad status or length in CDXJ block", _byte_offset(line, at)) from None
    digest = data.get("digest")
    return CdxRecord(
        urlkey=urlkey,
        timestamp=timestamp,
        original=original,
        mimetype=str(data.get("mime", "-")),
        status_code=status,
        digest=str(digest) if digest not in (None, "-") else None,
        length=length,
        fmt="cdxj",
        extra=(("json", json.dumps(data)),),
    )


def parse_cdx_lines(lines: Iterable[str], report: ParseReport | None = None) -> list[CdxRecord]:
    """Parse many lines, skipping blanks, headers and malformed rows."""
    records = []
    for line in lines:
        if not line.strip() or line.startswith((" CDX", "CDX ")):
            continue
        try:
            records.append(parse_cdx_line(line))
        except MalformedCdxLine as exc:
            if report is not None:
                report.drop(str(exc))
    return records


# -- capture sets ------------------------------------------------------------

class CaptureSet:
    """Captures of one URL, ordered by timestamp (ties: digest, then input order)."""

    def __init__(self, original_url: str, records: Sequence[CdxRecord] = (),
                 filter_applied: str = "", source_archive: str = "",
                 access_template: str = DEFAULT_ACCESS_TEMPLATE,
                 report: ParseReport | None = None) -> None:
        self.original_url = original_url
        self.urlkey = canonical_urlkey(original_url)
        for r in records:
            if canonical_urlkey(r.original) != self.urlkey:
                raise ValueError(f"{r.original} does not belong to {original_url}")
        self.records: tuple[CdxRecord, ...] = tuple(
            sorted(records, key=lambda r: (r.timestamp, r.digest or ""))
        )
        self.filter_applied = filter_applied
        self.source_archive = source_archive
        self.access_template = access_template
        self.report = report or ParseReport()
        self.seconds: list[int] = [epoch_seconds(r.timestamp) for r in self.records]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CaptureSet):
            return NotImplemented
        return (self.urlkey, self.records) == (other.urlkey, other.records)

    def __repr__(self) -> str:
        return f"CaptureSet({self.original_url!r}, {len(self)} records, {self.filter_applied!r})"

    @classmethod
    def from_datetimes(cls, original_url: str, datetimes: Iterable[datetime], **kwargs) -> "CaptureSet":
        """Build a set from bare capture instants (status 200, no digest)."""
        key = canonical_urlkey(original_url)
        records = [CdxRecord(key, dt, original_url, "text/html", 200) for dt in datetimes]
        return cls(original_url, records, **kwargs)

    def access_url(self, record: CdxRecord) -> str:
        return self.access_template.replace("{timestamp}", record.stamp).replace("{url}", record.original)

    def memento(self, index: int) -> MementoRecord:
        record = self.records[index]
        return MementoRecord(record.timestamp, self.access_url(record), record.original, self.source_archive)

    def between(self, start: datetime | None, end: datetime | None) -> "CaptureSet":
        lo = 0 if start is None else bisect.bisect_left(self.seconds, epoch_seconds(start))
        hi = len(self.seconds) if end is None else bisect.bisect_left(self.seconds, epoch_seconds(end))
        return CaptureSet(self.original_url, self.records[lo:hi], self.filter_applied,
                          self.source_archive, self.access_template)


@dataclass(frozen=True)
class FilterSpec:
    """CDX query constraints. ``start``/``end`` form a half-open interval."""

    status: int | None = 200
    start: datetime | None = None
    end: datetime | None = None
    match_type: str = "exact"
    page_size: int | None = None

    def describe(self) -> str:
        parts = []
        if self.status is not None:
            parts.append(f"status={self.status}")
        if self.start is not None:
            parts.append(f"from={format_stamp(self.start)}")
        if self.end is not None:
            parts.append(f"before={format_stamp(self.end)}")
        return ",".join(parts) or "none"

    def query_params(self) -> list[tuple[str, str]]:
        params = [("matchType", self.match_type)]
        if self.status is not None:
            params.append(("filter", f"statuscode:{self.status}"))
        if self.start is not None:
            params.append(("from", format_stamp(self.start)))
        if self.end is not None:
            params.append(("to", format_stamp(self.end - timedelta(seconds=1))))
        if self.page_size:
            params += [("limit", str(self.page_size)), ("showResumeKey", "true")]
        return params

    def accepts(self, record: CdxRecord) -> bool:
        if self.status is not None and record.status_code != self.status:
            return False
        if self.start is not None and record.timestamp < self.start:
            return False
        if self.end is not None and record.timestamp >= self.end:
            return False
        return True


def split_resume_key(body: str) -> tuple[list[str], str | None]:
    """Separate CDX lines from a trailing resume key (blank line, then key)."""
    lines = body.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) >= 2 and not lines[-2].strip():
        return lines[:-2], lines[-1].strip()
    return lines, None


def _with_params(url: str, params: list[tuple[str, str]]) -> str:
    query = "&".join(f"{k}={quote(v, safe=':')}" for k, v in params)
    return url + ("&" if "?" in url else "?") + query


def fetch_captures(endpoint, url: str, filters: FilterSpec, fetcher) -> CaptureSet:
    """Query an archive's CDX API for exact-URL captures, following resume keys."""
    base = _with_params(endpoint.cdx_url(url), filters.query_params())
    report = ParseReport()
    key = canonical_urlkey(url)
    records: list[CdxRecord] = []
    request_url, seen = base, set()
    while request_url not in seen:
        seen.add(request_url)
        resp = fetcher.get(endpoint, request_url)
        if resp.status == 404:
            break
        if resp.status >= 400:
            raise NetworkError(f"{endpoint.name} answered HTTP {resp.status} for {request_url}")
        lines, resume = split_resume_key(resp.body.decode("utf-8", errors="replace"))
        for record in parse_cdx_lines(lines, report):
            try:
                same = canonical_urlkey(record.original) == key
            except InvalidUrl:
                same = False
            if same and filters.accepts(record):
                records.append(record)
        if not resume:
            break
        request_url = _with_params(base, [("resumeKey", resume)])
    if report.dropped:
        log.warning("%s: skipped %d malformed CDX lines for %s", endpoint.name, report.dropped, url)
    return CaptureSet(
        url, records, filter_applied=filters.describe(), source_archive=endpoint.name,
        access_template=endpoint.memento_url_template or DEFAULT_ACCESS_TEMPLATE, report=report,
    )
