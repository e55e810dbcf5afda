"""Test doubles: an in-memory Wayback-style archive and the audit fixture bundle."""
from __future__ import annotations

import hashlib
import random
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

sys.path.insert(0, str(Path(__file__).parent / "fixtures"))
import build_corpus  # noqa: E402

UTC = timezone.utc
FIXTURES = Path(__file__).parent / "fixtures"


def utc(*args) -> datetime:
    return datetime(*args, tzinfo=UTC)


def stamp(dt: datetime) -> str:
    return dt.strftime("%Y%m%d%H%M%S")


def simple_key(url: str) -> str:
    """Deliberately naive key (scheme and default port stripped) for the fake index."""
    parts = urlsplit(url)
    host = parts.netloc.lower().replace(":80", "").replace(":443", "")
    return host + (parts.path or "/") + ("?" + parts.query if parts.query else "")


@dataclass
class FakeWayback:
    """Serves CDX queries (with resume keys), ``id_`` raw pages and link TimeMaps.

    ``captures`` maps a URL to capture datetimes (all status 200);
    ``pages`` maps a 14-digit stamp to raw HTML, ``page_for`` is the fallback.
    """

    captures: dict[str, list[datetime]] = field(default_factory=dict)
    pages: dict[str, str] = field(default_factory=dict)
    page_for: object = None
    extra_lines: dict[str, list[str]] = field(default_factory=dict)
    requests: list[str] = field(default_factory=list)
    fail_urls: set = field(default_factory=set)

    def add(self, url: str, datetimes) -> None:
        self.captures.setdefault(simple_key(url), []).extend(datetimes)

    def __call__(self, url: str, timeout: float):
        self.requests.append(url)
        if any(f in url for f in self.fail_urls):
            return 503, b"unavailable"
        parts = urlsplit(url)
        if parts.path.startswith("/cdx/search/cdx"):
            return self._cdx(parse_qs(parts.query))
        if parts.path.startswith("/web/timemap/link/"):
            return self._timemap(url.split("/web/timemap/link/", 1)[1])
        if parts.path.startswith("/web/"):
            rest = url.split("/web/", 1)[1]
            head, target = rest.split("/", 1)
            if head.endswith("id_"):
                s = head[:-3]
                html = self.pages.get(s) or (self.page_for(s) if self.page_for else None)
                return (200, html.encode("utf-8")) if html else (404, b"")
        return 404, b""

    def _cdx(self, q):
        target = q["url"][0]
        times = sorted(self.captures.get(simple_key(target), []))
        if "from" in q:
            lo = q["from"][0]
            times = [t for t in times if stamp(t) >= lo.ljust(14, "0")]
        if "to" in q:
            hi = q["to"][0]
            times = [t for t in times if stamp(t) <= hi.ljust(14, "9")]
        key = simple_key(target)
        lines = [f"{key} {stamp(t)} {target} text/html 200 D{stamp(t)} 1000" for t in times]
        lines += self.extra_lines.get(key, [])
        start = int(q.get("resumeKey", ["0"])[0])
        if "limit" in q:
            limit = int(q["limit"][0])
            page = lines[start:start + limit]
            body = "\n".join(page) + "\n"
            if start + limit < len(lines):
                body += "\n" + str(start + limit) + "\n"
            return 200, body.encode()
        return 200, ("\n".join(lines) + "\n" if lines else "").encode()

    def _timemap(self, target):
        times = sorted(self.captures.get(simple_key(target), []))
        if not times:
            return 404, b""
        links = [f'<{target}>; rel="original"']
        links += [
            f'<https://web.archive.org/web/{stamp(t)}/{target}>; rel="memento"; '
            f'datetime="{t.strftime("%a, %d %b %Y %H:%M:%S GMT")}"'
            for t in times
        ]
        return 200, (",\n".join(links) + "\n").encode()


# -- the desk-scale audit bundle ---------------------------------------------

ZONE_BASE = "http://www.cnn.com/data/ocs/section/index.html:{zone}/views/zones/common/zone-manager{ext}"
BUNDLE_START = date(2015, 4, 24)
BUNDLE_END = date(2016, 12, 17)


def oracle_extension(at: datetime) -> str | None:
    """Zone-manager extension by era, written out independently of the package."""
    if at < utc(2015, 4, 24):
        return None
    if at < utc(2016, 10, 18):
        return ".html"
    if at < utc(2017, 1, 31):
        return ".izl.json"
    return ".izl"


def _hero_in_html(s: str) -> bool:
    at = datetime.strptime(s, "%Y%m%d%H%M%S").replace(tzinfo=UTC)
    if at < utc(2015, 9, 17):
        return True
    if at >= utc(2016, 11, 1):
        return False
    return int(hashlib.sha256(s.encode()).hexdigest(), 16) % 10 < 7


def bundle_page(s: str) -> str:
    if _hero_in_html(s):
        return build_corpus.server_rendered(f"Headline for {s}", zones=True)
    return build_corpus.skeleton()


def build_bundle_archive(seed: int = 20151008) -> FakeWayback:
    rng = random.Random(seed)
    archive = FakeWayback(page_for=bundle_page)
    base = []
    day = BUNDLE_START
    while day < BUNDLE_END:
        for _ in range(rng.randint(1, 4)):
            base.append(utc(day.year, day.month, day.day) + timedelta(seconds=rng.randrange(86400)))
        day += timedelta(days=1)
    archive.add("http://www.cnn.com/", base)

    def zone_times(first: date, last: date, every: int, jitter: bool = True):
        out, d = [], first
        while d < last:
            out.append(utc(d.year, d.month, d.day) + timedelta(seconds=rng.randrange(86400) if jitter else 43200))
            d += timedelta(days=every)
        return out

    # homepage2/3: none until May 23 2015, sparse to Jul 21 2016, then daily
    for zone in ("homepage2-zone-1", "homepage3-zone-1"):
        html = ZONE_BASE.format(zone=zone, ext=".html")
        sparse = [utc(2015, 5, 23, 4, 0, 0), utc(2015, 7, 10, 0, 18, 45), utc(2016, 1, 6, 23, 34, 5)]
        sparse += zone_times(date(2016, 1, 7), date(2016, 7, 21), 17)
        archive.add(html, sparse + zone_times(date(2016, 7, 21), date(2016, 10, 18), 1))
        archive.add(ZONE_BASE.format(zone=zone, ext=".izl.json"), zone_times(date(2016, 10, 18), date(2017, 1, 31), 2))
    hero = "homepage1-zone-1"
    archive.add(ZONE_BASE.format(zone=hero, ext=".html"),
                [utc(2016, 7, 29, 0, 31, 56)] + zone_times(date(2016, 8, 15), date(2016, 10, 18), 9))
    archive.add(ZONE_BASE.format(zone=hero, ext=".izl.json"), zone_times(date(2016, 10, 20), date(2017, 1, 31), 1))
    return archive


BUNDLE_CONFIG = """\
[audit]
target_url = http://www.cnn.com/
date_from = 2015-04-24
date_to = 2016-12-17
zones = homepage1-zone-1, homepage2-zone-1, homepage3-zone-1
thresholds = 1h, 2h, 6h, 24h, 48h
violation_threshold = 48h
impact_ranges = 2015-04-24..2015-05-23, 2015-05-23..2016-07-21, 2016-07-21..2016-12-17
cache_root = cache
mode = {mode}
sampling = daily-first
probe_html = yes
timemap_summary = yes
concurrency = 4

[archive:web.archive.org]
timemap = https://web.archive.org/web/timemap/link/{{url}}
cdx = https://web.archive.org/cdx/search/cdx?url={{url}}
memento = https://web.archive.org/web/{{timestamp}}/{{url}}
raw = https://web.archive.org/web/{{timestamp}}id_/{{url}}
rate_limit = 100000
"""


def write_bundle_config(directory: Path, mode: str) -> Path:
    path = directory / f"audit-{mode}.ini"
    path.write_text(BUNDLE_CONFIG.format(mode=mode), encoding="utf-8")
    return path
