"""CNN.com zone construction: ``CNN.Zones`` extraction, zone-manager URLs per
delivery era, and HTML probes telling server-rendered pages from CSR templates.
"""
from __future__ import annotations

import enum
import json
import logging
import os
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime
from html.parser import HTMLParser

from .errors import ConfigError, UncoveredInstant
from .timeutil import day_start, to_utc

log = logging.getLogger(__name__)

HERO_ZONE = "homepage1-zone-1"
DEFAULT_MIN_WIDTH = 800
DEFAULT_WORD_THRESHOLD = 15
ZONE_URL_PREFIX = "http://www.cnn.com/data/ocs/section/"
ZONE_URL_SUFFIX = "/views/zones/common/zone-manager"


_ZONE_ID = re.compile(r"[A-Za-z0-9_][\w.-]*")
_ZONE_URI = re.compile(r"[\w.-]+(?:/[\w.-]+)*")


@dataclass(frozen=True)
class ZoneSpec:
    id: str
    uri: str | None = None
    base_uri: str = "index.html"
    min_width: int = DEFAULT_MIN_WIDTH

    def __post_init__(self) -> None:
        if not _ZONE_ID.fullmatch(self.id):
            raise ValueError(f"bad zone id {self.id!r}")
        if self.uri is not None and not _ZONE_URI.fullmatch(self.uri):
            raise ValueError(f"bad zone uri {self.uri!r}")

    @property
    def section(self) -> str:
        return f"{self.uri or self.base_uri}:{self.id}"

    @classmethod
    def parse(cls, text: str) -> "ZoneSpec":
        """``homepage2-zone-1`` or ``_homepage-zone-injection/index.html:homepage-injection-zone-1``."""
        text = text.strip()
        uri, sep, zone_id = text.rpartition(":")
        return cls(zone_id, uri or None) if sep else cls(text)


# -- eras --------------------------------------------------------------------

class Delivery(enum.Enum):
    ZONES_IN_HTML = "zones_in_html"
    CSR_HTML = "csr_except_hero_html"
    HERO_SOMETIMES_CSR = "hero_sometimes_csr"
    IZL_JSON = "izl_json"
    ALL_ZONES_CSR = "all_zones_csr"
    IZL = "izl"


# extension switch each descriptor introduces; None = content is in the base
# HTML, missing key = extension unchanged
_EXTENSION_CHANGE = {
    Delivery.ZONES_IN_HTML: None,
    Delivery.CSR_HTML: ".html",
    Delivery.IZL_JSON: ".izl.json",
    Delivery.IZL: ".izl",
}


@dataclass(frozen=True)
class EraTimeline:
    """Dated delivery changes; each era is ``[boundary, next boundary)``.

    Instants before the first boundary have no delivery era. They still get
    an answer from :meth:`extension_at` (no zone-manager file) when the
    first era is ``ZONES_IN_HTML``: nothing was client-side rendered before
    then.
    """

    boundaries: tuple[tuple[date, Delivery], ...]

    def __post_init__(self) -> None:
        days = [d for d, _ in self.boundaries]
        if not days:
            raise ConfigError("era timeline is empty")
        if any(b <= a for a, b in zip(days, days[1:])):
            raise ConfigError("era boundaries must be strictly increasing")

    def era_index(self, at: datetime) -> int:
        at = to_utc(at)
        index = -1
        for i, (day, _) in enumerate(self.boundaries):
            if day_start(day) <= at:
                index = i
        if index < 0 and self.boundaries[0][1] is not Delivery.ZONES_IN_HTML:
            raise UncoveredInstant(f"{at.isoformat()} precedes the era timeline")
        return index

    def delivery_at(self, at: datetime) -> Delivery:
        index = self.era_index(at)
        if index < 0:
            raise UncoveredInstant(f"{to_utc(at).isoformat()} precedes the first delivery era")
        return self.boundaries[index][1]

    def extension_at(self, at: datetime) -> str | None:
        extension = None
        for _, delivery in self.boundaries[: self.era_index(at) + 1]:
            if delivery in _EXTENSION_CHANGE:
                extension = _EXTENSION_CHANGE[delivery]
        return extension

    @classmethod
    def from_text(cls, text: str) -> "EraTimeline":
        """Parse ``YYYY-MM-DD = descriptor`` lines; ``#`` starts a comment."""
        pairs = []
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            day, sep, descriptor = line.partition("=")
            if not sep:
                raise ConfigError(f"era timeline line {number}: expected 'date = descriptor'")
            try:
                pairs.append((date.fromisoformat(day.strip()), Delivery(descriptor.strip())))
            except ValueError as exc:
                raise ConfigError(f"era timeline line {number}: {exc}") from None
        return cls(tuple(pairs))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EraTimeline":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        return "".join(f"{d.isoformat()} = {k.value}\n" for d, k in self.boundaries)


DEFAULT_TIMELINE = EraTimeline((
    (date(2015, 2, 18), Delivery.ZONES_IN_HTML),
    (date(2015, 4, 24), Delivery.CSR_HTML),
    (date(2015, 9, 17), Delivery.HERO_SOMETIMES_CSR),
    (date(2016, 10, 18), Delivery.IZL_JSON),
    (date(2016, 11, 1), Delivery.ALL_ZONES_CSR),
    (date(2017, 1, 31), Delivery.IZL),
))


@dataclass(frozen=True)
class ZoneUrl:
    zone: ZoneSpec
    url: str
    extension: str
    delivery: Delivery


def zone_manager_url(zone: ZoneSpec, at: datetime,
                     timeline: EraTimeline = DEFAULT_TIMELINE) -> ZoneUrl | None:
    """The zone-manager URL a page captured at ``at`` would request, if any."""
    extension = timeline.extension_at(at)
    if extension is None:
        return None
    url = f"{ZONE_URL_PREFIX}{zone.section}{ZONE_URL_SUFFIX}{extension}"
    return ZoneUrl(zone, url, extension, timeline.delivery_at(at))


# -- CNN.Zones extraction ----------------------------------------------------

_ASSIGNMENT = re.compile(r"CNN\.Zones\s*=\s*\{")


def _balanced_object(text: str, start: int) -> str | None:
    """Return the ``{...}`` literal opening at ``start``, honoring strings."""
    depth = 0
    quote = None
    i = start
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'`":
            quote = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
        i += 1
    return None


_BARE_KEY = re.compile(r'([{,]\s*)([A-Za-z_$][\w$]*|\d+)(\s*:)')
_TRAILING_COMMA = re.compile(r",(\s*[}\]])")
_SINGLE_QUOTED = re.compile(r"'((?:[^'\\]|\\.)*)'")


def _loads_js_object(literal: str):
    try:
        return json.loads(literal)
    except ValueError:
        pass
    relaxed = _SINGLE_QUOTED.sub(lambda m: json.dumps(m.group(1)), literal)
    relaxed = _BARE_KEY.sub(r'\1"\2"\3', relaxed)
    relaxed = _TRAILING_COMMA.sub(r"\1", relaxed)
    return json.loads(relaxed)


def _find_zone_table(node):
    if isinstance(node, dict):
        if isinstance(node.get("minWidth"), dict):
            return node
        for value in node.values():
            found = _find_zone_table(value)
            if found is not None:
                return found
    elif isinstance(node, list):
        for value in node:
            found = _find_zone_table(value)
            if found is not None:
                return found
    return None


def extract_zones(html: str, min_width: int = DEFAULT_MIN_WIDTH) -> list[ZoneSpec]:
    """Zones declared by the inline ``CNN.Zones`` literal for one breakpoint.

    Returns zones in declaration order, or an empty list (with a logged
    diagnostic when the structure exists but cannot be read).
    """
    match = _ASSIGNMENT.search(html)
    if not match:
        return []
    literal = _balanced_object(html, match.end() - 1)
    if literal is None:
        log.warning("CNN.Zones literal is not terminated")
        return []
    try:
        table = _find_zone_table(_loads_js_object(literal))
    except ValueError as exc:
        log.warning("CNN.Zones literal is not parseable: %s", exc)
        return []
    if table is None:
        log.warning("CNN.Zones has no minWidth table")
        return []
    base_uri = table.get("baseUri") or "index.html"
    entries = table["minWidth"].get(str(min_width))
    if not isinstance(entries, list):
        log.warning("CNN.Zones has no %s breakpoint", min_width)
        return []
    zones = []
    for entry in entries:
        if not isinstance(entry, dict) or not entry.get("id"):
            log.warning("skipping zone entry without id: %r", entry)
            continue
        uri = entry.get("uri")
        try:
            zones.append(ZoneSpec(str(entry["id"]), str(uri) if uri else None, str(base_uri), min_width))
        except ValueError as exc:
            log.warning("skipping zone entry: %s", exc)
    return zones


# -- probing -----------------------------------------------------------------

class Verdict(enum.Enum):
    SERVER_RENDERED = "ServerRendered"
    CSR_TEMPLATE = "CsrTemplate"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class HtmlProbeResult:
    has_hero_section_id: bool
    content_word_count: int
    zones_declared: tuple[ZoneSpec, ...] = ()
    csr_verdict: Verdict = Verdict.INDETERMINATE
    threshold: int = field(default=DEFAULT_WORD_THRESHOLD, compare=False)


class _TextCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self.skip_depth = 0
        self.hero = False

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self.skip_depth += 1
        elif tag == "section" and any(k == "id" and v == HERO_ZONE for k, v in attrs):
            self.hero = True
        self.chunks.append(" ")

    def handle_startendtag(self, tag, attrs):
        if tag == "section" and any(k == "id" and v == HERO_ZONE for k, v in attrs):
            self.hero = True
        self.chunks.append(" ")

    def handle_endtag(self, tag):
        if tag in ("script", "style") and self.skip_depth:
            self.skip_depth -= 1
        self.chunks.append(" ")

    def handle_data(self, data):
        if not self.skip_depth:
            self.chunks.append(data)


def _is_lower(ch: str, ascii_only: bool) -> bool:
    if ascii_only:
        return "a" <= ch <= "z"
    return unicodedata.category(ch) == "Ll"


def visible_text(html: str) -> tuple[str, bool]:
    """Text left after dropping tags and script/style bodies, plus the hero flag."""
    parser = _TextCollector()
    try:
        parser.feed(html)
        parser.close()
    except (AssertionError, ValueError) as exc:
        # keep whatever was collected before the parser gave up
        log.debug("tag soup: %s", exc)
    return "".join(parser.chunks), parser.hero


def count_content_words(text: str, ascii_only: bool = False) -> int:
    return sum(1 for token in text.split() if _is_lower(token[0], ascii_only))


def probe_html(html: str, threshold: int = DEFAULT_WORD_THRESHOLD,
               ascii_only: bool = False) -> HtmlProbeResult:
    """Classify a raw (unrewritten) base page.

    A page is a CSR template when at most ``threshold`` whitespace tokens
    start with a lowercase letter; otherwise it is server rendered when it
    carries the Hero ``<section id="homepage1-zone-1">``, else indeterminate.
    """
    text, hero = visible_text(html)
    words = count_content_words(text, ascii_only)
    if words <= threshold:
        verdict = Verdict.CSR_TEMPLATE
    elif hero:
        verdict = Verdict.SERVER_RENDERED
    else:
        verdict = Verdict.INDETERMINATE
    return HtmlProbeResult(hero, words, tuple(extract_zones(html)), verdict, threshold)
