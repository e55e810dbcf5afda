"""Archive endpoints, the on-disk response cache and the rate-limited fetcher.

Cache layout::

    <cache_root>/<endpoint_name>/<sha256-of-key>.body
    <cache_root>/<endpoint_name>/index

``index`` is append-only, one line per stored response::

    <key> TAB <fetch epoch seconds> TAB <filename> [TAB <http status>]

The last line for a key wins. A missing status column means 200.
"""
from __future__ import annotations

import configparser
import hashlib
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Protocol
from urllib.parse import quote

from .errors import CacheMiss, ConfigError, NetworkError, OfflineViolation

log = logging.getLogger(__name__)

URL_PLACEHOLDER = "{url}"
STAMP_PLACEHOLDER = "{timestamp}"


@dataclass(frozen=True)
class ArchiveEndpoint:
    """One archive in the roster.

    ``timemap_url_template`` gets the original URL substituted verbatim;
    ``cdx_url_template`` gets it percent-encoded, since it lands in a query
    string. ``memento_url_template`` and ``raw_url_template`` take both
    ``{timestamp}`` and ``{url}``; the raw form is the unrewritten
    (``id_``) access pattern and only Wayback-style archives have one.
    """

    name: str
    timemap_url_template: str
    cdx_url_template: str | None = None
    rate_limit: Fraction = Fraction(1)
    memento_url_template: str | None = None
    raw_url_template: str | None = None

    def __post_init__(self) -> None:
        if not self.name or "/" in self.name or self.name.startswith("."):
            raise ConfigError(f"bad endpoint name {self.name!r}")
        rate = Fraction(self.rate_limit)
        if rate <= 0:
            raise ConfigError(f"{self.name}: rate_limit must be positive")
        object.__setattr__(self, "rate_limit", rate)
        for attr in ("timemap_url_template", "cdx_url_template",
                     "memento_url_template", "raw_url_template"):
            template = getattr(self, attr)
            if template is None:
                continue
            if template.count(URL_PLACEHOLDER) != 1:
                raise ConfigError(f"{self.name}.{attr} needs exactly one {URL_PLACEHOLDER}")
            if attr in ("memento_url_template", "raw_url_template") and STAMP_PLACEHOLDER not in template:
                raise ConfigError(f"{self.name}.{attr} needs {STAMP_PLACEHOLDER}")

    def timemap_url(self, original_url: str) -> str:
        return self.timemap_url_template.replace(URL_PLACEHOLDER, original_url)

    def cdx_url(self, url: str) -> str:
        if not self.cdx_url_template:
            raise ConfigError(f"{self.name} has no CDX endpoint")
        return self.cdx_url_template.replace(URL_PLACEHOLDER, quote(url, safe=""))

    def memento_url(self, stamp: str, url: str) -> str:
        template = self.memento_url_template or f"https://{self.name}/web/{{timestamp}}/{{url}}"
        return template.replace(STAMP_PLACEHOLDER, stamp).replace(URL_PLACEHOLDER, url)

    def raw_url(self, stamp: str, url: str) -> str | None:
        if not self.raw_url_template:
            return None
        return self.raw_url_template.replace(STAMP_PLACEHOLDER, stamp).replace(URL_PLACEHOLDER, url)


WAYBACK = ArchiveEndpoint(
    name="web.archive.org",
    timemap_url_template="https://web.archive.org/web/timemap/link/{url}",
    cdx_url_template="https://web.archive.org/cdx/search/cdx?url={url}",
    rate_limit=Fraction(1),
    memento_url_template="https://web.archive.org/web/{timestamp}/{url}",
    raw_url_template="https://web.archive.org/web/{timestamp}id_/{url}",
)


def endpoint_from_section(name: str, section) -> ArchiveEndpoint:
    if "timemap" not in section:
        raise ConfigError(f"archive {name!r} has no timemap template")
    try:
        rate = Fraction(section.get("rate_limit", "1"))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"archive {name!r}: bad rate_limit") from None
    return ArchiveEndpoint(
        name=name,
        timemap_url_template=section["timemap"],
        cdx_url_template=section.get("cdx") or None,
        rate_limit=rate,
        memento_url_template=section.get("memento") or None,
        raw_url_template=section.get("raw") or None,
    )


def load_roster(path: str | os.PathLike) -> list[ArchiveEndpoint]:
    """Read ``[archive:<name>]`` sections from an INI-style roster file."""
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read roster {path}")
    return roster_from_parser(parser)


def roster_from_parser(parser: configparser.ConfigParser) -> list[ArchiveEndpoint]:
    return [
        endpoint_from_section(section.split(":", 1)[1].strip(), parser[section])
        for section in parser.sections()
        if section.startswith("archive:")
    ]


# -- cache -------------------------------------------------------------------

@dataclass(frozen=True)
class CachedResponse:
    status: int
    body: bytes
    fetched_at: float
    from_cache: bool


class ResponseCache:
    """Content-addressed response store shared by all fetches of an audit."""

    def __init__(self, root: str | os.PathLike, ttl: float | None = None) -> None:
        self.root = Path(root)
        self.ttl = ttl
        self._lock = threading.Lock()

    @staticmethod
    def filename(key: str) -> str:
        return hashlib.sha256(key.encode("utf-8")).hexdigest() + ".body"

    def _index(self, endpoint: str) -> dict[str, tuple[float, str, int]]:
        path = self.root / endpoint / "index"
        entries: dict[str, tuple[float, str, int]] = {}
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return entries
        for line in text.splitlines():
            fields = line.split("\t")
            if len(fields) < 3:
                continue
            try:
                status = int(fields[3]) if len(fields) > 3 else 200
                entries[fields[0]] = (float(fields[1]), fields[2], status)
            except ValueError:
                continue
        return entries

    def lookup(self, endpoint: str, key: str, ignore_ttl: bool = False) -> CachedResponse | None:
        entry = self._index(endpoint).get(key)
        if entry is None:
            return None
        fetched_at, filename, status = entry
        if not ignore_ttl and self.ttl is not None and time.time() - fetched_at > self.ttl:
            return None
        try:
            body = (self.root / endpoint / filename).read_bytes()
        except FileNotFoundError:
            return None
        return CachedResponse(status, body, fetched_at, True)

    def store(self, endpoint: str, key: str, status: int, body: bytes,
              fetched_at: float | None = None) -> CachedResponse:
        if "\t" in key or "\n" in key:
            raise ValueError("cache keys may not contain tabs or newlines")
        fetched_at = time.time() if fetched_at is None else fetched_at
        directory = self.root / endpoint
        directory.mkdir(parents=True, exist_ok=True)
        filename = self.filename(key)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
        os.replace(tmp, directory / filename)
        line = f"{key}\t{fetched_at:.0f}\t{filename}\t{status}\n"
        with self._lock, open(directory / "index", "a", encoding="utf-8") as fh:
            fh.write(line)
        return CachedResponse(status, body, float(f"{fetched_at:.0f}"), False)


# -- transport ---------------------------------------------------------------

class Transport(Protocol):
    def __call__(self, url: str, timeout: float) -> tuple[int, bytes]: ...


class RequestsTransport:
    def __init__(self, user_agent: str = "replayaudit/0.1") -> None:
        import requests

        self._session = requests.Session()
        self._session.headers["User-Agent"] = user_agent
        self._errors = (requests.RequestException,)

    def __call__(self, url: str, timeout: float) -> tuple[int, bytes]:
        try:
            resp = self._session.get(url, timeout=timeout)
        except self._errors as exc:
            raise ConnectionError(str(exc)) from exc
        return resp.status_code, resp.content


def refusing_transport(url: str, timeout: float) -> tuple[int, bytes]:
    raise OfflineViolation(f"network access refused in offline mode: {url}")


class RateLimiter:
    """Serializes calls and spaces them at least ``1/rate`` seconds apart."""

    def __init__(self, rate: Fraction, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        self.interval = float(1 / Fraction(rate))
        self._clock = clock
        self._sleep = sleep
        self._last: float | None = None
        self.lock = threading.Lock()

    def wait(self) -> None:
        now = self._clock()
        if self._last is not None:
            remaining = self._last + self.interval - now
            if remaining > 0:
                self._sleep(remaining)
        self._last = self._clock()


RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class Fetcher:
    """Cache-first GETs with per-endpoint serialization and retries.

    In offline mode every cache miss raises :class:`CacheMiss` and the
    transport is never called.
    """

    def __init__(self, cache: ResponseCache, transport: Transport | None = None,
                 offline: bool = False, max_attempts: int = 3, backoff: float = 2.0,
                 timeout: float = 60.0, sleep: Callable[[float], None] = time.sleep) -> None:
        self.cache = cache
        self.offline = offline
        self.transport = refusing_transport if offline else (transport or RequestsTransport())
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        self._sleep = sleep
        self._limiters: dict[str, RateLimiter] = {}
        self._guard = threading.Lock()
        self.network_requests = 0
        self.fetch_log: list[tuple[str, str, float]] = []

    def _limiter(self, endpoint: ArchiveEndpoint) -> RateLimiter:
        with self._guard:
            if endpoint.name not in self._limiters:
                self._limiters[endpoint.name] = RateLimiter(endpoint.rate_limit, sleep=self._sleep)
            return self._limiters[endpoint.name]

    def get(self, endpoint: ArchiveEndpoint, url: str) -> CachedResponse:
        hit = self.cache.lookup(endpoint.name, url, ignore_ttl=self.offline)
        if hit is not None:
            self._record(endpoint, url, hit)
            return hit
        if self.offline:
            raise CacheMiss(f"{endpoint.name} {url}")

        limiter = self._limiter(endpoint)
        last_error = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            with limiter.lock:
                limiter.wait()
                self.network_requests += 1
                try:
                    status, body = self.transport(url, self.timeout)
                except (ConnectionError, TimeoutError, OSError) as exc:
                    status, body, last_error = None, b"", str(exc)
            if status is not None and status not in RETRYABLE_STATUS:
                stored = self.cache.store(endpoint.name, url, status, body)
                self._record(endpoint, url, stored)
                return stored
            if status is not None:
                last_error = f"HTTP {status}"
            log.warning("%s: attempt %d for %s failed: %s", endpoint.name, attempt, url, last_error)
            if attempt < self.max_attempts:
                self._sleep(self.backoff * 2 ** (attempt - 1))
        raise NetworkError(f"{endpoint.name}: {url}: {last_error}", attempts=self.max_attempts, url=url)

    def _record(self, endpoint: ArchiveEndpoint, url: str, resp: CachedResponse) -> None:
        with self._guard:
            self.fetch_log.append((endpoint.name, url, resp.fetched_at))
