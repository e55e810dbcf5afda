"""Exception types raised across the package."""
from __future__ import annotations


class ReplayAuditError(Exception):
    """Base class for every error raised by replayaudit."""


class InvalidTimestamp(ReplayAuditError, ValueError):
    pass


class InvalidUrl(ReplayAuditError, ValueError):
    pass


class MalformedTimeMap(ReplayAuditError, ValueError):
    pass


class MixedOriginals(ReplayAuditError, ValueError):
    pass


class MalformedCdxLine(ReplayAuditError, ValueError):
    """A CDX/CDXJ line could not be parsed.

    ``offset`` is the byte offset (UTF-8) of the first offending field.
    """

    def __init__(self, message: str, offset: int = 0) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class NetworkError(ReplayAuditError):
    """A request failed after exhausting its retries."""

    def __init__(self, message: str, attempts: int = 1, url: str | None = None) -> None:
        super().__init__(f"{message} after {attempts} attempt(s)")
        self.attempts = attempts
        self.url = url


class CacheMiss(ReplayAuditError):
    """Offline mode needed a response that is not in the cache."""

    def __init__(self, key: str) -> None:
        super().__init__(f"not cached: {key}")
        self.key = key


class OfflineViolation(ReplayAuditError):
    """A network request was attempted through a refusing transport."""


class UncoveredInstant(ReplayAuditError, ValueError):
    pass


class InvalidRange(ReplayAuditError, ValueError):
    pass


class ConfigError(ReplayAuditError, ValueError):
    pass
