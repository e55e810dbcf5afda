"""Conversions between 14-digit archive stamps, RFC 1123 dates and UTC datetimes.

Everything is normalized to timezone-aware UTC datetimes with second
precision.
"""
from __future__ import annotations

import re
from datetime import date, datetime, time, timedelta, timezone
from email.utils import format_datetime, parsedate_to_datetime

from .errors import InvalidTimestamp

UTC = timezone.utc
EPOCH = datetime(1970, 1, 1, tzinfo=UTC)

_DIGITS = re.compile(r"\d{4,14}")
# month/day must never be padded with zeros; "201504" means 2015-04-01.
_PAD = "0101000000"


def parse_stamp(stamp: str) -> datetime:
    """Parse a (possibly truncated) 14-digit Wayback stamp.

    Truncated stamps are padded the Wayback way: ``20150424`` is midnight
    of that day, ``201504`` is midnight of April 1st.
    """
    if not isinstance(stamp, str) or not _DIGITS.fullmatch(stamp):
        raise InvalidTimestamp(f"not a 4-14 digit stamp: {stamp!r}")
    full = stamp + _PAD[len(stamp) - 4:]
    try:
        return datetime(
            int(full[0:4]), int(full[4:6]), int(full[6:8]),
            int(full[8:10]), int(full[10:12]), int(full[12:14]),
            tzinfo=UTC,
        )
    except ValueError as exc:
        raise InvalidTimestamp(f"invalid stamp {stamp!r}: {exc}") from None


def format_stamp(dt: datetime) -> str:
    dt = to_utc(dt)
    return f"{dt.year:04d}{dt.month:02d}{dt.day:02d}{dt.hour:02d}{dt.minute:02d}{dt.second:02d}"


def parse_http_date(value: str) -> datetime:
    """Parse an RFC 1123 date such as ``Fri, 24 Apr 2015 15:03:04 GMT``."""
    try:
        dt = parsedate_to_datetime(value.strip())
    except (TypeError, ValueError, IndexError, OverflowError):
        raise InvalidTimestamp(f"unparseable HTTP date: {value!r}") from None
    if dt is None:
        raise InvalidTimestamp(f"unparseable HTTP date: {value!r}")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    try:
        return to_utc(dt)
    except (OverflowError, ValueError):
        raise InvalidTimestamp(f"out of range HTTP date: {value!r}") from None


def format_http_date(dt: datetime) -> str:
    return format_datetime(to_utc(dt), usegmt=True)


def to_utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC).replace(microsecond=0)


def parse_datetime(value: str) -> datetime:
    """Accept a 14-digit (or truncated) stamp, an ISO-8601 string or an HTTP date."""
    value = value.strip()
    if value.isdigit():
        return parse_stamp(value)
    try:
        return to_utc(datetime.fromisoformat(value.replace("Z", "+00:00")))
    except ValueError:
        pass
    return parse_http_date(value)


def epoch_seconds(dt: datetime) -> int:
    return int((to_utc(dt) - EPOCH).total_seconds())


def from_epoch(seconds: int) -> datetime:
    return EPOCH + timedelta(seconds=seconds)


def day_start(day: date) -> datetime:
    return datetime.combine(day, time(0), tzinfo=UTC)


def iso(dt: datetime) -> str:
    return to_utc(dt).strftime("%Y-%m-%dT%H:%M:%SZ")


_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|sec|secs|m|min|mins|h|hr|hrs|hour|hours|d|day|days)?\s*$")
_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400}


def parse_duration(text: str) -> timedelta:
    """Parse ``90s``, ``30m``, ``48h``, ``2d`` (bare numbers are hours)."""
    match = _DURATION.match(str(text))
    if not match:
        raise ValueError(f"bad duration: {text!r}")
    amount, unit = match.groups()
    seconds = float(amount) * _UNITS[(unit or "h")[0]]
    return timedelta(seconds=round(seconds))


def format_duration(td: timedelta) -> str:
    seconds = int(td.total_seconds())
    for suffix, size in (("h", 3600), ("m", 60)):
        if seconds and seconds % size == 0:
            return f"{seconds // size}{suffix}"
    return f"{seconds}s"
