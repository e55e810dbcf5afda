"""Nearest-memento resolution and the temporal-violation metrics built on it.

Resolution models Wayback-style replay: an embedded resource requested at the
base page's datetime is served from its temporally closest capture, past or
future. Exact midpoints go to the earlier (past) capture; that tie rule is
ours, real replay systems may differ.

All spreads are integer seconds, signed ``resolved - base`` so content from
the future is positive. Conversion to days happens only at presentation.
"""
from __future__ import annotations

import bisect
import enum
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

from .cdx import CaptureSet
from .errors import InvalidRange
from .memento import MementoRecord
from .timeutil import day_start, epoch_seconds, to_utc
from .zones import HtmlProbeResult, Verdict

DEFAULT_THRESHOLD = timedelta(hours=48)
IMPACT_THRESHOLDS = tuple(timedelta(hours=h) for h in (1, 2, 6, 24, 48))
SECONDS_PER_DAY = 86400
_EPOCH_DAY = date(1970, 1, 1)

Instants = Union[CaptureSet, Sequence[datetime]]


class Classification(enum.Enum):
    EXACT = "Exact"
    WITHIN_THRESHOLD = "WithinThreshold"
    VIOLATION = "Violation"
    UNRESOLVABLE = "Unresolvable"


@dataclass(frozen=True)
class ResolutionResult:
    base_datetime: datetime
    resource_url: str
    resolved: MementoRecord | None
    spread_seconds: int | None
    classification: Classification
    threshold_seconds: int = field(default=int(DEFAULT_THRESHOLD.total_seconds()), compare=False)
    base_access_url: str | None = None

    @property
    def spread_days(self) -> float | None:
        return None if self.spread_seconds is None else self.spread_seconds / SECONDS_PER_DAY

    @property
    def affected(self) -> bool:
        return self.classification in (Classification.VIOLATION, Classification.UNRESOLVABLE)


def nearest_index(seconds: Sequence[int], base: int) -> int | None:
    """Index of the capture closest to ``base`` in an ascending list.

    Ties between a past and a future capture go to the past one; among equal
    timestamps the first is returned.
    """
    if not seconds:
        return None
    i = bisect.bisect_left(seconds, base)
    if i == len(seconds):
        return bisect.bisect_left(seconds, seconds[-1])
    if i == 0 or seconds[i] == base:
        return i
    past = seconds[i - 1]
    if base - past <= seconds[i] - base:
        return bisect.bisect_left(seconds, past)
    return i


def resolve_nearest(base_datetime: datetime, captures: CaptureSet) -> MementoRecord | None:
    index = nearest_index(captures.seconds, epoch_seconds(base_datetime))
    return None if index is None else captures.memento(index)


def _classify_spread(spread: int | None, threshold_seconds: int) -> Classification:
    if spread is None:
        return Classification.UNRESOLVABLE
    if spread == 0:
        return Classification.EXACT
    if abs(spread) > threshold_seconds:
        return Classification.VIOLATION
    return Classification.WITHIN_THRESHOLD


def classify(base_datetime: datetime, captures: CaptureSet,
             threshold: timedelta = DEFAULT_THRESHOLD,
             base_access_url: str | None = None) -> ResolutionResult:
    base_datetime = to_utc(base_datetime)
    limit = int(threshold.total_seconds())
    resolved = resolve_nearest(base_datetime, captures)
    spread = None if resolved is None else epoch_seconds(resolved.capture_datetime) - epoch_seconds(base_datetime)
    return ResolutionResult(
        base_datetime, captures.original_url, resolved, spread,
        _classify_spread(spread, limit), limit, base_access_url,
    )


def _base_seconds(base: Instants) -> list[int]:
    if isinstance(base, CaptureSet):
        return list(base.seconds)
    return [epoch_seconds(dt) for dt in base]


def _spreads(base: Instants, resources: CaptureSet) -> list[tuple[int, int | None]]:
    out = []
    for b in _base_seconds(base):
        index = nearest_index(resources.seconds, b)
        out.append((b, None if index is None else resources.seconds[index] - b))
    return out


@dataclass(frozen=True)
class DaySeriesPoint:
    day: date
    mean_spread_days: Fraction
    memento_count: int


def day_series(base_captures: Instants, resource_captures: CaptureSet) -> list[DaySeriesPoint]:
    """Mean signed spread (days) per UTC day of base capture.

    Days without a base capture are omitted; with no resource captures at
    all there is nothing to average and the series is empty.
    """
    return series_from_spreads(_spreads(base_captures, resource_captures))


def series_from_spreads(pairs: Iterable[tuple[int, int | None]]) -> list[DaySeriesPoint]:
    """Day series from ``(base epoch seconds, spread or None)`` pairs; unresolved bases are skipped."""
    buckets: dict[int, list[int]] = defaultdict(list)
    for base, spread in pairs:
        if spread is not None:
            buckets[base // SECONDS_PER_DAY].append(spread)
    return [
        DaySeriesPoint(
            _EPOCH_DAY + timedelta(days=day),
            Fraction(sum(spreads), len(spreads) * SECONDS_PER_DAY),
            len(spreads),
        )
        for day, spreads in sorted(buckets.items())
    ]


@dataclass(frozen=True)
class ThresholdImpactRow:
    date_range: tuple[date, date]
    total_mementos: int
    total_days: int
    threshold: timedelta
    affected_mementos: int
    affected_days: int


def threshold_impact(base_captures: Instants, resource_captures: CaptureSet,
                     date_range: tuple[date, date],
                     thresholds: Iterable[timedelta] = IMPACT_THRESHOLDS) -> list[ThresholdImpactRow]:
    """How many base captures in ``[start, end)`` would lose the resource if
    loading it were refused beyond each threshold.

    Resolution always runs against the full resource capture list, so
    captures just outside the range still count. Unresolvable bases are
    affected at every threshold.
    """
    return impact_from_spreads(_spreads(base_captures, resource_captures), date_range, thresholds)


def impact_from_spreads(pairs: Iterable[tuple[int, int | None]], date_range: tuple[date, date],
                        thresholds: Iterable[timedelta] = IMPACT_THRESHOLDS) -> list[ThresholdImpactRow]:
    start, end = date_range
    if start >= end:
        raise InvalidRange(f"empty date range {start}..{end}")
    lo, hi = epoch_seconds(day_start(start)), epoch_seconds(day_start(end))
    in_range = [(b, s) for b, s in pairs if lo <= b < hi]
    total_days = len({b // SECONDS_PER_DAY for b, _ in in_range})
    rows = []
    for threshold in thresholds:
        limit = int(threshold.total_seconds())
        affected = [b for b, s in in_range if s is None or abs(s) > limit]
        rows.append(ThresholdImpactRow(
            (start, end), len(in_range), total_days, threshold,
            len(affected), len({b // SECONDS_PER_DAY for b in affected}),
        ))
    return rows


@dataclass
class HeroViolationReport:
    scanned: int = 0
    results: list[ResolutionResult] = field(default_factory=list)
    # UTC day with an affected memento -> some memento that day carries the
    # Hero in its HTML
    same_day_alternative: dict[date, bool] = field(default_factory=dict)

    @property
    def violations(self) -> list[ResolutionResult]:
        return [r for r in self.results if r.classification is Classification.VIOLATION]

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    @property
    def unresolvable_count(self) -> int:
        return sum(r.classification is Classification.UNRESOLVABLE for r in self.results)

    def merge(self, other: "HeroViolationReport") -> "HeroViolationReport":
        days = dict(self.same_day_alternative)
        for day, flag in other.same_day_alternative.items():
            days[day] = days.get(day, False) or flag
        results = sorted(self.results + other.results, key=lambda r: r.base_datetime)
        return HeroViolationReport(self.scanned + other.scanned, results, dict(sorted(days.items())))


def hero_violation_scan(probe_results: Iterable[tuple[MementoRecord, HtmlProbeResult]],
                        hero_captures: CaptureSet | Callable[[MementoRecord], CaptureSet],
                        threshold: timedelta = DEFAULT_THRESHOLD) -> HeroViolationReport:
    """Classify mementos whose Hero arrives via CSR against the Hero zone's captures.

    For each day with a violation, also report whether some memento of that
    day was server rendered (the Hero sat in its HTML), i.e. whether a
    violation-free alternative exists.

    ``hero_captures`` may be a callable mapping each memento to the capture
    set of the Hero URL it would request (the URL changes with the era).
    """
    probe_results = list(probe_results)
    rendered_days = {
        m.capture_datetime.date() for m, p in probe_results
        if p.csr_verdict is Verdict.SERVER_RENDERED
    }
    report = HeroViolationReport()
    for memento, probe in sorted(probe_results, key=lambda mp: mp[0].sort_key()):
        if probe.has_hero_section_id:
            continue
        report.scanned += 1
        captures = hero_captures if isinstance(hero_captures, CaptureSet) else hero_captures(memento)
        result = classify(memento.capture_datetime, captures, threshold, memento.access_url)
        report.results.append(result)
        if result.affected:
            day = memento.capture_datetime.date()
            report.same_day_alternative[day] = day in rendered_days
    return report
