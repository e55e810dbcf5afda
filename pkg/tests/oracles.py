"""Brute-force reference implementations. Deliberately naive: linear scans,
no bisect, no shared code with the package."""
from __future__ import annotations

from collections import defaultdict
from fractions import Fraction


def nearest(base: int, times: list[int]) -> int | None:
    """Index into ``times`` (any order) of the closest capture; ties prefer the
    past, then the earliest position among equal timestamps in sorted order."""
    best = None
    for i, t in enumerate(times):
        if best is None:
            best = i
            continue
        d, bd = t - base, times[best] - base
        if abs(d) < abs(bd) or (abs(d) == abs(bd) and d < bd):
            best = i
    return best


def spread(base: int, times: list[int]) -> int | None:
    i = nearest(base, times)
    return None if i is None else times[i] - base


def classification(s: int | None, threshold: int) -> str:
    if s is None:
        return "Unresolvable"
    if s == 0:
        return "Exact"
    return "Violation" if abs(s) > threshold else "WithinThreshold"


def day_means(bases: list[int], times: list[int]) -> dict[int, Fraction]:
    buckets = defaultdict(list)
    for b in bases:
        s = spread(b, times)
        if s is not None:
            buckets[b // 86400].append(s)
    return {day: Fraction(sum(v), 86400 * len(v)) for day, v in buckets.items()}


def impact(bases: list[int], times: list[int], lo: int, hi: int, threshold: int) -> tuple[int, int, int, int]:
    """(total mementos, total days, affected mementos, affected days)."""
    rows = [(b, spread(b, times)) for b in bases if lo <= b < hi]
    hit = [b for b, s in rows if s is None or abs(s) > threshold]
    return len(rows), len({b // 86400 for b, _ in rows}), len(hit), len({b // 86400 for b in hit})
