from __future__ import annotations

import random
from datetime import date, timedelta
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import oracles
from helpers import utc
from replayaudit.cdx import CaptureSet
from replayaudit.errors import InvalidRange
from replayaudit.memento import MementoRecord
from replayaudit.resolution import (
    IMPACT_THRESHOLDS, Classification, classify, day_series, hero_violation_scan, nearest_index,
    resolve_nearest, threshold_impact,
)
from replayaudit.timeutil import epoch_seconds, from_epoch
from replayaudit.zones import HtmlProbeResult, Verdict

ZONE = "http://www.cnn.com/data/ocs/section/index.html:homepage2-zone-1/views/zones/common/zone-manager.html"
HERO = "http://www.cnn.com/data/ocs/section/index.html:homepage1-zone-1/views/zones/common/zone-manager.html"
PAST, FUTURE = utc(2015, 7, 10, 0, 18, 45), utc(2016, 1, 6, 23, 34, 5)
DAY = 86400


def captures(seconds, url=ZONE) -> CaptureSet:
    return CaptureSet.from_datetimes(url, [from_epoch(s) for s in seconds])


def test_october_8_resolves_to_the_future():
    result = classify(utc(2015, 10, 8, 12), captures([epoch_seconds(PAST), epoch_seconds(FUTURE)]))
    assert result.resolved.capture_datetime == FUTURE
    assert result.spread_seconds == epoch_seconds(FUTURE) - epoch_seconds(utc(2015, 10, 8, 12))
    assert 90 < result.spread_days < 91
    assert result.classification is Classification.VIOLATION


def test_exact_capture():
    at = utc(2016, 7, 29, 0, 31, 56)
    result = classify(at, CaptureSet.from_datetimes(HERO, [at, utc(2016, 8, 1)]))
    assert result.spread_seconds == 0 and result.classification is Classification.EXACT


def test_unresolvable():
    result = classify(utc(2015, 10, 8), CaptureSet(ZONE))
    assert result.resolved is None and result.spread_seconds is None
    assert result.classification is Classification.UNRESOLVABLE and result.affected


def test_midpoint_tie_prefers_past():
    assert nearest_index([0, 10], 5) == 0
    assert nearest_index([0, 10], 6) == 1
    assert nearest_index([0, 0, 10, 10], 5) == 0
    assert nearest_index([3, 7, 7, 7], 9) == 1
    assert nearest_index([3, 3], 0) == 0
    assert nearest_index([], 5) is None


def test_500_random_pairs_against_linear_scan():
    rng = random.Random(500)
    for _ in range(500):
        times = [rng.randrange(0, 10 ** 6) for _ in range(rng.randint(0, 30))]
        if times and rng.random() < 0.3:
            times += rng.choices(times, k=3)  # duplicates
        base = rng.choice(times) if times and rng.random() < 0.2 else rng.randrange(-1000, 10 ** 6 + 1000)
        cs = captures(times)
        got = resolve_nearest(from_epoch(base), cs)
        expect = oracles.spread(base, sorted(times))
        assert (None if got is None else epoch_seconds(got.capture_datetime) - base) == expect


@given(st.lists(st.integers(0, 10 ** 7), max_size=40), st.integers(-10 ** 6, 2 * 10 ** 7))
def test_argmin_property(times, base):
    got = resolve_nearest(from_epoch(base), captures(times))
    if not times:
        assert got is None
        return
    t = epoch_seconds(got.capture_datetime)
    assert t in times
    assert all(abs(t - base) <= abs(x - base) for x in times)


@given(st.lists(st.integers(0, 10 ** 7), max_size=30), st.integers(0, 10 ** 7), st.integers(0, 10 ** 7))
def test_adding_a_capture_never_increases_spread(times, extra, base):
    before = classify(from_epoch(base), captures(times)).spread_seconds
    after = classify(from_epoch(base), captures(times + [extra])).spread_seconds
    assert before is None or abs(after) <= abs(before)


@pytest.mark.parametrize("offset, expected", [
    (48 * 3600, Classification.WITHIN_THRESHOLD),
    (48 * 3600 + 1, Classification.VIOLATION),
    (-48 * 3600, Classification.WITHIN_THRESHOLD),
    (-(48 * 3600 + 1), Classification.VIOLATION),
    (1, Classification.WITHIN_THRESHOLD),
])
def test_threshold_is_strict(offset, expected):
    base = utc(2016, 1, 1)
    cs = CaptureSet.from_datetimes(ZONE, [base + timedelta(seconds=offset)])
    assert classify(base, cs).classification is expected


def test_sign_convention_pairs():
    base = utc(2016, 1, 1)
    future = classify(base, CaptureSet.from_datetimes(ZONE, [base + timedelta(days=3)]))
    past = classify(base, CaptureSet.from_datetimes(ZONE, [base - timedelta(days=3)]))
    assert future.spread_seconds == 3 * DAY and future.spread_days == 3.0
    assert past.spread_seconds == -3 * DAY
    series = day_series([base], CaptureSet.from_datetimes(ZONE, [base + timedelta(days=3)]))
    assert series[0].mean_spread_days == 3


def test_resolved_memento_carries_evidence():
    result = classify(utc(2015, 10, 8, 12), captures([epoch_seconds(PAST)]), base_access_url="https://x.org/web/1/y")
    assert result.resolved.access_url == f"https://web.archive.org/web/20150710001845/{ZONE}"
    assert result.base_access_url == "https://x.org/web/1/y"


# -- day series ------------------------------------------------------------------

def test_two_capture_window():
    bases = [utc(2015, 7, 10, 12) + timedelta(days=i) for i in range((date(2016, 1, 6) - date(2015, 7, 10)).days + 1)]
    series = day_series(bases, CaptureSet.from_datetimes(ZONE, [PAST, FUTURE]))
    assert len(series) == len(bases)
    peak = max(series, key=lambda p: abs(p.mean_spread_days))
    assert peak.day == date(2015, 10, 8)
    assert 89 <= abs(peak.mean_spread_days) <= 91
    by_day = {p.day: p.mean_spread_days for p in series}
    assert by_day[date(2015, 10, 7)] < 0 < by_day[date(2015, 10, 8)]
    assert all(v < 0 for d, v in by_day.items() if d < date(2015, 10, 8))
    assert all(v > 0 for d, v in by_day.items() if d >= date(2015, 10, 8))


def test_identical_captures_give_zero_series():
    bases = [utc(2016, 1, 1) + timedelta(hours=7 * i) for i in range(20)]
    assert all(p.mean_spread_days == 0 for p in day_series(bases, CaptureSet.from_datetimes(ZONE, bases)))


def test_series_random_instances_match_brute_force():
    rng = random.Random(11)
    for _ in range(200):
        bases = [rng.randrange(0, 10 * DAY) for _ in range(rng.randint(0, 25))]
        times = [rng.randrange(-DAY, 11 * DAY) for _ in range(rng.randint(0, 10))]
        series = day_series([from_epoch(b) for b in bases], captures(times))
        expected = oracles.day_means(bases, times)
        assert {(p.day - date(1970, 1, 1)).days: p.mean_spread_days for p in series} == expected
        for p in series:
            assert p.memento_count == sum(b // DAY == (p.day - date(1970, 1, 1)).days for b in bases)


@given(st.lists(st.integers(0, 30 * DAY), max_size=20), st.lists(st.integers(0, 30 * DAY), min_size=1, max_size=10),
       st.randoms(use_true_random=False))
def test_series_invariant_under_permutation(bases, times, rnd):
    a = day_series([from_epoch(b) for b in bases], captures(times))
    shuffled_bases, shuffled_times = bases[:], times[:]
    rnd.shuffle(shuffled_bases)
    rnd.shuffle(shuffled_times)
    assert day_series([from_epoch(b) for b in shuffled_bases], captures(shuffled_times)) == a
    assert all(isinstance(p.mean_spread_days, Fraction) for p in a)


def test_no_resource_captures_gives_empty_series():
    assert day_series([utc(2016, 1, 1)], CaptureSet(ZONE)) == []


# -- threshold impact --------------------------------------------------------------

def test_ten_memento_instance():
    rng = random.Random(10)
    bases = sorted(rng.randrange(0, 5 * DAY) for _ in range(10))
    times = [rng.randrange(0, 6 * DAY) for _ in range(3)]
    rows = threshold_impact([from_epoch(b) for b in bases], captures(times), (date(1970, 1, 1), date(1970, 1, 6)))
    assert [r.threshold for r in rows] == list(IMPACT_THRESHOLDS)
    for row in rows:
        total, days, hit, hit_days = oracles.impact(bases, times, 0, 5 * DAY, int(row.threshold.total_seconds()))
        assert (row.total_mementos, row.total_days, row.affected_mementos, row.affected_days) == (total, days, hit, hit_days)


def test_captures_within_one_second_affect_nothing():
    bases = [utc(2016, 3, 1) + timedelta(hours=5 * i) for i in range(30)]
    near = CaptureSet.from_datetimes(ZONE, [b + timedelta(seconds=1) for b in bases])
    assert all(r.affected_mementos == 0 for r in threshold_impact(bases, near, (date(2016, 3, 1), date(2016, 4, 1))))


def test_unresolvable_is_affected_and_out_of_range_captures_count():
    bases = [utc(2015, 4, 24, 23, 30), utc(2015, 4, 25, 12)]
    empty = threshold_impact(bases, CaptureSet(ZONE), (date(2015, 4, 24), date(2015, 5, 23)))
    assert all((r.affected_mementos, r.affected_days) == (2, 2) for r in empty)
    # a capture just after the range still resolves the base just inside it
    after = CaptureSet.from_datetimes(ZONE, [utc(2015, 4, 25, 0, 10)])
    rows = threshold_impact(bases, after, (date(2015, 4, 24), date(2015, 4, 25)))
    assert rows[0].total_mementos == 1 and rows[0].affected_mementos == 0


def test_empty_range():
    with pytest.raises(InvalidRange):
        threshold_impact([], CaptureSet(ZONE), (date(2016, 1, 1), date(2016, 1, 1)))


# -- hero scan -------------------------------------------------------------------

def memento(at) -> MementoRecord:
    return MementoRecord(at, f"https://web.archive.org/web/{at:%Y%m%d%H%M%S}/http://www.cnn.com/",
                         "http://www.cnn.com/", "web.archive.org")


SR = HtmlProbeResult(True, 400, (), Verdict.SERVER_RENDERED)
CSR = HtmlProbeResult(False, 7, (), Verdict.CSR_TEMPLATE)


def test_csr_before_first_hero_capture_always_violates():
    hero = CaptureSet.from_datetimes(HERO, [utc(2016, 7, 29, 0, 31, 56)])
    rows = [(memento(utc(2016, 7, 20)), CSR), (memento(utc(2015, 11, 1)), CSR), (memento(utc(2016, 7, 21)), SR)]
    for threshold in (timedelta(hours=1), timedelta(days=2), timedelta(days=7)):
        report = hero_violation_scan(rows, hero, threshold)
        assert report.scanned == 2 and report.violation_count == 2
    assert all(r.base_datetime != utc(2016, 7, 21) for r in report.results)


def test_same_day_flags_match_day_bucket_check():
    rng = random.Random(3)
    rows = []
    for _ in range(60):
        at = utc(2016, 3, 1) + timedelta(seconds=rng.randrange(20 * DAY))
        rows.append((memento(at), SR if rng.random() < 0.4 else CSR))
    hero = CaptureSet.from_datetimes(HERO, [utc(2016, 3, 10, 12)])
    report = hero_violation_scan(rows, hero)
    affected_days = {
        m.capture_datetime.date() for m, p in rows
        if not p.has_hero_section_id
        and oracles.classification(oracles.spread(epoch_seconds(m.capture_datetime), [epoch_seconds(utc(2016, 3, 10, 12))]),
                                   48 * 3600) in ("Violation", "Unresolvable")
    }
    assert set(report.same_day_alternative) == affected_days
    for day, flag in report.same_day_alternative.items():
        assert flag == any(m.capture_datetime.date() == day and p.csr_verdict is Verdict.SERVER_RENDERED for m, p in rows)


def test_merge_accumulates():
    hero = CaptureSet(HERO)
    a = hero_violation_scan([(memento(utc(2016, 1, 1)), CSR)], hero)
    b = hero_violation_scan([(memento(utc(2016, 1, 2, 5)), SR), (memento(utc(2016, 1, 2)), CSR)], hero)
    merged = a.merge(b)
    assert merged.scanned == 2 and merged.unresolvable_count == 2
    assert merged.same_day_alternative == {date(2016, 1, 1): False, date(2016, 1, 2): True}
