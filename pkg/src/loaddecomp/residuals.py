"""Normalised residuals, cross-year differencing, smoothing and period
summaries.

Residuals are divided by a 30-day local mean of consumption. Before the
onset date the window is centred on the day (shrunk at the series edges
and at the onset itself, so no post-onset consumption leaks into it). From
the onset on, the denominator is frozen to the mean of the 30 days
immediately preceding the onset.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import CalendarError, DegenerateModelError, InsufficientHistoryError, ParameterError
from .ingest import ConsumptionSeries

DAY = timedelta(days=1)
DENOMINATOR_DAYS = 30


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    start_date: date
    raw: np.ndarray = field(repr=False)
    normalized: np.ndarray = field(repr=False)
    denominators: np.ndarray = field(repr=False)
    onset_date: Optional[date] = None
    label: str = ""

    def __post_init__(self):
        arrays = []
        for name in ("raw", "normalized", "denominators"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
            arrays.append(arr)
        if not len(arrays[0]) == len(arrays[1]) == len(arrays[2]):
            raise ValueError("raw, normalized and denominators must have equal length")
        if np.any(arrays[2] <= 0):
            raise DegenerateModelError("normalisation denominators must be > 0")

    def __len__(self):
        return len(self.raw)

    @property
    def end_date(self) -> date:
        return self.start_date + (len(self) - 1) * DAY

    @property
    def dates(self) -> list:
        return [self.start_date + i * DAY for i in range(len(self))]

    def index_of(self, day: date) -> int:
        i = (day - self.start_date).days
        if not 0 <= i < len(self):
            raise IndexError(f"{day} outside residual series {self.start_date}..{self.end_date}")
        return i

    def rho(self, start: date, end: date) -> np.ndarray:
        return self.normalized[self.index_of(start) : self.index_of(end) + 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"#onset={self.onset_date.isoformat() if self.onset_date else ''}\n")
        if self.label:
            buf.write(f"#label={self.label}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("date", "raw_kwh", "denominator_kwh", "rho"))
        for day, r, d, p in zip(self.dates, self.raw, self.denominators, self.normalized):
            writer.writerow((day.isoformat(), repr(float(r)), repr(float(d)), repr(float(p))))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResidualSeries":
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key] = value
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        if tuple(rows[0]) != ("date", "raw_kwh", "denominator_kwh", "rho"):
            raise ValueError("not a residual CSV")
        rows = rows[1:]
        onset = meta.get("onset") or None
        return cls(
            date.fromisoformat(rows[0][0]),
            [float(r[1]) for r in rows],
            [float(r[3]) for r in rows],
            [float(r[2]) for r in rows],
            date.fromisoformat(onset) if onset else None,
            meta.get("label", ""),
        )


def raw_residuals(consumption: ConsumptionSeries, predicted: Sequence[float]) -> np.ndarray:
    predicted = np.asarray(predicted, dtype=float)
    if len(predicted) != len(consumption):
        raise ParameterError("prediction and consumption lengths differ")
    return consumption.values - predicted


def normalize(
    raw: Sequence[float],
    consumption: ConsumptionSeries,
    onset_date: Optional[date] = None,
    window_days: int = DENOMINATOR_DAYS,
    label: str = "",
) -> ResidualSeries:
    """Divide raw residuals by the local mean consumption."""
    raw = np.asarray(raw, dtype=float)
    c = consumption.values
    n = len(c)
    if len(raw) != n:
        raise ParameterError(f"{len(raw)} residuals for {n} consumption days")
    limit = n
    frozen = None
    if onset_date is not None:
        k = (onset_date - consumption.start_date).days
        if k < window_days:
            raise InsufficientHistoryError(
                f"onset {onset_date} leaves {max(k, 0)} days of history; {window_days} required"
            )
        limit = min(k, n)
        frozen = math.fsum(c[k - window_days : k]) / window_days

    before = window_days // 2
    after = window_days - before - 1
    denominators = np.empty(n)
    for i in range(n):
        if i >= limit:
            denominators[i] = frozen
            continue
        lo, hi = max(0, i - before), min(limit, i + after + 1)
        denominators[i] = math.fsum(c[lo:hi]) / (hi - lo)
    if np.any(denominators <= 0):
        bad = consumption.start_date + int(np.flatnonzero(denominators <= 0)[0]) * DAY
        raise DegenerateModelError(f"mean consumption around {bad} is zero")
    return ResidualSeries(consumption.start_date, raw, raw / denominators, denominators, onset_date, label)


def moving_average(values: Sequence[float], window: int = 7) -> np.ndarray:
    """Centred moving average, window shrunk at the edges."""
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"moving-average window must be odd and >= 1, got {window}")
    values = np.asarray(values, dtype=float)
    half = window // 2
    n = len(values)
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        out[i] = math.fsum(values[lo:hi]) / (hi - lo)
    return out


def period_summary(series: ResidualSeries, start: date, end: date) -> float:
    """Mean normalised residual over the inclusive range."""
    if end < start:
        raise ParameterError(f"empty summary range {start}..{end}")
    if start < series.start_date or end > series.end_date:
        raise ParameterError(f"summary range {start}..{end} outside series {series.start_date}..{series.end_date}")
    rho = series.rho(start, end)
    return math.fsum(rho) / len(rho)


# -- holiday calendar and cross-year differencing -----------------------------


@dataclass(frozen=True)
class AlignmentPair:
    """Date ranges in two years that hold the same movable holiday."""

    name: str
    a_start: date
    a_end: date
    b_start: date
    b_end: date

    def __post_init__(self):
        for s, e in ((self.a_start, self.a_end), (self.b_start, self.b_end)):
            if e < s:
                raise CalendarError(f"{self.name}: range {s}..{e} is empty")
            if s.year != e.year:
                raise CalendarError(f"{self.name}: range {s}..{e} crosses a year boundary")

    @property
    def years(self):
        return self.a_start.year, self.b_start.year

    def swapped(self) -> "AlignmentPair":
        return AlignmentPair(self.name, self.b_start, self.b_end, self.a_start, self.a_end)


@dataclass(frozen=True)
class HolidayCalendar:
    fixed: tuple = ()  # (month, day, name)
    movable: tuple = ()  # (date, name)
    alignments: tuple = ()

    def __post_init__(self):
        for years in {p.years for p in self.alignments}:
            pairs = self.pairs_for(*years)
            for side in ("a", "b"):
                spans = sorted((getattr(p, f"{side}_start"), getattr(p, f"{side}_end"), p.name) for p in pairs)
                for (s1, e1, n1), (s2, e2, n2) in zip(spans, spans[1:]):
                    if s2 <= e1:
                        raise CalendarError(f"alignment ranges overlap: {n1} {s1}..{e1} and {n2} {s2}..{e2}")

    def pairs_for(self, year_a: int, year_b: int) -> list:
        out = []
        for p in self.alignments:
            if p.years == (year_a, year_b):
                out.append(p)
            elif p.years == (year_b, year_a):
                out.append(p.swapped())
        return out

    def holidays(self, year: int) -> list:
        days = []
        for month, day, name in self.fixed:
            try:
                days.append((date(year, month, day), name))
            except ValueError:
                pass
        days.extend((d, n) for d, n in self.movable if d.year == year)
        return sorted(days)


def _as_date(value) -> date:
    return value if isinstance(value, date) else date.fromisoformat(str(value))


def load_calendar(text: str) -> HolidayCalendar:
    """Parse a YAML holiday calendar::

        fixed:
          - {month: 5, day: 1, name: May Day}
        movable:
          - {date: 2019-04-19, name: Good Friday}
        alignments:
          - name: Good Friday
            a: [2019-04-18, 2019-04-20]
            b: [2020-04-09, 2020-04-12]
    """
    try:
        doc = yaml.safe_load(text) or {}
        fixed = tuple((int(h["month"]), int(h["day"]), str(h["name"])) for h in doc.get("fixed", []))
        movable = tuple((_as_date(h["date"]), str(h["name"])) for h in doc.get("movable", []))
        pairs = tuple(
            AlignmentPair(str(p["name"]), _as_date(p["a"][0]), _as_date(p["a"][1]), _as_date(p["b"][0]), _as_date(p["b"][1]))
            for p in doc.get("alignments", [])
        )
    except (yaml.YAMLError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise CalendarError(f"invalid holiday calendar: {exc}") from exc
    return HolidayCalendar(fixed, movable, pairs)


def _same_day(day: date, year: int) -> Optional[date]:
    try:
        return day.replace(year=year)
    except ValueError:
        return None  # 29 February in a common year


@dataclass(frozen=True, eq=False)
class YearDifference:
    """Per-slot ``rho_b - rho_a`` keyed on the dates of series B."""

    dates: list
    paired: list  # A-side date for day-wise slots, None for aligned slots
    rho_a: np.ndarray
    rho_b: np.ndarray
    diff: np.ndarray
    labels: list

    def __len__(self):
        return len(self.dates)

    def to_csv(self, smoothing: int = 7) -> str:
        avg = moving_average(self.diff, smoothing)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("date", "paired_date", "rho_a", "rho_b", "diff", f"ma{smoothing}", "label"))
        for row in zip(self.dates, self.paired, self.rho_a, self.rho_b, self.diff, avg, self.labels):
            d, p, ra, rb, df, ma, lab = row
            writer.writerow(
                (d.isoformat(), p.isoformat() if p else "", repr(float(ra)), repr(float(rb)), repr(float(df)), repr(float(ma)), lab)
            )
        return buf.getvalue()


def _range_mean(series: ResidualSeries, start: date, end: date, name: str) -> float:
    if start < series.start_date or end > series.end_date:
        raise CalendarError(
            f"alignment range {start}..{end} ({name}) outside series {series.start_date}..{series.end_date}"
        )
    rho = series.rho(start, end)
    return math.fsum(rho) / len(rho)


def year_difference(
    series_a: ResidualSeries, series_b: ResidualSeries, calendar: Optional[HolidayCalendar] = None
) -> YearDifference:
    """Difference ``series_b - series_a`` slot by slot over B's dates.

    Days pair by calendar month and day. When B has 29 February and A's
    year does not, A's 28 February is used for it. Inside each declared
    alignment range, and inside the swapped image of that range, the
    difference is taken between range means rather than day by day, which
    handles ranges of unequal length.
    """
    year_a, year_b = series_a.start_date.year, series_b.start_date.year
    shift = year_a - year_b
    overrides = {}
    for pair in (calendar.pairs_for(year_a, year_b) if calendar else []):
        a_mean = _range_mean(series_a, pair.a_start, pair.a_end, pair.name)
        b_mean = _range_mean(series_b, pair.b_start, pair.b_end, pair.name)
        # the dates each holiday displaced, in the other year
        sa = _same_day(pair.b_start, pair.a_start.year), _same_day(pair.b_end, pair.a_start.year)
        sb = _same_day(pair.a_start, pair.b_start.year), _same_day(pair.a_end, pair.b_start.year)
        if None in sa or None in sb:
            raise CalendarError(f"{pair.name}: alignment range cannot include 29 February")
        swap_a = _range_mean(series_a, *sa, pair.name)
        swap_b = _range_mean(series_b, *sb, pair.name)
        slots = [(pair.b_start, pair.b_end, a_mean, b_mean, f"aligned:{pair.name}")]
        slots.append((sb[0], sb[1], swap_a, swap_b, f"aligned-swap:{pair.name}"))
        for start, end, ma, mb, label in slots:
            d = start
            while d <= end:
                if d in overrides:
                    raise CalendarError(f"{d} falls in more than one alignment range")
                overrides[d] = (ma, mb, label)
                d += DAY

    dates, paired, ra, rb, labels = [], [], [], [], []
    for i, d in enumerate(series_b.dates):
        if d in overrides:
            ma, mb, label = overrides[d]
            dates.append(d)
            paired.append(None)
            ra.append(ma)
            rb.append(mb)
            labels.append(label)
            continue
        label = "day"
        partner = _same_day(d, d.year + shift)
        if partner is None:
            partner = date(d.year + shift, 2, 28)
            label = "leap-day"
        if not series_a.start_date <= partner <= series_a.end_date:
            continue
        dates.append(d)
        paired.append(partner)
        ra.append(float(series_a.normalized[series_a.index_of(partner)]))
        rb.append(float(series_b.normalized[i]))
        labels.append(label)
    if not dates:
        raise ParameterError("residual series share no comparable calendar days")
    ra, rb = np.array(ra), np.array(rb)
    return YearDifference(dates, paired, ra, rb, rb - ra, labels)
