"""Reading weather and consumption CSV files, gap filling, outlier repair
and aggregation into per-group daily series.

Weather CSV layout::

    timestamp,temp_c,wind_ms,cloud
    2020-03-12T00:00,+1.3,4.2,0.875

Timestamps are naive local clock time on whole hours. An empty field is a
missing value. Consumption CSV layout::

    date,region,class,kwh
    2020-03-12,Harju,business,1234.5
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import statistics
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    ContiguityError,
    FormatError,
    GapTooLongError,
    InsufficientDataError,
    NoDataError,
    OutlierRepairRefused,
    ValidationError,
)

logger = logging.getLogger(__name__)

WEATHER_HEADER = ("timestamp", "temp_c", "wind_ms", "cloud")
CONSUMPTION_HEADER = ("date", "region", "class", "kwh")
WEATHER_FIELDS = ("temperature", "wind_speed", "cloud_cover")

HOUR = timedelta(hours=1)
DAY = timedelta(days=1)


class ConsumerClass(str, enum.Enum):
    BUSINESS = "business"
    PRIVATE = "private"

    def __str__(self):
        return self.value


class PartialDayWarning(UserWarning):
    """A calendar day without all 24 hourly samples was dropped."""


@dataclass(frozen=True)
class WeatherSample:
    timestamp: datetime
    temperature: Optional[float]
    wind_speed: Optional[float]
    cloud_cover: Optional[float]
    # names of fields produced by gap filling rather than observed
    filled: tuple = ()

    @property
    def synthetic(self) -> bool:
        return bool(self.filled)

    @property
    def complete(self) -> bool:
        return None not in (self.temperature, self.wind_speed, self.cloud_cover)


@dataclass(frozen=True)
class DailyWeather:
    date: date
    mean_temperature: float
    mean_sq_wind: float
    hourly_cloud: tuple

    def __post_init__(self):
        if len(self.hourly_cloud) != 24:
            raise ValidationError(f"{self.date}: expected 24 hourly cloud values, got {len(self.hourly_cloud)}")
        if self.mean_sq_wind < 0:
            raise ValidationError(f"{self.date}: negative mean squared wind")


@dataclass(frozen=True)
class ConsumptionRecord:
    date: date
    region: str
    consumer_class: ConsumerClass
    energy: float

    def __post_init__(self):
        if not (self.energy >= 0 and math.isfinite(self.energy)):
            raise ValidationError(f"{self.date} {self.region}: energy must be a finite value >= 0, got {self.energy}")


@dataclass(frozen=True, eq=False)
class ConsumptionSeries:
    """Contiguous daily energy totals for one (region, consumer class) group."""

    region: str
    consumer_class: Optional[ConsumerClass]
    start_date: date
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError("consumption values must be one-dimensional")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError("consumption values must be finite and >= 0")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, ConsumptionSeries):
            return NotImplemented
        return (
            self.region == other.region
            and self.consumer_class == other.consumer_class
            and self.start_date == other.start_date
            and np.array_equal(self.values, other.values)
        )

    @property
    def end_date(self) -> date:
        return self.start_date + (len(self) - 1) * DAY

    @property
    def dates(self) -> list:
        return [self.start_date + i * DAY for i in range(len(self))]

    @property
    def label(self) -> str:
        cls = self.consumer_class.value if self.consumer_class else "all"
        return f"{self.region}/{cls}"

    def index_of(self, day: date) -> int:
        i = (day - self.start_date).days
        if not 0 <= i < len(self):
            raise IndexError(f"{day} outside series {self.start_date}..{self.end_date}")
        return i

    def window(self, start: date, end: date) -> np.ndarray:
        """Values for the inclusive date range ``start..end``."""
        return self.values[self.index_of(start) : self.index_of(end) + 1]


@dataclass(frozen=True)
class RepairEntry:
    date: date
    old: float
    new: float


# -- parsing -----------------------------------------------------------------


def _read_text(stream: Union[IO, str, bytes]) -> str:
    if isinstance(stream, (str, bytes)):
        data = stream
    else:
        data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def _listing(problems, limit=10):
    shown = "; ".join(problems[:limit])
    if len(problems) > limit:
        shown += f"; ... {len(problems) - limit} more"
    return shown


def _optional_float(text: str) -> Optional[float]:
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _cloud_fraction(value: Optional[float], units: str) -> Optional[float]:
    if value is None or units == "fraction":
        return value
    if units == "oktas":
        # 9 = sky obscured
        if value == 9:
            return 1.0
        return value / 8.0 if 0 <= value <= 8 else value
    raise ValueError(f"unknown cloud units {units!r}")


def parse_weather(stream, cloud_units: str = "fraction") -> list:
    """Parse the weather CSV into samples sorted by timestamp.

    ``cloud_units`` is ``"fraction"`` (0..1) or ``"oktas"`` (0..8, 9 meaning
    sky obscured). Malformed rows raise :class:`FormatError` and
    out-of-range values raise :class:`ValidationError`; both name the
    offending line numbers.
    """
    text = _read_text(stream)
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(h.strip() for h in header) != WEATHER_HEADER:
        raise FormatError(f"weather header must be {','.join(WEATHER_HEADER)!r}, got {','.join(header)!r}")

    samples, bad_format, bad_range = [], [], []
    for row in reader:
        lineno = reader.line_num
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            bad_format.append(f"line {lineno}: expected 4 fields, got {len(row)}")
            continue
        try:
            ts = datetime.fromisoformat(row[0].strip())
            if ts.tzinfo is not None or ts.minute or ts.second or ts.microsecond:
                raise ValueError("timestamp must be a naive whole hour")
            temp = _optional_float(row[1])
            wind = _optional_float(row[2])
            cloud = _cloud_fraction(_optional_float(row[3]), cloud_units)
        except ValueError as exc:
            bad_format.append(f"line {lineno}: {exc}")
            continue
        if wind is not None and wind < 0:
            bad_range.append(f"line {lineno}: wind_ms {wind} < 0")
            continue
        if cloud is not None and not 0.0 <= cloud <= 1.0:
            bad_range.append(f"line {lineno}: cloud {row[3].strip()} outside [0, 1]")
            continue
        samples.append(WeatherSample(ts, temp, wind, cloud))

    if bad_format:
        raise FormatError(f"{len(bad_format)} unparseable weather rows: " + _listing(bad_format))
    if bad_range:
        raise ValidationError(f"{len(bad_range)} out-of-range weather rows: " + _listing(bad_range))

    samples.sort(key=lambda s: s.timestamp)
    dupes = sorted({a.timestamp for a, b in zip(samples, samples[1:]) if a.timestamp == b.timestamp})
    if dupes:
        raise ValidationError("duplicate weather timestamps: " + ", ".join(t.isoformat() for t in dupes))
    return samples


def parse_consumption(stream) -> list:
    """Parse the consumption CSV into records (file order preserved)."""
    text = _read_text(stream)
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(h.strip() for h in header) != CONSUMPTION_HEADER:
        raise FormatError(
            f"consumption header must be {','.join(CONSUMPTION_HEADER)!r}, got {','.join(header)!r}"
        )
    records, bad = [], []
    for row in reader:
        lineno = reader.line_num
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            bad.append(f"line {lineno}: expected 4 fields, got {len(row)}")
            continue
        try:
            day = date.fromisoformat(row[0].strip())
            region = row[1].strip()
            cls = ConsumerClass(row[2].strip())
            kwh = float(row[3])
        except ValueError as exc:
            bad.append(f"line {lineno}: {exc}")
            continue
        if not region:
            bad.append(f"line {lineno}: empty region")
            continue
        try:
            records.append(ConsumptionRecord(day, region, cls, kwh))
        except ValidationError as exc:
            bad.append(f"line {lineno}: {exc}")
    if bad:
        raise FormatError(f"{len(bad)} unparseable consumption rows: " + _listing(bad))
    return records


# -- weather preparation -----------------------------------------------------


def _missing_runs(mask: np.ndarray):
    """Yield (start, stop) index pairs of consecutive True entries."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def fill_weather_gaps(samples: Sequence[WeatherSample], max_gap_hours: int = 72) -> list:
    """Return an hourly-complete copy of ``samples``.

    Missing values and absent hours are linearly interpolated per field
    between the nearest valid neighbours; leading and trailing gaps copy
    the nearest valid value. Observed values are never altered. Each
    filled field is recorded in the sample's ``filled`` tuple.
    """
    if not samples:
        return []
    samples = sorted(samples, key=lambda s: s.timestamp)
    t0 = samples[0].timestamp
    n = int((samples[-1].timestamp - t0) / HOUR) + 1
    grid = [t0 + k * HOUR for k in range(n)]
    by_slot = {}
    for s in samples:
        k = (s.timestamp - t0) / HOUR
        if k != int(k):
            raise ValidationError(f"timestamp {s.timestamp.isoformat()} is not on the hourly grid")
        by_slot[int(k)] = s

    filled_cols = {}
    idx = np.arange(n, dtype=float)
    for name in WEATHER_FIELDS:
        col = np.full(n, np.nan)
        for k, s in by_slot.items():
            v = getattr(s, name)
            if v is not None:
                col[k] = v
        missing = np.isnan(col)
        if np.count_nonzero(~missing) < 2:
            raise InsufficientDataError(f"need at least two observed {name} values to fill gaps")
        for start, stop in _missing_runs(missing):
            if stop - start > max_gap_hours:
                raise GapTooLongError(
                    f"{name} gap of {stop - start} h from {grid[start].isoformat()} "
                    f"to {grid[stop - 1].isoformat()} exceeds {max_gap_hours} h"
                )
        out = col.copy()
        out[missing] = np.interp(idx[missing], idx[~missing], col[~missing])
        filled_cols[name] = (out, missing)

    result = []
    for k, ts in enumerate(grid):
        prior = by_slot.get(k)
        flags = set(prior.filled) if prior is not None else set()
        values = {}
        for name in WEATHER_FIELDS:
            out, missing = filled_cols[name]
            if missing[k]:
                flags.add(name)
                values[name] = float(out[k])
            else:
                values[name] = getattr(prior, name)
        result.append(WeatherSample(ts, filled=tuple(f for f in WEATHER_FIELDS if f in flags), **values))
    return result


def daily_weather(samples: Iterable[WeatherSample]) -> list:
    """Collapse complete hourly samples into per-day means.

    Days without all 24 clock hours (normally the first and last day of a
    file) are dropped with a :class:`PartialDayWarning`.
    """
    days = defaultdict(dict)
    for s in samples:
        if not s.complete:
            raise ValidationError(f"{s.timestamp.isoformat()}: missing values; run fill_weather_gaps first")
        days[s.timestamp.date()][s.timestamp.hour] = s

    result = []
    for day in sorted(days):
        hours = days[day]
        if len(hours) != 24:
            warnings.warn(f"dropping partial day {day} ({len(hours)} of 24 hours)", PartialDayWarning, stacklevel=2)
            continue
        ordered = [hours[h] for h in range(24)]
        result.append(
            DailyWeather(
                date=day,
                mean_temperature=math.fsum(s.temperature for s in ordered) / 24,
                mean_sq_wind=math.fsum(s.wind_speed**2 for s in ordered) / 24,
                hourly_cloud=tuple(s.cloud_cover for s in ordered),
            )
        )
    return result


# -- consumption preparation -------------------------------------------------


def aggregate(records: Iterable[ConsumptionRecord], region: Optional[str] = None, consumer_class=None) -> ConsumptionSeries:
    """Sum records per day for the selected region and class.

    ``None`` for either filter selects everything. Sums use exact
    (``math.fsum``) accumulation so the result does not depend on record
    order.
    """
    cls = ConsumerClass(consumer_class) if consumer_class is not None else None
    per_day = defaultdict(list)
    for rec in records:
        if region is not None and rec.region != region:
            continue
        if cls is not None and rec.consumer_class != cls:
            continue
        per_day[rec.date].append(rec.energy)
    if not per_day:
        raise NoDataError(f"no consumption records for region={region or 'all'} class={cls or 'all'}")

    first, last = min(per_day), max(per_day)
    span = (last - first).days + 1
    dates = [first + i * DAY for i in range(span)]
    missing = [d for d in dates if d not in per_day]
    if missing:
        raise ContiguityError("missing consumption dates: " + ", ".join(d.isoformat() for d in missing))
    values = [math.fsum(per_day[d]) for d in dates]
    return ConsumptionSeries(region or "all", cls, first, values)


def _neighbours(values, i, half, period):
    out = []
    for k in range(1, half + 1):
        for j in (i - k * period, i + k * period):
            if 0 <= j < len(values):
                out.append(values[j])
    return out


def repair_consumption_outliers(
    series: ConsumptionSeries,
    window_days: int = 7,
    mad_threshold: float = 4.0,
    period: int = 1,
    max_fraction: float = 0.10,
):
    """Replace isolated outlier days by the mean of their neighbours.

    A day is an outlier when its distance from the median of the
    surrounding ``window_days`` window (self excluded) exceeds
    ``mad_threshold`` times the window's median absolute deviation. With
    ``period=7`` the window holds same-weekday neighbours instead of
    adjacent days, which keeps weekends from being flagged in series with a
    strong weekly cycle.

    Returns ``(repaired_series, log)`` where ``log`` is a list of
    :class:`RepairEntry`.
    """
    n = len(series)
    if n <= window_days:
        raise InsufficientDataError(f"series of {n} days is too short for a {window_days}-day outlier window")
    if period < 1:
        raise ValueError("period must be >= 1")
    values = series.values
    half = window_days // 2

    flagged = []
    for i in range(n):
        window = _neighbours(values, i, half, period)
        if len(window) < 2:
            continue
        med = statistics.median(window)
        mad = statistics.median(abs(v - med) for v in window)
        if abs(values[i] - med) > mad_threshold * mad:
            flagged.append(i)
    if not flagged:
        return series, []
    # a single flagged day is never systematic, even in a short series
    if len(flagged) > max(1, int(max_fraction * n)):
        raise OutlierRepairRefused(
            f"{len(flagged)} of {n} days flagged as outliers (limit {max_fraction:.0%}); "
            "this looks like a systematic data problem"
        )

    bad = set(flagged)
    repaired = values.copy()
    log = []
    for i in flagged:
        sides = []
        for step in (-period, period):
            j = i + step
            while 0 <= j < n and j in bad:
                j += step
            if 0 <= j < n:
                sides.append(values[j])
        if not sides:
            continue
        new = math.fsum(sides) / len(sides)
        repaired[i] = new
        log.append(RepairEntry(series.start_date + i * DAY, float(values[i]), new))
        logger.info("repaired %s: %.6g -> %.6g", log[-1].date, log[-1].old, new)
    return replace(series, values=repaired), log
