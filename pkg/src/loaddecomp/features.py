"""Daily prediction vectors for the load model.

Columns, in fixed order: seven weekday indicators (Monday first), the
thermal factor ``|T - 20 C|``, effective daylight hours, and the wind loss
factor (mean squared wind speed times the thermal factor). Nothing is
centred or standardised: the model has no intercept.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import CoverageError, ValidationError
from .solar import effective_daylight

WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
COLUMNS = WEEKDAYS + ("thermal", "daylight", "wind_loss")
N_FACTORS = len(COLUMNS)
DAY = timedelta(days=1)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    start_date: date
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != N_FACTORS:
            raise ValidationError(f"feature matrix must be N x {N_FACTORS}, got shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.start_date == other.start_date and np.array_equal(self.values, other.values)

    @property
    def rows(self) -> int:
        return len(self)

    @property
    def end_date(self) -> date:
        return self.start_date + (len(self) - 1) * DAY

    @property
    def dates(self) -> list:
        return [self.start_date + i * DAY for i in range(len(self))]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COLUMNS.index(name)]

    def window(self, start: date, end: date) -> np.ndarray:
        """Rows for the inclusive date range ``start..end``."""
        i, j = (start - self.start_date).days, (end - self.start_date).days
        if i < 0 or j >= len(self) or j < i:
            raise CoverageError(f"features cover {self.start_date}..{self.end_date}, requested {start}..{end}")
        return self.values[i : j + 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("date",) + COLUMNS)
        for day, row in zip(self.dates, self.values):
            writer.writerow([day.isoformat()] + [repr(float(v)) for v in row])
        return buf.getvalue()


def weekday_factors(day: date) -> tuple:
    """One-hot weekday indicators, Monday first."""
    out = [0] * 7
    out[day.weekday()] = 1
    return tuple(out)


def thermal_factor(mean_temperature: float, reference: float = 20.0) -> float:
    return abs(mean_temperature - reference)


def wind_loss_factor(mean_sq_wind: float, thermal: float) -> float:
    return mean_sq_wind * thermal


def build_features(
    dates: Sequence[date],
    daily_weather: Iterable,
    solar_days: Iterable,
    reference_temperature: float = 20.0,
    cloud_attenuation: float = 0.75,
) -> FeatureMatrix:
    """Assemble one feature row per date.

    ``dates`` must be contiguous. ``daily_weather`` and ``solar_days`` may
    contain extra days; any date lacking either raises
    :class:`CoverageError` naming the missing dates.
    """
    dates = list(dates)
    if not dates:
        raise CoverageError("no dates requested")
    for a, b in zip(dates, dates[1:]):
        if b - a != DAY:
            raise CoverageError(f"dates must be contiguous; {a} is followed by {b}")
    weather = {w.date: w for w in daily_weather}
    solar = {s.date: s for s in solar_days}
    missing_w = [d for d in dates if d not in weather]
    missing_s = [d for d in dates if d not in solar]
    if missing_w or missing_s:
        parts = []
        if missing_w:
            parts.append("weather missing for " + ", ".join(d.isoformat() for d in missing_w))
        if missing_s:
            parts.append("solar missing for " + ", ".join(d.isoformat() for d in missing_s))
        raise CoverageError("; ".join(parts))

    rows = []
    for d in dates:
        w = weather[d]
        thermal = thermal_factor(w.mean_temperature, reference_temperature)
        daylight = effective_daylight(solar[d], w.hourly_cloud, cloud_attenuation)
        rows.append(weekday_factors(d) + (thermal, daylight, wind_loss_factor(w.mean_sq_wind, thermal)))
    return FeatureMatrix(dates[0], rows)


def parse_features_csv(stream) -> FeatureMatrix:
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != ("date",) + COLUMNS:
        raise ValidationError(f"unexpected feature header {header}")
    rows, start = [], None
    for row in reader:
        if start is None:
            start = date.fromisoformat(row[0])
        rows.append([float(v) for v in row[1:]])
    return FeatureMatrix(start, rows)
