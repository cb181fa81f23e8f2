"""Solar elevation from the NOAA low-precision ephemeris, and the
cloud-attenuated effective daylight hours derived from it.

The ephemeris expands declination and the equation of time as truncated
Fourier series of the fractional year (Spencer coefficients). Accuracy is
a fraction of a degree, which is far below the noise of a daily load model.
Atmospheric refraction is ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from functools import cached_property
from typing import Optional, Sequence
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from .errors import SolarDomainError, ValidationError

MIN_YEAR, MAX_YEAR = 1950, 2100


@dataclass(frozen=True)
class Site:
    """Observation site.

    Local civil time is converted to UTC with either a named IANA zone
    (``timezone``, DST aware) or a fixed ``utc_offset`` in hours. With
    neither set the site clock is UTC.
    """

    latitude: float
    longitude: float
    timezone: Optional[str] = None
    utc_offset: Optional[float] = None

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"longitude {self.longitude} outside [-180, 180]")
        if self.timezone is not None and self.utc_offset is not None:
            raise ValidationError("give either timezone or utc_offset, not both")
        if self.timezone is not None:
            try:
                ZoneInfo(self.timezone)
            except (ZoneInfoNotFoundError, ValueError) as exc:
                raise ValidationError(f"unknown timezone {self.timezone!r}") from exc

    @cached_property
    def tzinfo(self):
        if self.timezone is not None:
            return ZoneInfo(self.timezone)
        return timezone(timedelta(hours=self.utc_offset or 0.0))

    def to_utc(self, instant: datetime) -> datetime:
        """Interpret a naive ``instant`` as site-local clock time."""
        if instant.tzinfo is None:
            instant = instant.replace(tzinfo=self.tzinfo)
        return instant.astimezone(timezone.utc)


@dataclass(frozen=True)
class SolarDay:
    date: date
    hourly_altitude: tuple

    def __post_init__(self):
        if len(self.hourly_altitude) != 24:
            raise ValidationError(f"{self.date}: expected 24 hourly altitudes")
        if any(not -90.0 <= a <= 90.0 for a in self.hourly_altitude):
            raise ValidationError(f"{self.date}: altitude outside [-90, 90]")


def _fractional_year(utc: datetime) -> float:
    if not MIN_YEAR <= utc.year <= MAX_YEAR:
        raise SolarDomainError(f"{utc.isoformat()} outside ephemeris range {MIN_YEAR}-{MAX_YEAR}")
    ndays = 366 if utc.year % 4 == 0 and (utc.year % 100 != 0 or utc.year % 400 == 0) else 365
    hour = utc.hour + utc.minute / 60 + (utc.second + utc.microsecond / 1e6) / 3600
    return 2 * math.pi / ndays * (utc.timetuple().tm_yday - 1 + (hour - 12) / 24)


def _declination_rad(g: float) -> float:
    return (
        0.006918
        - 0.399912 * math.cos(g)
        + 0.070257 * math.sin(g)
        - 0.006758 * math.cos(2 * g)
        + 0.000907 * math.sin(2 * g)
        - 0.002697 * math.cos(3 * g)
        + 0.00148 * math.sin(3 * g)
    )


def _eqtime_minutes(g: float) -> float:
    return 229.18 * (
        0.000075
        + 0.001868 * math.cos(g)
        - 0.032077 * math.sin(g)
        - 0.014615 * math.cos(2 * g)
        - 0.040849 * math.sin(2 * g)
    )


def _as_utc(instant) -> datetime:
    if isinstance(instant, datetime):
        if instant.tzinfo is None:
            return instant.replace(tzinfo=timezone.utc)
        return instant.astimezone(timezone.utc)
    return datetime.combine(instant, time(12), tzinfo=timezone.utc)


def declination(instant) -> float:
    """Solar declination in degrees. A bare date is evaluated at 12:00 UTC."""
    return math.degrees(_declination_rad(_fractional_year(_as_utc(instant))))


def equation_of_time(instant) -> float:
    """Equation of time in minutes. A bare date is evaluated at 12:00 UTC."""
    return _eqtime_minutes(_fractional_year(_as_utc(instant)))


def solar_position(site: Site, instant: datetime) -> float:
    """Solar elevation angle in degrees at ``instant``.

    A naive ``instant`` is site-local clock time; an aware one is used as is.
    """
    utc = site.to_utc(instant)
    g = _fractional_year(utc)
    decl = _declination_rad(g)
    minutes = utc.hour * 60 + utc.minute + (utc.second + utc.microsecond / 1e6) / 60
    true_solar = minutes + _eqtime_minutes(g) + 4 * site.longitude
    hour_angle = math.radians(true_solar / 4 - 180)
    lat = math.radians(site.latitude)
    sin_alt = math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(hour_angle)
    return math.degrees(math.asin(max(-1.0, min(1.0, sin_alt))))


def solar_noon(site: Site, day: date) -> datetime:
    """UTC instant of local solar noon on ``day``."""
    utc = datetime.combine(day, time(12), tzinfo=timezone.utc)
    for _ in range(2):
        minutes = 720 - 4 * site.longitude - equation_of_time(utc)
        utc = datetime.combine(day, time(0), tzinfo=timezone.utc) + timedelta(minutes=minutes)
    return utc


def solar_day(site: Site, day: date) -> SolarDay:
    """Altitudes at local clock mid-hours 00:30 .. 23:30."""
    altitudes = tuple(solar_position(site, datetime.combine(day, time(h, 30))) for h in range(24))
    return SolarDay(day, altitudes)


def effective_daylight(solar: SolarDay, hourly_cloud: Sequence[float], cloud_attenuation: float = 0.75) -> float:
    """Effective hours of daylight for one day, in [0, 24].

    Each hour contributes ``clamp(sin(altitude), 0, 1)`` scaled by
    ``1 - cloud_attenuation * cloud``.
    """
    if len(hourly_cloud) != 24:
        raise ValidationError(f"expected 24 hourly cloud fractions, got {len(hourly_cloud)}")
    if not 0.0 <= cloud_attenuation <= 1.0:
        raise ValidationError(f"cloud_attenuation {cloud_attenuation} outside [0, 1]")
    terms = []
    for alt, cloud in zip(solar.hourly_altitude, hourly_cloud):
        if not 0.0 <= cloud <= 1.0:
            raise ValidationError(f"{solar.date}: cloud fraction {cloud} outside [0, 1]")
        weight = min(1.0, max(0.0, math.sin(math.radians(alt))))
        terms.append(weight * (1.0 - cloud_attenuation * cloud))
    return math.fsum(terms)
