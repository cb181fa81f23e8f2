"""Synthetic weather and consumption with known ground truth.

Consumption is generated from the same ten feature columns the model
fits, so a fit on clean data must recover the generating coefficients.
Interventions apply a multiplicative level step and can additionally
damp the weekly cycle.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import ConfigError, GenerationError, ValidationError
from .features import N_FACTORS, FeatureMatrix, build_features
from .ingest import ConsumerClass, ConsumptionSeries, WeatherSample, daily_weather
from .solar import Site, solar_day

__all__ = [
    "REFERENCE_COEFFICIENTS",
    "TALLINN",
    "Intervention",
    "ScenarioSpec",
    "effective_coefficients",
    "generate",
    "generate_consumption",
    "generate_weather",
    "load_scenarios",
    "scenario_features",
    "site_from_dict",
]

DAY = timedelta(days=1)

# A business-like profile: kWh per weekday indicator, per degree of
# thermal factor, per effective daylight hour, per unit of wind loss.
REFERENCE_COEFFICIENTS = (9400.0, 9800.0, 9850.0, 9800.0, 9500.0, 6900.0, 6400.0, 160.0, -140.0, 2.5)
TALLINN = Site(59.41, 24.83, timezone="Europe/Tallinn")


@dataclass(frozen=True)
class Intervention:
    start: date
    step: float
    damping: float = 1.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError(f"intervention step factor must be > 0, got {self.step}")
        if not 0 < self.damping <= 1:
            raise ValidationError(f"weekly damping must be in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class ScenarioSpec:
    site: Site
    start: date
    days: int
    true_coefficients: tuple = REFERENCE_COEFFICIENTS
    noise_sigma: float = 0.01
    interventions: tuple = ()
    seed: int = 0
    region: str = "synthetic"
    consumer_class: ConsumerClass = ConsumerClass.BUSINESS
    # scales every stochastic weather component; 0 gives smooth curves
    weather_noise: float = 1.0
    mean_temperature: float = 5.5
    temperature_amplitude: float = 11.0

    def __post_init__(self):
        if self.days < 1:
            raise ValidationError("scenario must span at least one day")
        if len(self.true_coefficients) != N_FACTORS:
            raise ValidationError(f"need {N_FACTORS} true coefficients")
        if self.noise_sigma < 0 or self.weather_noise < 0:
            raise ValidationError("noise levels must be >= 0")
        object.__setattr__(self, "true_coefficients", tuple(float(a) for a in self.true_coefficients))
        object.__setattr__(self, "interventions", tuple(self.interventions))
        object.__setattr__(self, "consumer_class", ConsumerClass(self.consumer_class))

    @property
    def dates(self) -> list:
        return [self.start + i * DAY for i in range(self.days)]

    @property
    def end(self) -> date:
        return self.start + (self.days - 1) * DAY


def _ar1(rng, n, phi, sd):
    """Stationary AR(1) path with marginal standard deviation ``sd``."""
    out = np.empty(n)
    innov = sd * math.sqrt(1 - phi * phi)
    out[0] = rng.normal(0.0, sd) if sd > 0 else 0.0
    for i in range(1, n):
        out[i] = phi * out[i - 1] + (rng.normal(0.0, innov) if sd > 0 else 0.0)
    return out


def generate_weather(spec: ScenarioSpec) -> list:
    """Hourly samples for every local clock hour of the scenario span."""
    rng = np.random.default_rng([spec.seed, 0])
    wn = spec.weather_noise
    n = spec.days
    temp_anom = _ar1(rng, n, 0.8, wn)
    log_wind = _ar1(rng, n, 0.5, 0.35 * wn)
    cloud_latent = _ar1(rng, n, 0.5, 2.0 * wn)
    hour_noise = rng.normal(0.0, 1.0, size=(n, 24, 3)) * wn

    samples = []
    for i, day in enumerate(spec.dates):
        phase = math.cos(2 * math.pi * (day.timetuple().tm_yday - 20) / 365.25)
        season = spec.mean_temperature - spec.temperature_amplitude * phase
        # day-to-day spread is wider in winter (5.5 C) than in summer (2.5 C)
        spread = 4.0 + 1.5 * phase
        for h in range(24):
            diurnal = 3.0 * math.cos(2 * math.pi * (h - 15) / 24)
            temp = season + spread * temp_anom[i] + diurnal + 0.3 * hour_noise[i, h, 0]
            wind = 4.5 * math.exp(log_wind[i] + 0.15 * hour_noise[i, h, 1])
            cloud = 1.0 / (1.0 + math.exp(-(0.3 + cloud_latent[i] + 0.5 * hour_noise[i, h, 2])))
            samples.append(
                WeatherSample(
                    datetime.combine(day, time(h)),
                    round(float(temp), 2),
                    round(float(wind), 2),
                    min(1.0, max(0.0, round(float(cloud), 3))),
                )
            )
    return samples


def scenario_features(
    spec: ScenarioSpec, weather: Optional[Sequence[WeatherSample]] = None, reference_temperature=20.0, cloud_attenuation=0.75
) -> FeatureMatrix:
    """Feature matrix for the scenario, via the normal ingest path."""
    if weather is None:
        weather = generate_weather(spec)
    daily = daily_weather(weather)
    solar = [solar_day(spec.site, d) for d in spec.dates]
    return build_features(spec.dates, daily, solar, reference_temperature, cloud_attenuation)


def effective_coefficients(spec: ScenarioSpec, day: date):
    """Level multiplier and coefficient vector in force on ``day``."""
    alpha = np.array(spec.true_coefficients)
    level, damping = 1.0, 1.0
    for iv in spec.interventions:
        if day >= iv.start:
            level *= iv.step
            damping *= iv.damping
    if damping != 1.0:
        week = alpha[:7]
        mean = week.mean()
        alpha[:7] = mean + damping * (week - mean)
    return level, alpha


def generate_consumption(spec: ScenarioSpec, features: FeatureMatrix) -> ConsumptionSeries:
    """``c_i = level_i * (f_i . alpha_i) * (1 + eps_i)`` with Gaussian ``eps``."""
    if features.start_date > spec.start or features.end_date < spec.end:
        raise GenerationError(f"features do not cover scenario span {spec.start}..{spec.end}")
    key = zlib.crc32(f"{spec.region}/{spec.consumer_class.value}".encode())
    rng = np.random.default_rng([spec.seed, 1, key])
    eps = rng.normal(0.0, spec.noise_sigma, size=spec.days) if spec.noise_sigma > 0 else np.zeros(spec.days)
    rows = features.window(spec.start, spec.end)
    values = []
    for i, day in enumerate(spec.dates):
        level, alpha = effective_coefficients(spec, day)
        value = level * math.fsum(rows[i] * alpha) * (1.0 + eps[i])
        if not value >= 0:
            raise GenerationError(f"generated consumption {value:.6g} on {day} is negative; check the coefficients")
        values.append(value)
    return ConsumptionSeries(spec.region, spec.consumer_class, spec.start, values)


def generate(spec: ScenarioSpec):
    """Return ``(weather, features, consumption)`` for one scenario."""
    weather = generate_weather(spec)
    features = scenario_features(spec, weather)
    return weather, features, generate_consumption(spec, features)


# -- scenario files ------------------------------------------------------------


def _date(value) -> date:
    return value if isinstance(value, date) else date.fromisoformat(str(value))


def site_from_dict(doc: dict) -> Site:
    try:
        return Site(
            float(doc["latitude"]),
            float(doc["longitude"]),
            timezone=doc.get("timezone"),
            utc_offset=None if doc.get("utc_offset") is None else float(doc["utc_offset"]),
        )
    except KeyError as exc:
        raise ConfigError(f"site block lacks {exc}") from exc


def load_scenarios(text: str) -> list:
    """Parse a YAML scenario file into one :class:`ScenarioSpec` per series.

    All series share the site, span, seed and weather settings::

        site: {latitude: 59.41, longitude: 24.83, timezone: Europe/Tallinn}
        start: 2020-01-01
        days: 212
        seed: 7
        series:
          - region: Harju
            class: business
            coefficients: [9400, 9800, 9850, 9800, 9500, 6900, 6400, 160, -140, 2.5]
            noise_sigma: 0.01
            interventions:
              - {start: 2020-03-12, step: 0.8, damping: 0.8}
    """
    try:
        doc = yaml.safe_load(text) or {}
        site = site_from_dict(doc.get("site") or {"latitude": TALLINN.latitude, "longitude": TALLINN.longitude, "timezone": TALLINN.timezone})
        common = dict(
            site=site,
            start=_date(doc["start"]),
            days=int(doc["days"]),
            seed=int(doc.get("seed", 0)),
            weather_noise=float(doc.get("weather_noise", 1.0)),
            mean_temperature=float(doc.get("mean_temperature", 5.5)),
            temperature_amplitude=float(doc.get("temperature_amplitude", 11.0)),
        )
        specs = []
        for s in doc.get("series") or [{}]:
            specs.append(
                ScenarioSpec(
                    true_coefficients=tuple(s.get("coefficients", REFERENCE_COEFFICIENTS)),
                    noise_sigma=float(s.get("noise_sigma", 0.01)),
                    interventions=tuple(
                        Intervention(_date(iv["start"]), float(iv["step"]), float(iv.get("damping", 1.0)))
                        for iv in s.get("interventions", [])
                    ),
                    region=str(s.get("region", "synthetic")),
                    consumer_class=s.get("class", "business"),
                    **common,
                )
            )
    except (yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario file: {exc}") from exc
    return specs
