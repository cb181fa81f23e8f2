"""Run configuration and the ingest -> features -> fit -> residuals chain
shared by the CLI subcommands."""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass, field, fields, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import yaml

from .errors import ConfigError, LoadDecompError, ParameterError
from .features import FeatureMatrix, build_features
from .ingest import (
    ConsumerClass,
    ConsumptionSeries,
    aggregate,
    daily_weather,
    fill_weather_gaps,
    parse_consumption,
    parse_weather,
    repair_consumption_outliers,
)
from .regress import DEFAULT_TRAIN_DAYS, Prediction, RegressionFit, day_span, estimate_scale, fit, predict
from .residuals import ResidualSeries, normalize, raw_residuals
from .solar import Site, solar_day
from .synth import site_from_dict

logger = logging.getLogger(__name__)

DAY = timedelta(days=1)


def parse_date(value, what: str) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value).strip())
    except ValueError as exc:
        raise ConfigError(f"{what}: not a YYYY-MM-DD date: {value!r}") from exc


def parse_range(value, what: str) -> Tuple[date, date]:
    """``START:END`` (inclusive) or a two-element list."""
    if isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = str(value).split(":")
    if len(parts) != 2:
        raise ConfigError(f"{what}: expected START:END, got {value!r}")
    start, end = parse_date(parts[0], what), parse_date(parts[1], what)
    if end < start:
        raise ConfigError(f"{what}: end {end} precedes start {start}")
    return start, end


@dataclass(frozen=True)
class RunConfig:
    site: Site
    weather: Path
    consumption: Path
    region: Optional[str] = None
    consumer_class: Optional[ConsumerClass] = None
    train_start: Optional[date] = None
    train_days: int = DEFAULT_TRAIN_DAYS
    onset: Optional[date] = None
    scale_window: Optional[Tuple[date, date]] = None
    holidays: Optional[Path] = None
    out: Path = Path("out")
    dump_features: Optional[Path] = None
    reference_temperature: float = 20.0
    cloud_attenuation: float = 0.75
    cloud_units: str = "fraction"
    max_gap_hours: int = 72
    repair_outliers: bool = False
    outlier_period: int = 7
    summary_range: Optional[Tuple[date, date]] = None

    @property
    def label(self) -> str:
        cls = self.consumer_class.value if self.consumer_class else "all"
        return f"{self.region or 'all'}/{cls}"

    def check_paths(self):
        for name in ("weather", "consumption", "holidays"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}", cause=f"{name}-file-not-found")

    def check_windows(self):
        if self.onset is not None and self.train_start is not None:
            train_end = self.train_start + (self.train_days - 1) * DAY
            if train_end >= self.onset:
                raise ConfigError(f"training window {self.train_start}..{train_end} must precede onset {self.onset}")


_PATH_KEYS = ("weather", "consumption", "holidays", "out", "dump_features")


def build_config(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Build a :class:`RunConfig` from a mapping of config-file keys.

    Relative paths resolve against ``base_dir``.
    """
    doc = dict(doc)
    site_doc = dict(doc.pop("site", None) or {})
    cloud_att = site_doc.pop("cloud_attenuation", doc.pop("cloud_attenuation", 0.75))
    if "latitude" not in site_doc or "longitude" not in site_doc:
        raise ConfigError("config needs a site block with latitude and longitude")
    kwargs = {"site": site_from_dict(site_doc), "cloud_attenuation": float(cloud_att)}
    if "class" in doc:
        doc["consumer_class"] = doc.pop("class")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, value in doc.items():
        if value is None:
            continue
        if key in _PATH_KEYS:
            p = Path(str(value))
            kwargs[key] = p if p.is_absolute() else base_dir / p
        elif key == "consumer_class":
            try:
                kwargs[key] = ConsumerClass(str(value))
            except ValueError as exc:
                raise ConfigError(f"class must be business or private, got {value!r}") from exc
        elif key in ("train_start", "onset"):
            kwargs[key] = parse_date(value, key)
        elif key in ("scale_window", "summary_range"):
            kwargs[key] = parse_range(value, key)
        elif key in ("train_days", "max_gap_hours", "outlier_period"):
            kwargs[key] = int(value)
        elif key in ("reference_temperature",):
            kwargs[key] = float(value)
        elif key == "repair_outliers":
            kwargs[key] = bool(value)
        else:
            kwargs[key] = str(value)
    for required in ("weather", "consumption"):
        if required not in kwargs:
            raise ConfigError(f"config lacks '{required}'")
    return RunConfig(**kwargs)


def load_config(path: Optional[Path], overrides: Optional[dict] = None) -> RunConfig:
    """Read a YAML run config; ``overrides`` (CLI flags) win, and their
    relative paths resolve against the working directory."""
    doc = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", cause="config-file-not-found")
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}".replace("\n", " ")) from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        base = path.parent
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key in _PATH_KEYS:
        if key in overrides:
            overrides[key] = str(Path(overrides[key]).resolve())
    if "site" in overrides:
        doc["site"] = {**(doc.get("site") or {}), **overrides.pop("site")}
    doc.update(overrides)
    return build_config(doc, base)


def config_to_yaml(cfg: RunConfig, relative_to: Optional[Path] = None) -> str:
    """Serialise a config; paths are made relative to ``relative_to``."""
    site = {"latitude": cfg.site.latitude, "longitude": cfg.site.longitude}
    if cfg.site.timezone:
        site["timezone"] = cfg.site.timezone
    if cfg.site.utc_offset is not None:
        site["utc_offset"] = cfg.site.utc_offset
    site["cloud_attenuation"] = cfg.cloud_attenuation
    doc = {"site": site}
    for f in fields(RunConfig):
        if f.name in ("site", "cloud_attenuation"):
            continue
        value = getattr(cfg, f.name)
        if value is None or value == f.default:
            continue
        if f.name in _PATH_KEYS:
            value = os.path.relpath(value, relative_to) if relative_to else str(value)
        elif f.name == "consumer_class":
            value = value.value
        elif f.name in ("scale_window", "summary_range"):
            value = f"{value[0].isoformat()}:{value[1].isoformat()}"
        elif isinstance(value, date):
            value = value.isoformat()
        doc["class" if f.name == "consumer_class" else f.name] = value
    return yaml.safe_dump(doc, sort_keys=False)


@dataclass
class Analysis:
    config: RunConfig
    consumption: ConsumptionSeries
    features: FeatureMatrix
    fit: RegressionFit
    prediction: Prediction
    predicted: np.ndarray
    residuals: ResidualSeries
    scale_factor: float = 1.0
    repairs: list = field(default_factory=list)

    def training_stats(self):
        rho = self.residuals.rho(self.fit.training_start, self.fit.training_end)
        return float(np.mean(np.abs(rho))), float(np.max(np.abs(rho)))


def load_inputs(cfg: RunConfig):
    """Parse and prepare weather and consumption for ``cfg``."""
    cfg.check_paths()
    with open(cfg.weather, "rb") as fh:
        samples = parse_weather(fh, cloud_units=cfg.cloud_units)
    daily = daily_weather(fill_weather_gaps(samples, cfg.max_gap_hours))
    with open(cfg.consumption, "rb") as fh:
        records = parse_consumption(fh)
    series = aggregate(records, cfg.region, cfg.consumer_class)
    repairs = []
    if cfg.repair_outliers:
        series, repairs = repair_consumption_outliers(series, period=cfg.outlier_period)
    return daily, series, repairs


def run_analysis(cfg: RunConfig) -> Analysis:
    cfg.check_windows()
    daily, consumption, repairs = load_inputs(cfg)
    dates = consumption.dates
    solar = [solar_day(cfg.site, d) for d in dates]
    features = build_features(dates, daily, solar, cfg.reference_temperature, cfg.cloud_attenuation)

    train_start = cfg.train_start
    if train_start is None:
        # the window right before the onset, or the start of the data
        train_start = cfg.onset - cfg.train_days * DAY if cfg.onset else consumption.start_date
    model = fit(features, consumption, day_span(train_start, cfg.train_days))
    prediction = predict(model, features)
    predicted = prediction.predicted.copy()
    scale = 1.0
    if cfg.scale_window is not None:
        scale = estimate_scale(model, features, consumption, cfg.scale_window)
        pivot = cfg.onset or cfg.scale_window[0]
        k = max(0, (pivot - consumption.start_date).days)
        predicted[k:] *= scale
        logger.info("rescaled predictions from %s by %.6f", pivot, scale)
    residuals = normalize(raw_residuals(consumption, predicted), consumption, cfg.onset, label=cfg.label)
    return Analysis(cfg, consumption, features, model, prediction, predicted, residuals, scale, repairs)


def write_atomic(path: Path, text: str):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
