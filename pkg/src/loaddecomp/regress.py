"""Zero-intercept least-squares fit of daily consumption on the ten
prediction vectors, extrapolation, and level rescaling.

The coefficients solve the normal equations ``G a = b`` with
``G = F^T F`` and ``b = F^T c`` over the training window. The seven
weekday indicators sum to the constant vector, so no intercept column is
added. A near-singular Gram matrix is an error, never silently
pseudo-inverted: it usually means the window lacks a weekday.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional, Tuple

import numpy as np

from .errors import CoverageError, DegenerateModelError, ParameterError, RankDeficiencyError
from .features import COLUMNS, N_FACTORS, FeatureMatrix
from .ingest import ConsumptionSeries

DAY = timedelta(days=1)
DEFAULT_TRAIN_DAYS = 30
MAX_CONDITION = 1e12
SOLSTICE_MARGIN_DAYS = 45

Window = Tuple[date, date]


class SolsticeWindowWarning(UserWarning):
    """Training window sits near a solstice, where daylight barely changes."""


def day_span(start: date, days: int) -> Window:
    """Inclusive window of ``days`` days starting at ``start``."""
    if days < 1:
        raise ParameterError(f"window length must be >= 1 day, got {days}")
    return start, start + (days - 1) * DAY


@dataclass(frozen=True, eq=False)
class RegressionFit:
    coefficients: np.ndarray
    training_start: date
    training_end: date
    gram_condition: float

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float)
        if coef.shape != (N_FACTORS,) or not np.all(np.isfinite(coef)):
            raise ValueError(f"expected {N_FACTORS} finite coefficients")
        coef.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)

    def __eq__(self, other):
        if not isinstance(other, RegressionFit):
            return NotImplemented
        return (
            np.array_equal(self.coefficients, other.coefficients)
            and self.training_start == other.training_start
            and self.training_end == other.training_end
            and self.gram_condition == other.gram_condition
        )

    @property
    def window(self) -> Window:
        return self.training_start, self.training_end

    @property
    def training_days(self) -> int:
        return (self.training_end - self.training_start).days + 1

    def as_dict(self) -> dict:
        return dict(zip(COLUMNS, self.coefficients.tolist()))

    def to_csv(self, extra: Optional[dict] = None) -> str:
        """Coefficient dump: ``#key=value`` metadata lines, then ``factor,alpha``."""
        meta = {
            "training_start": self.training_start.isoformat(),
            "training_end": self.training_end.isoformat(),
            "gram_condition": repr(float(self.gram_condition)),
        }
        meta.update(extra or {})
        buf = io.StringIO()
        for key, value in meta.items():
            buf.write(f"#{key}={value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("factor", "alpha"))
        for name, alpha in zip(COLUMNS, self.coefficients):
            writer.writerow((name, repr(float(alpha))))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RegressionFit":
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
            elif line.strip():
                rows.append(line)
        parsed = list(csv.reader(rows))
        if tuple(parsed[0]) != ("factor", "alpha") or [r[0] for r in parsed[1:]] != list(COLUMNS):
            raise ValueError("not a coefficient dump")
        return cls(
            [float(r[1]) for r in parsed[1:]],
            date.fromisoformat(meta["training_start"]),
            date.fromisoformat(meta["training_end"]),
            float(meta["gram_condition"]),
        )


@dataclass(frozen=True, eq=False)
class Prediction:
    start_date: date
    unscaled: np.ndarray = field(repr=False)
    scale_factor: float = 1.0

    def __post_init__(self):
        if not (self.scale_factor > 0 and math.isfinite(self.scale_factor)):
            raise ParameterError(f"scale factor must be a finite value > 0, got {self.scale_factor}")
        values = np.array(self.unscaled, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "unscaled", values)

    def __len__(self):
        return len(self.unscaled)

    @property
    def dates(self) -> list:
        return [self.start_date + i * DAY for i in range(len(self))]

    @property
    def predicted(self) -> np.ndarray:
        return self.scale_factor * self.unscaled

    def rescaled(self, factor: float) -> "Prediction":
        return Prediction(self.start_date, self.unscaled, self.scale_factor * factor)


# -- linear algebra ----------------------------------------------------------


def gram_system(rows: np.ndarray, target: np.ndarray):
    """Normal-equation matrix and right-hand side, exactly-rounded sums."""
    m = rows.shape[1]
    gram = np.empty((m, m))
    rhs = np.empty(m)
    for mu in range(m):
        fm = rows[:, mu]
        rhs[mu] = math.fsum(fm * target)
        for nu in range(mu, m):
            gram[mu, nu] = gram[nu, mu] = math.fsum(fm * rows[:, nu])
    return gram, rhs


def cholesky_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive-definite ``a``.

    Raises ``np.linalg.LinAlgError`` on a non-positive pivot.
    """
    n = len(b)
    low = np.zeros((n, n))
    for j in range(n):
        d = a[j, j] - math.fsum(low[j, :j] ** 2)
        if not d > 0:
            raise np.linalg.LinAlgError(f"non-positive pivot at column {j}")
        low[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            low[i, j] = (a[i, j] - math.fsum(low[i, :j] * low[j, :j])) / low[j, j]
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - math.fsum(low[i, :i] * y[:i])) / low[i, i]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (y[i] - math.fsum(low[i + 1 :, i] * x[i + 1 :])) / low[i, i]
    return x


def pivoted_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    n = len(b)
    m = np.hstack([np.array(a, dtype=float), np.array(b, dtype=float).reshape(-1, 1)])
    for k in range(n):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        if m[p, k] == 0:
            raise np.linalg.LinAlgError("singular matrix")
        if p != k:
            m[[k, p]] = m[[p, k]]
        for i in range(k + 1, n):
            m[i, k:] -= (m[i, k] / m[k, k]) * m[k, k:]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (m[i, n] - math.fsum(m[i, i + 1 : n] * x[i + 1 :])) / m[i, i]
    return x


def _dependent_columns(gram: np.ndarray) -> list:
    norms = np.diag(gram)
    zero = [COLUMNS[i] for i in range(len(norms)) if norms[i] == 0]
    if zero:
        return zero
    _, _, vt = np.linalg.svd(gram)
    null = np.abs(vt[-1])
    return [COLUMNS[i] for i in np.flatnonzero(null >= 0.1 * null.max())]


def _near_solstice(window: Window) -> bool:
    start, end = window
    mid = start + (end - start) / 2
    for year in (mid.year - 1, mid.year, mid.year + 1):
        for month in (6, 12):
            if abs((mid - date(year, month, 21)).days) <= SOLSTICE_MARGIN_DAYS:
                return True
    return False


def _check_window(window: Window, features: FeatureMatrix, consumption: ConsumptionSeries):
    start, end = window
    if end < start:
        raise ParameterError(f"window end {end} precedes start {start}")
    for name, first, last in (
        ("features", features.start_date, features.end_date),
        ("consumption", consumption.start_date, consumption.end_date),
    ):
        if start < first or end > last:
            raise CoverageError(f"window {start}..{end} not covered by {name} ({first}..{last})")


# -- operations --------------------------------------------------------------


def fit(
    features: FeatureMatrix,
    consumption: ConsumptionSeries,
    window: Window,
    max_condition: float = MAX_CONDITION,
) -> RegressionFit:
    """Fit the ten coefficients on the inclusive training ``window``."""
    _check_window(window, features, consumption)
    start, end = window
    n = (end - start).days + 1
    if n < N_FACTORS:
        raise RankDeficiencyError(f"training window of {n} days cannot identify {N_FACTORS} coefficients")
    if _near_solstice(window):
        warnings.warn(
            f"training window {start}..{end} is centred within {SOLSTICE_MARGIN_DAYS} days of a solstice; "
            f"consider at least {2 * DEFAULT_TRAIN_DAYS} days",
            SolsticeWindowWarning,
            stacklevel=2,
        )

    rows = features.window(start, end)
    target = consumption.window(start, end)
    gram, rhs = gram_system(rows, target)

    cond = float(np.linalg.cond(gram)) if np.all(np.diag(gram) > 0) else math.inf
    if not cond <= max_condition:
        cols = _dependent_columns(gram)
        raise RankDeficiencyError(
            f"Gram matrix over {start}..{end} is singular or near-singular "
            f"(condition {cond:.3g} > {max_condition:.3g}); dependent columns: {', '.join(cols)}",
            columns=cols,
        )
    try:
        alpha = cholesky_solve(gram, rhs)
    except np.linalg.LinAlgError:
        alpha = pivoted_solve(gram, rhs)
    return RegressionFit(alpha, start, end, cond)


def predict(
    fit: RegressionFit,
    features: FeatureMatrix,
    scale_factor: float = 1.0,
    window: Optional[Window] = None,
) -> Prediction:
    """``scale_factor * F a`` over ``window`` (default: all feature rows)."""
    start, end = window or (features.start_date, features.end_date)
    rows = features.window(start, end)
    unscaled = [math.fsum(row * fit.coefficients) for row in rows]
    return Prediction(start, unscaled, scale_factor)


def estimate_scale(
    fit: RegressionFit,
    features: FeatureMatrix,
    consumption: ConsumptionSeries,
    window: Window,
    min_days: int = 7,
) -> float:
    """Ratio of mean observed to mean unscaled predicted consumption over
    ``window``, which must not overlap the training window."""
    _check_window(window, features, consumption)
    start, end = window
    n = (end - start).days + 1
    if n < min_days:
        raise ParameterError(f"scale estimation window must be >= {min_days} days, got {n}")
    if start <= fit.training_end and end >= fit.training_start:
        raise ParameterError(
            f"scale window {start}..{end} overlaps training window {fit.training_start}..{fit.training_end}"
        )
    pred = predict(fit, features, window=window).unscaled
    mean_pred = math.fsum(pred) / n
    mean_obs = math.fsum(consumption.window(start, end)) / n
    if mean_pred == 0:
        raise DegenerateModelError(f"mean prediction over {start}..{end} is zero")
    ratio = mean_obs / mean_pred
    if not (ratio > 0 and math.isfinite(ratio)):
        raise DegenerateModelError(f"scale ratio {ratio} over {start}..{end} is not positive")
    return ratio
