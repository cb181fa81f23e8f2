from datetime import date, timedelta

import numpy as np
import pytest

from loaddecomp.ingest import ConsumptionSeries
from loaddecomp.residuals import ResidualSeries

DAY = timedelta(days=1)


def days(start: date, n: int) -> list:
    return [start + i * DAY for i in range(n)]


def residual_series(start: date, rho, label="") -> ResidualSeries:
    """Residual series with unit denominators, so raw == rho."""
    rho = np.asarray(rho, dtype=float)
    return ResidualSeries(start, rho, rho, np.ones(len(rho)), None, label)


@pytest.fixture
def flat_series():
    return ConsumptionSeries("r", None, date(2020, 1, 1), [100.0] * 30)
