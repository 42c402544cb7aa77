"""The forecast record shared by the engine, the log, and the report."""

from dataclasses import dataclass
from datetime import datetime
from typing import Optional


@dataclass
class ForecastRecord:
    """One model's forecast for one tick.

    A record opens when the forecast is made, with ``timestamp`` holding
    the projected target time, and closes when the actual arrives, which
    fixes the true timestamp and the squared error.  ``train_mse`` and
    ``window_start`` snapshot the fitted model and window at forecast
    time; ``retrained`` reports whether this tick's error triggered a
    refit afterwards.
    """

    timestamp: datetime
    model: str
    forecast: float
    window_start: datetime
    train_mse: float
    actual: Optional[float] = None
    squared_error: Optional[float] = None
    retrained: bool = False

    @property
    def closed(self):
        return self.actual is not None

    def close(self, timestamp, actual):
        self.timestamp = timestamp
        self.actual = actual
        self.squared_error = (actual - self.forecast) ** 2
