"""Price series and tick containers."""

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DomainError, LengthError, OrderingError


def parse_timestamp(text):
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        raise DomainError(f"timestamp {text!r} has no timezone")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts):
    """Render an aware datetime as RFC 3339 with a Z suffix."""
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Tick:
    """A single quote: UTC timestamp, symbol, close price."""

    timestamp: datetime
    symbol: str
    close: float

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise DomainError("tick timestamp must be timezone-aware")
        if not np.isfinite(self.close) or self.close <= 0:
            raise DomainError(f"close must be a finite positive number, got {self.close}")


class PriceSeries:
    """Timestamped close prices for one symbol, strictly time-ordered."""

    def __init__(self, symbol, timestamps, closes):
        closes = np.asarray(closes, dtype=float)
        timestamps = list(timestamps)
        if len(timestamps) != closes.shape[0]:
            raise LengthError(
                f"{len(timestamps)} timestamps but {closes.shape[0]} closes"
            )
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
            raise DomainError("all close values must be finite and > 0")
        for a, b in zip(timestamps, timestamps[1:]):
            if b <= a:
                raise OrderingError(f"timestamps not strictly increasing at {b}")
        self.symbol = symbol
        self.timestamps = timestamps
        self.closes = closes

    def __len__(self):
        return len(self.timestamps)

    def __iter__(self):
        for ts, close in zip(self.timestamps, self.closes):
            yield Tick(ts, self.symbol, float(close))

    @property
    def values(self):
        """Close prices as a float array."""
        return self.closes

    def slice(self, start, stop=None):
        """Positional sub-series (same symbol)."""
        sl = slice(start, stop)
        return PriceSeries(self.symbol, self.timestamps[sl], self.closes[sl])

    def extend(self, ticks):
        """New series with ticks appended (validated against ordering)."""
        ts = self.timestamps + [t.timestamp for t in ticks]
        closes = np.concatenate([self.closes, [t.close for t in ticks]])
        return PriceSeries(self.symbol, ts, closes)

    @classmethod
    def from_ticks(cls, ticks, symbol=None):
        ticks = list(ticks)
        if not ticks:
            raise LengthError("cannot build a PriceSeries from zero ticks")
        sym = symbol if symbol is not None else ticks[0].symbol
        return cls(sym, [t.timestamp for t in ticks], [t.close for t in ticks])
