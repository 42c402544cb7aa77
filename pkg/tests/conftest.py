"""Shared synthetic-data builders for the test suite."""

from datetime import datetime, timedelta, timezone

import numpy as np

from chaoscast import MODEL_ORDER, ForecastRecord, PriceSeries

DAY0 = datetime(2025, 3, 3, 9, 30, tzinfo=timezone.utc)
BAR = timedelta(minutes=5)


def logistic_map(n, x0=0.376, r=4.0):
    """Iterate x <- r * x * (1 - x); fully chaotic at r = 4."""
    x = np.empty(n)
    x[0] = x0
    for i in range(1, n):
        x[i] = r * x[i - 1] * (1.0 - x[i - 1])
    return x


def logistic_prices(n, x0=0.4, scale=5.0, base=100.0):
    """Positive price-like levels driven by the logistic map."""
    return base + scale * (logistic_map(n, x0=x0) - 0.5)


def bar_times(n, start=DAY0, step=BAR):
    return [start + i * step for i in range(n)]


def make_series(values, start=DAY0, step=BAR, symbol="SYN"):
    return PriceSeries(symbol, bar_times(len(values), start, step), values)


def session_series(n_history, session_lengths, x0=0.4):
    """History plus consecutive 09:30 UTC sessions of 5-minute bars.

    The history bars run back-to-back right up to the first session
    open, so the only jumps in the stream are the overnight gaps
    between sessions.  Returns ``(history, ticks)``.
    """
    total = n_history + sum(session_lengths)
    prices = logistic_prices(total, x0=x0)
    history = make_series(prices[:n_history],
                          start=DAY0 - n_history * BAR)
    ticks = []
    pos = n_history
    for day, length in enumerate(session_lengths):
        day_open = DAY0 + timedelta(days=day)
        ticks.extend(make_series(prices[pos:pos + length], start=day_open))
        pos += length
    return history, ticks


def synthetic_records(days=1, per_day=30, models=MODEL_ORDER, seed=5150):
    """Closed forecast records with per-model noise around real levels."""
    rng = np.random.default_rng(seed)
    records = []
    for day in range(days):
        day_open = DAY0 + timedelta(days=day)
        prices = logistic_prices(per_day, x0=0.41 + 0.01 * day)
        for i in range(per_day):
            ts = day_open + i * BAR
            for k, model in enumerate(models):
                forecast = float(prices[i] + (k + 1) * 0.05 * rng.standard_normal())
                records.append(ForecastRecord(
                    timestamp=ts,
                    model=model,
                    forecast=forecast,
                    window_start=ts - 300 * BAR,
                    train_mse=float(0.01 * (k + 1)),
                    actual=float(prices[i]),
                    squared_error=float((prices[i] - forecast) ** 2),
                    retrained=bool(rng.random() < 0.1),
                ))
        records.sort(key=lambda r: (r.timestamp, r.model))
    return records
