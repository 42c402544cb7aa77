"""Tick acquisition and persistence.

Covers the four transport concerns the engine needs: reading historical
CSV files, replaying them as a timed tick stream, polling a generic HTTP
quote endpoint, and the append-only forecast log whose lines are
bit-exact round-trips of :class:`ForecastRecord`.
"""

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import (
    DomainError,
    LengthError,
    OrderingError,
    ProtocolError,
    SchemaError,
)
from .records import ForecastRecord
from .series import PriceSeries, Tick, format_timestamp, parse_timestamp

logger = logging.getLogger(__name__)

CSV_HEADER = ("timestamp", "symbol", "close")

LOG_KEYS = ("ts", "model", "forecast", "actual", "squared_error",
            "retrained", "train_mse", "window_start")


def read_series_csv(path):
    """Load a `timestamp,symbol,close` CSV as a sorted PriceSeries.

    Rows may arrive in any order; the series is sorted on load.
    Duplicate timestamps, unparseable fields, and non-positive prices
    are rejected with the offending line number.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("file is empty", line=1) from None
        if [h.strip() for h in header] != list(CSV_HEADER):
            raise SchemaError(
                f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}",
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"expected 3 fields, got {len(row)}",
                                  line=lineno)
            ts_text, symbol, close_text = (c.strip() for c in row)
            try:
                ts = parse_timestamp(ts_text)
            except (ValueError, DomainError) as exc:
                raise SchemaError(f"bad timestamp {ts_text!r}: {exc}",
                                  line=lineno) from None
            try:
                close = float(close_text)
            except ValueError:
                raise SchemaError(f"bad close {close_text!r}",
                                  line=lineno) from None
            if not math.isfinite(close) or close <= 0:
                raise DomainError(
                    f"line {lineno}: close must be finite and > 0, got {close_text}"
                )
            rows.append((ts, symbol, close, lineno))
    if not rows:
        raise LengthError(f"{path}: no data rows")
    symbols = {r[1] for r in rows}
    if len(symbols) > 1:
        raise SchemaError(f"multiple symbols in one file: {sorted(symbols)}",
                          line=2)
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] == prev[0]:
            raise OrderingError(
                f"duplicate timestamp {format_timestamp(cur[0])} "
                f"(lines {prev[3]} and {cur[3]})"
            )
    return PriceSeries(rows[0][1], [r[0] for r in rows], [r[2] for r in rows])


def write_series_csv(path, series):
    """Write a PriceSeries in the canonical CSV schema."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for tick in series:
            writer.writerow([
                format_timestamp(tick.timestamp),
                tick.symbol,
                format(tick.close, ".17g"),
            ])


def replay_stream(series, speedup=math.inf, interval=300.0, sleep=time.sleep):
    """Yield the series' ticks in order with delay interval/speedup.

    An infinite speedup emits ticks as fast as the consumer pulls them;
    tick content never depends on the pacing.
    """
    if not speedup > 0:
        raise DomainError(f"speedup must be > 0, got {speedup}")
    if not interval > 0:
        raise DomainError(f"interval must be > 0, got {interval}")
    delay = 0.0 if math.isinf(speedup) else interval / speedup
    for i, tick in enumerate(series):
        if i and delay:
            sleep(delay)
        yield tick


@dataclass
class StreamSource:
    """Configuration for one tick source.

    ``field_map`` gives dot-separated paths into the JSON quote payload
    for the ``timestamp`` and ``price`` fields (list indices appear as
    integer segments).  The session window, when set, bounds polling by
    UTC time of day.
    """

    kind: str = "http_poll"
    endpoint: Optional[str] = None
    path: Optional[str] = None
    symbol: str = "UNKNOWN"
    interval: float = 300.0
    speedup: float = math.inf
    field_map: dict = field(default_factory=lambda: {
        "timestamp": "timestamp", "price": "price",
    })
    session_open: Optional[str] = None
    session_close: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("csv_replay", "http_poll"):
            raise DomainError(f"unknown source kind {self.kind!r}")
        if not self.interval > 0:
            raise DomainError(f"interval must be > 0, got {self.interval}")
        if not self.speedup > 0:
            raise DomainError(f"speedup must be > 0, got {self.speedup}")


def extract_field(payload, path):
    """Follow a dot-separated path into a parsed JSON payload."""
    cur = payload
    for part in path.split("."):
        try:
            if isinstance(cur, list):
                cur = cur[int(part)]
            else:
                cur = cur[part]
        except (KeyError, IndexError, TypeError, ValueError):
            excerpt = json.dumps(payload)[:120]
            raise ProtocolError(
                f"field path {path!r} not found in payload {excerpt}"
            ) from None
    return cur


def _tick_from_payload(text, source):
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(
            f"unparseable response ({exc.msg}): {text[:120]!r}"
        ) from None
    raw_ts = extract_field(payload, source.field_map["timestamp"])
    raw_price = extract_field(payload, source.field_map["price"])
    if isinstance(raw_ts, (int, float)):
        from datetime import datetime, timezone

        ts = datetime.fromtimestamp(float(raw_ts), tz=timezone.utc)
    else:
        ts = parse_timestamp(str(raw_ts))
    try:
        close = float(raw_price)
    except (TypeError, ValueError):
        raise ProtocolError(f"price field is not numeric: {raw_price!r}") from None
    return Tick(ts, source.symbol, close)


def _default_fetch(source):
    import requests

    resp = requests.get(source.endpoint, timeout=30)
    if resp.status_code != 200:
        raise ProtocolError(f"HTTP {resp.status_code} from {source.endpoint}")
    return resp.text


def _parse_session_time(text):
    hh, _, mm = text.partition(":")
    from datetime import time as dtime

    return dtime(int(hh), int(mm))


def poll_quote(source, fetch=None, sleep=time.sleep, now=None, max_ticks=None,
               on_gap=None):
    """Poll a quote endpoint every interval, yielding deduplicated Ticks.

    Each slot retries failures with exponential backoff (1 s base, 60 s
    cap, five attempts); a slot that never succeeds is logged as a gap
    and polling resumes at the next slot.  Ticks repeating the previous
    timestamp are dropped.  When the source has a session window, slots
    outside it (UTC time of day) sleep through without fetching.
    """
    if source.endpoint is None and fetch is None:
        raise DomainError("http_poll source needs an endpoint")
    fetch = fetch or _default_fetch
    session = None
    if source.session_open and source.session_close:
        session = (_parse_session_time(source.session_open),
                   _parse_session_time(source.session_close))
        if now is None:
            from datetime import datetime, timezone

            def now():
                return datetime.now(timezone.utc)
    last_ts = None
    emitted = 0
    while max_ticks is None or emitted < max_ticks:
        if session is not None:
            tod = now().time()
            if not session[0] <= tod <= session[1]:
                sleep(source.interval)
                continue
        tick = None
        failure = None
        backoff = 1.0
        for attempt in range(5):
            try:
                tick = _tick_from_payload(fetch(source), source)
                break
            except (ProtocolError, DomainError, OSError) as exc:
                failure = exc
                logger.warning("poll attempt %d failed: %s", attempt + 1, exc)
                if attempt < 4:
                    sleep(min(backoff, 60.0))
                    backoff *= 2.0
        if tick is None:
            logger.warning("gap: no quote this slot (%s)", failure)
            if on_gap is not None:
                on_gap(failure)
        elif last_ts is not None and tick.timestamp <= last_ts:
            logger.debug("duplicate quote at %s dropped", tick.timestamp)
        else:
            last_ts = tick.timestamp
            emitted += 1
            yield tick
        if max_ticks is not None and emitted >= max_ticks:
            return
        sleep(source.interval)


def _format_float(value):
    if value is None:
        return "na"
    return format(float(value), ".17g")


def record_to_line(record):
    """Serialize one ForecastRecord as key=value text."""
    parts = [
        f"ts={format_timestamp(record.timestamp)}",
        f"model={record.model}",
        f"forecast={_format_float(record.forecast)}",
        f"actual={_format_float(record.actual)}",
        f"squared_error={_format_float(record.squared_error)}",
        f"retrained={'true' if record.retrained else 'false'}",
        f"train_mse={_format_float(record.train_mse)}",
        f"window_start={format_timestamp(record.window_start)}",
    ]
    return " ".join(parts)


def parse_log_line(line, lineno=1):
    fields = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep or key not in LOG_KEYS:
            raise SchemaError(f"unexpected token {token!r}", line=lineno)
        fields[key] = value
    missing = [k for k in LOG_KEYS if k not in fields]
    if missing:
        raise SchemaError(f"missing keys {missing}", line=lineno)

    def opt_float(text):
        return None if text == "na" else float(text)

    return ForecastRecord(
        timestamp=parse_timestamp(fields["ts"]),
        model=fields["model"],
        forecast=float(fields["forecast"]),
        actual=opt_float(fields["actual"]),
        squared_error=opt_float(fields["squared_error"]),
        retrained=fields["retrained"] == "true",
        train_mse=float(fields["train_mse"]),
        window_start=parse_timestamp(fields["window_start"]),
    )


def append_forecast_log(path, records):
    """Append records to the log, one line each, flushing once written."""
    records = list(records)
    if not records:
        return 0
    with open(path, "a") as fh:
        for record in records:
            fh.write(record_to_line(record) + "\n")
        fh.flush()
    return len(records)


def read_forecast_log(path):
    """Parse a forecast log back into records."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                records.append(parse_log_line(line, lineno))
    return records


def last_logged_timestamp(path):
    """Timestamp of the final record in a log, or None when empty."""
    last = None
    try:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    last = line
    except FileNotFoundError:
        return None
    if last is None:
        return None
    return parse_log_line(last.strip()).timestamp
