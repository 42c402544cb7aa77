"""The online nowcasting loop.

Each trading session starts from a calibration pass (lag, embedding
dimension, Lyapunov exponent) over the trailing window, fits every
enabled model family by grid search, then processes ticks one at a time:
forecast from the buffer tail, close the forecast when the actual
arrives, slide the window, and retrain any family whose squared error
breaks the tolerance band around its training MSE.  Everything is
deterministic for a fixed seed, so a replayed session reproduces its
forecast log byte for byte.
"""

import logging
from collections import deque
from dataclasses import dataclass, field as dataclass_field
from datetime import datetime, timedelta, timezone
from typing import Optional

import numpy as np

from .chaos import (
    ChaosParams,
    cao_profile,
    estimate_lyapunov,
    forecast_features,
    pacf,
    select_embedding_dim,
    select_lag,
    takens_embed,
)
from .errors import DegeneracyError, LengthError, OrderingError, ProtocolError
from .ingest import append_forecast_log
from .models import MODEL_ORDER, default_grid, grid_search, make_model
from .records import ForecastRecord
from .series import PriceSeries, format_timestamp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrainPolicy:
    """The tolerance band that decides when a family refits.

    In ``exceed`` mode only errors above (1 + tolerance) * train_mse
    trigger; ``symmetric`` mode also retrains when the error is
    suspiciously small.
    """

    tolerance: float = 0.05
    mode: str = "exceed"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.mode not in ("exceed", "symmetric"):
            raise ValueError(f"unknown retrain mode {self.mode!r}")


def should_retrain(squared_error, train_mse, policy):
    """Apply the retrain rule to one closed forecast.

    A zero training MSE makes the band zero-width, so any nonzero error
    retrains.
    """
    if train_mse < 0:
        raise ValueError(f"train_mse must be >= 0, got {train_mse}")
    if train_mse == 0:
        return squared_error > 0
    if policy.mode == "exceed":
        return squared_error > (1.0 + policy.tolerance) * train_mse
    return abs(squared_error - train_mse) > policy.tolerance * train_mse


@dataclass
class EngineConfig:
    """Engine-level knobs; CLI and config files map onto these fields."""

    window: int = 300
    interval: float = 300.0
    models: tuple = MODEL_ORDER
    tolerance: float = 0.05
    mode: str = "exceed"
    max_lag: int = 40
    max_dim: int = 12
    lyap_steps: int = 30
    saturation_tol: float = 0.05
    stride: int = 1
    split_fraction: float = 0.2
    seed: int = 0
    retrain_grid: str = "every"

    def __post_init__(self):
        if self.window < 20:
            raise ValueError(f"window must be >= 20, got {self.window}")
        if not self.interval > 0:
            raise ValueError(f"interval must be > 0, got {self.interval}")
        self.models = tuple(self.models)
        unknown = [m for m in self.models if m not in MODEL_ORDER]
        if unknown:
            raise ValueError(f"unknown model families {unknown}")
        if not self.models:
            raise ValueError("at least one model family must be enabled")
        if self.max_lag < 1 or self.max_dim < 2:
            raise ValueError("need max_lag >= 1 and max_dim >= 2")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.retrain_grid not in ("every", "daily"):
            raise ValueError(f"unknown retrain_grid {self.retrain_grid!r}")
        self.policy = RetrainPolicy(self.tolerance, self.mode)


def family_seed(seed, family):
    """Deterministic per-family sub-seed derived from the run seed."""
    idx = MODEL_ORDER.index(family)
    ss = np.random.SeedSequence(seed, spawn_key=(idx,))
    return int(ss.generate_state(1)[0])


def calibrate_day(history, config, with_profile=False):
    """Estimate ChaosParams on the trailing window of the history.

    Lag comes from the PACF cutoff, the embedding dimension from Cao's
    profile, and the Lyapunov exponent from the divergence slope; each
    bound is clamped so the window always supports the later embedding
    and grid search.  Deterministic: the same history yields the same
    parameters.  With ``with_profile`` the Cao E1/E2 profile is returned
    alongside the parameters as plot data.
    """
    if len(history) < config.window:
        raise LengthError(
            f"calibration needs at least {config.window} points, "
            f"got {len(history)}"
        )
    tail = history.values[-config.window:]
    n = tail.shape[0]
    try:
        max_lag = min(config.max_lag, (n - 1) // 2 - 1)
        lag = select_lag(pacf(tail, max_lag), n)
        max_dim = min(config.max_dim, (n - 2) // lag, 1 + (n - 10) // lag)
        if max_dim < 2:
            raise LengthError(
                f"window {n} cannot support embedding at lag {lag}"
            )
        profile = cao_profile(tail, lag, max_dim)
        dim, saturated = select_embedding_dim(profile, config.saturation_tol)
        steps = min(config.lyap_steps, n - (dim - 1) * lag - 2)
        if steps < 2:
            raise LengthError(
                f"window {n} leaves no divergence horizon at "
                f"lag {lag}, dim {dim}"
            )
        lyap = estimate_lyapunov(tail, lag, dim, max_steps=steps)
    except DegeneracyError as exc:
        raise DegeneracyError(
            f"calibration failed for {history.symbol} "
            f"({format_timestamp(history.timestamps[0])} .. "
            f"{format_timestamp(history.timestamps[-1])}): {exc}"
        ) from exc
    params = ChaosParams(lag=lag, embedding_dim=dim, lyapunov=lyap,
                         cao_saturated=saturated)
    if with_profile:
        return params, profile
    return params


@dataclass
class WindowState:
    """Mutable per-session state: the sliding buffer and fitted models."""

    config: EngineConfig
    chaos: ChaosParams
    buffer: deque
    models: dict
    params: dict
    retrain_counts: dict
    pending: list = dataclass_field(default_factory=list)
    gaps: list = dataclass_field(default_factory=list)

    @property
    def window_start(self):
        return self.buffer[0].timestamp

    def buffer_values(self):
        return np.array([t.close for t in self.buffer])


def _fit_by_grid(family, X, y, config):
    return grid_search(
        family, X, y,
        grid=default_grid(family),
        split_fraction=config.split_fraction,
        seed=family_seed(config.seed, family),
    )


def prepare_state(history, config):
    """Calibrate on the history and grid-fit every enabled family."""
    chaos = calibrate_day(history, config)
    ticks = list(history)[-config.window:]
    buffer = deque(ticks, maxlen=config.window)
    values = np.array([t.close for t in buffer])
    mat = takens_embed(values, chaos.lag, chaos.embedding_dim,
                       stride=config.stride)
    models = {}
    params = {}
    for family in config.models:
        result = _fit_by_grid(family, mat.X, mat.y, config)
        models[family] = result.model
        params[family] = result.params
    return WindowState(
        config=config,
        chaos=chaos,
        buffer=buffer,
        models=models,
        params=params,
        retrain_counts={family: 0 for family in config.models},
    )


def forecast_step(state, target_timestamp=None):
    """Predict the next value with every family from the buffer tail.

    Returns the opened records; they stay pending on the state until
    :func:`ingest_actual` closes them with the realized tick.
    """
    if state.pending:
        raise ProtocolError(
            "previous forecasts are still open; ingest the actual first"
        )
    if len(state.buffer) < state.config.window:
        raise LengthError(
            f"buffer holds {len(state.buffer)} of {state.config.window} points"
        )
    if target_timestamp is None:
        target_timestamp = state.buffer[-1].timestamp + timedelta(
            seconds=state.config.interval
        )
    values = state.buffer_values()
    features = forecast_features(values, state.chaos.lag,
                                 state.chaos.embedding_dim)
    records = []
    for family in state.config.models:
        model = state.models[family]
        forecast = float(model.predict(features.reshape(1, -1))[0])
        records.append(ForecastRecord(
            timestamp=target_timestamp,
            model=family,
            forecast=forecast,
            window_start=state.window_start,
            train_mse=model.train_mse_,
        ))
    state.pending = records
    return records


def ingest_actual(state, tick, policy=None):
    """Close pending forecasts with the tick, slide, retrain as needed.

    The buffer always slides by one; only families whose squared error
    breaks the policy band refit, on the freshly embedded window.  A
    tick arriving more than one interval late is recorded as a gap (no
    interpolation).
    """
    policy = policy or state.config.policy
    last = state.buffer[-1].timestamp
    if tick.timestamp <= last:
        raise OrderingError(
            f"tick {format_timestamp(tick.timestamp)} is not after "
            f"buffer tail {format_timestamp(last)}"
        )
    gap_seconds = (tick.timestamp - last).total_seconds()
    if gap_seconds > state.config.interval:
        state.gaps.append((last, tick.timestamp))
        logger.warning("gap of %.0f s before %s", gap_seconds,
                       format_timestamp(tick.timestamp))
    closed = state.pending
    state.pending = []
    for record in closed:
        record.close(tick.timestamp, tick.close)
    state.buffer.append(tick)
    mat = None
    for record in closed:
        family = record.model
        if not should_retrain(record.squared_error, record.train_mse, policy):
            continue
        record.retrained = True
        state.retrain_counts[family] += 1
        if mat is None:
            mat = takens_embed(state.buffer_values(), state.chaos.lag,
                               state.chaos.embedding_dim,
                               stride=state.config.stride)
        if state.config.retrain_grid == "every":
            result = _fit_by_grid(family, mat.X, mat.y, state.config)
            state.models[family] = result.model
            state.params[family] = result.params
        else:
            model = make_model(family, state.params[family],
                               family_seed(state.config.seed, family))
            model.fit(mat.X, mat.y)
            state.models[family] = model
    return closed


def run_session(state, ticks, log_path=None, log_after=None,
                close_time=None, max_ticks=None):
    """Process one session's tick stream against a prepared state.

    Every tick yields one closed record per family, appended to the log
    as soon as it closes (so an interrupted session leaves a valid
    prefix).  ``log_after`` suppresses appends at or before a timestamp,
    which is how an idempotent resume replays history without
    duplicating lines.
    """
    records = []
    processed = 0
    for tick in ticks:
        if close_time is not None:
            if tick.timestamp.astimezone(timezone.utc).time() > close_time:
                break
        forecast_step(state, target_timestamp=tick.timestamp)
        closed = ingest_actual(state, tick)
        records.extend(closed)
        if log_path is not None:
            to_log = closed
            if log_after is not None:
                to_log = [r for r in closed if r.timestamp > log_after]
            append_forecast_log(log_path, to_log)
        processed += 1
        if max_ticks is not None and processed >= max_ticks:
            break
    return records


@dataclass(frozen=True)
class SessionSummary:
    date: str
    chaos: ChaosParams
    n_ticks: int
    retrain_counts: dict
    gaps: int


@dataclass(frozen=True)
class RunResult:
    records: list
    sessions: list

    @property
    def n_records(self):
        return len(self.records)


def run_stream(history, ticks, config, log_path=None, log_after=None):
    """Drive sessions over a tick stream with daily recalibration.

    ``history`` warms the buffer and calibrates the first session; each
    UTC date change triggers a fresh calibration and grid fit on the
    trailing window, per the daily recalibration policy.
    """
    state = prepare_state(history, config)
    sessions = []
    records = []
    day = None
    day_ticks = 0

    def finish_day():
        sessions.append(SessionSummary(
            date=day.isoformat(),
            chaos=state.chaos,
            n_ticks=day_ticks,
            retrain_counts=dict(state.retrain_counts),
            gaps=len(state.gaps),
        ))

    for tick in ticks:
        tick_day = tick.timestamp.astimezone(timezone.utc).date()
        if day is None:
            day = tick_day
        elif tick_day != day:
            finish_day()
            state = prepare_state(
                PriceSeries.from_ticks(state.buffer), config
            )
            day = tick_day
            day_ticks = 0
        forecast_step(state, target_timestamp=tick.timestamp)
        closed = ingest_actual(state, tick)
        records.extend(closed)
        if log_path is not None:
            to_log = closed
            if log_after is not None:
                to_log = [r for r in closed if r.timestamp > log_after]
            append_forecast_log(log_path, to_log)
        day_ticks += 1
    if day is not None:
        finish_day()
    return RunResult(records=records, sessions=sessions)


def run_replay(series, config, log_path=None, resume=False):
    """Replay a historical series: warm window first, then live loop.

    The first ``window`` points warm the buffer; every later point is
    processed as a tick.  With ``resume=True`` an existing log's last
    timestamp suppresses re-appending records already persisted, while
    the in-memory evolution stays identical to an uninterrupted run.
    """
    if len(series) <= config.window:
        raise LengthError(
            f"series has {len(series)} points; need more than "
            f"window={config.window} to forecast anything"
        )
    log_after = None
    if resume and log_path is not None:
        from .ingest import last_logged_timestamp

        log_after = last_logged_timestamp(log_path)
    history = series.slice(0, config.window)
    ticks = list(series)[config.window:]
    return run_stream(history, ticks, config, log_path=log_path,
                      log_after=log_after)


def run_live(tick_stream, config, log_path=None):
    """Run live sessions from a poller, warming the buffer from the stream."""
    warm = []
    stream = iter(tick_stream)
    for tick in stream:
        warm.append(tick)
        if len(warm) >= config.window:
            break
    if len(warm) < config.window:
        raise LengthError(
            f"stream ended during warm-up with {len(warm)} of "
            f"{config.window} ticks"
        )
    history = PriceSeries.from_ticks(warm)
    return run_stream(history, stream, config, log_path=log_path)
