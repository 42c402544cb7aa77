"""Command-line front end: analyze, replay, live, evaluate, report.

Configuration precedence is flags over config file over defaults; the
config file is a JSON object whose keys mirror the flag names, and
unknown keys are rejected outright.  Exit codes: 0 success, 1 validation
error (bad flags, unreadable inputs, bad config), 2 runtime failure.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .engine import EngineConfig, calibrate_day, run_live, run_replay
from .errors import ChaoscastError
from .ingest import (
    StreamSource,
    poll_quote,
    read_forecast_log,
    read_series_csv,
)
from .metrics import build_report, render_report
from .models import MODEL_ORDER
from .series import PriceSeries


@dataclass
class RunConfig:
    """Every knob a run can set, from flags or the config file."""

    input: Optional[str] = None
    endpoint: Optional[str] = None
    out: Optional[str] = None
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
    speedup: float = math.inf
    retrain_grid: str = "every"
    resume: bool = False
    symbol: str = "UNKNOWN"
    field_map: dict = field(default_factory=lambda: {
        "timestamp": "timestamp", "price": "price",
    })
    session_open: Optional[str] = None
    session_close: Optional[str] = None
    max_ticks: Optional[int] = None

    def engine_config(self):
        return EngineConfig(
            window=self.window,
            interval=self.interval,
            models=self.models,
            tolerance=self.tolerance,
            mode=self.mode,
            max_lag=self.max_lag,
            max_dim=self.max_dim,
            lyap_steps=self.lyap_steps,
            saturation_tol=self.saturation_tol,
            stride=self.stride,
            split_fraction=self.split_fraction,
            seed=self.seed,
            retrain_grid=self.retrain_grid,
        )


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


class UsageError(ValueError):
    """Validation failure that should exit with code 1."""


def parse_duration(text):
    """Parse a duration like '300', '300s', '5m', or '1h' into seconds."""
    text = str(text).strip().lower()
    factor = 1.0
    if text.endswith(("s", "m", "h")):
        factor = {"s": 1.0, "m": 60.0, "h": 3600.0}[text[-1]]
        text = text[:-1]
    try:
        seconds = float(text) * factor
    except ValueError:
        raise UsageError(f"cannot parse duration {text!r}") from None
    if not seconds > 0:
        raise UsageError(f"duration must be > 0, got {seconds}")
    return seconds


def parse_models(text):
    models = tuple(m.strip() for m in str(text).split(",") if m.strip())
    unknown = [m for m in models if m not in MODEL_ORDER]
    if unknown:
        raise UsageError(
            f"unknown model families {unknown}; choose from {list(MODEL_ORDER)}"
        )
    if not models:
        raise UsageError("at least one model family is required")
    return models


def parse_field_map(text):
    mapping = {}
    for part in str(text).split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"bad field mapping segment {part!r}")
        mapping[key.strip()] = value.strip()
    for required in ("timestamp", "price"):
        if required not in mapping:
            raise UsageError(f"field mapping lacks {required!r}")
    return mapping


def parse_speedup(text):
    if str(text).strip().lower() in ("inf", "infinite", "max"):
        return math.inf
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"cannot parse speedup {text!r}") from None
    if not value > 0:
        raise UsageError(f"speedup must be > 0, got {value}")
    return value


_FLAG_PARSERS = {
    "interval": parse_duration,
    "models": parse_models,
    "field_map": parse_field_map,
    "speedup": parse_speedup,
}


def load_config(args):
    """Merge defaults, the config file, and explicit flags into RunConfig."""
    values = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - _CONFIG_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys {unknown}")
        values.update(data)
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    for key, parser in _FLAG_PARSERS.items():
        if key in values:
            values[key] = parser(values[key])
    if "models" in values:
        values["models"] = tuple(values["models"])
    try:
        config = RunConfig(**values)
        config.engine_config()
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None
    return config


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chaoscast",
        description="Chaos-calibrated online nowcasting of price series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="JSON config file mirroring the flags")

    p = sub.add_parser("analyze", help="estimate chaos parameters of a series")
    p.add_argument("--input", required=True)
    p.add_argument("--max-lag", dest="max_lag", type=int)
    p.add_argument("--max-dim", dest="max_dim", type=int)
    add_config(p)

    p = sub.add_parser("replay", help="replay a CSV file through the engine")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int)
    p.add_argument("--interval")
    p.add_argument("--models")
    p.add_argument("--seed", type=int)
    p.add_argument("--speedup")
    add_config(p)

    p = sub.add_parser("live", help="poll a quote endpoint and nowcast")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--map", dest="field_map",
                   help="field mapping, e.g. timestamp=ts,price=quote.last")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int)
    p.add_argument("--interval")
    p.add_argument("--models")
    p.add_argument("--seed", type=int)
    add_config(p)

    p = sub.add_parser("evaluate", help="score a forecast log")
    p.add_argument("--log", required=True)
    p.add_argument("--loss", choices=("squared", "ape"), default="squared")
    p.add_argument("--report", required=True,
                   help="where to write the report JSON")
    add_config(p)

    p = sub.add_parser("report", help="render a report file")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=("table", "structured"),
                   default="table")
    p.add_argument("--group", choices=("day", "combined"), default="combined")
    add_config(p)

    return parser


def _cmd_analyze(args, config):
    series = _load_series(config.input)
    window = len(series)
    engine_cfg = EngineConfig(
        window=window,
        models=config.models,
        max_lag=config.max_lag,
        max_dim=config.max_dim,
        lyap_steps=config.lyap_steps,
        saturation_tol=config.saturation_tol,
        seed=config.seed,
    )
    params, profile = calibrate_day(series, engine_cfg, with_profile=True)
    print(json.dumps({
        "symbol": series.symbol,
        "n": len(series),
        "lag": params.lag,
        "embedding_dim": params.embedding_dim,
        "lyapunov": params.lyapunov,
        "chaotic": params.chaotic,
        "cao_saturated": params.cao_saturated,
        "e1": [float(v) for v in profile.e1],
        "e2": [float(v) for v in profile.e2],
    }, indent=2))
    return 0


def _print_run_summary(result):
    for session in result.sessions:
        retrains = sum(session.retrain_counts.values())
        print(
            f"session {session.date}: {session.n_ticks} ticks, "
            f"lag={session.chaos.lag} dim={session.chaos.embedding_dim} "
            f"lyapunov={session.chaos.lyapunov:.6f} "
            f"retrains={retrains} gaps={session.gaps}"
        )
    print(f"total records: {result.n_records}")


def _cmd_replay(args, config):
    if config.out is None:
        raise UsageError("replay needs --out")
    series = _load_series(config.input)
    if not config.resume and os.path.exists(config.out):
        os.remove(config.out)
    result = run_replay(series, config.engine_config(),
                        log_path=config.out, resume=config.resume)
    _print_run_summary(result)
    return 0


def _cmd_live(args, config):
    if config.endpoint is None:
        raise UsageError("live needs --endpoint")
    if config.out is None:
        raise UsageError("live needs --out")
    source = StreamSource(
        kind="http_poll",
        endpoint=config.endpoint,
        symbol=config.symbol,
        interval=config.interval,
        field_map=config.field_map,
        session_open=config.session_open,
        session_close=config.session_close,
    )
    ticks = poll_quote(source, max_ticks=config.max_ticks)
    try:
        result = run_live(ticks, config.engine_config(), log_path=config.out)
    except KeyboardInterrupt:
        print("interrupted; log flushed", file=sys.stderr)
        return 0
    _print_run_summary(result)
    return 0


def _cmd_evaluate(args, config):
    if not os.path.exists(args.log):
        raise UsageError(f"log file not found: {args.log}")
    try:
        records = read_forecast_log(args.log)
    except ChaoscastError as exc:
        raise UsageError(f"{args.log}: {exc}") from None
    report = build_report(records, loss=args.loss)
    with open(args.report, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(render_report(report, group="combined"))
    print(f"report written to {args.report}")
    return 0


def _structured_cells(report, group):
    cells = []
    for metric, table in report["tables"].items():
        if group == "combined":
            for model, value in table["combined"].items():
                cells.append({"period": "combined", "model": model,
                              "metric": metric, "value": value})
        else:
            for day in report["days"]:
                for model, value in table["per_day"][day].items():
                    cells.append({"period": day, "model": model,
                                  "metric": metric, "value": value})
    return cells


def _cmd_report(args, config):
    if not os.path.exists(args.report):
        raise UsageError(f"report file not found: {args.report}")
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"report file is not valid JSON: {exc}") from None
    if args.format == "table":
        print(render_report(report, group=args.group), end="")
    else:
        print(json.dumps({
            "cells": _structured_cells(report, args.group),
            "dm": report["dm"],
            "boxes": report["boxes"],
        }, indent=2, sort_keys=True))
    return 0


def _load_series(path):
    if path is None:
        raise UsageError("an --input path is required")
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    try:
        return read_series_csv(path)
    except ChaoscastError as exc:
        raise UsageError(f"{path}: {exc}") from None


_COMMANDS = {
    "analyze": _cmd_analyze,
    "replay": _cmd_replay,
    "live": _cmd_live,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = load_config(args)
        command = _COMMANDS[args.command]
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return command(args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChaoscastError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
