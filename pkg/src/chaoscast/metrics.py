"""Forecast-quality metrics and the comparison report.

The three headline metrics are symmetric MAPE (percentage, bounded by
200), directional symmetry (percentage of strictly correctly signed
moves), and Theil's U against the naive random walk.  Forecast sets are
compared pairwise with the Diebold-Mariano test on pointwise loss
differentials.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneracyError, DomainError, LengthError
from .models.search import MODEL_ORDER
from .validation import as_series

ALPHA = 0.05


def _eval_pair(actual, forecast, min_length=1):
    actual = as_series(actual, min_length=min_length)
    forecast = as_series(forecast, min_length=min_length)
    if actual.shape[0] != forecast.shape[0]:
        raise LengthError(
            f"actual and forecast lengths differ: "
            f"{actual.shape[0]} vs {forecast.shape[0]}"
        )
    return actual, forecast


def smape(actual, forecast):
    """Symmetric mean absolute percentage error, in [0, 200].

    A term with actual == forecast == 0 contributes zero rather than 0/0.
    """
    actual, forecast = _eval_pair(actual, forecast)
    num = np.abs(forecast - actual)
    den = (np.abs(actual) + np.abs(forecast)) / 2.0
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(100.0 * terms.mean())


def directional_symmetry(actual, forecast):
    """Percentage of steps whose actual and forecast moves share a sign.

    The comparison is strict: a flat move on either side scores zero, so
    a constant forecast earns 0, not 50.
    """
    actual, forecast = _eval_pair(actual, forecast, min_length=2)
    products = np.diff(actual) * np.diff(forecast)
    return float(100.0 * np.mean(products > 0))


def theils_u(actual, forecast, scaled_numerator=True):
    """Theil's U against the no-change forecast.

    Both sums run over one-step-ahead relative changes; the naive
    forecast therefore scores exactly 1 and smaller is better.  With
    ``scaled_numerator=False`` the numerator keeps raw errors instead of
    dividing by the previous actual, reproducing a common print variant;
    that form is no longer scale-free.
    """
    actual, forecast = _eval_pair(actual, forecast, min_length=2)
    base = actual[:-1]
    if np.any(base == 0):
        raise DomainError("Theil's U is undefined when an actual value is 0")
    err = forecast[1:] - actual[1:]
    if scaled_numerator:
        num = np.sum((err / base) ** 2)
    else:
        num = np.sum(err ** 2)
    den = np.sum(((actual[1:] - base) / base) ** 2)
    if den == 0:
        raise DegeneracyError(
            "Theil's U is undefined for a constant actual series"
        )
    return float(math.sqrt(num) / math.sqrt(den))


def pointwise_losses(actual, forecast, loss="squared"):
    """Per-step loss series used by the Diebold-Mariano test."""
    actual, forecast = _eval_pair(actual, forecast)
    if loss == "squared":
        return (actual - forecast) ** 2
    if loss == "ape":
        if np.any(actual == 0):
            raise DomainError(
                "absolute percentage error is undefined at actual == 0"
            )
        return np.abs(actual - forecast) / np.abs(actual)
    raise ValueError(f"unknown loss {loss!r}")


@dataclass(frozen=True)
class DMResult:
    statistic: float
    p_value: float
    n: int
    horizon: int
    harvey_correction: bool

    @property
    def significant(self):
        return self.p_value < ALPHA

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "horizon": self.horizon,
            "harvey_correction": self.harvey_correction,
            "significant": self.significant,
        }


def _autocovariance(d, lag):
    dbar = d.mean()
    n = d.shape[0]
    return float(np.sum((d[lag:] - dbar) * (d[:n - lag] - dbar)) / n)


def dm_test(loss_1, loss_2, horizon=1, harvey_correction=False):
    """Diebold-Mariano equal-accuracy test on two pointwise loss series.

    A negative statistic favors the first series (smaller losses).  The
    long-run variance uses the rectangular kernel with horizon - 1 lags;
    p-values are two-sided against the standard normal, or against
    Student's t with n - 1 degrees of freedom under the small-sample
    correction.
    """
    loss_1 = as_series(loss_1, min_length=10)
    loss_2 = as_series(loss_2, min_length=10)
    if loss_1.shape[0] != loss_2.shape[0]:
        raise LengthError("loss series lengths differ")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = loss_1.shape[0]
    d = loss_1 - loss_2
    if np.all(d == d[0]) and d[0] == 0:
        raise DegeneracyError("loss differentials are identically zero")
    lrv = _autocovariance(d, 0)
    for k in range(1, horizon):
        lrv += 2.0 * _autocovariance(d, k)
    if lrv <= 0:
        raise DegeneracyError("long-run variance of loss differential is <= 0")
    stat = float(d.mean() / math.sqrt(lrv / n))
    if harvey_correction:
        from scipy import stats

        h = horizon
        factor = math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
        stat *= factor
        p = float(2.0 * stats.t.sf(abs(stat), df=n - 1))
    else:
        p = float(math.erfc(abs(stat) / math.sqrt(2.0)))
    return DMResult(statistic=stat, p_value=p, n=n, horizon=horizon,
                    harvey_correction=harvey_correction)


@dataclass(frozen=True)
class BoxSummary:
    median: float
    q1: float
    q3: float
    lower_whisker: float
    upper_whisker: float
    outliers: tuple
    n: int

    @property
    def iqr(self):
        return self.q3 - self.q1

    def to_dict(self):
        return {
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "iqr": self.iqr,
            "lower_whisker": self.lower_whisker,
            "upper_whisker": self.upper_whisker,
            "outliers": list(self.outliers),
            "n": self.n,
        }


def box_summary(values):
    """Five-number box summary with 1.5 IQR whiskers.

    Quartiles use linear interpolation; whiskers sit on the most extreme
    observations inside the fences, and everything outside is listed as
    an outlier.
    """
    values = as_series(values, min_length=1)
    q1, med, q3 = (float(q) for q in np.percentile(values, (25, 50, 75)))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    outliers = np.sort(values[(values < lo_fence) | (values > hi_fence)])
    return BoxSummary(
        median=med,
        q1=q1,
        q3=q3,
        lower_whisker=float(inside.min()),
        upper_whisker=float(inside.max()),
        outliers=tuple(float(v) for v in outliers),
        n=int(values.shape[0]),
    )


def _smape_terms(actual, forecast):
    num = np.abs(forecast - actual)
    den = (np.abs(actual) + np.abs(forecast)) / 2.0
    return 100.0 * np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _metric_cell(fn, actual, forecast):
    try:
        return fn(np.asarray(actual), np.asarray(forecast))
    except (DegeneracyError, DomainError, LengthError):
        return None


def build_report(records, loss="squared", dm_horizon=1,
                 harvey_correction=False):
    """Aggregate closed forecast records into a JSON-ready report.

    Per-day cells group records by UTC calendar date; the combined cell
    evaluates the full record stream in time order.  Pairwise DM tests
    run on the combined stream over timestamps both models predicted.
    Cells whose metric is undefined on the data (for example Theil's U
    on a constant day) hold null rather than a fabricated number.
    """
    closed = [r for r in records if r.actual is not None]
    if not closed:
        raise LengthError("no closed forecast records to evaluate")
    per_model = {}
    for rec in sorted(closed, key=lambda r: (r.timestamp, r.model)):
        per_model.setdefault(rec.model, []).append(rec)
    models = [m for m in MODEL_ORDER if m in per_model]
    models += sorted(m for m in per_model if m not in MODEL_ORDER)
    days = sorted({r.timestamp.date().isoformat() for r in closed})

    def split_by_day(recs):
        out = {}
        for r in recs:
            out.setdefault(r.timestamp.date().isoformat(), []).append(r)
        return out

    metric_fns = {
        "smape": smape,
        "directional_symmetry": directional_symmetry,
        "theils_u": theils_u,
    }
    tables = {name: {"per_day": {d: {} for d in days}, "combined": {}}
              for name in metric_fns}
    boxes = {"smape_terms": {d: {} for d in days}, "price": {}}
    for model in models:
        recs = per_model[model]
        actual = [r.actual for r in recs]
        forecast = [r.forecast for r in recs]
        for name, fn in metric_fns.items():
            tables[name]["combined"][model] = _metric_cell(fn, actual,
                                                           forecast)
        boxes["price"][model] = box_summary(forecast).to_dict()
        for day, day_recs in split_by_day(recs).items():
            a = [r.actual for r in day_recs]
            f = [r.forecast for r in day_recs]
            for name, fn in metric_fns.items():
                tables[name]["per_day"][day][model] = _metric_cell(fn, a, f)
            boxes["smape_terms"][day][model] = box_summary(
                _smape_terms(np.asarray(a), np.asarray(f))
            ).to_dict()

    first = models[0]
    boxes["price"]["actual"] = box_summary(
        [r.actual for r in per_model[first]]
    ).to_dict()

    by_ts = {
        m: {r.timestamp: r for r in per_model[m]} for m in models
    }
    dm_rows = []
    for i in range(1, len(models)):
        for j in range(i):
            m1, m2 = models[i], models[j]
            common = sorted(set(by_ts[m1]) & set(by_ts[m2]))
            row = {"model_1": m1, "model_2": m2, "n": len(common)}
            try:
                if len(common) < 10:
                    raise LengthError("fewer than 10 common records")
                a = np.array([by_ts[m1][t].actual for t in common])
                f1 = np.array([by_ts[m1][t].forecast for t in common])
                f2 = np.array([by_ts[m2][t].forecast for t in common])
                result = dm_test(
                    pointwise_losses(a, f1, loss),
                    pointwise_losses(a, f2, loss),
                    horizon=dm_horizon,
                    harvey_correction=harvey_correction,
                )
                row.update(result.to_dict())
                if result.significant:
                    row["better"] = m1 if result.statistic < 0 else m2
                else:
                    row["better"] = None
            except (DegeneracyError, DomainError, LengthError) as exc:
                row.update(statistic=None, p_value=None, significant=False,
                           better=None, note=str(exc))
            dm_rows.append(row)

    return {
        "loss": loss,
        "alpha": ALPHA,
        "models": models,
        "days": days,
        "n_records": len(closed),
        "tables": tables,
        "dm": dm_rows,
        "boxes": boxes,
    }


def _format_cell(value):
    if value is None:
        return "-"
    return f"{value:.4f}"


def _render_table(title, headers, rows):
    table = [headers] + rows
    widths = [max(len(r[c]) for r in table) for c in range(len(headers))]
    lines = [title]
    for i, row in enumerate(table):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


_METRIC_TITLES = (
    ("smape", "SMAPE (%)"),
    ("directional_symmetry", "Directional symmetry (%)"),
    ("theils_u", "Theil's U"),
)


def render_report(report, group="combined"):
    """Render the metric and DM tables of a report as plain text."""
    if group not in ("combined", "day"):
        raise ValueError(f"unknown group {group!r}")
    models = report["models"]
    parts = []
    for key, title in _METRIC_TITLES:
        table = report["tables"][key]
        if group == "combined":
            rows = [["combined"] + [_format_cell(table["combined"].get(m))
                                    for m in models]]
        else:
            rows = [
                [day] + [_format_cell(table["per_day"][day].get(m))
                         for m in models]
                for day in report["days"]
            ]
        parts.append(_render_table(title, ["period"] + list(models), rows))
    dm_rows = []
    for row in report["dm"]:
        dm_rows.append([
            f"{row['model_1']} vs {row['model_2']}",
            _format_cell(row["statistic"]),
            _format_cell(row["p_value"]),
            "yes" if row["significant"] else "no",
            row["better"] or "-",
        ])
    parts.append(_render_table(
        f"Diebold-Mariano ({report['loss']} loss, alpha={report['alpha']})",
        ["pair", "statistic", "p-value", "significant", "better"],
        dm_rows,
    ))
    return "\n\n".join(parts) + "\n"
