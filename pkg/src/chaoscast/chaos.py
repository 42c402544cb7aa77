"""Phase-space reconstruction tools: delay embedding, lag and dimension
selection, and largest-Lyapunov-exponent estimation."""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegeneracyError, LengthError
from .validation import as_series, check_not_constant


@dataclass(frozen=True)
class ChaosParams:
    """Reconstruction parameters for one calibration window."""

    lag: int
    embedding_dim: int
    lyapunov: float
    cao_saturated: bool = True

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("lag must be >= 1")
        if self.embedding_dim < 2:
            raise ValueError("embedding_dim must be >= 2")

    @property
    def chaotic(self):
        """Positive average divergence rate signals chaos."""
        return self.lyapunov >= 0


@dataclass(frozen=True)
class CaoProfile:
    """E1/E2 statistics for embedding dimensions d = 1 .. len(e1)."""

    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "e1", np.asarray(self.e1, dtype=float))
        object.__setattr__(self, "e2", np.asarray(self.e2, dtype=float))
        if self.e1.shape != self.e2.shape:
            raise ValueError("e1 and e2 must have equal length")
        if np.any(~np.isfinite(self.e1)) or np.any(self.e1 < 0):
            raise ValueError("e1 entries must be finite and >= 0")
        if np.any(~np.isfinite(self.e2)) or np.any(self.e2 < 0):
            raise ValueError("e2 entries must be finite and >= 0")

    @property
    def dims(self):
        return np.arange(1, len(self.e1) + 1)


@dataclass(frozen=True)
class DesignMatrix:
    """Supervised form of a delay-embedded series.

    X holds m-1 delayed coordinates per row, y the next value in the
    series; rows are in time order.
    """

    X: np.ndarray
    y: np.ndarray
    lag: int
    embedding_dim: int
    stride: int = 1

    def __post_init__(self):
        if self.X.shape[1] != self.embedding_dim - 1:
            raise ValueError("X must have embedding_dim - 1 columns")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")

    def __len__(self):
        return self.X.shape[0]

    @property
    def feature_count(self):
        return self.embedding_dim - 1


def _values(series):
    """Accept a PriceSeries or any 1-d sequence."""
    values = getattr(series, "values", series)
    return as_series(values)


def _delay_matrix(x, dim, lag):
    n = len(x) - (dim - 1) * lag
    return np.column_stack([x[k * lag:k * lag + n] for k in range(dim)])


def _nearest_neighbors(Y, metric="euclidean", exclude=0, chunk=512):
    """Index and distance of each row's nearest neighbor.

    ``exclude`` is a temporal radius: candidates j with |i - j| <= exclude
    are skipped (0 still excludes self).  Rows with no candidate get
    distance +inf.
    """
    n = Y.shape[0]
    nn_idx = np.zeros(n, dtype=int)
    nn_dist = np.full(n, np.inf)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = Y[start:stop, None, :] - Y[None, :, :]
        if metric == "chebyshev":
            dist = np.max(np.abs(diff), axis=2)
        else:
            dist = np.sqrt(np.sum(diff * diff, axis=2))
        for r in range(stop - start):
            i = start + r
            lo = max(0, i - exclude)
            hi = min(n, i + exclude + 1)
            dist[r, lo:hi] = np.inf
        nn_idx[start:stop] = np.argmin(dist, axis=1)
        nn_dist[start:stop] = dist[np.arange(stop - start), nn_idx[start:stop]]
    return nn_idx, nn_dist


def mean_period(x):
    """Dominant period of the series, from the periodogram argmax.

    Returns a whole number of samples, at least 1.
    """
    x = _values(x)
    check_not_constant(x)
    power = np.abs(np.fft.rfft(x - x.mean())) ** 2
    power[0] = 0.0
    k = int(np.argmax(power))
    if k == 0:
        return 1
    return max(1, int(round(len(x) / k)))


def estimate_lyapunov(series, lag, embedding_dim, max_steps=30):
    """Largest Lyapunov exponent via average nearest-neighbor divergence.

    Embeds the series, pairs each point with its nearest neighbor outside
    one mean period, and tracks the mean log separation over
    ``max_steps`` ticks.  The exponent is the least-squares slope of that
    curve over its initial half, in units of 1/tick.

    A non-negative result indicates sensitive dependence on initial
    conditions (chaos).
    """
    x = _values(series)
    if lag < 1 or embedding_dim < 2:
        raise ValueError("need lag >= 1 and embedding_dim >= 2")
    if max_steps < 2:
        raise ValueError("max_steps must be >= 2")
    needed = (embedding_dim - 1) * lag + max_steps + 2
    if len(x) < needed:
        raise LengthError(f"series has {len(x)} points, need at least {needed}")
    check_not_constant(x)

    Y = _delay_matrix(x, embedding_dim, lag)
    usable = Y.shape[0] - max_steps
    if usable < 2:
        raise LengthError("too few reconstructed points for the requested max_steps")

    # Neighbors closer in time than one mean period track the same orbit
    # segment and would fake convergence; cap the exclusion so that short
    # windows keep enough candidate pairs.
    theiler = min(mean_period(x), max(1, usable // 4))
    nn_idx, nn_dist = _nearest_neighbors(Y[:usable], exclude=theiler)
    valid = np.isfinite(nn_dist) & (nn_dist > 0)
    if not np.any(valid):
        raise DegeneracyError("no separated neighbor pairs; divergence undefined")
    ref = np.flatnonzero(valid)
    nbr = nn_idx[ref]

    curve = np.full(max_steps + 1, np.nan)
    for k in range(max_steps + 1):
        gap = Y[ref + k] - Y[nbr + k]
        d = np.sqrt(np.sum(gap * gap, axis=1))
        d = d[d > 0]
        if d.size:
            curve[k] = np.mean(np.log(d))

    fit_hi = max(1, max_steps // 2)
    ks = np.arange(fit_hi + 1)
    ok = np.isfinite(curve[: fit_hi + 1])
    if ok.sum() < 2:
        raise DegeneracyError("divergence curve collapsed; cannot fit a slope")
    slope = np.polyfit(ks[ok], curve[: fit_hi + 1][ok], 1)[0]
    return float(slope)


def pacf(series, max_lag):
    """Partial autocorrelations for lags 1..max_lag (Durbin-Levinson).

    Uses the biased sample autocorrelation, so the returned values are
    bounded by 1 in magnitude up to rounding; the lag-1 value equals the
    lag-1 autocorrelation exactly.
    """
    x = _values(series)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if max_lag >= len(x) / 2:
        raise LengthError(f"max_lag {max_lag} too large for series of length {len(x)}")
    check_not_constant(x)

    d = x - x.mean()
    denom = np.dot(d, d)
    r = np.empty(max_lag + 1)
    r[0] = 1.0
    for k in range(1, max_lag + 1):
        r[k] = np.dot(d[:-k], d[k:]) / denom

    phi = np.zeros((max_lag + 1, max_lag + 1))
    out = np.empty(max_lag)
    phi[1, 1] = r[1]
    out[0] = r[1]
    for k in range(2, max_lag + 1):
        prev = phi[k - 1, 1:k]
        num = r[k] - np.dot(prev, r[k - 1:0:-1])
        den = 1.0 - np.dot(prev, r[1:k])
        if den <= 0:
            raise DegeneracyError(
                f"prediction error vanished at lag {k}; series is perfectly predictable"
            )
        phi[k, k] = num / den
        phi[k, 1:k] = prev - phi[k, k] * prev[::-1]
        out[k - 1] = phi[k, k]
    return out


def select_lag(pacf_values, n):
    """Delay choice from a PACF: the last lag of the initial run of
    significant values at the 1.96/sqrt(n) band, floored at 1."""
    pacf_values = np.asarray(pacf_values, dtype=float)
    if pacf_values.size == 0:
        raise LengthError("pacf_values is empty")
    threshold = 1.96 / np.sqrt(n)
    lag = 0
    for value in pacf_values:
        if abs(value) > threshold:
            lag += 1
        else:
            break
    return max(lag, 1)


def cao_profile(series, lag, max_dim):
    """E1/E2 embedding-dimension statistics.

    For each trial dimension d the statistic compares nearest-neighbor
    distances (maximum norm) before and after appending one more delayed
    coordinate:

        a(i, d) = |y_i(d+1) - y_n(d+1)|_inf / |y_i(d) - y_n(d)|_inf

    with n the nearest neighbor of y_i(d).  E(d) is the mean of a(i, d),
    E1(d) = E(d+1)/E(d); E*(d) is the mean absolute difference of the
    appended coordinate alone, E2(d) = E*(d+1)/E*(d).  E1 saturating
    near 1 at d signals that dimension d+1 suffices; E2 staying near 1
    for every d is the signature of a stochastic series.

    Zero-distance neighbor pairs are excluded from the means.
    """
    x = _values(series)
    if max_dim < 2:
        raise ValueError("max_dim must be >= 2")
    if lag < 1:
        raise ValueError("lag must be >= 1")
    needed = max_dim * lag + 2
    if len(x) < needed:
        raise LengthError(f"series has {len(x)} points, need at least {needed}")
    check_not_constant(x)

    N = len(x)
    E = np.empty(max_dim)
    E_star = np.empty(max_dim)
    for d in range(1, max_dim + 1):
        n_vec = N - d * lag
        Yd = _delay_matrix(x, d, lag)[:n_vec]
        Yd1 = _delay_matrix(x, d + 1, lag)
        nn_idx, nn_dist = _nearest_neighbors(Yd, metric="chebyshev")
        keep = np.isfinite(nn_dist) & (nn_dist > 0)
        if not np.any(keep):
            raise DegeneracyError(f"all neighbor pairs coincide at dimension {d}")
        i = np.flatnonzero(keep)
        j = nn_idx[i]
        grown = np.max(np.abs(Yd1[i] - Yd1[j]), axis=1)
        E[d - 1] = np.mean(grown / nn_dist[i])
        E_star[d - 1] = np.mean(np.abs(x[i + d * lag] - x[j + d * lag]))

    if np.any(E[:-1] == 0) or np.any(E_star[:-1] == 0):
        raise DegeneracyError("mean neighbor growth vanished; profile undefined")
    return CaoProfile(e1=E[1:] / E[:-1], e2=E_star[1:] / E_star[:-1])


def select_embedding_dim(profile, saturation_tol=0.05):
    """Smallest dimension at which E1 has flattened out near 1.

    Returns ``(dim, saturated)``; when E1 never settles within
    ``saturation_tol`` the maximum probed dimension is returned with
    ``saturated=False``.
    """
    if not 0 < saturation_tol < 1:
        raise ValueError("saturation_tol must be in (0, 1)")
    e1 = profile.e1
    if e1.size == 0:
        raise LengthError("profile is empty")
    max_dim = len(e1) + 1
    for d in range(1, len(e1)):
        if abs(e1[d] - e1[d - 1]) < saturation_tol and e1[d - 1] >= 1 - saturation_tol:
            return d + 1, True
    return max_dim, False


def takens_embed(series, lag, embedding_dim, stride=1):
    """Delay-embed a series into supervised rows.

    Row i (stepping by ``stride``) has features
    (x_i, x_{i+lag}, ..., x_{i+(m-2)lag}) and target x_{i+(m-1)lag}.
    With stride 1 this yields N - (m-1)*lag overlapping rows; stride
    m*lag yields disjoint rows.
    """
    x = _values(series)
    m = embedding_dim
    if m < 2 or lag < 1 or stride < 1:
        raise ValueError("need embedding_dim >= 2, lag >= 1, stride >= 1")
    span = (m - 1) * lag
    if len(x) < span + 1:
        raise LengthError(f"series has {len(x)} points, need at least {span + 1}")
    starts = np.arange(0, len(x) - span, stride)
    X = np.column_stack([x[starts + k * lag] for k in range(m - 1)])
    y = x[starts + span]
    return DesignMatrix(X=X, y=y, lag=lag, embedding_dim=m, stride=stride)


def forecast_features(x, lag, embedding_dim):
    """The delayed-coordinate vector used to forecast the value after x's
    last point: (x_{t-(m-2)lag}, ..., x_t) with t the final index."""
    x = _values(x)
    m = embedding_dim
    span = (m - 2) * lag
    if len(x) < span + 1:
        raise LengthError(f"need {span + 1} trailing points, have {len(x)}")
    t = len(x) - 1
    return x[[t - (m - 2 - k) * lag for k in range(m - 1)]]


class TakensEmbedding(BaseEstimator, TransformerMixin):
    """Transformer wrapping :func:`takens_embed`.

    ``transform`` accepts a 1-d series and returns the embedded matrix
    with the forecast target as its last column, so it can slot into
    pipelines that split features/target downstream.
    """

    def __init__(self, lag=1, embedding_dim=2, stride=1):
        self.lag = lag
        self.embedding_dim = embedding_dim
        self.stride = stride

    def fit(self, X, y=None):
        as_series(X, min_length=(self.embedding_dim - 1) * self.lag + 1)
        return self

    def transform(self, X):
        mat = takens_embed(X, self.lag, self.embedding_dim, self.stride)
        return np.column_stack([mat.X, mat.y])
