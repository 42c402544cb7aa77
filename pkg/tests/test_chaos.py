"""Phase-space calibration: Takens embedding, PACF, Cao method, Lyapunov."""

import numpy as np
import pytest
from conftest import logistic_map

from chaoscast import (
    CaoProfile,
    ChaosParams,
    DegeneracyError,
    LengthError,
    TakensEmbedding,
    cao_profile,
    estimate_lyapunov,
    forecast_features,
    mean_period,
    pacf,
    select_embedding_dim,
    select_lag,
    takens_embed,
)

LN2 = float(np.log(2.0))


def sine_wave(n, step=0.1):
    return np.sin(step * np.arange(n))


class TestTakensEmbed:
    def test_small_alignment_fixture(self):
        mat = takens_embed(np.arange(1.0, 11.0), lag=2, embedding_dim=3)
        assert mat.X.shape == (6, 2)
        assert mat.y.shape == (6,)
        np.testing.assert_array_equal(mat.X[0], [1.0, 3.0])
        assert mat.y[0] == 5.0
        np.testing.assert_array_equal(mat.X[-1], [6.0, 8.0])
        assert mat.y[-1] == 10.0

    def test_row_count_law_randomized(self):
        rng = np.random.default_rng(2025)
        for _ in range(200):
            n = int(rng.integers(12, 400))
            m = int(rng.integers(2, 9))
            lag = int(rng.integers(1, 6))
            stride = int(rng.integers(1, 8))
            span = (m - 1) * lag
            if n - span < 1:
                continue
            x = rng.standard_normal(n)
            mat = takens_embed(x, lag, m, stride)
            expected = len(range(0, n - span, stride))
            assert mat.X.shape == (expected, m - 1)
            assert mat.y.shape == (expected,)
            i = int(rng.integers(0, expected))
            start = i * stride
            np.testing.assert_array_equal(mat.X[i], x[start:start + span:lag])
            assert mat.y[i] == x[start + span]

    def test_disjoint_stride_gives_60_rows(self):
        x = np.arange(300.0)
        assert takens_embed(x, 1, 5, stride=5).X.shape[0] == 60
        assert takens_embed(x, 1, 5, stride=1).X.shape[0] == 296

    def test_rejects_short_series(self):
        with pytest.raises(LengthError):
            takens_embed(np.arange(8.0), lag=4, embedding_dim=3)

    def test_rejects_bad_parameters(self):
        x = np.arange(50.0)
        with pytest.raises(ValueError):
            takens_embed(x, lag=0, embedding_dim=3)
        with pytest.raises(ValueError):
            takens_embed(x, lag=1, embedding_dim=1)
        with pytest.raises(ValueError):
            takens_embed(x, lag=1, embedding_dim=3, stride=0)


class TestForecastFeatures:
    def test_uses_trailing_values(self):
        x = np.arange(1.0, 301.0)
        np.testing.assert_array_equal(forecast_features(x, 1, 5),
                                      [297.0, 298.0, 299.0, 300.0])
        np.testing.assert_array_equal(forecast_features(x, 1, 2), [300.0])
        np.testing.assert_array_equal(forecast_features(x, 3, 3),
                                      [297.0, 300.0])

    def test_is_next_embedding_row(self):
        # The forecast input must equal the newest embedding row shifted
        # one step forward: drop its oldest coordinate, append its target.
        rng = np.random.default_rng(11)
        x = rng.standard_normal(120)
        for lag, m in [(1, 2), (1, 5), (3, 4), (7, 3)]:
            mat = takens_embed(x, lag, m)
            expected = np.append(mat.X[-1][1:], mat.y[-1])
            np.testing.assert_array_equal(forecast_features(x, lag, m),
                                          expected)

    def test_rejects_short_buffer(self):
        # m = 3 at lag 2 needs (m - 2) * lag + 1 = 3 trailing points.
        with pytest.raises(LengthError):
            forecast_features(np.arange(2.0), lag=2, embedding_dim=3)


class TestTakensTransformer:
    def test_transform_appends_target_column(self):
        x = np.arange(1.0, 11.0)
        out = TakensEmbedding(lag=2, embedding_dim=3).fit(x).transform(x)
        mat = takens_embed(x, 2, 3)
        np.testing.assert_array_equal(out[:, :-1], mat.X)
        np.testing.assert_array_equal(out[:, -1], mat.y)

    def test_sklearn_clone_round_trip(self):
        from sklearn.base import clone

        est = TakensEmbedding(lag=3, embedding_dim=4, stride=2)
        assert clone(est).get_params() == est.get_params()


class TestPacf:
    def test_hand_fixture(self):
        # Durbin-Levinson by hand on x = 1..8: biased autocorrelations
        # are r1 = 5/8 and r2 = 23/84, so phi(1) = r1 and
        # phi(2) = (r2 - r1^2) / (1 - r1^2) = -157/819 exactly.
        got = pacf(np.arange(1.0, 9.0), 2)
        assert got.shape == (2,)
        assert got[0] == pytest.approx(0.625, abs=1e-12)
        assert got[1] == pytest.approx(-157.0 / 819.0, abs=1e-12)

    def test_matches_statsmodels_durbin_levinson(self):
        sm = pytest.importorskip("statsmodels.api")
        rng = np.random.default_rng(7)
        x = rng.standard_normal(200).cumsum()
        theirs = sm.tsa.pacf(x, nlags=12, method="ldb")[1:]
        np.testing.assert_allclose(pacf(x, 12), theirs, atol=1e-10)

    def test_constant_series_degenerate(self):
        with pytest.raises(DegeneracyError):
            pacf(np.full(50, 3.0), 5)

    def test_max_lag_bounds(self):
        with pytest.raises(ValueError):
            pacf(np.arange(1.0, 9.0), 0)
        with pytest.raises(LengthError):
            pacf(np.arange(1.0, 9.0), 7)


class TestSelectLag:
    def test_initial_significant_run(self):
        # 1.96 / sqrt(400) = 0.098: the run of significant partials ends
        # after two entries.
        assert select_lag([0.9, 0.5, 0.01, 0.02], n=400) == 2

    def test_floor_of_one(self):
        assert select_lag([0.01, 0.9, 0.9], n=400) == 1

    def test_all_significant_uses_every_lag(self):
        assert select_lag([0.9, 0.8, 0.7], n=400) == 3

    def test_ar1_cuts_off_at_one(self):
        rng = np.random.default_rng(12345)
        n = 5000
        eps = rng.standard_normal(n)
        x = np.empty(n)
        x[0] = 0.0
        for i in range(1, n):
            x[i] = 0.8 * x[i - 1] + eps[i]
        partials = pacf(x, 20)
        assert abs(partials[0] - 0.8) < 0.02
        assert select_lag(partials, n) == 1


class TestCao:
    def test_matches_scalar_oracle(self):
        # Independent route: direct loop translation of the E/E* formulas
        # with explicit nearest-neighbour search in max norm.
        def cao_scalar(x, lag, max_dim):
            n = len(x)
            e_raw, estar_raw = [], []
            for d in range(1, max_dim + 1):
                n_vec = n - d * lag
                yd = np.array([[x[i + k * lag] for k in range(d)]
                               for i in range(n_vec)])
                yd1 = np.array([[x[i + k * lag] for k in range(d + 1)]
                                for i in range(n_vec)])
                ratios, comps = [], []
                for i in range(n_vec):
                    best, best_j = np.inf, -1
                    for j in range(n_vec):
                        if j == i:
                            continue
                        dist = max(abs(yd[i, k] - yd[j, k]) for k in range(d))
                        if dist < best:
                            best, best_j = dist, j
                    if best == 0:
                        continue
                    grown = max(abs(yd1[i, k] - yd1[best_j, k])
                                for k in range(d + 1))
                    ratios.append(grown / best)
                    comps.append(abs(x[i + d * lag] - x[best_j + d * lag]))
                e_raw.append(np.mean(ratios))
                estar_raw.append(np.mean(comps))
            e_raw, estar_raw = np.array(e_raw), np.array(estar_raw)
            return e_raw[1:] / e_raw[:-1], estar_raw[1:] / estar_raw[:-1]

        x = logistic_map(140)
        e1_oracle, e2_oracle = cao_scalar(x, lag=1, max_dim=4)
        prof = cao_profile(x, lag=1, max_dim=4)
        np.testing.assert_allclose(prof.e1, e1_oracle, rtol=0, atol=1e-12)
        np.testing.assert_allclose(prof.e2, e2_oracle, rtol=0, atol=1e-12)

    def test_sine_saturates_at_low_dimension(self):
        # 0.063 rad per sample keeps the period irrational relative to
        # the lag so neighbours are genuine, not phase-locked copies.
        s = np.sin(np.arange(2000) * 0.063)
        prof = cao_profile(s, lag=25, max_dim=8)
        dim, saturated = select_embedding_dim(prof)
        assert saturated
        assert dim == 3
        assert prof.e1[1:].min() > 0.95

    def test_logistic_saturates(self):
        prof = cao_profile(logistic_map(2000), lag=1, max_dim=8)
        dim, saturated = select_embedding_dim(prof)
        assert saturated
        assert dim == 3

    def test_noise_never_saturates_and_e2_is_flat(self):
        rng = np.random.default_rng(777)
        prof = cao_profile(rng.standard_normal(2000), lag=1, max_dim=10)
        dim, saturated = select_embedding_dim(prof)
        assert not saturated
        assert dim == 10
        assert np.max(np.abs(prof.e2 - 1.0)) < 0.05

    def test_selection_rule_fixture(self):
        prof = CaoProfile(e1=np.array([0.4, 0.97, 0.99, 1.0]),
                          e2=np.ones(4))
        assert select_embedding_dim(prof) == (3, True)

    def test_selection_requires_near_one_plateau(self):
        # A plateau far below 1 must not count as saturation.
        prof = CaoProfile(e1=np.array([0.50, 0.51, 0.52, 0.53]),
                          e2=np.ones(4))
        assert select_embedding_dim(prof) == (5, False)

    def test_bad_saturation_tol(self):
        prof = CaoProfile(e1=np.array([0.9, 1.0]), e2=np.ones(2))
        with pytest.raises(ValueError):
            select_embedding_dim(prof, saturation_tol=0.0)

    def test_constant_series_degenerate(self):
        with pytest.raises(DegeneracyError):
            cao_profile(np.full(100, 2.0), lag=1, max_dim=4)


class TestLyapunov:
    def test_logistic_map_matches_ln2(self):
        # Independent oracle: for the r=4 logistic map the exponent is
        # the trajectory average of ln|f'(x)| = ln|4 - 8x|, which equals
        # ln 2 in the ergodic limit.
        x = logistic_map(2000)
        analytic = float(np.mean(np.log(np.abs(4.0 - 8.0 * x))))
        assert abs(analytic - LN2) < 0.01
        lam = estimate_lyapunov(x, lag=1, embedding_dim=2, max_steps=16)
        assert abs(lam - analytic) < 0.1
        assert abs(lam - LN2) <= 0.1

    def test_sine_wave_nonpositive(self):
        # A quarter-period lag (16 samples at 0.1 rad) unfolds the orbit
        # so neighbouring trajectories stay parallel instead of diverging.
        s = sine_wave(2000)
        assert estimate_lyapunov(s, lag=16, embedding_dim=2,
                                 max_steps=30) <= 0.0

    def test_sine_period_estimate(self):
        assert 60 <= mean_period(sine_wave(2000)) <= 64

    def test_deterministic(self):
        x = logistic_map(1200)
        a = estimate_lyapunov(x, 1, 2, max_steps=12)
        b = estimate_lyapunov(x, 1, 2, max_steps=12)
        assert a == b

    def test_short_series_rejected(self):
        with pytest.raises(LengthError):
            estimate_lyapunov(np.arange(10.0), lag=2, embedding_dim=4,
                              max_steps=10)

    def test_constant_series_degenerate(self):
        with pytest.raises(DegeneracyError):
            estimate_lyapunov(np.full(200, 1.0), lag=1, embedding_dim=2)


class TestChaosParams:
    def test_chaotic_flag_follows_sign(self):
        assert ChaosParams(lag=1, embedding_dim=2, lyapunov=0.5).chaotic
        assert not ChaosParams(lag=1, embedding_dim=2, lyapunov=-0.1).chaotic

    def test_validation(self):
        with pytest.raises(ValueError):
            ChaosParams(lag=0, embedding_dim=2, lyapunov=0.0)
        with pytest.raises(ValueError):
            ChaosParams(lag=1, embedding_dim=1, lyapunov=0.0)
