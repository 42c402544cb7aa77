"""Chaos-calibrated online nowcasting of univariate price series.

The pipeline reconstructs the phase space of a price series (PACF lag,
Cao embedding dimension, Rosenstein Lyapunov exponent), embeds it into
supervised form, and forecasts the next bar online with five regression
families under a sliding-window retraining policy, then scores the
forecasts with SMAPE, directional symmetry, Theil's U, and pairwise
Diebold-Mariano tests.
"""

from .chaos import (
    CaoProfile,
    ChaosParams,
    DesignMatrix,
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
from .engine import (
    EngineConfig,
    RetrainPolicy,
    RunResult,
    SessionSummary,
    WindowState,
    calibrate_day,
    forecast_step,
    ingest_actual,
    prepare_state,
    run_live,
    run_replay,
    run_session,
    run_stream,
    should_retrain,
)
from .errors import (
    ChaoscastError,
    DegeneracyError,
    DomainError,
    LengthError,
    OrderingError,
    ProtocolError,
    SchemaError,
    ShapeError,
    SingularityError,
)
from .ingest import (
    StreamSource,
    append_forecast_log,
    last_logged_timestamp,
    poll_quote,
    read_forecast_log,
    read_series_csv,
    replay_stream,
    write_series_csv,
)
from .metrics import (
    BoxSummary,
    DMResult,
    box_summary,
    build_report,
    directional_symmetry,
    dm_test,
    pointwise_losses,
    render_report,
    smape,
    theils_u,
)
from .models import (
    FAMILIES,
    MODEL_ORDER,
    GLMRegressor,
    GBTRegressor,
    LassoRegressor,
    RandomForestRegressor,
    RidgeRegressor,
    default_grid,
    deserialize_model,
    grid_search,
    make_model,
    serialize_model,
)
from .records import ForecastRecord
from .series import PriceSeries, Tick, format_timestamp, parse_timestamp

__version__ = "0.1.0"
