"""Long-range correlation analysis of limit-order-book event streams."""

from .book import BookState, ClassifiedEvent, Kind, apply_event, replay_day, replay_with_mid_path
from .dfa import (
    AlphaSummary,
    DFAConfig,
    FluctuationCurve,
    ScalingFit,
    daily_alpha,
    fit_alpha,
    fluctuation,
    local_alphas,
    profile,
    scale_grid,
    summarize_alphas,
)
from .durations import DurationSeries, Variable, concat_days, inter_event_durations, lifetime_durations
from .econ import DailyEcon, MidPath, correlate, daily_economics, realized_variance
from .events import (
    EventRecord,
    EventType,
    SessionWindow,
    Side,
    apply_session_filter,
    parse_binary_log,
    parse_csv_log,
)
from .pipeline import RunConfig, load_config, run_pipeline
from .synth import GeneratorSpec, SignalKind, generate, synth_order_flow
from .validation import validate_suite

__version__ = "0.1.0"
