//! Rolling-window connectedness, parametric bootstrap bands, event markers
//! and short/long ratio series with linear trends.

mod bootstrap;
mod events;
mod measures;
mod rolling;
mod trend;

pub use bootstrap::{
    bootstrap_bands, bootstrap_draws, derive_seed, quantile_sorted, BootstrapBands, BootstrapConfig,
    BootstrapDraws, MAX_FAILED_SHARE, MIN_REPLICATIONS,
};
pub use events::{annotate, read_events_csv, Event, EventGrid, EventMark};
pub use measures::{MeasureKey, MeasureSpec, ModelMeasures, TIME_DOMAIN_BAND};
pub use rolling::{
    rolling_connectedness, write_rolling_csv, BootstrapMeta, GapReason, RollingConfig, RollingResult,
    Series, SeriesPoint, WindowGap,
};
pub use trend::{linear_trend, ratio_series, write_ratio_csv, TrendFit, RATIO_EPS};
