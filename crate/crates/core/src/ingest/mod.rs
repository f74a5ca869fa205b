//! From raw ticks to the daily log-volatility panel.
//!
//! The pipeline is `load_ticks` → `filter_calendar` → `resample_grid` →
//! `bipower_variation` per day → `build_panel`. [`synth_var_panel`] produces
//! panels from a known VAR for tests and benchmarks.

mod bpv;
mod calendar;
mod panel;
mod resample;
mod stats;
mod synth;
mod ticks;

pub use bpv::{bipower_variation, MU1};
pub use calendar::{filter_calendar, us_federal_holidays, CalendarRules, MonthDay};
pub use panel::{build_panel, read_panel_csv, write_panel_csv, Transform, VolatilityPanel};
pub use resample::{resample_grid, ReturnGrid, Session, SkippedDay};
pub use stats::{summary_stats, write_summary_csv, SummaryStats};
pub use synth::{business_days, synth_var_panel, Simulator};
pub use ticks::{load_ticks, Tick, TickSeries};
