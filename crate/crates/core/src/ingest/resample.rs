use chrono::{Duration, NaiveDate, NaiveTime, Timelike};

use super::ticks::TickSeries;
use crate::error::{Error, Result};

const SECONDS_PER_DAY: i64 = 86_400;

/// Intraday session, as offsets from UTC midnight. `end` may be 24:00.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    start: Duration,
    end: Duration,
}

impl Default for Session {
    fn default() -> Self {
        Self::full_day()
    }
}

impl Session {
    pub fn full_day() -> Self {
        Self {
            start: Duration::zero(),
            end: Duration::seconds(SECONDS_PER_DAY),
        }
    }

    pub fn new(start: Duration, end: Duration) -> Result<Self> {
        if start < Duration::zero() || end > Duration::seconds(SECONDS_PER_DAY) || start >= end {
            return Err(Error::invalid_argument(format!(
                "session must satisfy 00:00 <= start < end <= 24:00 (got {}s..{}s)",
                start.num_seconds(),
                end.num_seconds()
            )));
        }
        Ok(Self { start, end })
    }

    pub fn from_times(start: NaiveTime, end: Option<NaiveTime>) -> Result<Self> {
        let offset = |t: NaiveTime| Duration::seconds(t.num_seconds_from_midnight() as i64);
        Self::new(
            offset(start),
            end.map_or(Duration::seconds(SECONDS_PER_DAY), offset),
        )
    }

    pub fn length(&self) -> Duration {
        self.end - self.start
    }
}

/// Log returns of one trading day on a fixed intraday grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnGrid {
    pub symbol: String,
    pub trading_day: NaiveDate,
    pub returns: Vec<f64>,
    pub grid_spacing: Duration,
}

/// A day dropped by the resampler, kept so the cleaning step is auditable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedDay {
    pub symbol: String,
    pub date: NaiveDate,
    pub usable_grid_prices: usize,
}

/// Previous-tick sampling onto a regular grid, one [`ReturnGrid`] per day.
///
/// Grid points are `session.start + j * spacing`. Each takes the last price
/// observed at or before it on the same UTC day. Points before the first tick
/// are dropped, as are points after the first one that has seen the day's
/// last tick (their price would be stale). Days with fewer than two usable
/// grid prices are returned in the skipped list rather than zero-filled.
pub fn resample_grid(
    ticks: &TickSeries,
    spacing: Duration,
    session: Session,
) -> Result<(Vec<ReturnGrid>, Vec<SkippedDay>)> {
    if spacing <= Duration::zero() {
        return Err(Error::invalid_argument("grid spacing must be positive"));
    }
    let spacing_s = spacing.num_seconds();
    let session_s = session.length().num_seconds();
    if spacing_s * 1000 != spacing.num_milliseconds() || session_s % spacing_s != 0 {
        return Err(Error::invalid_argument(format!(
            "grid spacing {spacing_s}s does not divide the session length {session_s}s"
        )));
    }
    let start_s = session.start.num_seconds();
    let end_s = session.end.num_seconds();
    let n_points = (session_s / spacing_s) as usize + 1;

    let mut days = Vec::new();
    let mut skipped = Vec::new();
    let obs = ticks.observations();
    let mut i = 0;
    while i < obs.len() {
        let date = obs[i].time.date_naive();
        let mut j = i;
        while j < obs.len() && obs[j].time.date_naive() == date {
            j += 1;
        }
        // (seconds since midnight, price) for ticks inside the session.
        let day: Vec<(i64, f64)> = obs[i..j]
            .iter()
            .map(|t| (t.time.num_seconds_from_midnight() as i64, t.price))
            .filter(|&(s, _)| s >= start_s && s <= end_s)
            .collect();
        i = j;

        let prices = grid_prices(&day, start_s, spacing_s, n_points);
        if prices.len() < 2 {
            skipped.push(SkippedDay {
                symbol: ticks.symbol().to_string(),
                date,
                usable_grid_prices: prices.len(),
            });
            continue;
        }
        let returns = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        days.push(ReturnGrid {
            symbol: ticks.symbol().to_string(),
            trading_day: date,
            returns,
            grid_spacing: spacing,
        });
    }
    Ok((days, skipped))
}

fn grid_prices(day: &[(i64, f64)], start_s: i64, spacing_s: i64, n_points: usize) -> Vec<f64> {
    let Some(&(last_tick, _)) = day.last() else {
        return Vec::new();
    };
    let mut prices = Vec::new();
    let mut cursor = 0;
    let mut current: Option<f64> = None;
    for g in 0..n_points {
        let point = start_s + g as i64 * spacing_s;
        while cursor < day.len() && day[cursor].0 <= point {
            current = Some(day[cursor].1);
            cursor += 1;
        }
        if let Some(price) = current {
            prices.push(price);
        }
        if point >= last_tick {
            break;
        }
    }
    prices
}
