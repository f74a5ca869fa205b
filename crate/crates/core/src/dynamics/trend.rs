use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::measures::MeasureKey;
use super::rolling::RollingResult;
use crate::error::{Error, Result};

/// Denominators smaller than this in magnitude give a gap instead of a ratio.
pub const RATIO_EPS: f64 = 1e-12;

/// Elementwise `numerator / denominator` over the rolling windows.
pub fn ratio_series(
    result: &RollingResult,
    numerator: &MeasureKey,
    denominator: &MeasureKey,
) -> Result<Vec<(NaiveDate, Option<f64>)>> {
    let lookup = |key: &MeasureKey| {
        result.get(key).ok_or_else(|| {
            Error::invalid_argument(format!("no series `{}` on band `{}`", key.measure, key.band))
        })
    };
    let num = lookup(numerator)?;
    let den = lookup(denominator)?;
    Ok(result
        .anchor_dates
        .iter()
        .zip(num.points.iter().zip(&den.points))
        .map(|(&date, (n, d))| {
            let ratio = match (n.value, d.value) {
                (Some(n), Some(d)) if d.abs() >= RATIO_EPS => Some(n / d),
                _ => None,
            };
            (date, ratio)
        })
        .collect())
}

/// Least-squares line through a series against its window index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    /// Change per window step.
    pub slope: f64,
    pub intercept: f64,
    /// 0 when the series is constant.
    pub r_squared: f64,
    /// Classical OLS standard error; `None` with fewer than 3 points.
    pub slope_std_error: Option<f64>,
    pub n_points: usize,
}

/// Fit `value = intercept + slope * index`, skipping gaps (indices keep
/// counting through them).
pub fn linear_trend(series: &[(NaiveDate, Option<f64>)]) -> Result<TrendFit> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .filter_map(|(i, (_, v))| v.map(|v| (i as f64, v)))
        .collect();
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid_data(format!(
            "a trend needs at least 2 non-gap points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let slope_std_error = (n > 2).then(|| (sse / (nf - 2.0) / sxx).sqrt());
    Ok(TrendFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
        n_points: n,
    })
}

/// `date,ratio` with gaps as empty cells.
pub fn write_ratio_csv<W: Write>(ratios: &[(NaiveDate, Option<f64>)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "ratio"])?;
    for (date, r) in ratios {
        w.write_record([
            date.format("%Y-%m-%d").to_string(),
            r.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
