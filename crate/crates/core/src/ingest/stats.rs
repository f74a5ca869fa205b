use std::io::Write;

use serde::Serialize;

use super::panel::VolatilityPanel;
use crate::error::{Error, Result};

/// Per-symbol descriptive statistics.
///
/// `std` uses the n-1 divisor; skewness and kurtosis are the population
/// standardized third and fourth moments (kurtosis is not excess). Both are
/// `None` when the column has zero variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub symbol: String,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn summary_stats(panel: &VolatilityPanel) -> Result<Vec<SummaryStats>> {
    if panel.len() < 2 {
        return Err(Error::InsufficientSample {
            required: 2,
            available: panel.len(),
        });
    }
    Ok(panel
        .symbols()
        .iter()
        .enumerate()
        .map(|(j, symbol)| column_stats(symbol, &panel.column(j)))
        .collect())
}

fn column_stats(symbol: &str, x: &[f64]) -> SummaryStats {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let central = |power: i32| x.iter().map(|v| (v - mean).powi(power)).sum::<f64>() / n;
    let m2 = central(2);
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(central(3) / m2.powf(1.5)), Some(central(4) / (m2 * m2)))
    } else {
        (None, None)
    };
    SummaryStats {
        symbol: symbol.to_string(),
        mean,
        median: median(x),
        std: (m2 * n / (n - 1.0)).sqrt(),
        skewness,
        kurtosis,
    }
}

fn median(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

/// Statistics as rows, symbols as columns; undefined moments written as `NA`.
pub fn write_summary_csv<W: Write>(stats: &[SummaryStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["statistic".to_string()];
    header.extend(stats.iter().map(|s| s.symbol.clone()));
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    type Getter = fn(&SummaryStats) -> Option<f64>;
    let rows: [(&str, Getter); 5] = [
        ("mean", |s| Some(s.mean)),
        ("median", |s| Some(s.median)),
        ("std", |s| Some(s.std)),
        ("skewness", |s| s.skewness),
        ("kurtosis", |s| s.kurtosis),
    ];
    for (name, get) in rows {
        let mut row = vec![name.to_string()];
        row.extend(stats.iter().map(|s| fmt(get(s))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
