use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell-wise transform applied to daily bi-power variation.
///
/// `Log` is the log of the volatility, i.e. `ln(sqrt(bpv))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Raw,
    Sqrt,
    #[default]
    Log,
}

impl Transform {
    pub fn apply(self, value: f64) -> Option<f64> {
        match self {
            Transform::Raw => Some(value),
            _ if !(value > 0.0) => None,
            Transform::Sqrt => Some(value.sqrt()),
            Transform::Log => Some(value.sqrt().ln()),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Raw => "raw",
            Transform::Sqrt => "sqrt",
            Transform::Log => "log",
        })
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Transform::Raw),
            "sqrt" => Ok(Transform::Sqrt),
            "log" => Ok(Transform::Log),
            other => Err(Error::invalid_argument(format!(
                "unknown transform `{other}` (expected raw, sqrt or log)"
            ))),
        }
    }
}

/// T x k daily volatility panel with a shared, strictly increasing date index.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityPanel {
    dates: Vec<NaiveDate>,
    symbols: Vec<String>,
    values: DMatrix<f64>,
    transform: Transform,
}

impl VolatilityPanel {
    pub fn new(
        dates: Vec<NaiveDate>,
        symbols: Vec<String>,
        values: DMatrix<f64>,
        transform: Transform,
    ) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::invalid_data("a panel needs at least 2 symbols"));
        }
        if values.nrows() != dates.len() || values.ncols() != symbols.len() {
            return Err(Error::invalid_data(format!(
                "panel shape {}x{} does not match {} dates and {} symbols",
                values.nrows(),
                values.ncols(),
                dates.len(),
                symbols.len()
            )));
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid_data(format!(
                "dates not strictly increasing at {}",
                dates[i + 1]
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::invalid_data(format!(
                "non-finite value for {} on {}",
                symbols[col], dates[row]
            )));
        }
        Ok(Self {
            dates,
            symbols,
            values,
            transform,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Number of days.
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn k(&self) -> usize {
        self.symbols.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

/// Inner-join per-symbol daily series on date and apply `transform`.
pub fn build_panel(
    per_symbol_daily: &[(String, Vec<(NaiveDate, f64)>)],
    transform: Transform,
) -> Result<VolatilityPanel> {
    if per_symbol_daily.len() < 2 {
        return Err(Error::invalid_data("a panel needs at least 2 symbols"));
    }
    let maps: Vec<BTreeMap<NaiveDate, f64>> = per_symbol_daily
        .iter()
        .map(|(_, obs)| obs.iter().copied().collect())
        .collect();
    let dates: Vec<NaiveDate> = maps[0]
        .keys()
        .filter(|d| maps[1..].iter().all(|m| m.contains_key(d)))
        .copied()
        .collect();
    if dates.is_empty() {
        return Err(Error::invalid_data("symbols share no common dates"));
    }

    let k = per_symbol_daily.len();
    let mut values = DMatrix::zeros(dates.len(), k);
    for (j, ((symbol, _), map)) in per_symbol_daily.iter().zip(&maps).enumerate() {
        for (t, date) in dates.iter().enumerate() {
            let raw = map[date];
            values[(t, j)] = transform.apply(raw).ok_or_else(|| {
                Error::invalid_data(format!(
                    "cannot apply {transform} transform to non-positive value {raw} for {symbol} on {date}"
                ))
            })?;
        }
    }
    let symbols = per_symbol_daily.iter().map(|(s, _)| s.clone()).collect();
    VolatilityPanel::new(dates, symbols, values, transform)
}

/// Write `date,<symbol1>,...,<symbolk>`.
pub fn write_panel_csv<W: Write>(panel: &VolatilityPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string()];
    header.extend(panel.symbols.iter().cloned());
    w.write_record(&header)?;
    for (t, date) in panel.dates.iter().enumerate() {
        let mut row = vec![date.format("%Y-%m-%d").to_string()];
        row.extend(panel.values.row(t).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a panel CSV. The file does not record its transform, so the caller
/// states it.
pub fn read_panel_csv<R: Read>(source: R, transform: Transform) -> Result<VolatilityPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "date" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `date,<symbol1>,...,<symbolk>` with k >= 2".into(),
        });
    }
    let symbols: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let k = symbols.len();
    let mut dates = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != k + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", k + 1, record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", &record[0]),
        })?;
        dates.push(date);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad value `{field}`"),
            })?;
            data.push(v);
        }
    }
    if dates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let values = DMatrix::from_row_slice(dates.len(), k, &data);
    VolatilityPanel::new(dates, symbols, values, transform)
}
