use std::io::Read;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub time: DateTime<Utc>,
    pub price: f64,
}

/// Irregularly spaced prices for one instrument.
///
/// Timestamps are strictly increasing and every price is positive; the
/// constructor enforces both.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    symbol: String,
    observations: Vec<Tick>,
}

impl TickSeries {
    pub fn new(symbol: impl Into<String>, observations: Vec<Tick>) -> Result<Self> {
        for (idx, tick) in observations.iter().enumerate() {
            if !(tick.price > 0.0 && tick.price.is_finite()) {
                return Err(Error::invalid_data(format!(
                    "observation {idx}: price {} is not positive",
                    tick.price
                )));
            }
        }
        if let Some(idx) = observations.windows(2).position(|w| w[1].time <= w[0].time) {
            return Err(Error::invalid_data(format!(
                "observation {}: timestamp {} does not increase",
                idx + 1,
                observations[idx + 1].time
            )));
        }
        Ok(Self {
            symbol: symbol.into(),
            observations,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn observations(&self) -> &[Tick] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Keep observations matching `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&Tick) -> bool) -> TickSeries {
        TickSeries {
            symbol: self.symbol.clone(),
            observations: self.observations.iter().copied().filter(|t| keep(t)).collect(),
        }
    }
}

/// Parse a `timestamp,price` CSV.
///
/// Timestamps are RFC 3339 / ISO-8601 with an explicit offset and are
/// converted to UTC. A row whose timestamp equals the previous one replaces
/// its price; a row that goes back in time is an error.
pub fn load_ticks<R: Read>(source: R, symbol: &str) -> Result<TickSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "price" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `timestamp,price`, found `{}`", join(&headers)),
        });
    }

    let mut observations: Vec<Tick> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != 2 {
            return Err(parse_err(format!("expected 2 fields, found {}", record.len())));
        }
        let time = DateTime::parse_from_rfc3339(&record[0])
            .map_err(|e| parse_err(format!("bad timestamp `{}`: {e}", &record[0])))?
            .with_timezone(&Utc);
        let price: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("bad price `{}`", &record[1])))?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(parse_err(format!("price {price} is not positive")));
        }
        match observations.last_mut() {
            Some(last) if last.time == time => last.price = price,
            Some(last) if last.time > time => {
                return Err(parse_err(format!(
                    "timestamp {time} is earlier than the previous row ({})",
                    last.time
                )))
            }
            _ => observations.push(Tick { time, price }),
        }
    }
    if observations.is_empty() {
        return Err(Error::EmptyInput);
    }
    TickSeries::new(symbol, observations)
}

fn join(record: &csv::StringRecord) -> String {
    record.iter().collect::<Vec<_>>().join(",")
}
