use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::rolling::RollingResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub date: NaiveDate,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventGrid {
    pub events: Vec<Event>,
}

impl EventGrid {
    pub fn new(events: Vec<Event>) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| e.label.trim().is_empty()) {
            return Err(Error::invalid_data(format!("event on {} has an empty label", e.date)));
        }
        Ok(Self { events })
    }
}

/// An event attached to its nearest window, or unplaced when it falls
/// outside the span of anchor dates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMark {
    pub date: NaiveDate,
    pub label: String,
    pub anchor_index: Option<usize>,
    pub anchor_date: Option<NaiveDate>,
}

/// Read a `date,label` CSV.
pub fn read_events_csv<R: Read>(source: R) -> Result<EventGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "label" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `date,label`".into(),
        });
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", &record[0]),
        })?;
        if record[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty event label".into(),
            });
        }
        events.push(Event {
            date,
            label: record[1].to_string(),
        });
    }
    EventGrid::new(events)
}

/// Attach each event to the closest anchor date (ties go to the earlier
/// one). Numeric series are untouched.
pub fn annotate(result: &RollingResult, events: &EventGrid) -> RollingResult {
    let anchors = &result.anchor_dates;
    let marks = events
        .events
        .iter()
        .map(|e| {
            let index = nearest_anchor(anchors, e.date);
            EventMark {
                date: e.date,
                label: e.label.clone(),
                anchor_index: index,
                anchor_date: index.map(|i| anchors[i]),
            }
        })
        .collect();
    RollingResult {
        events: marks,
        ..result.clone()
    }
}

fn nearest_anchor(anchors: &[NaiveDate], date: NaiveDate) -> Option<usize> {
    let (first, last) = (anchors.first()?, anchors.last()?);
    if date < *first || date > *last {
        return None;
    }
    let after = anchors.partition_point(|&a| a < date);
    if anchors[after] == date {
        return Some(after);
    }
    let before = after - 1;
    let gap_before = date - anchors[before];
    let gap_after = anchors[after] - date;
    Some(if gap_before <= gap_after { before } else { after })
}
