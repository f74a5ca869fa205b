use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::ticks::TickSeries;
use crate::error::{Error, Result};

/// A month/day pair, independent of year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MonthDay {
    pub month: u32,
    pub day: u32,
}

impl MonthDay {
    pub fn new(month: u32, day: u32) -> Result<Self> {
        // 2000 is a leap year, so Feb 29 is accepted.
        NaiveDate::from_ymd_opt(2000, month, day)
            .map(|_| Self { month, day })
            .ok_or_else(|| Error::invalid_argument(format!("invalid month-day {month:02}-{day:02}")))
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            month: date.month(),
            day: date.day(),
        }
    }
}

/// Which calendar days to drop before resampling.
///
/// Exclusion windows are inclusive on both ends; a window whose start comes
/// after its end wraps over the new year (Dec 31 – Jan 2).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalendarRules {
    pub weekend_exclusion: bool,
    pub fixed_exclusion_windows: Vec<(MonthDay, MonthDay)>,
    pub holiday_list: Vec<NaiveDate>,
    /// Also drop US federal holidays (observed dates), computed per year.
    #[serde(default)]
    pub us_federal_holidays: bool,
}

impl CalendarRules {
    /// Thin-trading days for US energy futures: weekends, federal holidays,
    /// Dec 24–26 and Dec 31–Jan 2.
    pub fn us_futures() -> Self {
        Self {
            weekend_exclusion: true,
            fixed_exclusion_windows: vec![
                (MonthDay { month: 12, day: 24 }, MonthDay { month: 12, day: 26 }),
                (MonthDay { month: 12, day: 31 }, MonthDay { month: 1, day: 2 }),
            ],
            holiday_list: Vec::new(),
            us_federal_holidays: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (start, end) in &self.fixed_exclusion_windows {
            MonthDay::new(start.month, start.day)?;
            MonthDay::new(end.month, end.day)?;
        }
        Ok(())
    }

    pub fn excludes(&self, date: NaiveDate) -> bool {
        if self.weekend_exclusion && matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            return true;
        }
        let md = MonthDay::of(date);
        let in_window = self.fixed_exclusion_windows.iter().any(|&(start, end)| {
            if start <= end {
                start <= md && md <= end
            } else {
                md >= start || md <= end
            }
        });
        if in_window || self.holiday_list.contains(&date) {
            return true;
        }
        self.us_federal_holidays && us_federal_holidays(date.year()).contains(&date)
    }
}

/// Drop every tick whose UTC calendar date is excluded by `rules`.
pub fn filter_calendar(ticks: &TickSeries, rules: &CalendarRules) -> Result<TickSeries> {
    rules.validate()?;
    let mut cached: Option<(NaiveDate, bool)> = None;
    Ok(ticks.retain(|tick| {
        let date = tick.time.date_naive();
        match cached {
            Some((d, excluded)) if d == date => !excluded,
            _ => {
                let excluded = rules.excludes(date);
                cached = Some((date, excluded));
                !excluded
            }
        }
    }))
}

/// Observed US federal holidays falling in `year`.
///
/// Fixed-date holidays on a Saturday are observed the Friday before, on a
/// Sunday the Monday after. MLK Day is included from 1986 and Juneteenth
/// from 2021. New Year's Day observed on Dec 31 belongs to the earlier year.
pub fn us_federal_holidays(year: i32) -> Vec<NaiveDate> {
    let fixed = |m, d| observed(NaiveDate::from_ymd_opt(year, m, d).unwrap());
    let mut days = vec![
        fixed(1, 1),
        nth_weekday(year, 2, Weekday::Mon, 3),
        last_weekday(year, 5, Weekday::Mon),
        fixed(7, 4),
        nth_weekday(year, 9, Weekday::Mon, 1),
        nth_weekday(year, 10, Weekday::Mon, 2),
        fixed(11, 11),
        nth_weekday(year, 11, Weekday::Thu, 4),
        fixed(12, 25),
    ];
    if year >= 1986 {
        days.push(nth_weekday(year, 1, Weekday::Mon, 3));
    }
    if year >= 2021 {
        days.push(fixed(6, 19));
    }
    // Next year's New Year's Day observed on Friday Dec 31.
    let next_new_year = observed(NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap());
    if next_new_year.year() == year {
        days.push(next_new_year);
    }
    days.retain(|d| d.year() == year);
    days.sort();
    days
}

fn observed(date: NaiveDate) -> NaiveDate {
    match date.weekday() {
        Weekday::Sat => date.pred_opt().unwrap(),
        Weekday::Sun => date.succ_opt().unwrap(),
        _ => date,
    }
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).unwrap()
}

fn last_weekday(year: i32, month: u32, weekday: Weekday) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, 5)
        .unwrap_or_else(|| nth_weekday(year, month, weekday, 4))
}
