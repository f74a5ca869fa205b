use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_draws, derive_seed, BootstrapConfig};
use super::events::EventMark;
use super::measures::{MeasureKey, MeasureSpec};
use crate::error::{Error, Result};
use crate::freqdomain::BandSpec;
use crate::ingest::VolatilityPanel;
use crate::par::{map_indexed, Execution};
use crate::varcore::fit_var_data;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub p: usize,
    pub include_intercept: bool,
    pub window: usize,
    pub step: usize,
    pub spec: MeasureSpec,
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            p: 2,
            include_intercept: true,
            window: 500,
            step: 1,
            spec: MeasureSpec::default(),
            bootstrap: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapReason {
    Unstable,
    RankDeficient,
    NumericFailure,
    /// The point estimate exists but too many bootstrap replicates failed,
    /// so the window has no bands.
    BootstrapFailed,
}

impl GapReason {
    pub fn code(self) -> &'static str {
        match self {
            GapReason::Unstable => "unstable",
            GapReason::RankDeficient => "rank_deficient",
            GapReason::NumericFailure => "numeric_failure",
            GapReason::BootstrapFailed => "bootstrap_failed",
        }
    }

    fn of(err: &Error) -> Self {
        match err {
            Error::Unstable { .. } => GapReason::Unstable,
            Error::RankDeficient { .. } => GapReason::RankDeficient,
            _ => GapReason::NumericFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGap {
    pub index: usize,
    pub anchor_date: NaiveDate,
    pub reason: GapReason,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub key: MeasureKey,
    /// One point per window, aligned with `RollingResult::anchor_dates`.
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMeta {
    pub replications: usize,
    pub significance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingResult {
    pub window_length: usize,
    pub step: usize,
    /// Date of each window's last observation.
    pub anchor_dates: Vec<NaiveDate>,
    pub series: Vec<Series>,
    pub bands_used: Vec<BandSpec>,
    pub bootstrap_meta: Option<BootstrapMeta>,
    pub gaps: Vec<WindowGap>,
    #[serde(default)]
    pub events: Vec<EventMark>,
}

impl RollingResult {
    pub fn n_windows(&self) -> usize {
        self.anchor_dates.len()
    }

    pub fn get(&self, key: &MeasureKey) -> Option<&Series> {
        self.series.iter().find(|s| &s.key == key)
    }

    /// `(date, value)` pairs of one series.
    pub fn values(&self, key: &MeasureKey) -> Option<Vec<(NaiveDate, Option<f64>)>> {
        self.get(key).map(|s| {
            self.anchor_dates
                .iter()
                .copied()
                .zip(s.points.iter().map(|p| p.value))
                .collect()
        })
    }
}

type Bounds = (Vec<Option<f64>>, Vec<Option<f64>>);

struct WindowOutcome {
    values: Option<Vec<Option<f64>>>,
    bands: Option<Bounds>,
    gap: Option<(GapReason, String)>,
}

/// Fit a VAR on every window and compute connectedness measures.
///
/// Windows start at `0, step, 2 step, ...` while they fit in the panel.
/// Windows whose fit is rank deficient or unstable become gaps with a reason
/// code. With bootstrap enabled, window `w` uses seed
/// `derive_seed(seed, w)`; bands are widened when needed so that they
/// always contain the point estimate.
pub fn rolling_connectedness(panel: &VolatilityPanel, config: &RollingConfig) -> Result<RollingResult> {
    let t = panel.len();
    let k = panel.k();
    let p = config.p;
    if p == 0 || config.step == 0 {
        return Err(Error::invalid_argument("lag order and step must be at least 1"));
    }
    let minimum = p + k * p + 1;
    if config.window < minimum {
        return Err(Error::invalid_argument(format!(
            "window {} is shorter than the {minimum} observations a VAR({p}) on {k} variables needs",
            config.window
        )));
    }
    if config.window > t {
        return Err(Error::invalid_argument(format!(
            "window {} exceeds the panel length {t}",
            config.window
        )));
    }
    if let Some(b) = &config.bootstrap {
        b.validate()?;
    }

    let n_windows = (t - config.window) / config.step + 1;
    let keys = config.spec.keys(panel.symbols());
    let basis = config.spec.basis()?;
    let names = panel.symbols().to_vec();

    let outcomes = map_indexed(config.execution, n_windows, |w| {
        let start = w * config.step;
        let data = panel.values().rows(start, config.window);
        let fitted = fit_var_data(data, names.clone(), p, config.include_intercept);
        let computed = fitted.and_then(|model| {
            let measures = config.spec.compute(basis.as_ref(), &model)?;
            Ok((model, measures))
        });
        let (model, measures) = match computed {
            Ok(ok) => ok,
            Err(err) => {
                return WindowOutcome {
                    values: None,
                    bands: None,
                    gap: Some((GapReason::of(&err), err.to_string())),
                }
            }
        };
        let values = config.spec.flatten(&measures);
        let Some(boot) = &config.bootstrap else {
            return WindowOutcome {
                values: Some(values),
                bands: None,
                gap: None,
            };
        };
        let boot = BootstrapConfig {
            seed: derive_seed(boot.seed, w as u64),
            ..*boot
        };
        match bootstrap_draws(&model, config.window, &config.spec, &boot) {
            Ok(draws) => {
                let bands = draws.bands(boot.significance);
                let lower = bands.lower.iter().zip(&values).map(|(l, v)| widen(*l, *v, f64::min)).collect();
                let upper = bands.upper.iter().zip(&values).map(|(u, v)| widen(*u, *v, f64::max)).collect();
                WindowOutcome {
                    values: Some(values),
                    bands: Some((lower, upper)),
                    gap: None,
                }
            }
            Err(err) => WindowOutcome {
                values: Some(values),
                bands: None,
                gap: Some((GapReason::BootstrapFailed, err.to_string())),
            },
        }
    });

    let anchor_dates: Vec<NaiveDate> = (0..n_windows)
        .map(|w| panel.dates()[w * config.step + config.window - 1])
        .collect();
    let mut series: Vec<Series> = keys
        .into_iter()
        .map(|key| Series {
            key,
            points: Vec::with_capacity(n_windows),
        })
        .collect();
    let mut gaps = Vec::new();
    let mut valid = 0;
    for (w, outcome) in outcomes.into_iter().enumerate() {
        if let Some((reason, detail)) = outcome.gap {
            log::info!("window {w} ({}): {} - {detail}", anchor_dates[w], reason.code());
            gaps.push(WindowGap {
                index: w,
                anchor_date: anchor_dates[w],
                reason,
                detail,
            });
        }
        if outcome.values.is_some() {
            valid += 1;
        }
        for (idx, s) in series.iter_mut().enumerate() {
            let value = outcome.values.as_ref().and_then(|v| v[idx]);
            let (lower, upper) = match &outcome.bands {
                Some((lo, hi)) => (lo[idx], hi[idx]),
                None => (None, None),
            };
            s.points.push(SeriesPoint { value, lower, upper });
        }
    }
    if valid == 0 {
        return Err(Error::Numeric(format!(
            "none of the {n_windows} windows produced a stable fit"
        )));
    }

    Ok(RollingResult {
        window_length: config.window,
        step: config.step,
        anchor_dates,
        series,
        bands_used: config.spec.bands.clone(),
        bootstrap_meta: config.bootstrap.map(|b| BootstrapMeta {
            replications: b.replications,
            significance: b.significance,
            seed: b.seed,
        }),
        gaps,
        events: Vec::new(),
    })
}

fn widen(bound: Option<f64>, point: Option<f64>, pick: fn(f64, f64) -> f64) -> Option<f64> {
    match (bound, point) {
        (Some(b), Some(p)) => Some(pick(b, p)),
        (b, _) => b,
    }
}

/// Long format `date,measure,band,value,lower,upper`, series by series.
/// Missing values are empty cells.
pub fn write_rolling_csv<W: Write>(result: &RollingResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "measure", "band", "value", "lower", "upper"])?;
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for s in &result.series {
        for (date, point) in result.anchor_dates.iter().zip(&s.points) {
            w.write_record([
                date.format("%Y-%m-%d").to_string(),
                s.key.measure.clone(),
                s.key.band.clone(),
                fmt(point.value),
                fmt(point.lower),
                fmt(point.upper),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
