use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::freqdomain::{
    band_measures_with, spectral_gfevd_with, BandMeasures, BandSpec, SpectralBasis, Standardization,
    DEFAULT_N_FREQ,
};
use crate::timedomain::{dy_measures, gfevd, DyMeasures};
use crate::varcore::{wold, VarModel, DEFAULT_H_TRUNC};

/// Band label used for time-domain series.
pub const TIME_DOMAIN_BAND: &str = "time";

/// Identifies one reported series: a measure name on a band.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MeasureKey {
    pub measure: String,
    pub band: String,
}

impl MeasureKey {
    pub fn new(measure: impl Into<String>, band: impl Into<String>) -> Self {
        Self {
            measure: measure.into(),
            band: band.into(),
        }
    }
}

/// Which connectedness measures to compute for a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub h_trunc: usize,
    pub n_freq: usize,
    pub bands: Vec<BandSpec>,
    /// Include the time-domain total, directional and pairwise measures.
    pub time_domain: bool,
    /// Include per-variable and pairwise series (otherwise totals only).
    pub directional: bool,
    pub standardization: Standardization,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self {
            h_trunc: DEFAULT_H_TRUNC,
            n_freq: DEFAULT_N_FREQ,
            bands: Vec::new(),
            time_domain: true,
            directional: true,
            standardization: Standardization::Global,
        }
    }
}

/// Everything computed for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeasures {
    pub time: Option<DyMeasures>,
    pub bands: Vec<BandMeasures>,
}

impl MeasureSpec {
    /// Only the time-domain total.
    pub fn total_only(h_trunc: usize) -> Self {
        Self {
            h_trunc,
            directional: false,
            ..Self::default()
        }
    }

    pub fn basis(&self) -> Result<Option<SpectralBasis>> {
        if self.bands.is_empty() {
            Ok(None)
        } else {
            SpectralBasis::new(self.n_freq, self.h_trunc).map(Some)
        }
    }

    /// Series keys in output order for a system with `names`.
    pub fn keys(&self, names: &[String]) -> Vec<MeasureKey> {
        let mut keys = Vec::new();
        if self.time_domain {
            keys.push(MeasureKey::new("total", TIME_DOMAIN_BAND));
            if self.directional {
                push_directional(&mut keys, names, "", TIME_DOMAIN_BAND);
            }
        }
        for band in &self.bands {
            let label = band.label.as_str();
            for m in ["within_total", "gamma", "absolute_total"] {
                keys.push(MeasureKey::new(m, label));
            }
            if self.directional {
                push_directional(&mut keys, names, "within_", label);
                for name in names {
                    keys.push(MeasureKey::new(format!("absolute_from:{name}"), label));
                    keys.push(MeasureKey::new(format!("absolute_to:{name}"), label));
                }
            }
        }
        keys
    }

    /// Compute every measure for `model`. `basis` must come from [`Self::basis`].
    pub fn compute(&self, basis: Option<&SpectralBasis>, model: &VarModel) -> Result<ModelMeasures> {
        let seq = wold(model, self.h_trunc)?;
        let time = if self.time_domain {
            Some(dy_measures(&gfevd(model, &seq, self.h_trunc.max(1))?))
        } else {
            None
        };
        let bands = match basis {
            Some(basis) if !self.bands.is_empty() => {
                let grid = spectral_gfevd_with(basis, model, &seq)?;
                self.bands
                    .iter()
                    .map(|b| band_measures_with(&grid, b, self.standardization))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => Vec::new(),
        };
        Ok(ModelMeasures { time, bands })
    }

    /// Flatten [`ModelMeasures`] in the order of [`Self::keys`]; undefined
    /// within measures are `None`.
    pub fn flatten(&self, measures: &ModelMeasures) -> Vec<Option<f64>> {
        let mut out = Vec::new();
        if let Some(time) = &measures.time {
            out.push(Some(time.total));
            if self.directional {
                flatten_directional(&mut out, Some(time), time.from_others.len());
            }
        }
        for b in &measures.bands {
            out.push(b.within_total());
            out.push(Some(b.gamma));
            out.push(Some(b.absolute_total));
            if self.directional {
                flatten_directional(&mut out, b.within.as_ref(), b.absolute_from.len());
                for i in 0..b.absolute_from.len() {
                    out.push(Some(b.absolute_from[i]));
                    out.push(Some(b.absolute_to[i]));
                }
            }
        }
        out
    }

    /// `compute` then `flatten`.
    pub fn evaluate(&self, basis: Option<&SpectralBasis>, model: &VarModel) -> Result<Vec<Option<f64>>> {
        Ok(self.flatten(&self.compute(basis, model)?))
    }
}

fn push_directional(keys: &mut Vec<MeasureKey>, names: &[String], prefix: &str, band: &str) {
    for name in names {
        for m in ["from", "to", "net"] {
            keys.push(MeasureKey::new(format!("{prefix}{m}:{name}"), band));
        }
    }
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            keys.push(MeasureKey::new(format!("{prefix}pairwise:{a}:{b}"), band));
        }
    }
}

fn flatten_directional(out: &mut Vec<Option<f64>>, measures: Option<&DyMeasures>, k: usize) {
    // Undefined measures still fill their slots so values line up with keys.
    let pairs = k * (k - 1) / 2;
    let Some(m) = measures else {
        out.extend(std::iter::repeat_n(None, 3 * k + pairs));
        return;
    };
    for i in 0..k {
        out.push(Some(m.from_others[i]));
        out.push(Some(m.to_others[i]));
        out.push(Some(m.net[i]));
    }
    push_upper(out, &m.pairwise);
}

fn push_upper(out: &mut Vec<Option<f64>>, pairwise: &DMatrix<f64>) {
    let k = pairwise.nrows();
    for i in 0..k {
        for j in i + 1..k {
            out.push(Some(pairwise[(i, j)]));
        }
    }
}
