use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::measures::{MeasureKey, MeasureSpec};
use crate::error::{Error, Result};
use crate::ingest::Simulator;
use crate::par::{map_indexed, Execution};
use crate::varcore::{fit_var_data, VarModel};

pub const MIN_REPLICATIONS: usize = 100;
/// Largest tolerated share of replicates whose re-fit fails or is unstable.
pub const MAX_FAILED_SHARE: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    /// Two-sided significance: bands span the `significance/2` and
    /// `1 - significance/2` quantiles (0.10 gives the 5th-95th percentiles).
    pub significance: f64,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 500,
            significance: 0.10,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::invalid_argument(format!(
                "need at least {MIN_REPLICATIONS} bootstrap replications, got {}",
                self.replications
            )));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::invalid_argument(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        Ok(())
    }
}

/// Per-replicate measure values, kept so several band widths can be read
/// from the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub keys: Vec<MeasureKey>,
    /// `draws[key]` holds the defined values of that measure, sorted.
    pub draws: Vec<Vec<f64>>,
    pub valid: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBands {
    pub keys: Vec<MeasureKey>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub valid: usize,
    pub failed: usize,
}

/// Parametric bootstrap around a fitted model.
///
/// Each replicate simulates `window` observations from `model` with Gaussian
/// innovations, re-fits a VAR with the same lag order and intercept setting,
/// and recomputes every measure in `spec`. Replicate `r` draws from ChaCha8
/// stream `r` of `seed`, so results do not depend on scheduling.
pub fn bootstrap_draws(
    model: &VarModel,
    window: usize,
    spec: &MeasureSpec,
    config: &BootstrapConfig,
) -> Result<BootstrapDraws> {
    config.validate()?;
    let simulator = Simulator::new(model)?;
    let basis = spec.basis()?;
    let keys = spec.keys(model.variable_names());
    let names = model.variable_names().to_vec();

    let replicates = map_indexed(config.execution, config.replications, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        let data = simulator.simulate(&mut rng, window);
        let refit = fit_var_data(data.as_view(), names.clone(), model.p(), model.has_intercept())?;
        spec.evaluate(basis.as_ref(), &refit)
    });

    let mut draws = vec![Vec::with_capacity(config.replications); keys.len()];
    let mut failed = 0;
    for values in &replicates {
        match values {
            Ok(values) => {
                for (slot, v) in draws.iter_mut().zip(values) {
                    slot.extend(*v);
                }
            }
            Err(_) => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILED_SHARE * config.replications as f64 {
        return Err(Error::Numeric(format!(
            "{failed} of {} bootstrap replicates were unstable or singular; use a larger window",
            config.replications
        )));
    }
    for d in &mut draws {
        d.sort_by(f64::total_cmp);
    }
    Ok(BootstrapDraws {
        keys,
        draws,
        valid: config.replications - failed,
        failed,
    })
}

impl BootstrapDraws {
    pub fn bands(&self, significance: f64) -> BootstrapBands {
        let lo = significance / 2.0;
        let hi = 1.0 - significance / 2.0;
        BootstrapBands {
            keys: self.keys.clone(),
            lower: self.draws.iter().map(|d| quantile_sorted(d, lo)).collect(),
            upper: self.draws.iter().map(|d| quantile_sorted(d, hi)).collect(),
            valid: self.valid,
            failed: self.failed,
        }
    }
}

pub fn bootstrap_bands(
    model: &VarModel,
    window: usize,
    spec: &MeasureSpec,
    config: &BootstrapConfig,
) -> Result<BootstrapBands> {
    Ok(bootstrap_draws(model, window, spec, config)?.bands(config.significance))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    match sorted.len() {
        0 => None,
        1 => Some(sorted[0]),
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
        }
    }
}

/// Independent seed for work item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
