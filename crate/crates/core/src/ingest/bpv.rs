use std::f64::consts::PI;

use super::resample::ReturnGrid;
use crate::error::{Error, Result};

/// E|Z| for a standard normal Z, i.e. sqrt(2/pi).
pub const MU1: f64 = 0.797_884_560_802_865_4;

/// Bi-power variation `mu1^-2 * sum_{t>=2} |r_t| |r_{t-1}|` of one day's returns.
///
/// Products of adjacent absolute returns make the estimator robust to
/// isolated jumps: a single large return among zeros contributes nothing.
pub fn bipower_variation(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::InsufficientReturns(returns.len()));
    }
    let sum: f64 = returns.windows(2).map(|w| w[0].abs() * w[1].abs()).sum();
    // mu1^-2 = pi / 2
    Ok(sum * (PI / 2.0))
}

impl ReturnGrid {
    pub fn bipower_variation(&self) -> Result<f64> {
        bipower_variation(&self.returns)
    }
}
