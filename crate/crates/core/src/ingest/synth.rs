use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::panel::{Transform, VolatilityPanel};
use crate::error::{Error, Result};
use crate::varcore::{stability, VarModel};

/// Draws sample paths from a stable VAR with Gaussian innovations.
///
/// Paths start at the unconditional mean and discard `max(1000, 10 p)`
/// draws before the first returned row.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    model: &'a VarModel,
    chol: DMatrix<f64>,
    mean: DVector<f64>,
    burn_in: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a VarModel) -> Result<Self> {
        let check = stability(model);
        if !check.stable {
            return Err(Error::Unstable {
                radius: check.spectral_radius,
            });
        }
        let chol = model
            .sigma()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid_argument("innovation covariance is not positive definite"))?
            .l();
        Ok(Self {
            model,
            chol,
            mean: model.mean()?,
            burn_in: (10 * model.p()).max(1000),
        })
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// A `t x k` path.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R, t: usize) -> DMatrix<f64> {
        let k = self.model.k();
        let p = self.model.p();
        let total = self.burn_in + t;
        // Ring of the last p states, newest at index 0.
        let mut history: Vec<DVector<f64>> = vec![self.mean.clone(); p];
        let mut out = DMatrix::zeros(t, k);
        let mut z = DVector::zeros(k);
        let mut next = DVector::zeros(k);
        for step in 0..total {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            next.copy_from(self.model.intercept());
            next.gemv(1.0, &self.chol, &z, 1.0);
            for (phi, past) in self.model.phi().iter().zip(&history) {
                next.gemv(1.0, phi, past, 1.0);
            }
            history.rotate_right(1);
            history[0].copy_from(&next);
            if step >= self.burn_in {
                out.row_mut(step - self.burn_in).copy_from(&next.transpose());
            }
        }
        out
    }
}

/// `n` consecutive weekdays starting at (or after) `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut day = start;
    while out.len() < n {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day + Days::new(1);
    }
    out
}

/// Deterministic synthetic panel of length `t` from a known VAR.
///
/// Dates are weekdays from 2000-01-03; columns carry the model's variable
/// names. The panel is tagged `Log`, standing in for log volatilities.
pub fn synth_var_panel(model: &VarModel, t: usize, seed: u64) -> Result<VolatilityPanel> {
    if model.k() < 2 {
        return Err(Error::invalid_argument("synthetic panels need k >= 2"));
    }
    let sim = Simulator::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = sim.simulate(&mut rng, t);
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    VolatilityPanel::new(
        business_days(start, t),
        model.variable_names().to_vec(),
        values,
        Transform::Log,
    )
}
