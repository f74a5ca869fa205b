//! Generalized impulse responses, the horizon-H generalized forecast-error
//! variance decomposition, and the directional connectedness measures built
//! on it.
//!
//! Shocks use generalized (order-invariant) identification, so raw rows of
//! the decomposition do not sum to one; tables keep the raw shares and their
//! row-standardized version.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_serde;
use crate::varcore::{VarModel, WoldSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Finite(usize),
    Unconditional,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(h) => write!(f, "H={h}"),
            Horizon::Unconditional => f.write_str("unconditional"),
        }
    }
}

/// Standardized variance shares: row `i` receives, column `j` is the shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessTable {
    #[serde(with = "matrix_serde::matrix")]
    pub theta: DMatrix<f64>,
    #[serde(with = "matrix_serde::opt_matrix", default)]
    pub raw: Option<DMatrix<f64>>,
    pub horizon: Horizon,
    pub variable_names: Vec<String>,
}

impl ConnectednessTable {
    /// Row-standardize `raw` into a table.
    pub fn from_raw(raw: DMatrix<f64>, horizon: Horizon, variable_names: Vec<String>) -> Result<Self> {
        let theta = standardize_rows(&raw)?;
        Ok(Self {
            theta,
            raw: Some(raw),
            horizon,
            variable_names,
        })
    }

    pub fn k(&self) -> usize {
        self.theta.nrows()
    }

    /// Spillover-table CSV: header row and first column carry the names.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.variable_names.iter().cloned());
        w.write_record(&header)?;
        for (i, name) in self.variable_names.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(self.theta.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn standardize_rows(raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut theta = raw.clone();
    for (i, mut row) in theta.row_iter_mut().enumerate() {
        let sum: f64 = row.sum();
        if !(sum > 0.0) {
            return Err(Error::Numeric(format!("row {i} of the decomposition has no mass")));
        }
        row /= sum;
    }
    Ok(theta)
}

/// Total, directional and pairwise connectedness of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyMeasures {
    pub total: f64,
    #[serde(with = "matrix_serde::vector")]
    pub from_others: DVector<f64>,
    #[serde(with = "matrix_serde::vector")]
    pub to_others: DVector<f64>,
    #[serde(with = "matrix_serde::vector")]
    pub net: DVector<f64>,
    /// `pairwise[(i, j)] = theta[(j, i)] - theta[(i, j)]`.
    #[serde(with = "matrix_serde::matrix")]
    pub pairwise: DMatrix<f64>,
}

/// One-standard-deviation generalized impulse response of all variables to
/// a shock in `j`, `h` periods later: `psi_h sigma e_j / sqrt(sigma_jj)`.
pub fn girf(model: &VarModel, wold: &WoldSequence, j: usize, h: usize) -> Result<DVector<f64>> {
    let k = model.k();
    if j >= k {
        return Err(Error::invalid_argument(format!("shock index {j} out of range for k = {k}")));
    }
    if h > wold.truncation() {
        return Err(Error::invalid_argument(format!(
            "horizon {h} beyond MA truncation {}",
            wold.truncation()
        )));
    }
    let s_jj = model.sigma()[(j, j)];
    if !(s_jj > 0.0) {
        return Err(Error::Numeric(format!("shock variance sigma[{j},{j}] = {s_jj} is not positive")));
    }
    Ok(&wold.psi()[h] * model.sigma().column(j) / s_jj.sqrt())
}

/// Generalized FEVD summing MA terms `h = 0..H-1` (H = 1 is the one-step
/// decomposition).
pub fn gfevd(model: &VarModel, wold: &WoldSequence, horizon: usize) -> Result<ConnectednessTable> {
    if horizon == 0 || horizon > wold.truncation() + 1 {
        return Err(Error::invalid_argument(format!(
            "horizon must lie in 1..={}, got {horizon}",
            wold.truncation() + 1
        )));
    }
    let (numerator, denominator) = gfevd_sums(model, wold, horizon)?;
    let raw = DMatrix::from_fn(model.k(), model.k(), |i, j| numerator[(i, j)] / denominator[i]);
    ConnectednessTable::from_raw(raw, Horizon::Finite(horizon), model.variable_names().to_vec())
}

/// Unnormalized numerator `sum_h (psi_h sigma)_ij^2 / sigma_jj` and
/// denominator `sum_h (psi_h sigma psi_h')_ii`.
pub fn gfevd_sums(
    model: &VarModel,
    wold: &WoldSequence,
    horizon: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let k = model.k();
    let sigma = model.sigma();
    let diag = sigma.diagonal();
    if let Some(j) = diag.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Numeric(format!("sigma[{j},{j}] is not positive")));
    }
    let mut numerator = DMatrix::zeros(k, k);
    let mut denominator = DVector::zeros(k);
    let mut a = DMatrix::zeros(k, k);
    for psi in &wold.psi()[..horizon.min(wold.psi().len())] {
        a.gemm(1.0, psi, sigma, 0.0);
        for i in 0..k {
            let mut var_i = 0.0;
            for j in 0..k {
                numerator[(i, j)] += a[(i, j)] * a[(i, j)] / diag[j];
                var_i += a[(i, j)] * psi[(i, j)];
            }
            denominator[i] += var_i;
        }
    }
    if let Some(i) = denominator.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Numeric(format!("forecast error variance of variable {i} is zero")));
    }
    Ok((numerator, denominator))
}

/// Measures of a table whose entries sum to `k` (rows sum to one).
pub fn dy_measures(table: &ConnectednessTable) -> DyMeasures {
    measures_of(&table.theta)
}

pub(crate) fn measures_of(theta: &DMatrix<f64>) -> DyMeasures {
    let k = theta.nrows();
    let from_others = DVector::from_fn(k, |i, _| (0..k).filter(|&j| j != i).map(|j| theta[(i, j)]).sum());
    let to_others = DVector::from_fn(k, |i, _| (0..k).filter(|&j| j != i).map(|j| theta[(j, i)]).sum());
    let net = &to_others - &from_others;
    let pairwise = DMatrix::from_fn(k, k, |i, j| theta[(j, i)] - theta[(i, j)]);
    DyMeasures {
        total: 1.0 - theta.trace() / k as f64,
        from_others,
        to_others,
        net,
        pairwise,
    }
}
