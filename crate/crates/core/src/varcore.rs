//! VAR(p) estimation, stability and the truncated moving-average representation.
//!
//! The model is `x_t = c + sum_{j=1..p} phi_j x_{t-j} + e_t` with
//! `e_t ~ N(0, sigma)`. It is fitted equation by equation with least squares
//! through a QR decomposition of the regressor matrix; the residual
//! covariance divides by the effective sample size `T - p`.

use nalgebra::{DMatrix, DMatrixView, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VolatilityPanel;
use crate::matrix_serde;

/// Models whose companion spectral radius reaches `1 - STABILITY_EPS` are
/// treated as unstable.
pub const STABILITY_EPS: f64 = 1e-8;

/// Default number of moving-average terms kept after `psi_0`.
pub const DEFAULT_H_TRUNC: usize = 100;

/// Pivot threshold, relative to the regressor column norm, below which the
/// regressor matrix is declared rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    k: usize,
    p: usize,
    has_intercept: bool,
    #[serde(with = "matrix_serde::vector")]
    intercept: DVector<f64>,
    #[serde(with = "matrix_serde::matrices")]
    phi: Vec<DMatrix<f64>>,
    #[serde(with = "matrix_serde::matrix")]
    sigma: DMatrix<f64>,
    n_obs: usize,
    variable_names: Vec<String>,
}

impl VarModel {
    /// Assemble a model from known parameters (simulation, truth files).
    ///
    /// `sigma` is symmetrized. `intercept = None` means no constant term.
    pub fn new(
        intercept: Option<DVector<f64>>,
        phi: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
        variable_names: Vec<String>,
    ) -> Result<Self> {
        let k = sigma.nrows();
        if k == 0 || sigma.ncols() != k {
            return Err(Error::invalid_argument("sigma must be a non-empty square matrix"));
        }
        if phi.is_empty() {
            return Err(Error::invalid_argument("a VAR needs at least one lag matrix"));
        }
        if phi.iter().any(|m| m.nrows() != k || m.ncols() != k) {
            return Err(Error::invalid_argument(format!("every lag matrix must be {k}x{k}")));
        }
        if variable_names.len() != k {
            return Err(Error::invalid_argument(format!(
                "{} variable names for {k} variables",
                variable_names.len()
            )));
        }
        let has_intercept = intercept.is_some();
        let intercept = intercept.unwrap_or_else(|| DVector::zeros(k));
        if intercept.len() != k {
            return Err(Error::invalid_argument("intercept length must equal k"));
        }
        if sigma.iter().chain(intercept.iter()).chain(phi.iter().flat_map(|m| m.iter())).any(|v| !v.is_finite()) {
            return Err(Error::invalid_argument("VAR parameters must be finite"));
        }
        Ok(Self {
            k,
            p: phi.len(),
            has_intercept,
            intercept,
            phi,
            sigma: symmetrize(&sigma),
            n_obs: 0,
            variable_names,
        })
    }

    /// Default names `V1..Vk`.
    pub fn default_names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("V{i}")).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    /// Lag matrices `phi_1..phi_p`.
    pub fn phi(&self) -> &[DMatrix<f64>] {
        &self.phi
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Observations used in estimation (`T - p`); 0 for assembled models.
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// Same model with a different innovation covariance.
    pub fn with_sigma(&self, sigma: DMatrix<f64>) -> Result<Self> {
        let mut m = Self::new(
            self.has_intercept.then(|| self.intercept.clone()),
            self.phi.clone(),
            sigma,
            self.variable_names.clone(),
        )?;
        m.n_obs = self.n_obs;
        Ok(m)
    }

    /// `kp x kp` companion matrix.
    pub fn companion(&self) -> DMatrix<f64> {
        let (k, p) = (self.k, self.p);
        let mut c = DMatrix::zeros(k * p, k * p);
        for (j, phi) in self.phi.iter().enumerate() {
            c.view_mut((0, j * k), (k, k)).copy_from(phi);
        }
        for i in k..k * p {
            c[(i, i - k)] = 1.0;
        }
        c
    }

    /// Unconditional mean `(I - sum phi_j)^-1 c`.
    pub fn mean(&self) -> Result<DVector<f64>> {
        let mut a = DMatrix::identity(self.k, self.k);
        for phi in &self.phi {
            a -= phi;
        }
        a.lu()
            .solve(&self.intercept)
            .ok_or_else(|| Error::Numeric("I - sum(phi) is singular".into()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and re-validate a serialized model.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: VarModel = serde_json::from_str(text)?;
        let mut model = VarModel::new(
            raw.has_intercept.then_some(raw.intercept),
            raw.phi,
            raw.sigma,
            raw.variable_names,
        )?;
        model.n_obs = raw.n_obs;
        Ok(model)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Fit a VAR(p) to a panel.
pub fn fit_var(panel: &VolatilityPanel, p: usize, include_intercept: bool) -> Result<VarModel> {
    fit_var_data(
        panel.values().as_view(),
        panel.symbols().to_vec(),
        p,
        include_intercept,
    )
}

/// Fit a VAR(p) to the rows of `data` (T x k), e.g. one rolling window.
pub fn fit_var_data(
    data: DMatrixView<'_, f64>,
    variable_names: Vec<String>,
    p: usize,
    include_intercept: bool,
) -> Result<VarModel> {
    let (t, k) = data.shape();
    if p == 0 {
        return Err(Error::invalid_argument("lag order must be at least 1"));
    }
    if variable_names.len() != k {
        return Err(Error::invalid_argument("variable names do not match the data"));
    }
    let required = k * p + 1;
    let available = t.saturating_sub(p);
    if available < required {
        return Err(Error::InsufficientSample {
            required: required + p,
            available: t,
        });
    }

    let n = t - p;
    let offset = usize::from(include_intercept);
    let m = k * p + offset;
    let mut x = DMatrix::zeros(n, m);
    let mut y = DMatrix::zeros(n, k);
    for row in 0..n {
        let time = row + p;
        if include_intercept {
            x[(row, 0)] = 1.0;
        }
        for lag in 1..=p {
            for v in 0..k {
                x[(row, offset + (lag - 1) * k + v)] = data[(time - lag, v)];
            }
        }
        for v in 0..k {
            y[(row, v)] = data[(time, v)];
        }
    }

    let column_norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let qr = x.clone().qr();
    let r = qr.r();
    for (column, &norm) in column_norms.iter().enumerate() {
        let pivot = r[(column, column)].abs();
        if !(pivot > RANK_TOL * norm.max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficient { column, pivot });
        }
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, m).into_owned())
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;

    let residuals = &y - &x * &beta;
    let sigma = residuals.transpose() * &residuals / n as f64;

    // beta is m x k: row r holds the coefficient of regressor r in each equation.
    let intercept = include_intercept.then(|| DVector::from_fn(k, |i, _| beta[(0, i)]));
    let phi = (0..p)
        .map(|lag| DMatrix::from_fn(k, k, |i, j| beta[(offset + lag * k + j, i)]))
        .collect();
    let mut model = VarModel::new(intercept, phi, sigma, variable_names)?;
    model.n_obs = n;
    Ok(model)
}

/// Residuals of `model` on `data`, one row per usable observation.
pub fn residuals(model: &VarModel, data: DMatrixView<'_, f64>) -> DMatrix<f64> {
    let (t, k) = data.shape();
    let p = model.p;
    DMatrix::from_fn(t.saturating_sub(p), k, |row, i| {
        let time = row + p;
        let mut fitted = model.intercept[i];
        for (lag, phi) in model.phi.iter().enumerate() {
            for j in 0..k {
                fitted += phi[(i, j)] * data[(time - lag - 1, j)];
            }
        }
        data[(time, i)] - fitted
    })
}

/// Outcome of the companion-matrix eigenvalue check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    pub spectral_radius: f64,
}

pub fn stability(model: &VarModel) -> Stability {
    let radius = spectral_radius(&model.companion());
    Stability {
        stable: radius < 1.0 - STABILITY_EPS,
        spectral_radius: radius,
    }
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    match Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

/// `||A^(2^s)||^(1/2^s)` with renormalisation; fallback when QR iteration stalls.
fn gelfand_radius(m: &DMatrix<f64>) -> f64 {
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..30 {
        let norm = a.norm();
        if norm == 0.0 {
            return 0.0;
        }
        a /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        a = &a * &a;
        power *= 2.0;
    }
    ((log_scale + a.norm().ln()) / power).exp()
}

/// Moving-average coefficients `psi_0..psi_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct WoldSequence {
    psi: Vec<DMatrix<f64>>,
}

impl WoldSequence {
    pub fn psi(&self) -> &[DMatrix<f64>] {
        &self.psi
    }

    pub fn truncation(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn k(&self) -> usize {
        self.psi[0].nrows()
    }

    /// `||psi_H||_F / ||psi_0||_F`.
    pub fn tail_ratio(&self) -> f64 {
        self.psi[self.truncation()].norm() / self.psi[0].norm()
    }
}

/// `psi_0 = I`, `psi_h = sum_{j=1..min(h,p)} phi_j psi_{h-j}`.
pub fn wold(model: &VarModel, h_trunc: usize) -> Result<WoldSequence> {
    let check = stability(model);
    if !check.stable {
        return Err(Error::Unstable {
            radius: check.spectral_radius,
        });
    }
    let seq = wold_unchecked(model, h_trunc);
    if h_trunc > 0 && seq.tail_ratio() >= 1.0 {
        log::warn!(
            "MA tail has not decayed: ||psi_{h_trunc}|| / ||psi_0|| = {:.3e}",
            seq.tail_ratio()
        );
    }
    Ok(seq)
}

pub(crate) fn wold_unchecked(model: &VarModel, h_trunc: usize) -> WoldSequence {
    let k = model.k;
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(h_trunc + 1);
    psi.push(DMatrix::identity(k, k));
    for h in 1..=h_trunc {
        let mut acc = DMatrix::zeros(k, k);
        for (j, phi) in model.phi.iter().enumerate().take(h) {
            acc.gemm(1.0, phi, &psi[h - j - 1], 1.0);
        }
        psi.push(acc);
    }
    WoldSequence { psi }
}
