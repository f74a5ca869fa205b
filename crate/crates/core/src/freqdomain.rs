//! Frequency decomposition of the generalized variance decomposition.
//!
//! The unconditional decomposition is spread over frequencies through the
//! frequency response `Psi(e^{-iw}) = sum_h psi_h e^{-ihw}`. Per-frequency
//! numerators `|(Psi(e^{-iw}) sigma)_ij|^2 / sigma_jj` are evaluated on a grid
//! of `N` midpoints `w_m = pi (m - 1/2) / N` in `(0, pi)`. On that grid the
//! plain mean equals the integral over `(0, pi)` exactly for trigonometric
//! polynomials of degree below `2N`, so integrating over the full band
//! reproduces the time-domain decomposition at the truncation horizon up to
//! rounding.
//!
//! Band tables are standardized by the row sums of the full-band integral
//! (not frequency by frequency), which makes band tables add up exactly to
//! the unconditional table. Within-band measures describe connections inside
//! a band; multiplying by the band's spectral weight `gamma` gives absolute
//! measures that sum over a partition of `(0, pi]` to the unconditional ones.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_serde;
use crate::timedomain::{measures_of, ConnectednessTable, DyMeasures, Horizon};
use crate::varcore::{stability, VarModel, WoldSequence};

pub const DEFAULT_N_FREQ: usize = 512;
pub const MIN_N_FREQ: usize = 64;
/// Negative spectral mass above this magnitude is an error, below it is rounding.
pub const CLIP_TOL: f64 = 1e-14;

/// Frequency band `(lower, upper]` in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub lower: f64,
    pub upper: f64,
    pub label: String,
}

impl BandSpec {
    pub fn new(lower: f64, upper: f64, label: impl Into<String>) -> Result<Self> {
        if !(0.0 <= lower && lower < upper && upper <= PI) {
            return Err(Error::invalid_argument(format!(
                "band must satisfy 0 <= lower < upper <= pi, got ({lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            label: label.into(),
        })
    }

    /// `(0, pi]`.
    pub fn full() -> Self {
        Self {
            lower: 0.0,
            upper: PI,
            label: "all".into(),
        }
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.lower < omega && omega <= self.upper
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:.6}, {:.6}]", self.label, self.lower, self.upper)
    }
}

/// Band for cycles lasting `short_days` to `long_days`; a period of `D` days
/// maps to the frequency `pi / D`, so 5 days sits at `pi / 5`. An infinite
/// `long_days` extends the band down to frequency zero.
pub fn days_to_band(short_days: f64, long_days: f64) -> Result<BandSpec> {
    if !(short_days >= 1.0) {
        return Err(Error::invalid_argument(format!(
            "short period {short_days} days is below one day"
        )));
    }
    if !(short_days < long_days) {
        return Err(Error::invalid_argument(format!(
            "band {short_days}:{long_days} must have short < long"
        )));
    }
    let lower = if long_days.is_infinite() { 0.0 } else { PI / long_days };
    let label = if long_days.is_infinite() {
        format!("{short_days}+ days")
    } else {
        format!("{short_days}\u{2013}{long_days} days")
    };
    BandSpec::new(lower, PI / short_days, label)
}

/// Parse `short:long[,short:long...]` with `inf` allowed as the long side.
pub fn parse_bands(spec: &str) -> Result<Vec<BandSpec>> {
    let bands = spec
        .split(',')
        .map(|item| {
            let (short, long) = item.trim().split_once(':').ok_or_else(|| {
                Error::invalid_argument(format!("band `{item}` is not of the form short:long"))
            })?;
            let num = |s: &str| -> Result<f64> {
                match s.trim() {
                    "inf" | "Inf" | "INF" => Ok(f64::INFINITY),
                    v => v
                        .parse()
                        .map_err(|_| Error::invalid_argument(format!("bad day count `{v}`"))),
                }
            };
            days_to_band(num(short)?, num(long)?)
        })
        .collect::<Result<Vec<_>>>()?;
    if bands.is_empty() {
        return Err(Error::invalid_argument("empty band list"));
    }
    Ok(bands)
}

/// Check that `bands` are disjoint and cover `(0, pi]` (in any order).
pub fn validate_partition(bands: &[BandSpec]) -> Result<()> {
    const TOL: f64 = 1e-12;
    let mut sorted: Vec<&BandSpec> = bands.iter().collect();
    sorted.sort_by(|a, b| a.lower.total_cmp(&b.lower));
    let mut edge = 0.0;
    for band in sorted {
        if (band.lower - edge).abs() > TOL {
            return Err(Error::invalid_argument(format!(
                "bands do not partition (0, pi]: gap or overlap at {edge:.6}"
            )));
        }
        edge = band.upper;
    }
    if (edge - PI).abs() > TOL {
        return Err(Error::invalid_argument("bands do not reach pi"));
    }
    Ok(())
}

/// Midpoint frequencies `pi (m - 1/2) / n` for `m = 1..=n`.
pub fn grid_frequencies(n_freq: usize) -> Vec<f64> {
    (1..=n_freq)
        .map(|m| PI * (m as f64 - 0.5) / n_freq as f64)
        .collect()
}

/// `sum_{h=0..H} psi_h e^{-i h w}`.
pub fn frequency_response(wold: &WoldSequence, omega: f64) -> DMatrix<Complex<f64>> {
    let k = wold.k();
    let mut out = DMatrix::from_element(k, k, Complex::new(0.0, 0.0));
    for (h, psi) in wold.psi().iter().enumerate() {
        let z = Complex::from_polar(1.0, -(h as f64) * omega);
        out.zip_apply(psi, |acc, v| *acc += z * v);
    }
    out
}

/// `Psi(e^{-iw}) sigma Psi(e^{-iw})^*`.
pub fn spectral_density(
    wold: &WoldSequence,
    sigma: &DMatrix<f64>,
    omega: f64,
) -> DMatrix<Complex<f64>> {
    let response = frequency_response(wold, omega);
    let sigma_c = sigma.map(|v| Complex::new(v, 0.0));
    &response * sigma_c * response.adjoint()
}

/// Cosine and sine tables for a fixed grid size and MA truncation, shared by
/// every window of a rolling run.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    frequencies: Vec<f64>,
    h_trunc: usize,
    cos: DMatrix<f64>,
    sin: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn new(n_freq: usize, h_trunc: usize) -> Result<Self> {
        if n_freq < MIN_N_FREQ {
            return Err(Error::invalid_argument(format!(
                "need at least {MIN_N_FREQ} frequencies, got {n_freq}"
            )));
        }
        let frequencies = grid_frequencies(n_freq);
        let cos = DMatrix::from_fn(n_freq, h_trunc + 1, |m, h| (h as f64 * frequencies[m]).cos());
        let sin = DMatrix::from_fn(n_freq, h_trunc + 1, |m, h| (h as f64 * frequencies[m]).sin());
        Ok(Self {
            frequencies,
            h_trunc,
            cos,
            sin,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.frequencies.len()
    }

    pub fn h_trunc(&self) -> usize {
        self.h_trunc
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }
}

/// Per-frequency unnormalized decomposition on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    frequencies: Vec<f64>,
    k: usize,
    h_trunc: usize,
    /// `n_freq * k * k`, row-major per frequency.
    numerators: Vec<f64>,
    /// `n_freq * k`.
    denominators: Vec<f64>,
    variable_names: Vec<String>,
}

impl SpectralGrid {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn n_freq(&self) -> usize {
        self.frequencies.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h_trunc(&self) -> usize {
        self.h_trunc
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// `n_ij(w_m) = |(Psi(e^{-iw_m}) sigma)_ij|^2 / sigma_jj`.
    pub fn numerator(&self, m: usize) -> DMatrix<f64> {
        let kk = self.k * self.k;
        DMatrix::from_row_slice(self.k, self.k, &self.numerators[m * kk..(m + 1) * kk])
    }

    /// `d_i(w_m) = (Psi sigma Psi^*)_ii`, the spectral density diagonal.
    pub fn denominator(&self, m: usize) -> DVector<f64> {
        DVector::from_row_slice(&self.denominators[m * self.k..(m + 1) * self.k])
    }

    fn in_band(&self, band: &BandSpec) -> impl Iterator<Item = usize> + '_ {
        let band = band.clone();
        self.frequencies
            .iter()
            .enumerate()
            .filter(move |(_, &w)| band.contains(w))
            .map(|(m, _)| m)
    }

    fn sum_numerators(&self, indices: impl Iterator<Item = usize>) -> DMatrix<f64> {
        let kk = self.k * self.k;
        let mut acc = vec![0.0; kk];
        for m in indices {
            for (a, v) in acc.iter_mut().zip(&self.numerators[m * kk..(m + 1) * kk]) {
                *a += v;
            }
        }
        DMatrix::from_row_slice(self.k, self.k, &acc)
    }

    fn sum_denominators(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.k);
        for chunk in self.denominators.chunks_exact(self.k) {
            for (a, v) in acc.iter_mut().zip(chunk) {
                *a += v;
            }
        }
        acc
    }

    /// Full-band integrated decomposition: the frequency route to the
    /// unconditional generalized FEVD.
    pub fn unconditional_table(&self) -> Result<ConnectednessTable> {
        let numer = self.sum_numerators(0..self.n_freq());
        let denom = self.sum_denominators();
        let raw = DMatrix::from_fn(self.k, self.k, |i, j| numer[(i, j)] / denom[i]);
        ConnectednessTable::from_raw(raw, Horizon::Unconditional, self.variable_names.clone())
    }
}

/// Evaluate the per-frequency decomposition on a fresh grid of `n_freq` points.
pub fn spectral_gfevd(model: &VarModel, wold: &WoldSequence, n_freq: usize) -> Result<SpectralGrid> {
    let basis = SpectralBasis::new(n_freq, wold.truncation())?;
    spectral_gfevd_with(&basis, model, wold)
}

/// Evaluate the per-frequency decomposition on a prebuilt basis.
pub fn spectral_gfevd_with(
    basis: &SpectralBasis,
    model: &VarModel,
    wold: &WoldSequence,
) -> Result<SpectralGrid> {
    let check = stability(model);
    if !check.stable {
        return Err(Error::Unstable {
            radius: check.spectral_radius,
        });
    }
    if basis.h_trunc != wold.truncation() {
        return Err(Error::invalid_argument(format!(
            "basis built for H = {} but MA sequence has H = {}",
            basis.h_trunc,
            wold.truncation()
        )));
    }
    let k = model.k();
    let kk = k * k;
    let sigma = model.sigma();
    let diag = sigma.diagonal();
    if let Some(j) = diag.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Numeric(format!("sigma[{j},{j}] is not positive")));
    }

    // Row h: vec(psi_h sigma) followed by vec(psi_h), both row-major.
    let terms = basis.h_trunc + 1;
    let mut coeffs = DMatrix::zeros(terms, 2 * kk);
    let mut a = DMatrix::zeros(k, k);
    for (h, psi) in wold.psi().iter().enumerate() {
        a.gemm(1.0, psi, sigma, 0.0);
        for i in 0..k {
            for j in 0..k {
                coeffs[(h, i * k + j)] = a[(i, j)];
                coeffs[(h, kk + i * k + j)] = psi[(i, j)];
            }
        }
    }
    // Real and (negated) imaginary parts of the responses at every frequency.
    let re = &basis.cos * &coeffs;
    let im = &basis.sin * &coeffs;

    let n = basis.n_freq();
    let mut numerators = Vec::with_capacity(n * kk);
    let mut denominators = Vec::with_capacity(n * k);
    for m in 0..n {
        for i in 0..k {
            let mut d = 0.0;
            for j in 0..k {
                let (fr, fi) = (re[(m, i * k + j)], im[(m, i * k + j)]);
                let (gr, gi) = (re[(m, kk + i * k + j)], im[(m, kk + i * k + j)]);
                numerators.push((fr * fr + fi * fi) / diag[j]);
                d += fr * gr + fi * gi;
            }
            if d < 0.0 {
                if d < -CLIP_TOL {
                    return Err(Error::Numeric(format!(
                        "negative spectral density {d:e} for variable {i} at w = {}",
                        basis.frequencies[m]
                    )));
                }
                d = 0.0;
            }
            denominators.push(d);
        }
    }
    Ok(SpectralGrid {
        frequencies: basis.frequencies.clone(),
        k,
        h_trunc: basis.h_trunc,
        numerators,
        denominators,
        variable_names: model.variable_names().to_vec(),
    })
}

/// How band integrals are normalized into shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    /// Divide by row sums of the full-band integral. Bands add up exactly.
    #[default]
    Global,
    /// Normalize every frequency's table to unit row sums, then integrate.
    /// Diagnostic only: band measures then no longer reconstruct the
    /// unconditional ones.
    PerFrequency,
}

/// One band's integrated decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTable {
    pub band: BandSpec,
    /// `(1/pi) int_band n_ij(w) dw / (1/pi) int_0^pi d_i(w) dw` (global) or
    /// `(1/pi) int_band n_ij(w)/d_i(w) dw` (per frequency).
    #[serde(with = "matrix_serde::matrix")]
    pub unstandardized: DMatrix<f64>,
    /// Shares; summed over a partition they give a table with unit row sums.
    #[serde(with = "matrix_serde::matrix")]
    pub standardized: DMatrix<f64>,
    pub grid_points: usize,
}

pub fn band_table(grid: &SpectralGrid, band: &BandSpec) -> Result<BandTable> {
    band_table_with(grid, band, Standardization::Global)
}

pub fn band_table_with(
    grid: &SpectralGrid,
    band: &BandSpec,
    standardization: Standardization,
) -> Result<BandTable> {
    let indices: Vec<usize> = grid.in_band(band).collect();
    if indices.is_empty() {
        return Err(Error::EmptyBand {
            label: band.label.clone(),
        });
    }
    let k = grid.k;
    let n = grid.n_freq() as f64;
    let (unstandardized, standardized) = match standardization {
        Standardization::Global => {
            let numer = grid.sum_numerators(indices.iter().copied());
            let full = grid.sum_numerators(0..grid.n_freq());
            let denom = grid.sum_denominators();
            let row_mass: Vec<f64> = full.row_iter().map(|r| r.sum()).collect();
            if let Some(i) = row_mass.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::Numeric(format!("variable {i} has no spectral mass")));
            }
            (
                DMatrix::from_fn(k, k, |i, j| numer[(i, j)] / denom[i]),
                DMatrix::from_fn(k, k, |i, j| numer[(i, j)] / row_mass[i]),
            )
        }
        Standardization::PerFrequency => {
            let mut raw = DMatrix::zeros(k, k);
            let mut shares = DMatrix::zeros(k, k);
            for &m in &indices {
                let numer = grid.numerator(m);
                let denom = grid.denominator(m);
                for i in 0..k {
                    let row_sum: f64 = numer.row(i).sum();
                    if !(row_sum > 0.0 && denom[i] > 0.0) {
                        return Err(Error::Numeric(format!(
                            "variable {i} has no spectral mass at w = {}",
                            grid.frequencies[m]
                        )));
                    }
                    for j in 0..k {
                        raw[(i, j)] += numer[(i, j)] / denom[i] / n;
                        shares[(i, j)] += numer[(i, j)] / row_sum / n;
                    }
                }
            }
            (raw, shares)
        }
    };
    Ok(BandTable {
        band: band.clone(),
        unstandardized,
        standardized,
        grid_points: indices.len(),
    })
}

/// Within and absolute connectedness on one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMeasures {
    pub band: BandSpec,
    /// Band shares as integrated (entries over a partition add up to the
    /// unconditional table).
    #[serde(with = "matrix_serde::matrix")]
    pub band_table: DMatrix<f64>,
    /// Band shares rescaled to total mass `k`, i.e. as if the band were the
    /// whole spectrum. `None` when the band carries no mass.
    #[serde(with = "matrix_serde::opt_matrix")]
    pub within_table: Option<DMatrix<f64>>,
    /// Within total, from, to, net and pairwise. `None` when undefined.
    pub within: Option<DyMeasures>,
    /// Share of total variance in the band, `(1/k) sum_ij band_table_ij`.
    pub gamma: f64,
    pub absolute_total: f64,
    #[serde(with = "matrix_serde::vector")]
    pub absolute_from: DVector<f64>,
    #[serde(with = "matrix_serde::vector")]
    pub absolute_to: DVector<f64>,
    pub grid_points: usize,
}

impl BandMeasures {
    pub fn within_total(&self) -> Option<f64> {
        self.within.as_ref().map(|w| w.total)
    }
}

pub fn band_measures(grid: &SpectralGrid, band: &BandSpec) -> Result<BandMeasures> {
    band_measures_with(grid, band, Standardization::Global)
}

pub fn band_measures_with(
    grid: &SpectralGrid,
    band: &BandSpec,
    standardization: Standardization,
) -> Result<BandMeasures> {
    let table = band_table_with(grid, band, standardization)?;
    Ok(measures_from_band_table(table, grid.k))
}

fn measures_from_band_table(table: BandTable, k: usize) -> BandMeasures {
    let theta = table.standardized;
    let mass: f64 = theta.sum();
    let gamma = mass / k as f64;
    let (within_table, within) = if mass > 0.0 {
        let scaled = &theta * (k as f64 / mass);
        let measures = measures_of(&scaled);
        (Some(scaled), Some(measures))
    } else {
        (None, None)
    };
    let (absolute_total, absolute_from, absolute_to) = match &within {
        Some(w) => (w.total * gamma, &w.from_others * gamma, &w.to_others * gamma),
        None => (0.0, DVector::zeros(k), DVector::zeros(k)),
    };
    BandMeasures {
        band: table.band,
        band_table: theta,
        within_table,
        within,
        gamma,
        absolute_total,
        absolute_from,
        absolute_to,
        grid_points: table.grid_points,
    }
}

/// `|sum_d absolute_total_d - total|`.
pub fn reconstruction_residual(bands: &[BandMeasures], total: f64) -> f64 {
    (bands.iter().map(|b| b.absolute_total).sum::<f64>() - total).abs()
}

/// Structured document keyed by band label.
pub fn band_report_json(bands: &[BandMeasures]) -> serde_json::Value {
    let map = bands
        .iter()
        .map(|b| (b.band.label.clone(), serde_json::to_value(b).expect("band measures serialize")))
        .collect::<serde_json::Map<_, _>>();
    serde_json::Value::Object(map)
}

/// Long format `band,measure,variable_i,variable_j,value`; undefined values
/// are written as `NA`.
pub fn write_band_csv<W: Write>(bands: &[BandMeasures], names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["band", "measure", "variable_i", "variable_j", "value"])?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for b in bands {
        let label = b.band.label.as_str();
        let mut scalar = |measure: &str, v: Option<f64>| w.write_record([label, measure, "", "", &fmt(v)]);
        scalar("within_total", b.within_total())?;
        scalar("gamma", Some(b.gamma))?;
        scalar("absolute_total", Some(b.absolute_total))?;
        for (i, name) in names.iter().enumerate() {
            let within = b.within.as_ref();
            let rows = [
                ("within_from", within.map(|m| m.from_others[i])),
                ("within_to", within.map(|m| m.to_others[i])),
                ("within_net", within.map(|m| m.net[i])),
                ("absolute_from", Some(b.absolute_from[i])),
                ("absolute_to", Some(b.absolute_to[i])),
            ];
            for (measure, v) in rows {
                w.write_record([label, measure, name, "", &fmt(v)])?;
            }
        }
        for (i, ni) in names.iter().enumerate() {
            for (j, nj) in names.iter().enumerate() {
                let pair = b.within.as_ref().map(|m| m.pairwise[(i, j)]);
                w.write_record([label, "within_pairwise", ni, nj, &fmt(pair)])?;
                let within = b.within_table.as_ref().map(|t| t[(i, j)]);
                w.write_record([label, "within_table", ni, nj, &fmt(within)])?;
                w.write_record([label, "band_table", ni, nj, &fmt(Some(b.band_table[(i, j)]))])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
