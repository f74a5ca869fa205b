//! Shared fixtures for integration tests: a fleet of random stable VARs and
//! independent reference computations written with plain nested vectors.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spillover::varcore::{stability, VarModel};

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_rows(rows: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, m, q) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; q]; n];
    for i in 0..n {
        for l in 0..m {
            for j in 0..q {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// MA coefficients as top-left blocks of powers of the companion matrix.
pub fn ma_by_companion_powers(phi: &[Mat], terms: usize) -> Vec<Mat> {
    let k = phi[0].len();
    let p = phi.len();
    let n = k * p;
    let mut comp = vec![vec![0.0; n]; n];
    for (lag, m) in phi.iter().enumerate() {
        for i in 0..k {
            for j in 0..k {
                comp[i][lag * k + j] = m[i][j];
            }
        }
    }
    for i in k..n {
        comp[i][i - k] = 1.0;
    }
    let mut power: Mat = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut out = Vec::with_capacity(terms);
    for _ in 0..terms {
        out.push(power[..k].iter().map(|r| r[..k].to_vec()).collect());
        power = matmul(&comp, &power);
    }
    out
}

/// Row-standardized generalized FEVD by direct summation over `h < horizon`.
pub fn oracle_gfevd(phi: &[Mat], sigma: &Mat, horizon: usize) -> Mat {
    let k = sigma.len();
    let psi = ma_by_companion_powers(phi, horizon);
    let mut num = vec![vec![0.0; k]; k];
    let mut den = vec![0.0; k];
    for ps in &psi {
        let a = matmul(ps, sigma);
        let v = matmul(&a, &transpose(ps));
        for i in 0..k {
            den[i] += v[i][i];
            for j in 0..k {
                num[i][j] += a[i][j] * a[i][j] / sigma[j][j];
            }
        }
    }
    let raw: Mat = (0..k).map(|i| (0..k).map(|j| num[i][j] / den[i]).collect()).collect();
    raw.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn oracle_total(theta: &Mat) -> f64 {
    let k = theta.len();
    1.0 - (0..k).map(|i| theta[i][i]).sum::<f64>() / k as f64
}

pub fn model_phi(model: &VarModel) -> Vec<Mat> {
    model.phi().iter().map(to_mat).collect()
}

/// Stationary covariance of a VAR(1): solve `G = A G A' + S` through
/// `vec(G) = (I - A (x) A)^-1 vec(S)` with Gaussian elimination.
pub fn lyapunov_var1(a: &Mat, s: &Mat) -> Mat {
    let k = a.len();
    let n = k * k;
    let mut m = vec![vec![0.0; n + 1]; n];
    for i in 0..k {
        for j in 0..k {
            let row = i * k + j;
            m[row][row] += 1.0;
            for p in 0..k {
                for q in 0..k {
                    m[row][p * k + q] -= a[i][p] * a[j][q];
                }
            }
            m[row][n] = s[i][j];
        }
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                let pivot_row = m[col].clone();
                for (c, v) in m[row].iter_mut().enumerate().skip(col) {
                    *v -= f * pivot_row[c];
                }
            }
        }
    }
    (0..k).map(|i| (0..k).map(|j| m[i * k + j][n] / m[i * k + j][i * k + j]).collect()).collect()
}

/// Random stable VAR with spectral radius drawn from `radius_range`.
pub fn random_stable_var(rng: &mut ChaCha8Rng, k: usize, p: usize, radius_range: (f64, f64)) -> VarModel {
    loop {
        let phi: Vec<DMatrix<f64>> = (0..p)
            .map(|lag| DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.4 / (lag + 1) as f64))
            .collect();
        let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = &a * a.transpose() / k as f64 + DMatrix::identity(k, k) * 0.1;
        let raw = VarModel::new(None, phi.clone(), sigma.clone(), VarModel::default_names(k)).unwrap();
        let radius = stability(&raw).spectral_radius;
        if radius < 1e-3 {
            continue;
        }
        let target = rng.random_range(radius_range.0..radius_range.1);
        // Scaling phi_j by c^j scales every companion eigenvalue by c.
        let c = target / radius;
        let scaled = phi.iter().enumerate().map(|(j, m)| m * c.powi(j as i32 + 1)).collect();
        return VarModel::new(None, scaled, sigma, VarModel::default_names(k)).unwrap();
    }
}

/// 200 random stable models, k in {2, 3, 5}, p in {1, 2}, radius <= 0.9.
pub fn fleet(n: usize, seed: u64) -> Vec<VarModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = [2, 3, 5][i % 3];
            let p = 1 + (i / 3) % 2;
            random_stable_var(&mut rng, k, p, (0.2, 0.9))
        })
        .collect()
}

pub fn max_abs_diff(a: &Mat, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - b[(i, j)]).abs());
        }
    }
    worst
}
