//! Ordinary least-squares linear regression.
//!
//! Solves the centered normal equations by Cholesky factorization with a tiny
//! ridge term so that exactly collinear columns (the repeated year feature,
//! for instance) stay solvable without materially perturbing well-posed fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }
}

pub fn fit(rows: &[Vec<f64>], targets: &[f64]) -> Result<LinearModel> {
    let n = rows.len();
    if n == 0 || n != targets.len() {
        return Err(Error::InvalidConfig(
            "linear regression requires equal nonempty rows and targets".into(),
        ));
    }
    let d = rows[0].len();

    let mut x_mean = vec![0.0; d];
    for row in rows {
        for (m, &x) in x_mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    let y_mean = targets.iter().sum::<f64>() / n as f64;

    // Gram matrix and right-hand side on centered data.
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (row, &y) in rows.iter().zip(targets) {
        for i in 0..d {
            centered[i] = row[i] - x_mean[i];
        }
        let yc = y - y_mean;
        for i in 0..d {
            rhs[i] += centered[i] * yc;
            for j in i..d {
                gram[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i * d + j] = gram[j * d + i];
        }
    }
    let trace: f64 = (0..d).map(|i| gram[i * d + i]).sum();
    let ridge = RIDGE_SCALE * (trace / d as f64).max(1e-12);
    for i in 0..d {
        gram[i * d + i] += ridge;
    }

    let weights = cholesky_solve(&mut gram, &rhs, d)?;
    let intercept = y_mean
        - weights
            .iter()
            .zip(&x_mean)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

/// Solves `a x = b` for symmetric positive-definite `a` (overwritten).
fn cholesky_solve(a: &mut [f64], b: &[f64], d: usize) -> Result<Vec<f64>> {
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= a[i * d + k] * a[j * d + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::InvalidConfig(
                        "normal equations are not positive definite".into(),
                    ));
                }
                a[i * d + j] = sum.sqrt();
            } else {
                a[i * d + j] = sum / a[j * d + j];
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= a[i * d + k] * y[k];
        }
        y[i] = sum / a[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = y[i];
        for k in (i + 1)..d {
            sum -= a[k * d + i] * x[k];
        }
        x[i] = sum / a[i * d + i];
    }
    Ok(x)
}
