//! Ordinary least squares via the normal equations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::numerics::{cholesky_inverse, cholesky_solve, cholesky_unchecked, Matrix};

/// A pivot of `WᵀW` below this fraction of its column's own sum of squares
/// marks the column as (numerically) in the span of the preceding ones.
const RANK_TOL: f64 = 1e-10;

/// Degrees of freedom beyond which t quantiles are replaced by normal ones.
const NORMAL_DF_CUTOFF: f64 = 1e5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLinearModel {
    /// Intercept (when the design has one) first, in design column order.
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
    pub coef_covariance: Matrix,
    pub df_residual: usize,
    /// `(WᵀW)⁻¹`, kept for posterior draws of the coefficients.
    pub gram_inverse: Matrix,
}

impl FittedLinearModel {
    pub fn standard_error(&self, index: usize) -> f64 {
        self.coef_covariance[(index, index)].max(0.0).sqrt()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }
}

/// Least-squares fit of `response` on the columns of `design`.
///
/// The design must already contain an intercept column if one is wanted.
pub fn ols_fit(design: &Matrix, response: &[f64]) -> Result<FittedLinearModel> {
    let n = design.rows();
    let q = design.cols();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: response.len(),
        });
    }
    if n <= q {
        return Err(Error::TooFewRows {
            required: q + 1,
            actual: n,
        });
    }

    let mut gram = Matrix::zeros(q, q);
    let mut xty = vec![0.0; q];
    for i in 0..n {
        let row = design.row(i);
        let y = response[i];
        for a in 0..q {
            let ra = row[a];
            xty[a] += ra * y;
            for b in 0..=a {
                gram[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }

    let chol = cholesky_unchecked(&gram, |_, pivot, diag| pivot <= RANK_TOL * diag)
        .map_err(|e| match e {
            Error::NotPositiveDefinite { pivot } => Error::RankDeficient { column: pivot },
            other => other,
        })?;
    let coefficients = cholesky_solve(&chol, &xty);

    let rss: f64 = (0..n)
        .map(|i| {
            let fitted: f64 = design.row(i).iter().zip(&coefficients).map(|(x, b)| x * b).sum();
            let r = response[i] - fitted;
            r * r
        })
        .sum();
    let df_residual = n - q;
    let residual_variance = (rss / df_residual as f64).max(0.0);
    let gram_inverse = cholesky_inverse(&chol);
    let coef_covariance = gram_inverse.scaled(residual_variance);

    Ok(FittedLinearModel {
        coefficients,
        residual_variance,
        coef_covariance,
        df_residual,
        gram_inverse,
    })
}

/// Two-sided quantile `t_{df}(p)`, switching to the normal beyond `df = 1e5`.
pub fn t_quantile(df: f64, p: f64) -> f64 {
    if df.is_infinite() || df > NORMAL_DF_CUTOFF {
        Normal::standard().inverse_cdf(p)
    } else {
        StudentsT::new(0.0, 1.0, df)
            .expect("positive df")
            .inverse_cdf(p)
    }
}

/// Critical value `t_{df, (1 + level) / 2}`.
pub fn critical_value(df: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if !(df > 0.0) {
        return Err(Error::InvalidParameter(format!("df must be positive, got {df}")));
    }
    Ok(t_quantile(df, 0.5 * (1.0 + level)))
}

/// Wald interval `estimate ± t · SE` for one coefficient.
pub fn wald_ci(model: &FittedLinearModel, coef_index: usize, level: f64) -> Result<(f64, f64)> {
    if coef_index >= model.coefficients.len() {
        return Err(Error::InvalidParameter(format!(
            "coefficient index {coef_index} out of range"
        )));
    }
    let t = critical_value(model.df_residual as f64, level)?;
    let est = model.coefficients[coef_index];
    let half = t * model.standard_error(coef_index);
    Ok((est - half, est + half))
}
