//! Principal components of the error-prone exposures.
//!
//! PCA is always run on the sample correlation matrix, i.e. on centered and
//! unit-variance columns, so exposures recorded in very different units
//! contribute on an equal footing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{standardize_columns, sym_eigen, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// `P x P`, column `k` is the `k`-th component.
    pub loadings: Matrix,
    pub eigenvalues: Vec<f64>,
    pub proportion_explained: Vec<f64>,
}

impl PcaModel {
    pub fn n_variables(&self) -> usize {
        self.center.len()
    }

    pub fn loading_column(&self, component: usize) -> Vec<f64> {
        self.loadings.column(component)
    }
}

/// Fits PCA on the correlation matrix of `xstar` (`N x P`, `N >= P + 1`).
///
/// Each loading column is signed so that its largest-magnitude entry is
/// positive; exact ties go to the lowest variable index.
pub fn pca_fit(xstar: &Matrix) -> Result<PcaModel> {
    let n = xstar.rows();
    let p = xstar.cols();
    if n < p + 1 || n < 2 {
        return Err(Error::TooFewRows {
            required: (p + 1).max(2),
            actual: n,
        });
    }
    let std = standardize_columns(xstar)?;
    let z = &std.matrix;

    let mut corr = Matrix::zeros(p, p);
    for i in 0..n {
        let row = z.row(i);
        for a in 0..p {
            for b in 0..=a {
                corr[(a, b)] += row[a] * row[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..p {
        for b in 0..=a {
            let v = corr[(a, b)] / denom;
            corr[(a, b)] = v;
            corr[(b, a)] = v;
        }
    }

    let eig = sym_eigen(&corr)?;
    let mut loadings = eig.eigenvectors;
    for k in 0..p {
        let mut best = 0;
        for r in 1..p {
            if loadings[(r, k)].abs() > loadings[(best, k)].abs() {
                best = r;
            }
        }
        if loadings[(best, k)] < 0.0 {
            for r in 0..p {
                loadings[(r, k)] = -loadings[(r, k)];
            }
        }
    }
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let proportion_explained = eigenvalues.iter().map(|v| v / total).collect();

    Ok(PcaModel {
        center: std.means,
        scale: std.sds,
        loadings,
        eigenvalues,
        proportion_explained,
    })
}

/// Scores of every row of `xstar` on `component` (0-based).
pub fn pc_scores(model: &PcaModel, xstar: &Matrix, component: usize) -> Result<Vec<f64>> {
    let p = model.n_variables();
    if xstar.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: xstar.cols(),
        });
    }
    if component >= p {
        return Err(Error::InvalidParameter(format!(
            "component {component} out of range for {p} variables"
        )));
    }
    let w: Vec<f64> = (0..p)
        .map(|k| model.loadings[(k, component)] / model.scale[k])
        .collect();
    Ok((0..xstar.rows())
        .map(|i| {
            xstar
                .row(i)
                .iter()
                .zip(&model.center)
                .zip(&w)
                .map(|((x, c), w)| (x - c) * w)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{mean, sample_covariance, sample_variance};
    use crate::randvar::{derive_stream, mvn_sample};
    use approx::assert_abs_diff_eq;

    fn orthonormal(m: &Matrix) -> bool {
        let p = m.cols();
        m.transpose().matmul(m).unwrap().max_abs_diff(&Matrix::identity(p)) <= 1e-8
    }

    #[test]
    fn two_variables_with_known_correlation() {
        // columns u and u*0.6 + v*0.8 with u, v orthogonal, centered, equal norm
        let u = [1.0, -1.0, 1.0, -1.0];
        let v = [1.0, 1.0, -1.0, -1.0];
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.6 * a + 0.8 * b).collect();
        let x = Matrix::from_columns(&[&u, &w]).unwrap();
        let m = pca_fit(&x).unwrap();
        assert_abs_diff_eq!(m.proportion_explained[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m.proportion_explained[1], 0.2, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(m.loadings[(0, 0)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(m.loadings[(1, 0)], h, epsilon = 1e-12);
        assert!(orthonormal(&m.loadings));
    }

    #[test]
    fn uncorrelated_columns_are_isotropic() {
        let mut rng = derive_stream(11, 0);
        let x = mvn_sample(&mut rng, &[0.0; 4], &Matrix::identity(4), 50_000).unwrap();
        let m = pca_fit(&x).unwrap();
        for pe in &m.proportion_explained {
            assert!((pe - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn exchangeable_population_first_component() {
        // equal dependence X plus unit error: X* correlation 0.5 / 2 = 0.25
        let mut cov = Matrix::identity(5);
        for i in 0..5 {
            for j in 0..5 {
                cov[(i, j)] = if i == j { 2.0 } else { 0.5 };
            }
        }
        let mut rng = derive_stream(12, 0);
        let x = mvn_sample(&mut rng, &[0.0; 5], &cov, 1000).unwrap();
        let m = pca_fit(&x).unwrap();
        assert!((m.proportion_explained[0] - 0.40).abs() < 0.03);
        let total: f64 = m.eigenvalues.iter().sum();
        assert_abs_diff_eq!(total, 5.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.proportion_explained.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scores_properties() {
        let mut rng = derive_stream(13, 0);
        let cov = Matrix::from_rows(&[
            vec![1.0, 0.3, 0.1],
            vec![0.3, 2.0, 0.4],
            vec![0.1, 0.4, 0.5],
        ])
        .unwrap();
        let x = mvn_sample(&mut rng, &[1.0, 2.0, 3.0], &cov, 500).unwrap();
        let m = pca_fit(&x).unwrap();
        assert!(orthonormal(&m.loadings));

        let center = Matrix::from_rows(&[m.center.clone()]).unwrap();
        for c in 0..3 {
            assert_abs_diff_eq!(pc_scores(&m, &center, c).unwrap()[0], 0.0, epsilon = 1e-12);
        }
        let s1 = pc_scores(&m, &x, 0).unwrap();
        let s2 = pc_scores(&m, &x, 1).unwrap();
        assert_abs_diff_eq!(sample_variance(&s1), m.eigenvalues[0], epsilon = 1e-8);
        assert_abs_diff_eq!(mean(&s1), 0.0, epsilon = 1e-10);
        let r = sample_covariance(&s1, &s2) / (sample_variance(&s1) * sample_variance(&s2)).sqrt();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-8);
        for k in 0..3 {
            let col = m.loading_column(k);
            let best = col
                .iter()
                .cloned()
                .fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(best > 0.0);
        }
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!(matches!(pca_fit(&x), Err(Error::TooFewRows { .. })));
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 2.0], vec![3.0, 2.0]]).unwrap();
        assert!(matches!(pca_fit(&x), Err(Error::ConstantColumn { column: 1 })));
        let y = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 5.0], vec![3.0, 1.0]]).unwrap();
        let m = pca_fit(&y).unwrap();
        let bad = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(
            pc_scores(&m, &bad, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn first_component_share_falls_with_error_variance() {
        let mut shares = Vec::new();
        for sigma_u in [0.25_f64, 0.5, 1.0] {
            let mut cov = Matrix::identity(5);
            for i in 0..5 {
                for j in 0..5 {
                    cov[(i, j)] = if i == j { 1.0 + sigma_u * sigma_u } else { 0.5 };
                }
            }
            let mut rng = derive_stream(14, 0);
            let x = mvn_sample(&mut rng, &[0.0; 5], &cov, 20_000).unwrap();
            shares.push(pca_fit(&x).unwrap().proportion_explained[0]);
        }
        assert!(shares[0] > shares[1] && shares[1] > shares[2], "{shares:?}");
    }
}
