//! Dense linear algebra kernels.
//!
//! Everything here works on small, dense, row-major matrices: covariance
//! matrices of a handful of exposures and the Gram matrices of regression
//! designs with at most a dozen columns. The routines are plain loops; no
//! BLAS is involved.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const CHOLESKY_PIVOT_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const MAX_EIGEN_DIM: usize = 10_000;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Builds an `n x columns.len()` matrix from column vectors.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (k, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    actual: col.len(),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                data[i * cols + k] = v;
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, k)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                actual: self.cols,
            });
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut asym = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                asym = asym.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factor `L` (lower triangular) with `L Lᵀ = a`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    a.check_symmetric()?;
    let max_diag = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(*v));
    cholesky_unchecked(a, |_, pivot, _| pivot <= CHOLESKY_PIVOT_TOL * max_diag)
}

/// Factorization with a caller-supplied pivot test `(index, pivot, original diagonal) -> reject`.
pub(crate) fn cholesky_unchecked(
    a: &Matrix,
    reject: impl Fn(usize, f64, f64) -> bool,
) -> Result<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !pivot.is_finite() || pivot <= 0.0 || reject(j, pivot, a[(j, j)]) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Inverse of `L Lᵀ` from its Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.rows;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    // exact symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = avg;
            inv[(j, i)] = avg;
        }
    }
    inv
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            actual: b.len(),
        });
    }
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymEigen {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps until the off-diagonal Frobenius norm falls below `1e-12` times
/// the matrix norm, giving up after 100 sweeps.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    a.check_symmetric()?;
    let n = a.rows;
    if n > MAX_EIGEN_DIM {
        return Err(Error::InvalidParameter(format!(
            "eigendecomposition limited to {MAX_EIGEN_DIM} dimensions, got {n}"
        )));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let total: f64 = m.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * total.max(f64::MIN_POSITIVE);

    let off_norm = |m: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::ConvergenceFailure {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&m) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Sample mean of a slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample covariance with denominator `n - 1`.
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() as f64 - 1.0)
}

/// Centered and scaled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub matrix: Matrix,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Centers each column at its mean and scales it to unit sample SD.
pub fn standardize_columns(m: &Matrix) -> Result<Standardized> {
    if m.rows < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            actual: m.rows,
        });
    }
    let mut means = Vec::with_capacity(m.cols);
    let mut sds = Vec::with_capacity(m.cols);
    for k in 0..m.cols {
        let col = m.column(k);
        let mu = mean(&col);
        let sd = sample_variance(&col).sqrt();
        let scale = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !(sd > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::ConstantColumn { column: k });
        }
        means.push(mu);
        sds.push(sd);
    }
    let mut out = m.clone();
    for i in 0..m.rows {
        for k in 0..m.cols {
            out[(i, k)] = (m[(i, k)] - means[k]) / sds[k];
        }
    }
    Ok(Standardized {
        matrix: out,
        means,
        sds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reconstruct(l: &Matrix) -> Matrix {
        l.matmul(&l.transpose()).unwrap()
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&Matrix::identity(5)).unwrap();
        assert_eq!(l, Matrix::identity(5));
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)], 2.0_f64.sqrt(), epsilon = 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
        assert!(reconstruct(&l).max_abs_diff(&a) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn cholesky_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 2.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn matrix_rejects_non_finite() {
        assert!(Matrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_row_major(0, 2, vec![]).is_err());
    }

    #[test]
    fn eigen_diagonal() {
        let e = sym_eigen(&Matrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors, Matrix::identity(2));
        let e = sym_eigen(&Matrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn eigen_exchangeable() {
        let mut a = Matrix::identity(5);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    a[(i, j)] = 0.5;
                }
            }
        }
        let e = sym_eigen(&a).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 3.0, epsilon = 1e-12);
        for &ev in &e.eigenvalues[1..] {
            assert_abs_diff_eq!(ev, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigen_two_by_two_correlation() {
        let a = Matrix::from_rows(&[vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let e = sym_eigen(&a).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues[1], 0.4, epsilon = 1e-12);
        let v0 = e.eigenvectors.column(0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(v0[0].abs(), h, epsilon = 1e-12);
        assert_abs_diff_eq!(v0[0], v0[1], epsilon = 1e-12);
    }

    #[test]
    fn solve_examples() {
        let x = solve_spd(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let x = solve_spd(&a, &[6.0, 5.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
        let s = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            solve_spd(&s, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn standardize_two_points() {
        let m = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let s = standardize_columns(&m).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(s.matrix[(0, 0)], -h, epsilon = 1e-15);
        assert_abs_diff_eq!(s.matrix[(1, 0)], h, epsilon = 1e-15);
        assert_eq!(s.means, vec![1.0]);
    }

    #[test]
    fn standardize_constant_column() {
        let m = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert!(matches!(
            standardize_columns(&m),
            Err(Error::ConstantColumn { column: 1 })
        ));
    }

    // explicit inverse for 2x2 and 3x3 via cofactors
    fn cofactor_inverse(a: &Matrix) -> Matrix {
        match a.rows() {
            2 => {
                let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
                Matrix::from_rows(&[
                    vec![a[(1, 1)] / det, -a[(0, 1)] / det],
                    vec![-a[(1, 0)] / det, a[(0, 0)] / det],
                ])
                .unwrap()
            }
            3 => {
                let c = |i: usize, j: usize| {
                    let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
                    let k: Vec<usize> = (0..3).filter(|&x| x != j).collect();
                    let minor =
                        a[(r[0], k[0])] * a[(r[1], k[1])] - a[(r[0], k[1])] * a[(r[1], k[0])];
                    if (i + j) % 2 == 0 {
                        minor
                    } else {
                        -minor
                    }
                };
                let det: f64 = (0..3).map(|j| a[(0, j)] * c(0, j)).sum();
                let mut inv = Matrix::zeros(3, 3);
                for i in 0..3 {
                    for j in 0..3 {
                        inv[(i, j)] = c(j, i) / det;
                    }
                }
                inv
            }
            _ => unreachable!(),
        }
    }

    fn spd_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_n).prop_flat_map(|n| {
            prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |b| {
                let b = Matrix::from_row_major(n, n, b).unwrap();
                let mut a = b.transpose().matmul(&b).unwrap();
                for i in 0..n {
                    a[(i, i)] += 0.1;
                }
                a
            })
        })
    }

    fn sym_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_n).prop_flat_map(|n| {
            prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |b| {
                let mut a = Matrix::from_row_major(n, n, b).unwrap();
                for i in 0..n {
                    for j in 0..i {
                        a[(i, j)] = a[(j, i)];
                    }
                }
                a
            })
        })
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs(a in spd_strategy(8)) {
            let l = cholesky(&a).unwrap();
            prop_assert!(reconstruct(&l).max_abs_diff(&a) <= 1e-8);
            for i in 0..a.rows() {
                for j in (i + 1)..a.cols() {
                    prop_assert_eq!(l[(i, j)], 0.0);
                }
            }
        }

        #[test]
        fn eigen_reconstructs(a in sym_strategy(20)) {
            let e = sym_eigen(&a).unwrap();
            let n = a.rows();
            let v = &e.eigenvectors;
            let vd = v.matmul(&Matrix::from_diag(&e.eigenvalues)).unwrap();
            let back = vd.matmul(&v.transpose()).unwrap();
            prop_assert!(back.max_abs_diff(&a) <= 1e-8);
            let vtv = v.transpose().matmul(v).unwrap();
            prop_assert!(vtv.max_abs_diff(&Matrix::identity(n)) <= 1e-8);
            for w in e.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let sum: f64 = e.eigenvalues.iter().sum();
            prop_assert!((sum - a.trace()).abs() <= 1e-8 * a.max_abs().max(1.0));
        }

        #[test]
        fn solve_matches_cofactor_inverse(a in spd_strategy(3), b in prop::collection::vec(-5.0f64..5.0, 3)) {
            prop_assume!(a.rows() >= 2);
            let b = &b[..a.rows()];
            let x = solve_spd(&a, b).unwrap();
            let oracle = cofactor_inverse(&a).matvec(b).unwrap();
            for (u, v) in x.iter().zip(&oracle) {
                prop_assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()));
            }
        }

        #[test]
        fn standardize_is_idempotent(data in prop::collection::vec(-100.0f64..100.0, 3 * 10)) {
            let m = Matrix::from_row_major(10, 3, data).unwrap();
            let once = standardize_columns(&m).unwrap();
            for k in 0..3 {
                let col = once.matrix.column(k);
                prop_assert!(mean(&col).abs() <= 1e-12);
                prop_assert!((sample_variance(&col).sqrt() - 1.0).abs() <= 1e-10);
            }
            let twice = standardize_columns(&once.matrix).unwrap();
            prop_assert!(twice.matrix.max_abs_diff(&once.matrix) <= 1e-10);
        }
    }
}
