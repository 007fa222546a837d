//! Seeded, splittable random streams and the variates built on them.
//!
//! A stream is identified by `(master_seed, stream_id)`. The master seed keys
//! a ChaCha8 block cipher and the stream id selects one of its 2^64
//! independent counter sequences, so a stream's output never depends on how
//! many other streams exist or in which order they were created. Replicate
//! `r` of a simulation always draws from stream `r`; finer-grained work
//! (one imputation draw, one design) takes a [`RngStream::substream`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, Matrix};

/// Integer degrees of freedom up to this bound draw chi-square variates as a
/// sum of squared normals.
const CHISQ_SUM_OF_SQUARES_MAX: f64 = 400.0;

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the stream for `(master_seed, stream_id)`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(master_seed, stream_id)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream keyed by `key`; independent of this stream's position.
    pub fn substream(&self, key: u64) -> RngStream {
        let id = mix64(self.stream_id.rotate_left(17) ^ mix64(key.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        RngStream::new(self.master_seed, id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Chi-square draw with `df` degrees of freedom.
    pub fn chi_square(&mut self, df: f64) -> Result<f64> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "chi-square df must be positive, got {df}"
            )));
        }
        if df.fract() == 0.0 && df <= CHISQ_SUM_OF_SQUARES_MAX {
            let k = df as usize;
            Ok((0..k)
                .map(|_| {
                    let z = self.standard_normal();
                    z * z
                })
                .sum())
        } else {
            let gamma = Gamma::new(df / 2.0, 2.0)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(gamma.sample(&mut self.rng))
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Reusable multivariate normal sampler holding the Cholesky factor.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    mean: Vec<f64>,
    chol: Matrix,
}

impl MvnSampler {
    pub fn new(mean: Vec<f64>, cov: &Matrix) -> Result<Self> {
        if cov.rows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: cov.rows(),
            });
        }
        Ok(Self {
            mean,
            chol: cholesky(cov)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// One draw written into `out`.
    pub fn sample_into(&self, rng: &mut RngStream, z: &mut [f64], out: &mut [f64]) {
        let p = self.dim();
        for v in z.iter_mut() {
            *v = rng.standard_normal();
        }
        for i in 0..p {
            let mut s = self.mean[i];
            for k in 0..=i {
                s += self.chol[(i, k)] * z[k];
            }
            out[i] = s;
        }
    }

    /// `m >= 1` draws as rows of a matrix.
    pub fn sample(&self, rng: &mut RngStream, m: usize) -> Matrix {
        assert!(m > 0, "sample size must be positive");
        let p = self.dim();
        let mut data = vec![0.0; m * p];
        let mut z = vec![0.0; p];
        for row in data.chunks_exact_mut(p) {
            self.sample_into(rng, &mut z, row);
        }
        Matrix::from_row_major(m, p, data).expect("finite draws")
    }
}

/// `m` i.i.d. rows from `MVN(mean, cov)`.
pub fn mvn_sample(rng: &mut RngStream, mean: &[f64], cov: &Matrix, m: usize) -> Result<Matrix> {
    if m == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let sampler = MvnSampler::new(mean.to_vec(), cov)?;
    Ok(sampler.sample(rng, m))
}

/// `m` i.i.d. Bernoulli(`p`) draws as 0/1 values.
pub fn bernoulli_sample(rng: &mut RngStream, p: f64, m: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok((0..m)
        .map(|_| if rng.uniform() < p { 1.0 } else { 0.0 })
        .collect())
}

/// `scale * df / X` with `X ~ chi-square(df)`.
pub fn scaled_inv_chisq_sample(rng: &mut RngStream, df: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let x = rng.chi_square(df)?;
    Ok(scale * df / x.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{mean, sample_covariance, sample_variance};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normals(rng: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.standard_normal()).collect()
    }

    #[test]
    fn same_stream_same_draws() {
        let a = normals(&mut derive_stream(42, 0), 100);
        let b = normals(&mut derive_stream(42, 0), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = normals(&mut derive_stream(42, 0), 100);
        let b = normals(&mut derive_stream(42, 1), 100);
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn creation_order_irrelevant() {
        let direct = normals(&mut derive_stream(42, 7), 50);
        let mut others: Vec<_> = (0..7).map(|i| derive_stream(42, i)).collect();
        for s in &mut others {
            s.standard_normal();
        }
        let later = normals(&mut derive_stream(42, 7), 50);
        assert_eq!(direct, later);
    }

    #[test]
    fn substreams_are_positional_independent() {
        let mut parent = derive_stream(9, 3);
        let a = parent.substream(5);
        parent.standard_normal();
        let b = parent.substream(5);
        assert_eq!(normals(&mut a.clone(), 10), normals(&mut b.clone(), 10));
        assert_ne!(parent.substream(5).stream_id(), parent.substream(6).stream_id());
    }

    #[test]
    fn mvn_identity_moments() {
        let mut rng = derive_stream(1, 0);
        let x = mvn_sample(&mut rng, &[0.0, 0.0, 0.0], &Matrix::identity(3), 100_000).unwrap();
        for k in 0..3 {
            let col = x.column(k);
            assert!(mean(&col).abs() < 0.02);
            assert!((sample_variance(&col) - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn mvn_equal_dependence_correlations() {
        let mut cov = Matrix::identity(5);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    cov[(i, j)] = 0.5;
                }
            }
        }
        let mut rng = derive_stream(2, 0);
        let x = mvn_sample(&mut rng, &[0.0; 5], &cov, 100_000).unwrap();
        let cols: Vec<_> = (0..5).map(|k| x.column(k)).collect();
        for i in 0..5 {
            for j in (i + 1)..5 {
                let r = sample_covariance(&cols[i], &cols[j])
                    / (sample_variance(&cols[i]) * sample_variance(&cols[j])).sqrt();
                assert!((r - 0.5).abs() < 0.02, "corr({i},{j}) = {r}");
            }
        }
    }

    #[test]
    fn mvn_location_shift() {
        let mut rng = derive_stream(3, 0);
        let x = mvn_sample(&mut rng, &[3.0, -3.0], &Matrix::identity(2), 10_000).unwrap();
        assert!((mean(&x.column(0)) - 3.0).abs() < 0.05);
        assert!((mean(&x.column(1)) + 3.0).abs() < 0.05);
    }

    #[test]
    fn mvn_rejects_indefinite() {
        let cov = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            mvn_sample(&mut derive_stream(0, 0), &[0.0, 0.0], &cov, 10),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn bernoulli_edges_and_mean() {
        let mut rng = derive_stream(4, 0);
        assert!(bernoulli_sample(&mut rng, 0.0, 1000).unwrap().iter().all(|&v| v == 0.0));
        assert!(bernoulli_sample(&mut rng, 1.0, 1000).unwrap().iter().all(|&v| v == 1.0));
        let draws = bernoulli_sample(&mut rng, 0.3, 100_000).unwrap();
        let tol = 4.0 * (0.21_f64 / 1e5).sqrt();
        assert!((mean(&draws) - 0.3).abs() < tol);
        assert!(matches!(
            bernoulli_sample(&mut rng, 1.5, 1),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn inv_chisq_concentrates() {
        let mut rng = derive_stream(5, 0);
        let d = scaled_inv_chisq_sample(&mut rng, 1e6, 3.0).unwrap();
        assert!((d - 3.0).abs() < 0.03);
    }

    #[test]
    fn inv_chisq_mean() {
        let mut rng = derive_stream(6, 0);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| scaled_inv_chisq_sample(&mut rng, 5.0, 2.0).unwrap())
            .collect();
        // variance of scaled inv-chi2: 2 df^2 s^2 / ((df-2)^2 (df-4))
        let var = 2.0 * 25.0 * 4.0 / (9.0 * 1.0);
        let se = (var / 1e5_f64).sqrt();
        assert!((mean(&draws) - 10.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn inv_chisq_gamma_branch_mean() {
        let mut rng = derive_stream(6, 1);
        let df = 500.0;
        let draws: Vec<f64> = (0..20_000)
            .map(|_| scaled_inv_chisq_sample(&mut rng, df, 1.0).unwrap())
            .collect();
        let expected = df / (df - 2.0);
        let var = 2.0 * df * df / ((df - 2.0).powi(2) * (df - 4.0));
        assert!((mean(&draws) - expected).abs() < 4.0 * (var / 20_000.0).sqrt());
    }

    #[test]
    fn inv_chisq_rejects_bad_parameters() {
        let mut rng = derive_stream(7, 0);
        assert!(matches!(
            scaled_inv_chisq_sample(&mut rng, 5.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(scaled_inv_chisq_sample(&mut rng, 0.0, 1.0).is_err());
    }

    #[test]
    fn normal_draws_pass_ks() {
        let mut xs = normals(&mut derive_stream(8, 0), 10_000);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let normal = Normal::standard();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0_f64, f64::max);
        // asymptotic critical value at alpha = 0.001
        let crit = 1.9495 / n.sqrt();
        assert!(d < crit, "KS statistic {d} >= {crit}");
    }
}
