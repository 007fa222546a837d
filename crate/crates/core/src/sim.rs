//! Monte Carlo engine for comparing validation designs.
//!
//! A replicate generates one synthetic two-phase dataset, runs every design
//! on it, and records the single-imputation slope `β̂₁ⱼ` for every model.
//! Replicate `r` draws exclusively from stream `r` of the master seed, so
//! the output is the same for any execution mode or thread count.

use serde::{Deserialize, Serialize};

use crate::designs::{select, DesignKind};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::imputation::analyze_single_imputation;
use crate::numerics::{mean, Matrix};
use crate::randvar::{derive_stream, MvnSampler, RngStream};
use crate::table::{ColumnNames, StudyTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovStructure {
    Independence,
    /// Unit variances, every correlation 0.5.
    EqualDependence,
    /// Fixed 5 x 5 matrix with correlations rising toward `X5`.
    UnequalDependence,
    /// User-supplied matrix in [`SimConfig::custom_sigma`].
    Custom,
}

const UNEQUAL: [[f64; 5]; 5] = [
    [1.00, 0.05, 0.10, 0.20, 0.35],
    [0.05, 1.00, 0.15, 0.25, 0.40],
    [0.10, 0.15, 1.00, 0.30, 0.45],
    [0.20, 0.25, 0.30, 1.00, 0.50],
    [0.35, 0.40, 0.45, 0.50, 1.00],
];

/// Covariance of the error-free exposures for a built-in structure.
pub fn make_sigma_x(structure: CovStructure, p: usize) -> Result<Matrix> {
    match structure {
        CovStructure::Independence => Ok(Matrix::identity(p)),
        CovStructure::EqualDependence => {
            let rows: Vec<Vec<f64>> = (0..p)
                .map(|i| (0..p).map(|k| if i == k { 1.0 } else { 0.5 }).collect())
                .collect();
            Matrix::from_rows(&rows)
        }
        CovStructure::UnequalDependence => {
            if p != 5 {
                return Err(Error::InvalidConfig(format!(
                    "unequal_dependence is defined for 5 exposures, got {p}"
                )));
            }
            let rows: Vec<Vec<f64>> = UNEQUAL.iter().map(|r| r.to_vec()).collect();
            Matrix::from_rows(&rows)
        }
        CovStructure::Custom => Err(Error::InvalidConfig(
            "custom covariance needs an explicit matrix".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeMode {
    /// `Y_j = (j - 1) + 0.5 j X_j + 0.1 j Z + ε_j` for 1-based `j`.
    Separate,
    /// `Y = Σ β_k X_k + 0.1 Z + ε`, analysed by one marginal model per `X_j`.
    Shared,
}

/// Canned coefficient vectors for the shared outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedPreset {
    /// `β₁ = 1`, all others 0.
    OnlyFirst,
    /// `β₂ = 1`, all others 0.
    OnlySecond,
    /// Every `β_j = 0.2`.
    AllEqual,
}

impl SharedPreset {
    pub fn betas(self, p: usize) -> Vec<f64> {
        match self {
            SharedPreset::OnlyFirst => (0..p).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect(),
            SharedPreset::OnlySecond => (0..p).map(|k| if k == 1 { 1.0 } else { 0.0 }).collect(),
            SharedPreset::AllEqual => vec![0.2; p],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_total: usize,
    pub n_validate: usize,
    pub p_exposures: usize,
    pub z_prob: f64,
    pub cov_structure: CovStructure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_sigma: Option<Vec<Vec<f64>>>,
    /// Measurement-error standard deviation, shared by every exposure.
    pub sigma_u: f64,
    pub outcome_mode: OutcomeMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_betas: Option<Vec<f64>>,
    pub replicates: usize,
    pub designs: Vec<DesignKind>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_total: 1000,
            n_validate: 100,
            p_exposures: 5,
            z_prob: 0.3,
            cov_structure: CovStructure::EqualDependence,
            custom_sigma: None,
            sigma_u: 1.0,
            outcome_mode: OutcomeMode::Separate,
            shared_betas: None,
            replicates: 1000,
            designs: vec![
                DesignKind::Srs,
                DesignKind::EtsVar { target: 0 },
                DesignKind::EtsPc1,
            ],
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Shared-outcome configuration with the betas of `preset`.
    pub fn shared(preset: SharedPreset) -> Self {
        let base = Self::default();
        Self {
            outcome_mode: OutcomeMode::Shared,
            shared_betas: Some(preset.betas(base.p_exposures)),
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.p_exposures == 0 {
            return bad("p_exposures must be positive".into());
        }
        if self.n_validate == 0 || self.n_validate >= self.n_total {
            return bad(format!(
                "n_validate must be in 1..n_total, got {} of {}",
                self.n_validate, self.n_total
            ));
        }
        if !(self.z_prob >= 0.0 && self.z_prob <= 1.0) {
            return bad(format!("z_prob must be a probability, got {}", self.z_prob));
        }
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return bad(format!("sigma_u must be positive, got {}", self.sigma_u));
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.designs.is_empty() {
            return bad("at least one design is required".into());
        }
        for d in &self.designs {
            if let DesignKind::EtsVar { target } = d {
                if *target >= self.p_exposures {
                    return bad(format!("design {d} exceeds {} exposures", self.p_exposures));
                }
            }
        }
        match (self.outcome_mode, &self.shared_betas) {
            (OutcomeMode::Shared, Some(b)) if b.len() == self.p_exposures => {
                if b.iter().any(|v| !v.is_finite()) {
                    return bad("shared_betas must be finite".into());
                }
            }
            (OutcomeMode::Shared, Some(b)) => {
                return bad(format!(
                    "shared_betas has {} entries for {} exposures",
                    b.len(),
                    self.p_exposures
                ))
            }
            (OutcomeMode::Shared, None) => return bad("shared mode needs shared_betas".into()),
            (OutcomeMode::Separate, Some(_)) => {
                return bad("shared_betas is only valid in shared mode".into())
            }
            (OutcomeMode::Separate, None) => {}
        }
        if self.custom_sigma.is_some() != (self.cov_structure == CovStructure::Custom) {
            return bad("custom_sigma must be given exactly when cov_structure = custom".into());
        }
        let sigma = self.sigma_x()?;
        MvnSampler::new(vec![0.0; self.p_exposures], &sigma)
            .map_err(|e| Error::InvalidConfig(format!("exposure covariance: {e}")))?;
        Ok(())
    }

    pub fn sigma_x(&self) -> Result<Matrix> {
        match (&self.custom_sigma, self.cov_structure) {
            (Some(rows), CovStructure::Custom) => {
                let m = Matrix::from_rows(rows)?;
                if m.rows() != self.p_exposures || m.cols() != self.p_exposures {
                    return Err(Error::InvalidConfig(format!(
                        "custom_sigma must be {0} x {0}",
                        self.p_exposures
                    )));
                }
                Ok(m)
            }
            (_, structure) => make_sigma_x(structure, self.p_exposures),
        }
    }

    /// Estimand of each model's exposure slope.
    ///
    /// Separate mode uses the generating slopes. In shared mode the marginal
    /// model of `Y` on `X_j` and `Z` targets the projection slope
    /// `Σ_k β_k Σ_jk / Σ_jj`.
    pub fn truths(&self) -> Result<Vec<f64>> {
        let p = self.p_exposures;
        match self.outcome_mode {
            OutcomeMode::Separate => Ok((1..=p).map(|j| 0.5 * j as f64).collect()),
            OutcomeMode::Shared => {
                let sigma = self.sigma_x()?;
                let betas = self
                    .shared_betas
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("shared mode needs shared_betas".into()))?;
                Ok((0..p)
                    .map(|j| {
                        (0..p).map(|k| betas[k] * sigma[(j, k)]).sum::<f64>() / sigma[(j, j)]
                    })
                    .collect())
            }
        }
    }
}

struct Generated {
    z: Vec<f64>,
    x: Vec<Vec<f64>>,
    xstar: Vec<Vec<f64>>,
}

fn generate_exposures(rng: &mut RngStream, config: &SimConfig) -> Result<Generated> {
    let n = config.n_total;
    let p = config.p_exposures;
    let sampler = MvnSampler::new(vec![0.0; p], &config.sigma_x()?)?;
    let mut z = Vec::with_capacity(n);
    let mut x = vec![Vec::with_capacity(n); p];
    let mut xstar = vec![Vec::with_capacity(n); p];
    let mut buf = vec![0.0; p];
    let mut row = vec![0.0; p];
    for _ in 0..n {
        z.push(if rng.uniform() < config.z_prob { 1.0 } else { 0.0 });
        sampler.sample_into(rng, &mut buf, &mut row);
        for k in 0..p {
            x[k].push(row[k]);
            xstar[k].push(row[k] + config.sigma_u * rng.standard_normal());
        }
    }
    Ok(Generated { z, x, xstar })
}

fn assemble(g: Generated, outcomes: Vec<Vec<f64>>, names: ColumnNames) -> StudyTable {
    let n = g.z.len();
    StudyTable {
        ids: None,
        outcomes,
        exposures: g.x,
        error_prone: g.xstar,
        confounders: vec![g.z],
        validated: vec![false; n],
        names,
    }
}

/// One dataset with a separate outcome per exposure.
pub fn gen_separate_outcomes(rng: &mut RngStream, config: &SimConfig) -> Result<StudyTable> {
    if config.outcome_mode != OutcomeMode::Separate {
        return Err(Error::InvalidConfig("config is not in separate mode".into()));
    }
    let g = generate_exposures(rng, config)?;
    let outcomes = (0..config.p_exposures)
        .map(|k| {
            let j = (k + 1) as f64;
            (0..config.n_total)
                .map(|i| (j - 1.0) + 0.5 * j * g.x[k][i] + 0.1 * j * g.z[i] + rng.standard_normal())
                .collect()
        })
        .collect();
    Ok(assemble(g, outcomes, ColumnNames::numbered(config.p_exposures, 1)))
}

/// One dataset with a single outcome driven by every exposure.
///
/// The outcome is repeated once per model so model `j` pairs `Y` with `X_j`.
pub fn gen_shared_outcome(rng: &mut RngStream, config: &SimConfig) -> Result<StudyTable> {
    let betas = match (config.outcome_mode, &config.shared_betas) {
        (OutcomeMode::Shared, Some(b)) if b.len() == config.p_exposures => b.clone(),
        _ => return Err(Error::InvalidConfig("config is not a valid shared-mode config".into())),
    };
    let g = generate_exposures(rng, config)?;
    let y: Vec<f64> = (0..config.n_total)
        .map(|i| {
            (0..config.p_exposures).map(|k| betas[k] * g.x[k][i]).sum::<f64>()
                + 0.1 * g.z[i]
                + rng.standard_normal()
        })
        .collect();
    let mut names = ColumnNames::numbered(config.p_exposures, 1);
    names.outcomes = vec!["y".into(); config.p_exposures];
    Ok(assemble(g, vec![y; config.p_exposures], names))
}

pub fn generate(rng: &mut RngStream, config: &SimConfig) -> Result<StudyTable> {
    match config.outcome_mode {
        OutcomeMode::Separate => gen_separate_outcomes(rng, config),
        OutcomeMode::Shared => gen_shared_outcome(rng, config),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub design: DesignKind,
    /// 0-based model index.
    pub model: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub design: DesignKind,
    /// `None` when the design itself failed.
    pub model: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub results: Vec<ReplicateResult>,
    pub failures: Vec<ReplicateFailure>,
}

type ReplicateRows = (Vec<ReplicateResult>, Vec<ReplicateFailure>);

/// Everything replicate `r` contributes. Data come from `substream(0)` of
/// stream `r`; design `d` draws from `substream(1 + d)`.
pub fn run_one_replicate(config: &SimConfig, r: usize) -> Result<ReplicateRows> {
    let stream = derive_stream(config.seed, r as u64);
    let table = generate(&mut stream.substream(0), config)?;
    let xstar = table.error_prone_matrix()?;
    let mut results = Vec::with_capacity(config.designs.len() * config.p_exposures);
    let mut failures = Vec::new();
    for (d, &kind) in config.designs.iter().enumerate() {
        let mut design_rng = stream.substream(1 + d as u64);
        let (selection, spec) = match select(kind, &mut design_rng, &xstar, config.n_validate) {
            Ok(s) => s,
            Err(e) => {
                failures.push(ReplicateFailure {
                    replicate: r,
                    design: kind,
                    model: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let masked = table.with_validation(&selection)?;
        for j in 0..config.p_exposures {
            let outcome = analyze_single_imputation(&masked, &spec, j).and_then(|fit| {
                let b = fit.coefficients[1];
                if b.is_finite() {
                    Ok(b)
                } else {
                    Err(Error::NonFiniteValue { row: j })
                }
            });
            match outcome {
                Ok(estimate) => results.push(ReplicateResult {
                    replicate: r,
                    design: kind,
                    model: j,
                    estimate,
                }),
                Err(e) => failures.push(ReplicateFailure {
                    replicate: r,
                    design: kind,
                    model: Some(j),
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok((results, failures))
}

pub fn run_replicates(config: &SimConfig) -> Result<SimOutput> {
    run_replicates_with(config, Execution::default())
}

/// All replicates, ordered by (replicate, design, model).
///
/// Fails with [`Error::TooManyFailures`] when more than 1% of replicates
/// record any failure.
pub fn run_replicates_with(config: &SimConfig, exec: Execution) -> Result<SimOutput> {
    config.validate()?;
    let per_replicate = map_indexed(exec, config.replicates, |r| run_one_replicate(config, r));
    let mut out = SimOutput::default();
    let mut failed = 0usize;
    for rows in per_replicate {
        let (results, failures) = rows?;
        if !failures.is_empty() {
            failed += 1;
        }
        out.results.extend(results);
        out.failures.extend(failures);
    }
    if failed * 100 > config.replicates {
        return Err(Error::TooManyFailures {
            failed,
            total: config.replicates,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCell {
    pub design: DesignKind,
    pub model: usize,
    pub truth: f64,
    pub n_replicates: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub variance: f64,
    /// `1 / variance`; infinite for a zero-variance cell.
    #[serde(with = "crate::float_repr")]
    pub efficiency: f64,
    /// Monte Carlo standard error of `mean_estimate`.
    pub mc_se: f64,
    /// Approximate 95% interval for the efficiency, from a normal interval
    /// on the variance with `Var(s²) ≈ (m₄ - s⁴) / R`.
    #[serde(with = "crate::float_repr")]
    pub efficiency_lower: f64,
    #[serde(with = "crate::float_repr")]
    pub efficiency_upper: f64,
}

impl EfficiencyCell {
    /// Whether the 95% efficiency intervals of two cells intersect.
    pub fn overlaps(&self, other: &EfficiencyCell) -> bool {
        self.efficiency_lower <= other.efficiency_upper
            && other.efficiency_lower <= self.efficiency_upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    pub cells: Vec<EfficiencyCell>,
}

impl EfficiencySummary {
    pub fn cell(&self, design: DesignKind, model: usize) -> Option<&EfficiencyCell> {
        self.cells
            .iter()
            .find(|c| c.design == design && c.model == model)
    }

    pub fn efficiency(&self, design: DesignKind, model: usize) -> f64 {
        self.cell(design, model).map_or(f64::NAN, |c| c.efficiency)
    }

    /// Mean efficiency of `design` over its models.
    pub fn model_averaged(&self, design: DesignKind) -> f64 {
        let effs: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.design == design)
            .map(|c| c.efficiency)
            .collect();
        mean(&effs)
    }
}

const Z95: f64 = 1.959_963_984_540_054;

fn summarize_cell(design: DesignKind, model: usize, truth: f64, est: &[f64]) -> EfficiencyCell {
    let r = est.len() as f64;
    let m = mean(est);
    let dev2: Vec<f64> = est.iter().map(|e| (e - m) * (e - m)).collect();
    let variance = dev2.iter().sum::<f64>() / (r - 1.0);
    let m2 = dev2.iter().sum::<f64>() / r;
    let m4 = dev2.iter().map(|d| d * d).sum::<f64>() / r;
    let var_se = ((m4 - m2 * m2).max(0.0) / r).sqrt();
    let inv = |v: f64| if v > 0.0 { 1.0 / v } else { f64::INFINITY };
    EfficiencyCell {
        design,
        model,
        truth,
        n_replicates: est.len(),
        mean_estimate: m,
        bias: m - truth,
        variance,
        efficiency: inv(variance),
        mc_se: (variance / r).sqrt(),
        efficiency_lower: inv(variance + Z95 * var_se),
        efficiency_upper: inv(variance - Z95 * var_se),
    }
}

/// Per-(design, model) summaries, designs in the given order.
pub fn summarize_efficiency(
    results: &[ReplicateResult],
    designs: &[DesignKind],
    truths: &[f64],
) -> Result<EfficiencySummary> {
    let mut cells = Vec::with_capacity(designs.len() * truths.len());
    for &design in designs {
        for (model, &truth) in truths.iter().enumerate() {
            let est: Vec<f64> = results
                .iter()
                .filter(|r| r.design == design && r.model == model)
                .map(|r| r.estimate)
                .collect();
            if est.len() < 2 {
                return Err(Error::EmptyCell(format!("{} model {}", design.label(), model + 1)));
            }
            cells.push(summarize_cell(design, model, truth, &est));
        }
    }
    Ok(EfficiencySummary { cells })
}

/// Runs `config` and summarizes it against [`SimConfig::truths`].
pub fn simulate(config: &SimConfig, exec: Execution) -> Result<(SimOutput, EfficiencySummary)> {
    let out = run_replicates_with(config, exec)?;
    let summary = summarize_efficiency(&out.results, &config.designs, &config.truths()?)?;
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_model::ols_fit;
    use crate::numerics::{sample_covariance, sym_eigen};
    use approx::assert_abs_diff_eq;

    fn big(config: SimConfig) -> SimConfig {
        SimConfig {
            n_total: 100_000,
            n_validate: 100,
            ..config
        }
    }

    #[test]
    fn covariance_structures() {
        assert_eq!(make_sigma_x(CovStructure::Independence, 5).unwrap(), Matrix::identity(5));
        let u = make_sigma_x(CovStructure::UnequalDependence, 5).unwrap();
        assert_eq!(u.row(4), vec![0.35, 0.40, 0.45, 0.50, 1.00]);
        assert_eq!(u, u.transpose());
        let e = sym_eigen(&make_sigma_x(CovStructure::EqualDependence, 5).unwrap()).unwrap();
        let want = [3.0, 0.5, 0.5, 0.5, 0.5];
        for (a, b) in e.eigenvalues.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(make_sigma_x(CovStructure::UnequalDependence, 4).is_err());
    }

    #[test]
    fn config_validation() {
        SimConfig::default().validate().unwrap();
        SimConfig::shared(SharedPreset::AllEqual).validate().unwrap();
        let cases = [
            SimConfig { n_validate: 1000, ..Default::default() },
            SimConfig { sigma_u: 0.0, ..Default::default() },
            SimConfig { shared_betas: Some(vec![0.0; 5]), ..Default::default() },
            SimConfig { outcome_mode: OutcomeMode::Shared, ..Default::default() },
            SimConfig { designs: vec![DesignKind::EtsVar { target: 5 }], ..Default::default() },
            SimConfig { cov_structure: CovStructure::Custom, ..Default::default() },
            SimConfig {
                cov_structure: CovStructure::Custom,
                custom_sigma: Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
                p_exposures: 2,
                designs: vec![DesignKind::Srs],
                ..Default::default()
            },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))), "{c:?}");
        }
        let custom = SimConfig {
            cov_structure: CovStructure::Custom,
            custom_sigma: Some(vec![vec![2.0, 0.3], vec![0.3, 1.0]]),
            p_exposures: 2,
            designs: vec![DesignKind::Srs, DesignKind::EtsPc1],
            ..Default::default()
        };
        custom.validate().unwrap();
    }

    #[test]
    fn separate_outcomes_follow_generator() {
        let cfg = big(SimConfig { cov_structure: CovStructure::UnequalDependence, ..Default::default() });
        let t = gen_separate_outcomes(&mut derive_stream(5, 0), &cfg).unwrap();
        let design = Matrix::from_columns(&[
            &vec![1.0; cfg.n_total],
            &t.exposures[2],
            &t.confounders[0],
        ])
        .unwrap();
        let fit = ols_fit(&design, &t.outcomes[2]).unwrap();
        for (i, want) in [2.0, 1.5, 0.3].into_iter().enumerate() {
            assert!((fit.coefficients[i] - want).abs() < 4.0 * fit.standard_error(i));
        }
        let sigma = cfg.sigma_x().unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let c = sample_covariance(&t.exposures[a], &t.exposures[b]);
                assert!((c - sigma[(a, b)]).abs() < 0.02, "{a},{b}: {c}");
            }
        }
        assert!((mean(&t.confounders[0]) - 0.3).abs() < 0.01);
        assert_eq!(t.n_validated(), 0);
    }

    #[test]
    fn tiny_error_gives_error_free_copy() {
        let cfg = SimConfig { sigma_u: 1e-300, ..Default::default() };
        let t = generate(&mut derive_stream(1, 0), &cfg).unwrap();
        assert_eq!(t.exposures, t.error_prone);
    }

    #[test]
    fn shared_outcome_projection() {
        let cfg = big(SimConfig::shared(SharedPreset::OnlyFirst));
        assert_eq!(cfg.truths().unwrap(), vec![1.0, 0.5, 0.5, 0.5, 0.5]);
        let t = gen_shared_outcome(&mut derive_stream(6, 0), &cfg).unwrap();
        assert!(t.outcomes.iter().all(|y| *y == t.outcomes[0]));
        let design =
            Matrix::from_columns(&[&vec![1.0; cfg.n_total], &t.exposures[0], &t.confounders[0]])
                .unwrap();
        let fit = ols_fit(&design, &t.outcomes[0]).unwrap();
        assert!((fit.coefficients[1] - 1.0).abs() < 4.0 * fit.standard_error(1));

        let zero = SimConfig { shared_betas: Some(vec![0.0; 5]), ..cfg.clone() };
        let t = gen_shared_outcome(&mut derive_stream(6, 1), &zero).unwrap();
        let design =
            Matrix::from_columns(&[&vec![1.0; cfg.n_total], &t.exposures[3], &t.confounders[0]])
                .unwrap();
        let fit = ols_fit(&design, &t.outcomes[0]).unwrap();
        assert!(fit.coefficients[1].abs() < 4.0 * fit.standard_error(1));
        assert_eq!(SharedPreset::AllEqual.betas(5), vec![0.2; 5]);
        for t in SimConfig::shared(SharedPreset::AllEqual).truths().unwrap() {
            assert_abs_diff_eq!(t, 0.6, epsilon = 1e-14);
        }
    }

    #[test]
    fn replicate_cardinality_and_order() {
        let cfg = SimConfig { replicates: 2, ..Default::default() };
        let out = run_replicates_with(&cfg, Execution::Sequential).unwrap();
        assert_eq!(out.results.len(), 2 * 3 * 5);
        assert!(out.failures.is_empty());
        let keys: Vec<_> = out.results.iter().map(|r| (r.replicate, r.model)).collect();
        assert_eq!(keys[0], (0, 0));
        assert_eq!(keys[29], (1, 4));
        assert_eq!(out.results[5].design, DesignKind::EtsVar { target: 0 });
    }

    #[test]
    fn execution_modes_agree() {
        let cfg = SimConfig { replicates: 12, n_total: 300, n_validate: 40, ..Default::default() };
        let a = run_replicates_with(&cfg, Execution::Sequential).unwrap();
        let b = run_replicates_with(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicates_are_independent() {
        let cfg = SimConfig { replicates: 6, n_total: 300, n_validate: 40, ..Default::default() };
        let all = run_replicates_with(&cfg, Execution::Sequential).unwrap();
        let (alone, _) = run_one_replicate(&cfg, 4).unwrap();
        let from_all: Vec<_> = all.results.iter().filter(|r| r.replicate == 4).cloned().collect();
        assert_eq!(alone, from_all);
    }

    #[test]
    fn summary_hand_arithmetic() {
        let results = [0.0, 2.0].map(|e| ReplicateResult {
            replicate: 0,
            design: DesignKind::Srs,
            model: 0,
            estimate: e,
        });
        let s = summarize_efficiency(&results, &[DesignKind::Srs], &[1.0]).unwrap();
        let c = &s.cells[0];
        assert_eq!((c.bias, c.variance, c.efficiency), (0.0, 2.0, 0.5));
        assert_eq!(c.mc_se, 1.0);
    }

    #[test]
    fn summary_degenerate_cells() {
        let results = [3.0, 3.0, 3.0].map(|e| ReplicateResult {
            replicate: 0,
            design: DesignKind::EtsPc1,
            model: 0,
            estimate: e,
        });
        let s = summarize_efficiency(&results, &[DesignKind::EtsPc1], &[3.0]).unwrap();
        assert!(s.cells[0].efficiency.is_infinite());
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"efficiency\":\"inf\""));
        assert!(matches!(
            summarize_efficiency(&results, &[DesignKind::Srs], &[3.0]),
            Err(Error::EmptyCell(_))
        ));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = SimConfig::shared(SharedPreset::OnlySecond);
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"ets-var:1\""));
        assert_eq!(serde_json::from_str::<SimConfig>(&s).unwrap(), cfg);
    }
}
