//! Design-aware imputation of the unvalidated error-free exposures.
//!
//! Each model `j` is imputed on its own: an imputation model for `X_j` is
//! fit by least squares on the validated rows and applied to the rest.
//! Which predictors enter that model depends on the design. Any variable the
//! design sampled on has to be in every imputation model, and stochastic
//! (multiple) imputation additionally conditions on the analysis outcome
//! `Y_j`:
//!
//! | design      | single imputation         | multiple imputation           |
//! |-------------|---------------------------|-------------------------------|
//! | SRS         | `1, X*_j, Z`              | `1, X*_j, Z, Y_j`             |
//! | ETS on `j'` | `1, X*_j, Z` (+ `X*_j'`)  | `1, X*_j, Z` (+ `X*_j'`), `Y_j` |
//! | ETS on PC1  | `1, X*_j, Z, PC1*`        | `1, X*_j, Z, PC1*, Y_j`       |
//!
//! A [`PredictorRecipe`] can only be built through
//! [`build_predictor_recipe`] or [`PredictorRecipe::with_terms`], and both
//! refuse recipes that drop a design variable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::designs::{DesignKind, DesignSpec};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::linear_model::{critical_value, ols_fit, FittedLinearModel};
use crate::numerics::{cholesky_unchecked, Matrix};
use crate::randvar::{scaled_inv_chisq_sample, RngStream};
use crate::table::StudyTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMode {
    Single,
    Multiple,
}

/// One term of an imputation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    Intercept,
    /// Error-prone exposure `X*_k`.
    ErrorProne(usize),
    /// Every confounder column.
    Confounders,
    /// First principal component scores stored with the design.
    Pc1,
    /// Outcome `Y_k`.
    Outcome(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorRecipe {
    model: usize,
    mode: ImputationMode,
    design: DesignKind,
    terms: Vec<Predictor>,
    pc1: Option<Arc<Vec<f64>>>,
}

/// Standard recipe for model `j` under `design`.
pub fn build_predictor_recipe(
    design: &DesignSpec,
    j: usize,
    mode: ImputationMode,
) -> Result<PredictorRecipe> {
    let mut terms = vec![Predictor::Intercept, Predictor::ErrorProne(j), Predictor::Confounders];
    match design.kind {
        DesignKind::Srs => {}
        DesignKind::EtsVar { target } if target == j => {}
        DesignKind::EtsVar { target } => terms.push(Predictor::ErrorProne(target)),
        DesignKind::EtsPc1 => terms.push(Predictor::Pc1),
    }
    if mode == ImputationMode::Multiple {
        terms.push(Predictor::Outcome(j));
    }
    PredictorRecipe::with_terms(design, j, mode, terms)
}

impl PredictorRecipe {
    /// Custom recipe; rejected if it omits a design variable, or the outcome
    /// under multiple imputation.
    pub fn with_terms(
        design: &DesignSpec,
        j: usize,
        mode: ImputationMode,
        terms: Vec<Predictor>,
    ) -> Result<Self> {
        let has = |p: Predictor| terms.contains(&p);
        let pc1 = match design.kind {
            DesignKind::Srs => None,
            DesignKind::EtsVar { target } => {
                if !has(Predictor::ErrorProne(target)) {
                    return Err(Error::MissingDesignVariable(format!("X*{}", target + 1)));
                }
                None
            }
            DesignKind::EtsPc1 => {
                let scores = design
                    .pc1_scores
                    .clone()
                    .ok_or(Error::MissingDesignArtifact("pc1_scores"))?;
                if !has(Predictor::Pc1) {
                    return Err(Error::MissingDesignVariable("PC1*".into()));
                }
                Some(scores)
            }
        };
        if mode == ImputationMode::Multiple && !has(Predictor::Outcome(j)) {
            return Err(Error::MissingDesignVariable(format!("Y{}", j + 1)));
        }
        if terms.iter().any(|t| matches!(t, Predictor::Outcome(k) if *k != j)) {
            return Err(Error::InvalidParameter(
                "imputation model may only use its own outcome".into(),
            ));
        }
        Ok(Self {
            model: j,
            mode,
            design: design.kind,
            terms,
            pc1,
        })
    }

    pub fn model(&self) -> usize {
        self.model
    }

    pub fn mode(&self) -> ImputationMode {
        self.mode
    }

    pub fn design(&self) -> DesignKind {
        self.design
    }

    pub fn terms(&self) -> &[Predictor] {
        &self.terms
    }

    /// Number of design-matrix columns once confounders are expanded.
    pub fn n_columns(&self, table: &StudyTable) -> usize {
        self.terms
            .iter()
            .map(|t| match t {
                Predictor::Confounders => table.confounders.len(),
                _ => 1,
            })
            .sum()
    }

    /// Column labels once confounders are expanded.
    pub fn column_names(&self, table: &StudyTable) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.terms {
            match *t {
                Predictor::Intercept => out.push("(intercept)".into()),
                Predictor::ErrorProne(k) => out.push(table.error_prone_name(k)),
                Predictor::Confounders => {
                    out.extend((0..table.confounders.len()).map(|k| table.confounder_name(k)))
                }
                Predictor::Pc1 => out.push("pc1".into()),
                Predictor::Outcome(k) => out.push(table.outcome_name(k)),
            }
        }
        out
    }

    fn check_available(&self, table: &StudyTable) -> Result<()> {
        for t in &self.terms {
            let (ok, name) = match *t {
                Predictor::ErrorProne(k) => {
                    (k < table.error_prone.len(), format!("X*{}", k + 1))
                }
                Predictor::Outcome(k) => (k < table.outcomes.len(), format!("Y{}", k + 1)),
                Predictor::Pc1 => (
                    self.pc1.as_ref().is_some_and(|s| s.len() == table.n_rows()),
                    "PC1*".to_string(),
                ),
                _ => (true, String::new()),
            };
            if !ok {
                return Err(Error::MissingPredictor {
                    predictor: name,
                    row: 0,
                });
            }
        }
        Ok(())
    }

    fn fill_row(&self, table: &StudyTable, i: usize, out: &mut Vec<f64>) {
        for t in &self.terms {
            match *t {
                Predictor::Intercept => out.push(1.0),
                Predictor::ErrorProne(k) => out.push(table.error_prone[k][i]),
                Predictor::Confounders => out.extend(table.confounders.iter().map(|c| c[i])),
                Predictor::Pc1 => out.push(self.pc1.as_ref().expect("checked")[i]),
                Predictor::Outcome(k) => out.push(table.outcomes[k][i]),
            }
        }
    }

    /// Design matrix over `rows`.
    fn design_matrix(&self, table: &StudyTable, rows: &[usize]) -> Result<Matrix> {
        self.check_available(table)?;
        let q = self.n_columns(table);
        let mut data = Vec::with_capacity(rows.len() * q);
        for &i in rows {
            let start = data.len();
            self.fill_row(table, i, &mut data);
            if let Some(pos) = data[start..].iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingPredictor {
                    predictor: self.column_names(table)[pos].clone(),
                    row: i,
                });
            }
        }
        Matrix::from_row_major(rows.len().max(1), q, data).map_err(|e| match e {
            Error::DimensionMismatch { .. } => Error::TooFewValidated {
                validated: 0,
                required: q + 2,
            },
            other => other,
        })
    }
}

/// Fitted imputation model for one exposure.
#[derive(Debug, Clone)]
pub struct ImputationFit {
    pub recipe: PredictorRecipe,
    pub fitted: FittedLinearModel,
    posterior_factor: Option<Matrix>,
}

impl ImputationFit {
    pub fn model_index(&self) -> usize {
        self.recipe.model
    }
}

fn partition_rows(table: &StudyTable) -> (Vec<usize>, Vec<usize>) {
    (0..table.n_rows()).partition(|&i| table.validated[i])
}

/// Least-squares fit of `X_j` on the recipe over the validated rows.
pub fn fit_imputation_model(table: &StudyTable, recipe: &PredictorRecipe) -> Result<ImputationFit> {
    let j = recipe.model;
    if j >= table.exposures.len() {
        return Err(Error::InvalidParameter(format!("no exposure for model {}", j + 1)));
    }
    let q = recipe.n_columns(table);
    let (validated, _) = partition_rows(table);
    if validated.len() < q + 2 {
        return Err(Error::TooFewValidated {
            validated: validated.len(),
            required: q + 2,
        });
    }
    let design = recipe.design_matrix(table, &validated)?;
    let response: Vec<f64> = validated.iter().map(|&i| table.exposures[j][i]).collect();
    if let Some(pos) = response.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingPredictor {
            predictor: table.exposure_name(j),
            row: validated[pos],
        });
    }
    let fitted = ols_fit(&design, &response)?;
    let posterior_factor = if fitted.residual_variance > 0.0 {
        Some(cholesky_unchecked(&fitted.gram_inverse, |_, _, _| false)?)
    } else {
        None
    };
    Ok(ImputationFit {
        recipe: recipe.clone(),
        fitted,
        posterior_factor,
    })
}

/// Observed `X_j` on validated rows, the imputation model's prediction on
/// the others.
pub fn impute_deterministic(fit: &ImputationFit, table: &StudyTable) -> Result<Vec<f64>> {
    fill_unvalidated(fit, table, &fit.fitted.coefficients, |_| 0.0)
}

fn fill_unvalidated(
    fit: &ImputationFit,
    table: &StudyTable,
    coefficients: &[f64],
    mut noise: impl FnMut(usize) -> f64,
) -> Result<Vec<f64>> {
    let recipe = &fit.recipe;
    let j = recipe.model;
    recipe.check_available(table)?;
    let mut out = table.exposures[j].clone();
    let mut row = Vec::with_capacity(coefficients.len());
    for i in 0..table.n_rows() {
        if table.validated[i] {
            continue;
        }
        row.clear();
        recipe.fill_row(table, i, &mut row);
        if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingPredictor {
                predictor: recipe.column_names(table)[pos].clone(),
                row: i,
            });
        }
        let mean: f64 = row.iter().zip(coefficients).map(|(x, b)| x * b).sum();
        out[i] = mean + noise(i);
    }
    Ok(out)
}

/// One proper stochastic imputation of `X_j`.
///
/// Draws `σ̃² = df·σ̂² / χ²_df`, then `α̃ ~ MVN(α̂, σ̃² (WᵀW)⁻¹)`, then each
/// unvalidated value as `wᵀα̃ + N(0, σ̃²)`.
pub fn draw_imputation(
    rng: &mut RngStream,
    fit: &ImputationFit,
    table: &StudyTable,
) -> Result<Vec<f64>> {
    let f = &fit.fitted;
    let Some(factor) = fit.posterior_factor.as_ref() else {
        return impute_deterministic(fit, table);
    };
    let df = f.df_residual as f64;
    let sigma2 = scaled_inv_chisq_sample(rng, df, f.residual_variance)?;
    let sigma = sigma2.sqrt();
    let q = f.coefficients.len();
    let z: Vec<f64> = (0..q).map(|_| rng.standard_normal()).collect();
    let coefficients: Vec<f64> = (0..q)
        .map(|a| f.coefficients[a] + sigma * (0..=a).map(|k| factor[(a, k)] * z[k]).sum::<f64>())
        .collect();
    fill_unvalidated(fit, table, &coefficients, |_| sigma * rng.standard_normal())
}

/// Rubin-pooled estimate of one coefficient across imputations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub estimate: f64,
    pub within_var: f64,
    pub between_var: f64,
    pub total_var: f64,
    /// Infinite when the imputations agree exactly.
    #[serde(with = "crate::float_repr")]
    pub df: f64,
    pub level: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub m: usize,
}

impl PooledEstimate {
    pub fn std_error(&self) -> f64 {
        self.total_var.sqrt()
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_upper - self.ci_lower
    }
}

/// Rubin's rules with the classical degrees of freedom.
pub fn rubin_pool(estimates: &[f64], variances: &[f64], level: f64) -> Result<PooledEstimate> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::TooFewImputations(m));
    }
    if variances.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: variances.len(),
        });
    }
    if variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("variances must be non-negative".into()));
    }
    let mf = m as f64;
    let estimate = if estimates.iter().all(|e| *e == estimates[0]) {
        estimates[0]
    } else {
        estimates.iter().sum::<f64>() / mf
    };
    let within_var = variances.iter().sum::<f64>() / mf;
    let between_var = estimates
        .iter()
        .map(|e| (e - estimate) * (e - estimate))
        .sum::<f64>()
        / (mf - 1.0);
    let inflated = (1.0 + 1.0 / mf) * between_var;
    let total_var = within_var + inflated;
    let df = if between_var > 0.0 {
        let r = 1.0 + within_var / inflated;
        (mf - 1.0) * r * r
    } else {
        f64::INFINITY
    };
    let t = critical_value(df, level)?;
    let half = t * total_var.sqrt();
    Ok(PooledEstimate {
        estimate,
        within_var,
        between_var,
        total_var,
        df,
        level,
        ci_lower: estimate - half,
        ci_upper: estimate + half,
        m,
    })
}

/// Analysis design `[1, exposure, Z]`.
fn analysis_design(table: &StudyTable, exposure: &[f64]) -> Result<Matrix> {
    let n = table.n_rows();
    let q = 2 + table.confounders.len();
    let mut data = Vec::with_capacity(n * q);
    for (i, &x) in exposure.iter().enumerate() {
        data.push(1.0);
        data.push(x);
        data.extend(table.confounders.iter().map(|c| c[i]));
    }
    Matrix::from_row_major(n, q, data)
}

/// Labels of the analysis-model coefficients for model `j`.
pub fn analysis_terms(table: &StudyTable, j: usize) -> Vec<String> {
    let mut terms = vec!["(intercept)".to_string(), table.exposure_name(j)];
    terms.extend((0..table.confounders.len()).map(|k| table.confounder_name(k)));
    terms
}

/// OLS of `Y_j` on `[1, X_j, Z]` using the error-free exposure on every row.
pub fn analyze_gold_standard(table: &StudyTable, j: usize) -> Result<FittedLinearModel> {
    if let Some(row) = table.exposures[j].iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingPredictor {
            predictor: table.exposure_name(j),
            row,
        });
    }
    ols_fit(&analysis_design(table, &table.exposures[j])?, &table.outcomes[j])
}

/// Deterministic single imputation followed by the analysis fit of `Y_j`
/// on `[1, X̂_j, Z]`.
pub fn analyze_single_imputation(
    table: &StudyTable,
    design: &DesignSpec,
    j: usize,
) -> Result<FittedLinearModel> {
    let recipe = build_predictor_recipe(design, j, ImputationMode::Single)?;
    let exposure = if table.n_validated() == table.n_rows() {
        table.exposures[j].clone()
    } else {
        let fit = fit_imputation_model(table, &recipe)?;
        impute_deterministic(&fit, table)?
    };
    ols_fit(&analysis_design(table, &exposure)?, &table.outcomes[j])
}

/// Pooled multiple-imputation estimates for every analysis coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleImputationResult {
    pub model: usize,
    pub terms: Vec<String>,
    pub coefficients: Vec<PooledEstimate>,
}

impl MultipleImputationResult {
    /// The exposure slope.
    pub fn slope(&self) -> &PooledEstimate {
        &self.coefficients[1]
    }
}

/// `m_imputations` stochastic imputations of `X_j`, one analysis fit per
/// imputed dataset, pooled with Rubin's rules.
///
/// Imputation `d` draws from `rng.substream(j).substream(d)`, so results do
/// not depend on `exec`.
pub fn analyze_multiple_imputation(
    rng: &RngStream,
    table: &StudyTable,
    design: &DesignSpec,
    j: usize,
    m_imputations: usize,
    level: f64,
    exec: Execution,
) -> Result<MultipleImputationResult> {
    if m_imputations < 2 {
        return Err(Error::TooFewImputations(m_imputations));
    }
    critical_value(1.0, level)?;
    let recipe = build_predictor_recipe(design, j, ImputationMode::Multiple)?;
    let fit = if table.n_validated() == table.n_rows() {
        None
    } else {
        Some(fit_imputation_model(table, &recipe)?)
    };
    let model_stream = rng.substream(j as u64);

    let fits = map_indexed(exec, m_imputations, |d| -> Result<FittedLinearModel> {
        let exposure = match &fit {
            Some(fit) => {
                let mut stream = model_stream.substream(d as u64);
                draw_imputation(&mut stream, fit, table)?
            }
            None => table.exposures[j].clone(),
        };
        ols_fit(&analysis_design(table, &exposure)?, &table.outcomes[j])
    });
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;

    let q = fits[0].coefficients.len();
    let coefficients = (0..q)
        .map(|c| {
            let est: Vec<f64> = fits.iter().map(|f| f.coefficients[c]).collect();
            let var: Vec<f64> = fits.iter().map(|f| f.coef_covariance[(c, c)]).collect();
            rubin_pool(&est, &var, level)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultipleImputationResult {
        model: j,
        terms: analysis_terms(table, j),
        coefficients,
    })
}
