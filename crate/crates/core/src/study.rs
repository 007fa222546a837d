//! Semi-synthetic design comparison on a real (or surrogate) dataset.
//!
//! The workflow treats the observed exposures as error-free, adds classical
//! measurement error to form `X*`, and then compares validation designs of a
//! fixed size by the multiple-imputation confidence intervals they yield.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::designs::{select, DesignKind};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::imputation::{analyze_gold_standard, analyze_multiple_imputation};
use crate::linear_model::wald_ci;
use crate::numerics::{sample_variance, Matrix};
use crate::pca::pca_fit;
use crate::randvar::{MvnSampler, RngStream};
use crate::table::{ColumnNames, StudyTable};

/// Column roles in a study CSV. Outcomes and exposures pair up by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySchema {
    pub outcome_columns: Vec<String>,
    pub exposure_columns: Vec<String>,
    pub confounder_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    /// Error-prone exposures, when the file already carries them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_prone_columns: Option<Vec<String>>,
    /// 0/1 validation indicator, when the file already carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_column: Option<String>,
}

impl StudySchema {
    pub fn check(&self) -> Result<()> {
        if self.outcome_columns.is_empty() {
            return Err(Error::InvalidConfig("schema lists no outcomes".into()));
        }
        if self.outcome_columns.len() != self.exposure_columns.len() {
            return Err(Error::InvalidConfig(format!(
                "schema pairs {} outcomes with {} exposures",
                self.outcome_columns.len(),
                self.exposure_columns.len()
            )));
        }
        if let Some(ep) = &self.error_prone_columns {
            if ep.len() != self.exposure_columns.len() {
                return Err(Error::InvalidConfig(format!(
                    "schema lists {} error-prone columns for {} exposures",
                    ep.len(),
                    self.exposure_columns.len()
                )));
            }
        }
        Ok(())
    }

    fn names(&self) -> ColumnNames {
        ColumnNames {
            outcomes: self.outcome_columns.clone(),
            exposures: self.exposure_columns.clone(),
            error_prone: self
                .error_prone_columns
                .clone()
                .unwrap_or_else(|| self.exposure_columns.iter().map(|c| format!("{c}_star")).collect()),
            confounders: self.confounder_columns.clone(),
        }
    }
}

/// How strictly [`load_table_with`] treats missing exposure values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingExposures {
    /// Every schema cell must be numeric.
    #[default]
    Reject,
    /// Error-free exposures may be blank or `NA` on rows whose validation
    /// indicator is 0.
    AllowUnvalidated,
    /// Error-free exposures may be missing anywhere; the caller applies a
    /// validation selection afterwards.
    AllowAny,
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "NaN" | "nan" | ".")
}

/// Reads a complete-case study CSV; every schema column must be numeric.
/// Rows in errors are 1-based data rows (the header is not counted).
pub fn load_table(path: &Path, schema: &StudySchema) -> Result<StudyTable> {
    load_table_with(path, schema, MissingExposures::Reject)
}

pub fn load_table_with(
    path: &Path,
    schema: &StudySchema,
    missing: MissingExposures,
) -> Result<StudyTable> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_table(file, schema, missing)
}

/// [`load_table_with`] over any reader.
pub fn read_table<R: Read>(
    reader: R,
    schema: &StudySchema,
    missing: MissingExposures,
) -> Result<StudyTable> {
    schema.check()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let find_all = |names: &[String]| names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>();
    let outcome_idx = find_all(&schema.outcome_columns)?;
    let exposure_idx = find_all(&schema.exposure_columns)?;
    let confounder_idx = find_all(&schema.confounder_columns)?;
    let error_prone_idx = schema.error_prone_columns.as_deref().map(find_all).transpose()?;
    let id_idx = schema.id_column.as_deref().map(find).transpose()?;
    let validation_idx = schema.validation_column.as_deref().map(find).transpose()?;
    if missing == MissingExposures::AllowUnvalidated && validation_idx.is_none() {
        return Err(Error::InvalidConfig(
            "missing exposures need a validation column".into(),
        ));
    }

    let p = outcome_idx.len();
    let mut outcomes = vec![Vec::new(); p];
    let mut exposures = vec![Vec::new(); p];
    let mut error_prone = vec![Vec::new(); error_prone_idx.as_ref().map_or(0, |v| v.len())];
    let mut confounders = vec![Vec::new(); confounder_idx.len()];
    let mut ids = id_idx.map(|_| Vec::new());
    let mut validated = Vec::new();

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let parse = |idx: usize| -> Result<f64> {
            let s = cell(idx);
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumericCell {
                    row,
                    column: headers[idx].to_string(),
                    value: s.to_string(),
                }),
            }
        };
        let is_validated = match validation_idx {
            Some(idx) => match parse(idx)? {
                1.0 => true,
                0.0 => false,
                _ => {
                    return Err(Error::NonNumericCell {
                        row,
                        column: headers[idx].to_string(),
                        value: cell(idx).to_string(),
                    })
                }
            },
            None => false,
        };
        for (col, &idx) in outcomes.iter_mut().zip(&outcome_idx) {
            col.push(parse(idx)?);
        }
        for (col, &idx) in exposures.iter_mut().zip(&exposure_idx) {
            let lenient = match missing {
                MissingExposures::Reject => false,
                MissingExposures::AllowUnvalidated => !is_validated,
                MissingExposures::AllowAny => true,
            };
            if lenient && is_missing_token(cell(idx)) {
                col.push(f64::NAN);
            } else {
                col.push(parse(idx)?);
            }
        }
        if let Some(ep) = &error_prone_idx {
            for (col, &idx) in error_prone.iter_mut().zip(ep) {
                col.push(parse(idx)?);
            }
        }
        for (col, &idx) in confounders.iter_mut().zip(&confounder_idx) {
            col.push(parse(idx)?);
        }
        if let (Some(ids), Some(idx)) = (ids.as_mut(), id_idx) {
            ids.push(cell(idx).to_string());
        }
        validated.push(is_validated);
    }
    if validated.is_empty() {
        return Err(Error::TooFewRows {
            required: 1,
            actual: 0,
        });
    }
    Ok(StudyTable {
        ids,
        outcomes,
        exposures,
        error_prone,
        confounders,
        validated,
        names: schema.names(),
    })
}

/// Measurement-error variances to inject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorRule {
    /// `σ²_uj = f · Var(X_j)` with the `N - 1` sample variance.
    VarFraction(f64),
    /// One variance per exposure.
    Variances(Vec<f64>),
}

/// Adds independent `N(0, σ²_uj)` errors to every exposure.
///
/// Returns the table with `X*` filled in and the variances used.
pub fn inject_error(
    rng: &mut RngStream,
    table: &StudyTable,
    rule: &ErrorRule,
) -> Result<(StudyTable, Vec<f64>)> {
    let p = table.exposures.len();
    let variances = match rule {
        ErrorRule::VarFraction(f) => {
            if !(*f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidRule(format!("error fraction must be positive, got {f}")));
            }
            table
                .exposures
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    if let Some(row) = x.iter().position(|v| !v.is_finite()) {
                        return Err(Error::MissingPredictor {
                            predictor: table.exposure_name(j),
                            row,
                        });
                    }
                    Ok(f * sample_variance(x))
                })
                .collect::<Result<Vec<_>>>()?
        }
        ErrorRule::Variances(v) => {
            if v.len() != p {
                return Err(Error::InvalidRule(format!(
                    "{} error variances for {p} exposures",
                    v.len()
                )));
            }
            if v.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(Error::InvalidRule("error variances must be positive".into()));
            }
            v.clone()
        }
    };
    let error_prone = table
        .exposures
        .iter()
        .zip(&variances)
        .map(|(x, s2)| {
            let sd = s2.sqrt();
            x.iter().map(|xi| xi + sd * rng.standard_normal()).collect()
        })
        .collect();
    let mut names = table.names.clone();
    names.error_prone = (0..p).map(|j| format!("{}_star", table.exposure_name(j))).collect();
    Ok((
        StudyTable {
            error_prone,
            names,
            ..table.clone()
        },
        variances,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSettings {
    pub n_validate: usize,
    pub m_imputations: usize,
    pub level: f64,
    pub designs: Vec<DesignKind>,
}

impl ComparisonSettings {
    /// SRS, ETS on the first exposure, and ETS on PC1.
    pub fn standard(n_validate: usize, m_imputations: usize, level: f64) -> Self {
        Self {
            n_validate,
            m_imputations,
            level,
            designs: vec![
                DesignKind::Srs,
                DesignKind::EtsVar { target: 0 },
                DesignKind::EtsPc1,
            ],
        }
    }
}

/// One estimate of `β₁ⱼ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `None` for the gold-standard analysis.
    pub design: Option<DesignKind>,
    pub analysis: String,
    /// 1-based model number.
    pub model: usize,
    pub outcome: String,
    pub exposure: String,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub width: f64,
    /// Width divided by the gold-standard width for the same model.
    pub relative_width: f64,
    #[serde(with = "crate::float_repr")]
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaDiagnostics {
    pub proportion_explained: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Loadings of the first component, one per error-prone exposure.
    pub pc1_loadings: Vec<f64>,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub n_total: usize,
    pub n_validate: usize,
    pub m_imputations: usize,
    pub level: f64,
    pub error_rule: Option<ErrorRule>,
    pub error_variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metadata: ReportMetadata,
    pub gold_standard: Vec<ReportRow>,
    pub designs: Vec<ReportRow>,
    pub pca: PcaDiagnostics,
}

impl ComparisonReport {
    pub fn rows_for(&self, design: DesignKind) -> impl Iterator<Item = &ReportRow> {
        self.designs.iter().filter(move |r| r.design == Some(design))
    }

    /// Mean CI width of `design` across models, in each model's own units.
    pub fn mean_width(&self, design: DesignKind) -> f64 {
        let w: Vec<f64> = self.rows_for(design).map(|r| r.width).collect();
        crate::numerics::mean(&w)
    }

    /// Mean of the per-model widths relative to the gold standard.
    pub fn mean_relative_width(&self, design: DesignKind) -> f64 {
        let w: Vec<f64> = self.rows_for(design).map(|r| r.relative_width).collect();
        crate::numerics::mean(&w)
    }
}

/// Gold-standard OLS plus one multiple-imputation analysis per design and
/// model on a table that already carries `X*`.
///
/// Design `d` selects with `rng.substream(1).substream(d)` and imputes with
/// `rng.substream(2).substream(d)`.
pub fn run_design_comparison(
    rng: &RngStream,
    table: &StudyTable,
    settings: &ComparisonSettings,
    exec: Execution,
) -> Result<ComparisonReport> {
    table.check_shape()?;
    let n = table.n_rows();
    if settings.n_validate == 0 || settings.n_validate > n {
        return Err(Error::SizeExceedsPopulation {
            n_validate: settings.n_validate,
            n_total: n,
        });
    }
    let xstar = table.error_prone_matrix()?;
    let full = table.fully_validated()?;
    let p = table.n_models();

    let mut gold_standard = Vec::with_capacity(p);
    for j in 0..p {
        let fit = analyze_gold_standard(&full, j)?;
        let (lo, hi) = wald_ci(&fit, 1, settings.level)?;
        gold_standard.push(ReportRow {
            design: None,
            analysis: "Gold standard".into(),
            model: j + 1,
            outcome: table.outcome_name(j),
            exposure: table.exposure_name(j),
            estimate: fit.coefficients[1],
            std_error: fit.standard_error(1),
            ci_lower: lo,
            ci_upper: hi,
            width: hi - lo,
            relative_width: 1.0,
            df: fit.df_residual as f64,
        });
    }

    let select_root = rng.substream(1);
    let impute_root = rng.substream(2);
    let per_design = map_indexed(exec, settings.designs.len(), |d| -> Result<Vec<ReportRow>> {
        let kind = settings.designs[d];
        let (selection, spec) =
            select(kind, &mut select_root.substream(d as u64), &xstar, settings.n_validate)?;
        let masked = full.with_validation(&selection)?;
        let stream = impute_root.substream(d as u64);
        (0..p)
            .map(|j| {
                let mi = analyze_multiple_imputation(
                    &stream,
                    &masked,
                    &spec,
                    j,
                    settings.m_imputations,
                    settings.level,
                    Execution::Sequential,
                )?;
                let s = mi.slope();
                Ok(ReportRow {
                    design: Some(kind),
                    analysis: kind.label(),
                    model: j + 1,
                    outcome: table.outcome_name(j),
                    exposure: table.exposure_name(j),
                    estimate: s.estimate,
                    std_error: s.std_error(),
                    ci_lower: s.ci_lower,
                    ci_upper: s.ci_upper,
                    width: s.ci_width(),
                    relative_width: s.ci_width() / gold_standard[j].width,
                    df: s.df,
                })
            })
            .collect()
    });
    let mut designs = Vec::with_capacity(settings.designs.len() * p);
    for rows in per_design {
        designs.extend(rows?);
    }

    let model = pca_fit(&xstar)?;
    let pca = PcaDiagnostics {
        proportion_explained: model.proportion_explained.clone(),
        eigenvalues: model.eigenvalues.clone(),
        pc1_loadings: model.loading_column(0),
        variables: (0..p).map(|j| table.error_prone_name(j)).collect(),
    };
    Ok(ComparisonReport {
        metadata: ReportMetadata {
            seed: rng.master_seed(),
            n_total: n,
            n_validate: settings.n_validate,
            m_imputations: settings.m_imputations,
            level: settings.level,
            error_rule: None,
            error_variances: None,
        },
        gold_standard,
        designs,
        pca,
    })
}

/// Error injection from `rng.substream(0)` followed by
/// [`run_design_comparison`] on the same root stream.
pub fn run_study(
    rng: &RngStream,
    table: &StudyTable,
    rule: &ErrorRule,
    settings: &ComparisonSettings,
    exec: Execution,
) -> Result<ComparisonReport> {
    let (with_error, variances) = inject_error(&mut rng.substream(0), table, rule)?;
    let mut report = run_design_comparison(rng, &with_error, settings, exec)?;
    report.metadata.error_rule = Some(rule.clone());
    report.metadata.error_variances = Some(variances);
    Ok(report)
}

/// Size of the bundled surrogate dataset.
pub const SURROGATE_ROWS: usize = 2388;

/// Seed the bundled surrogate dataset was generated with.
pub const SURROGATE_SEED: u64 = 2388;

const SURROGATE_OUTCOMES: [&str; 5] = ["vitamin_d", "heart_rate", "hdl", "insulin", "folate"];
const SURROGATE_EXPOSURES: [&str; 5] = ["calcium", "caffeine", "saturated_fat", "alcohol", "food_folate"];
const SURROGATE_CONFOUNDERS: [&str; 4] = ["female", "age", "hispanic", "education"];

/// Schema of the bundled surrogate dataset.
pub fn surrogate_schema() -> StudySchema {
    let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    StudySchema {
        outcome_columns: own(&SURROGATE_OUTCOMES),
        exposure_columns: own(&SURROGATE_EXPOSURES),
        confounder_columns: own(&SURROGATE_CONFOUNDERS),
        id_column: Some("id".into()),
        error_prone_columns: None,
        validation_column: None,
    }
}

/// Synthetic stand-in for a five-nutrient dietary intake study.
///
/// Exposures are Gaussian with means, variances and correlations set to a
/// dietary-survey profile (calcium, saturated fat and food folate correlated;
/// caffeine and alcohol nearly unrelated to the rest). Each outcome depends
/// weakly on its own exposure and on the confounders. Values are rounded to
/// two decimals.
pub fn generate_surrogate(rng: &mut RngStream, n: usize) -> Result<StudyTable> {
    let means = [950.0, 160.0, 28.0, 12.0, 250.0];
    let variances = [311_220.8, 30_523.6, 282.0, 476.4, 19_967.6];
    let corr = [
        [1.00, 0.05, 0.59, 0.10, 0.38],
        [0.05, 1.00, 0.08, 0.16, 0.06],
        [0.59, 0.08, 1.00, 0.12, 0.34],
        [0.10, 0.16, 0.12, 1.00, 0.02],
        [0.38, 0.06, 0.34, 0.02, 1.00],
    ];
    let sd: Vec<f64> = variances.iter().map(|v: &f64| v.sqrt()).collect();
    let cov: Vec<Vec<f64>> = (0..5)
        .map(|a| (0..5).map(|b| corr[a][b] * sd[a] * sd[b]).collect())
        .collect();
    let sampler = MvnSampler::new(means.to_vec(), &Matrix::from_rows(&cov)?)?;

    // intercept, sd of the outcome noise, and effects of (female, age, hispanic, education)
    let outcome_base = [
        (60.0, 25.0, [4.0, 0.25, -6.0, 1.5]),
        (74.0, 12.0, [3.0, -0.05, 0.5, -0.5]),
        (46.0, 14.0, [10.0, 0.1, -2.0, 1.0]),
        (12.0, 9.0, [-1.0, 0.02, 2.0, -0.8]),
        (14.0, 7.0, [1.0, 0.06, -1.0, 0.7]),
    ];
    // standardized association of each outcome with its own exposure
    let effect = 0.1;

    let round2 = |v: f64| (v * 100.0).round() / 100.0;
    let mut z = (0..4).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
    let mut x = (0..5).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
    let mut y = (0..5).map(|_| Vec::with_capacity(n)).collect::<Vec<Vec<f64>>>();
    let mut buf = [0.0; 5];
    let mut row = [0.0; 5];
    for _ in 0..n {
        let female = if rng.uniform() < 0.52 { 1.0 } else { 0.0 };
        let age = (18.0 + 62.0 * rng.uniform()).floor();
        let hispanic = if rng.uniform() < 0.22 { 1.0 } else { 0.0 };
        let education = 1.0 + (5.0 * rng.uniform()).floor().min(4.0);
        let conf = [female, age, hispanic, education];
        sampler.sample_into(rng, &mut buf, &mut row);
        for k in 0..5 {
            let xk = round2(row[k]);
            let (intercept, noise_sd, beta_z) = outcome_base[k];
            let slope = effect * noise_sd / sd[k];
            let mu = intercept
                + slope * (xk - means[k])
                + beta_z.iter().zip(&conf).map(|(b, c)| b * c).sum::<f64>();
            y[k].push(round2(mu + noise_sd * rng.standard_normal()));
            x[k].push(xk);
        }
        for (col, c) in z.iter_mut().zip(conf) {
            col.push(c);
        }
    }
    let schema = surrogate_schema();
    Ok(StudyTable {
        ids: Some((1..=n).map(|i| i.to_string()).collect()),
        outcomes: y,
        exposures: x,
        error_prone: Vec::new(),
        confounders: z,
        validated: vec![false; n],
        names: schema.names(),
    })
}

/// Writes `table` as CSV: id (if any), outcomes, exposures, error-prone
/// exposures (if any), confounders, and `validated` when `with_validation`.
///
/// Missing values are written as empty cells.
pub fn write_table_csv<W: Write>(table: &StudyTable, writer: W, with_validation: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::new();
    if table.ids.is_some() {
        header.push("id".into());
    }
    let p = table.n_models();
    header.extend((0..p).map(|j| table.outcome_name(j)));
    header.extend((0..p).map(|j| table.exposure_name(j)));
    if table.has_error_prone() {
        header.extend((0..p).map(|j| table.error_prone_name(j)));
    }
    header.extend((0..table.confounders.len()).map(|k| table.confounder_name(k)));
    if with_validation {
        header.push("validated".into());
    }
    wtr.write_record(&header)?;
    let fmt = |v: f64| if v.is_finite() { format!("{v}") } else { String::new() };
    for i in 0..table.n_rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ids) = &table.ids {
            rec.push(ids[i].clone());
        }
        rec.extend(table.outcomes.iter().map(|c| fmt(c[i])));
        rec.extend(table.exposures.iter().map(|c| fmt(c[i])));
        rec.extend(table.error_prone.iter().map(|c| fmt(c[i])));
        rec.extend(table.confounders.iter().map(|c| fmt(c[i])));
        if with_validation {
            rec.push(if table.validated[i] { "1" } else { "0" }.into());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample_covariance;
    use crate::randvar::derive_stream;
    use approx::assert_abs_diff_eq;

    fn schema() -> StudySchema {
        StudySchema {
            outcome_columns: vec!["y".into()],
            exposure_columns: vec!["x".into()],
            confounder_columns: vec!["z".into()],
            id_column: None,
            error_prone_columns: None,
            validation_column: None,
        }
    }

    #[test]
    fn loads_well_formed_csv() {
        let csv = "y,x,z,extra\n1,2,0,a\n2,3,1,b\n3,5,0,c\n";
        let t = read_table(csv.as_bytes(), &schema(), MissingExposures::Reject).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.exposures[0], vec![2.0, 3.0, 5.0]);
        assert_eq!(t.names.exposures, vec!["x"]);
    }

    #[test]
    fn reports_missing_column_and_bad_cell() {
        let csv = "y,z\n1,0\n";
        assert!(matches!(
            read_table(csv.as_bytes(), &schema(), MissingExposures::Reject),
            Err(Error::MissingColumn(c)) if c == "x"
        ));
        let csv = "y,x,z\n1,2,0\nNA,3,1\n";
        match read_table(csv.as_bytes(), &schema(), MissingExposures::Reject) {
            Err(Error::NonNumericCell { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "y", "NA"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_table(Path::new("/nonexistent/file.csv"), &schema()),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn lenient_load_allows_unvalidated_gaps() {
        let mut s = schema();
        s.validation_column = Some("r".into());
        s.error_prone_columns = Some(vec!["xs".into()]);
        let csv = "y,x,xs,z,r\n1,2,2.1,0,1\n2,NA,3.2,1,0\n3,,4,0,0\n";
        let t = read_table(csv.as_bytes(), &s, MissingExposures::AllowUnvalidated).unwrap();
        assert_eq!(t.validated, vec![true, false, false]);
        assert!(t.exposures[0][1].is_nan() && t.exposures[0][2].is_nan());
        let bad = "y,x,xs,z,r\n1,NA,2.1,0,1\n";
        assert!(matches!(
            read_table(bad.as_bytes(), &s, MissingExposures::AllowUnvalidated),
            Err(Error::NonNumericCell { row: 1, .. })
        ));
    }

    fn simple_table(n: usize, seed: u64) -> StudyTable {
        let mut rng = derive_stream(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| 10.0 * rng.standard_normal()).collect();
        let z: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.5 { 1.0 } else { 0.0 }).collect();
        let y = x.iter().zip(&z).map(|(a, b)| 0.2 * a + b + rng.standard_normal()).collect();
        StudyTable {
            ids: None,
            outcomes: vec![y],
            exposures: vec![x],
            error_prone: vec![],
            confounders: vec![z],
            validated: vec![false; n],
            names: ColumnNames::numbered(1, 1),
        }
    }

    #[test]
    fn var_fraction_rule() {
        let mut t = simple_table(100, 1);
        let target = 311_220.8;
        let v = sample_variance(&t.exposures[0]);
        let scale = (target / v).sqrt();
        for xi in &mut t.exposures[0] {
            *xi *= scale;
        }
        let (_, used) = inject_error(&mut derive_stream(1, 1), &t, &ErrorRule::VarFraction(0.25)).unwrap();
        assert_abs_diff_eq!(used[0], 77_805.2, epsilon = 1e-6);
        let big = simple_table(100_000, 2);
        let (with, _) = inject_error(&mut derive_stream(2, 1), &big, &ErrorRule::VarFraction(0.25)).unwrap();
        let ratio = sample_variance(&with.error_prone[0]) / sample_variance(&big.exposures[0]);
        assert!((ratio - 1.25).abs() < 0.02 * 1.25, "{ratio}");
        let u: Vec<f64> = with.error_prone[0].iter().zip(&big.exposures[0]).map(|(a, b)| a - b).collect();
        assert!(sample_covariance(&u, &big.exposures[0]).abs() < 0.05 * sample_variance(&big.exposures[0]).sqrt() * sample_variance(&u).sqrt());
        assert_eq!(with.names.error_prone, vec!["x1_star"]);
    }

    #[test]
    fn degenerate_rules_rejected() {
        let t = simple_table(10, 3);
        for rule in [
            ErrorRule::Variances(vec![0.0]),
            ErrorRule::Variances(vec![1.0, 1.0]),
            ErrorRule::VarFraction(0.0),
            ErrorRule::VarFraction(-1.0),
        ] {
            assert!(matches!(
                inject_error(&mut derive_stream(1, 0), &t, &rule),
                Err(Error::InvalidRule(_))
            ));
        }
    }

    fn two_model_table(n: usize, seed: u64) -> StudyTable {
        let a = simple_table(n, seed);
        let b = simple_table(n, seed + 100);
        StudyTable {
            outcomes: vec![a.outcomes[0].clone(), b.outcomes[0].clone()],
            exposures: vec![a.exposures[0].clone(), b.exposures[0].clone()],
            names: ColumnNames::numbered(2, 1),
            ..a
        }
    }

    #[test]
    fn full_validation_reproduces_gold_standard() {
        let t = two_model_table(200, 4);
        let rng = derive_stream(4, 9);
        let settings = ComparisonSettings::standard(200, 5, 0.95);
        let report = run_study(&rng, &t, &ErrorRule::VarFraction(0.25), &settings, Execution::Sequential).unwrap();
        assert_eq!(report.designs.len(), 6);
        for row in &report.designs {
            let gold = &report.gold_standard[row.model - 1];
            assert_abs_diff_eq!(row.estimate, gold.estimate, epsilon = 1e-10);
        }
    }

    #[test]
    fn report_properties() {
        let t = two_model_table(300, 5);
        let settings = ComparisonSettings::standard(60, 10, 0.95);
        let rule = ErrorRule::VarFraction(0.25);
        let a = run_study(&derive_stream(5, 0), &t, &rule, &settings, Execution::Sequential).unwrap();
        let b = run_study(&derive_stream(5, 0), &t, &rule, &settings, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let other = ComparisonSettings::standard(100, 4, 0.95);
        let c = run_study(&derive_stream(6, 0), &t, &rule, &other, Execution::Sequential).unwrap();
        assert_eq!(a.gold_standard, c.gold_standard);
        assert!(a.designs.iter().all(|r| r.width > 0.0));
        assert_eq!(a.metadata.error_variances.as_ref().unwrap().len(), 2);

        let (with, _) = inject_error(&mut derive_stream(5, 0).substream(0), &t, &rule).unwrap();
        let pca = pca_fit(&with.error_prone_matrix().unwrap()).unwrap();
        assert_eq!(a.pca.proportion_explained, pca.proportion_explained);
        assert_eq!(a.pca.pc1_loadings, pca.loading_column(0));
    }

    #[test]
    fn too_few_validated_propagates() {
        let mut t = two_model_table(200, 6);
        let mut rng = derive_stream(60, 0);
        t.confounders = (0..6).map(|_| (0..200).map(|_| rng.standard_normal()).collect()).collect();
        t.names = ColumnNames::numbered(2, 6);
        // 1, X*, six confounders, Y: nine predictors need eleven validated rows
        let settings = ComparisonSettings::standard(10, 5, 0.95);
        let err = run_study(&derive_stream(1, 0), &t, &ErrorRule::VarFraction(0.25), &settings, Execution::Sequential);
        assert!(
            matches!(err, Err(Error::TooFewValidated { validated: 10, required: 11 })),
            "{err:?}"
        );
    }

    #[test]
    fn surrogate_profile() {
        let t = generate_surrogate(&mut derive_stream(SURROGATE_SEED, 0), 20_000).unwrap();
        let sd: Vec<f64> = t.exposures.iter().map(|x| sample_variance(x).sqrt()).collect();
        let r = |a: usize, b: usize| sample_covariance(&t.exposures[a], &t.exposures[b]) / (sd[a] * sd[b]);
        assert!((r(0, 2) - 0.59).abs() < 0.03);
        assert!((r(0, 4) - 0.38).abs() < 0.03);
        assert!((r(2, 4) - 0.34).abs() < 0.03);
        assert!(r(1, 3) < 0.2);
        assert!((sd[0] * sd[0] / 311_220.8 - 1.0).abs() < 0.05);
    }

    #[test]
    fn csv_round_trip() {
        let t = generate_surrogate(&mut derive_stream(1, 0), 50).unwrap();
        let mut buf = Vec::new();
        write_table_csv(&t, &mut buf, false).unwrap();
        let back = read_table(buf.as_slice(), &surrogate_schema(), MissingExposures::Reject).unwrap();
        assert_eq!(back, t);
    }
}
