use std::path::Path;

use serde::Serialize;
use twophase::designs::ValidationSelection;
use twophase::exec::Execution;
use twophase::imputation::{analysis_terms, analyze_multiple_imputation, analyze_single_imputation};
use twophase::linear_model::wald_ci;
use twophase::randvar::derive_stream;
use twophase::study::{load_table_with, MissingExposures, StudySchema};
use twophase::table::StudyTable;
use twophase::Error;

use super::design::DesignArtifact;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, resolve_input, Manifest, OutputSet, ARTIFACT_VERSION, CONFIG_SCHEMA_VERSION};
use crate::output::{csv_bytes, num, opt};
use crate::{AnalyzeArgs, MethodArg};

#[derive(Debug, Clone, Serialize)]
struct CoefficientRow {
    model: usize,
    outcome: String,
    exposure: String,
    term: String,
    estimate: f64,
    std_error: f64,
    ci_lower: f64,
    ci_upper: f64,
    #[serde(with = "twophase::float_repr")]
    df: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    within_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    between_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_var: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AnalysisOutput<'a> {
    method: &'a str,
    design: String,
    n_total: usize,
    n_validated: usize,
    level: f64,
    imputations: Option<usize>,
    coefficients: &'a [CoefficientRow],
}

fn read_selection(path: &Path, n_total: usize) -> CliResult<ValidationSelection> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "row_id")
        .ok_or_else(|| Error::MissingColumn("row_id".into()))?;
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = record.get(col).unwrap_or("");
        match cell.parse::<usize>() {
            Ok(id) if (1..=n_total).contains(&id) => rows.push(id - 1),
            _ => {
                return Err(Error::NonNumericCell {
                    row: r + 1,
                    column: "row_id".into(),
                    value: cell.to_string(),
                }
                .into())
            }
        }
    }
    Ok(ValidationSelection::from_indices(n_total, rows)?)
}

fn with_error_prone_names(schema: &StudySchema) -> StudySchema {
    let mut s = schema.clone();
    if s.error_prone_columns.is_none() {
        s.error_prone_columns = Some(s.exposure_columns.iter().map(|c| format!("{c}_star")).collect());
    }
    s
}

fn load(data: &Path, schema: &StudySchema, selection: Option<&Path>) -> CliResult<StudyTable> {
    let schema = with_error_prone_names(schema);
    let table = match selection {
        Some(sel) => {
            let mut s = schema.clone();
            s.validation_column = None;
            let table = load_table_with(data, &s, MissingExposures::AllowAny)?;
            let selection = read_selection(sel, table.n_rows())?;
            table.with_validation(&selection)?
        }
        None => {
            if schema.validation_column.is_none() {
                return Err(CliError::Usage(
                    "give --selection or a schema with validation_column".into(),
                ));
            }
            load_table_with(data, &schema, MissingExposures::AllowUnvalidated)?
        }
    };
    for (j, col) in table.exposures.iter().enumerate() {
        if let Some(row) = (0..table.n_rows()).find(|&i| table.validated[i] && !col[i].is_finite()) {
            return Err(CliError::Data(format!(
                "validated row {} has no value for {}",
                row + 1,
                table.exposure_name(j)
            )));
        }
    }
    Ok(table)
}

fn single_rows(table: &StudyTable, artifact: &DesignArtifact, level: f64) -> CliResult<Vec<CoefficientRow>> {
    let spec = artifact.to_spec(table.n_rows())?;
    let mut rows = Vec::new();
    for j in 0..table.n_models() {
        let fit = analyze_single_imputation(table, &spec, j)?;
        for (c, term) in analysis_terms(table, j).into_iter().enumerate() {
            let (lo, hi) = wald_ci(&fit, c, level)?;
            rows.push(CoefficientRow {
                model: j + 1,
                outcome: table.outcome_name(j),
                exposure: table.exposure_name(j),
                term,
                estimate: fit.coefficients[c],
                std_error: fit.standard_error(c),
                ci_lower: lo,
                ci_upper: hi,
                df: fit.df_residual as f64,
                within_var: None,
                between_var: None,
                total_var: None,
            });
        }
    }
    Ok(rows)
}

fn multiple_rows(
    table: &StudyTable,
    artifact: &DesignArtifact,
    m: usize,
    level: f64,
    seed: u64,
) -> CliResult<Vec<CoefficientRow>> {
    let spec = artifact.to_spec(table.n_rows())?;
    let rng = derive_stream(seed, 0);
    let mut rows = Vec::new();
    for j in 0..table.n_models() {
        let mi = analyze_multiple_imputation(&rng, table, &spec, j, m, level, Execution::default())?;
        for (term, p) in mi.terms.iter().zip(&mi.coefficients) {
            rows.push(CoefficientRow {
                model: j + 1,
                outcome: table.outcome_name(j),
                exposure: table.exposure_name(j),
                term: term.clone(),
                estimate: p.estimate,
                std_error: p.std_error(),
                ci_lower: p.ci_lower,
                ci_upper: p.ci_upper,
                df: p.df,
                within_var: Some(p.within_var),
                between_var: Some(p.between_var),
                total_var: Some(p.total_var),
            });
        }
    }
    Ok(rows)
}

pub fn run(args: &AnalyzeArgs) -> CliResult<Manifest> {
    if args.method == MethodArg::Multiple && args.m < 2 {
        return Err(Error::TooFewImputations(args.m).into());
    }
    let resolved = AnalyzeArgs {
        data: resolve_input(&args.data)?,
        schema: resolve_input(&args.schema)?,
        selection: args.selection.as_deref().map(resolve_input).transpose()?,
        design: resolve_input(&args.design)?,
        ..args.clone()
    };
    let schema = super::read_schema(&resolved.schema)?;
    let artifact: DesignArtifact = super::read_json(&resolved.design)?;
    let table = load(&resolved.data, &schema, resolved.selection.as_deref())?;

    let (method, rows, imputations) = match args.method {
        MethodArg::Single => ("single", single_rows(&table, &artifact, args.level)?, None),
        MethodArg::Multiple => (
            "multiple",
            multiple_rows(&table, &artifact, args.m, args.level, args.seed)?,
            Some(args.m),
        ),
    };

    let header = [
        "model", "outcome", "exposure", "term", "estimate", "std_error", "ci_lower", "ci_upper", "df",
        "within_var", "between_var", "total_var",
    ];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.to_string(),
                r.outcome.clone(),
                r.exposure.clone(),
                r.term.clone(),
                num(r.estimate),
                num(r.std_error),
                num(r.ci_lower),
                num(r.ci_upper),
                num(r.df),
                opt(r.within_var),
                opt(r.between_var),
                opt(r.total_var),
            ]
        })
        .collect();

    let mut out = OutputSet::create(&args.out)?;
    out.write("coefficients.csv", &csv_bytes(&header, &csv_rows)?)?;
    out.write_json(
        "coefficients.json",
        &AnalysisOutput {
            method,
            design: artifact.kind.to_string(),
            n_total: table.n_rows(),
            n_validated: table.n_validated(),
            level: args.level,
            imputations,
            coefficients: &rows,
        },
    )?;
    let mut inputs = vec![
        digest_file(&resolved.data)?,
        digest_file(&resolved.schema)?,
        digest_file(&resolved.design)?,
    ];
    if let Some(s) = &resolved.selection {
        inputs.push(digest_file(s)?);
    }
    out.finish(Manifest {
        command: "analyze".into(),
        version: ARTIFACT_VERSION.into(),
        config_schema: CONFIG_SCHEMA_VERSION,
        seed: Some(args.seed),
        args: serde_json::to_value(&resolved)?,
        resolved_config: None,
        inputs,
        outputs: Vec::new(),
    })
}
