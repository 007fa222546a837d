use twophase::exec::Execution;
use twophase::randvar::derive_stream;
use twophase::study::{
    inject_error, load_table_with, run_study, write_table_csv, ComparisonSettings, ErrorRule,
    MissingExposures, ReportRow, StudySchema,
};

use crate::error::CliResult;
use crate::manifest::{digest_file, resolve_input, Manifest, OutputSet, ARTIFACT_VERSION, CONFIG_SCHEMA_VERSION};
use crate::output::{csv_bytes, num};
use crate::StudyArgs;

const DEFAULT_ERROR_FRACTION: f64 = 0.25;

fn report_row(r: &ReportRow) -> Vec<String> {
    vec![
        r.design.map(|d| d.to_string()).unwrap_or_default(),
        r.analysis.clone(),
        r.model.to_string(),
        r.outcome.clone(),
        r.exposure.clone(),
        num(r.estimate),
        num(r.std_error),
        num(r.ci_lower),
        num(r.ci_upper),
        num(r.width),
        num(r.relative_width),
        num(r.df),
    ]
}

pub fn run(args: &StudyArgs) -> CliResult<Manifest> {
    let resolved = StudyArgs {
        data: resolve_input(&args.data)?,
        schema: resolve_input(&args.schema)?,
        ..args.clone()
    };
    let schema = super::read_schema(&resolved.schema)?;
    let table = load_table_with(&resolved.data, &schema, MissingExposures::Reject)?;
    let rule = match &args.error_variances {
        Some(v) => ErrorRule::Variances(v.clone()),
        None => ErrorRule::VarFraction(args.error_fraction.unwrap_or(DEFAULT_ERROR_FRACTION)),
    };
    let settings = ComparisonSettings::standard(args.n, args.imputations, args.level);
    let rng = derive_stream(args.seed, 0);
    let mut report = run_study(&rng, &table, &rule, &settings, Execution::default())?;
    report.metadata.seed = args.seed;
    let (with_error, _) = inject_error(&mut rng.substream(0), &table, &rule)?;

    let header = [
        "design", "analysis", "model", "outcome", "exposure", "estimate", "std_error", "ci_lower",
        "ci_upper", "width", "relative_width", "df",
    ];
    let rows: Vec<Vec<String>> = report
        .gold_standard
        .iter()
        .chain(&report.designs)
        .map(report_row)
        .collect();
    let plot_rows: Vec<Vec<String>> = report
        .gold_standard
        .iter()
        .chain(&report.designs)
        .map(|r| {
            vec![
                r.design.map(|d| d.label()).unwrap_or_else(|| "gold standard".into()),
                r.model.to_string(),
                r.outcome.clone(),
                num(r.estimate),
                num(r.ci_lower),
                num(r.ci_upper),
                num(r.relative_width),
            ]
        })
        .collect();

    let mut data_bytes = Vec::new();
    write_table_csv(&with_error, &mut data_bytes, false)?;
    let p = with_error.n_models();
    let derived = StudySchema {
        outcome_columns: (0..p).map(|j| with_error.outcome_name(j)).collect(),
        exposure_columns: (0..p).map(|j| with_error.exposure_name(j)).collect(),
        confounder_columns: (0..with_error.confounders.len())
            .map(|k| with_error.confounder_name(k))
            .collect(),
        id_column: with_error.ids.as_ref().map(|_| "id".to_string()),
        error_prone_columns: Some((0..p).map(|j| with_error.error_prone_name(j)).collect()),
        validation_column: None,
    };

    let mut out = OutputSet::create(&args.out)?;
    out.write_json("report.json", &report)?;
    out.write("report.csv", &csv_bytes(&header, &rows)?)?;
    out.write(
        "plot_data.csv",
        &csv_bytes(
            &["design", "model", "outcome", "estimate", "ci_lower", "ci_upper", "relative_width"],
            &plot_rows,
        )?,
    )?;
    out.write("data_with_error.csv", &data_bytes)?;
    out.write_json("schema.json", &derived)?;
    out.finish(Manifest {
        command: "study".into(),
        version: ARTIFACT_VERSION.into(),
        config_schema: CONFIG_SCHEMA_VERSION,
        seed: Some(args.seed),
        args: serde_json::to_value(&resolved)?,
        resolved_config: None,
        inputs: vec![digest_file(&resolved.data)?, digest_file(&resolved.schema)?],
        outputs: Vec::new(),
    })
}
