use serde::Serialize;
use twophase::exec::Execution;
use twophase::sim::{simulate, EfficiencyCell, ReplicateFailure};

use crate::config::{resolve, Setting, SimulationPlan};
use crate::error::CliResult;
use crate::manifest::{digest_file, resolve_input, Manifest, OutputSet, ARTIFACT_VERSION, CONFIG_SCHEMA_VERSION};
use crate::output::{csv_bytes, num};
use crate::SimulateArgs;

#[derive(Debug, Serialize)]
struct SettingSummary<'a> {
    label: &'a str,
    parameter: Option<&'a str>,
    value: Option<&'a str>,
    config: &'a twophase::sim::SimConfig,
    truths: Vec<f64>,
    failures: &'a [ReplicateFailure],
    cells: &'a [EfficiencyCell],
}

const Z95: f64 = 1.959_963_984_540_054;

/// Runs every setting of `plan` and writes the simulation artifacts.
pub fn execute(plan: &SimulationPlan, out: &mut OutputSet) -> CliResult<()> {
    let mut replicate_rows = Vec::new();
    let mut failure_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut plot_rows = Vec::new();
    let mut runs = Vec::with_capacity(plan.settings.len());
    for setting in &plan.settings {
        let (output, summary) = simulate(&setting.config, Execution::default())?;
        runs.push((setting, output, summary, setting.config.truths()?));
    }

    let key = |s: &Setting| {
        vec![
            s.label.clone(),
            s.parameter.clone().unwrap_or_default(),
            s.value.clone().unwrap_or_default(),
        ]
    };
    for (setting, output, summary, _) in &runs {
        for r in &output.results {
            let mut row = vec![setting.label.clone()];
            row.extend([
                r.replicate.to_string(),
                r.design.to_string(),
                (r.model + 1).to_string(),
                num(r.estimate),
            ]);
            replicate_rows.push(row);
        }
        for f in &output.failures {
            failure_rows.push(vec![
                setting.label.clone(),
                f.replicate.to_string(),
                f.design.to_string(),
                f.model.map(|m| (m + 1).to_string()).unwrap_or_default(),
                f.message.clone(),
            ]);
        }
        for c in &summary.cells {
            let mut row = key(setting);
            row.extend([
                c.design.to_string(),
                c.design.label(),
                (c.model + 1).to_string(),
                num(c.truth),
                c.n_replicates.to_string(),
                num(c.mean_estimate),
                num(c.bias),
                num(c.variance),
                num(c.efficiency),
                num(c.mc_se),
                num(c.efficiency_lower),
                num(c.efficiency_upper),
            ]);
            summary_rows.push(row);

            let mut eff = key(setting);
            eff.extend([
                c.design.label(),
                (c.model + 1).to_string(),
                "efficiency".into(),
                num(c.efficiency),
                num(c.efficiency_lower),
                num(c.efficiency_upper),
            ]);
            plot_rows.push(eff);
            let mut bias = key(setting);
            bias.extend([
                c.design.label(),
                (c.model + 1).to_string(),
                "bias".into(),
                num(c.bias),
                num(c.bias - Z95 * c.mc_se),
                num(c.bias + Z95 * c.mc_se),
            ]);
            plot_rows.push(bias);
        }
    }

    out.write(
        "replicates.csv",
        &csv_bytes(&["setting", "replicate", "design", "model", "estimate"], &replicate_rows)?,
    )?;
    out.write(
        "failures.csv",
        &csv_bytes(&["setting", "replicate", "design", "model", "message"], &failure_rows)?,
    )?;
    out.write(
        "summary.csv",
        &csv_bytes(
            &[
                "setting", "parameter", "value", "design", "label", "model", "truth", "n_replicates",
                "mean_estimate", "bias", "variance", "efficiency", "mc_se", "efficiency_lower",
                "efficiency_upper",
            ],
            &summary_rows,
        )?,
    )?;
    let summaries: Vec<SettingSummary> = runs
        .iter()
        .map(|(s, o, summary, truths)| SettingSummary {
            label: &s.label,
            parameter: s.parameter.as_deref(),
            value: s.value.as_deref(),
            config: &s.config,
            truths: truths.clone(),
            failures: &o.failures,
            cells: &summary.cells,
        })
        .collect();
    out.write_json("summary.json", &summaries)?;
    out.write(
        "plot_data.csv",
        &csv_bytes(
            &["setting", "parameter", "value", "design", "model", "metric", "estimate", "lower", "upper"],
            &plot_rows,
        )?,
    )?;
    Ok(())
}

pub fn manifest(plan: &SimulationPlan, args: serde_json::Value, inputs: Vec<crate::manifest::FileDigest>) -> CliResult<Manifest> {
    let seed = plan.settings.first().map(|s| s.config.seed);
    Ok(Manifest {
        command: "simulate".into(),
        version: ARTIFACT_VERSION.into(),
        config_schema: CONFIG_SCHEMA_VERSION,
        seed,
        args,
        resolved_config: Some(serde_json::to_value(plan)?),
        inputs,
        outputs: Vec::new(),
    })
}

pub fn run(args: &SimulateArgs) -> CliResult<Manifest> {
    let resolved = SimulateArgs {
        config: resolve_input(&args.config)?,
        ..args.clone()
    };
    let text = std::fs::read_to_string(&resolved.config)?;
    let plan = resolve(&text, args.seed, args.replicates)?;
    let mut out = OutputSet::create(&args.out)?;
    execute(&plan, &mut out)?;
    let manifest = manifest(&plan, serde_json::to_value(&resolved)?, vec![digest_file(&resolved.config)?])?;
    out.finish(manifest)
}
