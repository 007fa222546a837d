use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::{analyze, design, simulate, study, surrogate};
use crate::config::SimulationPlan;
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, read_manifest, Manifest, OutputSet};
use crate::{AnalyzeArgs, DesignArgs, ReplayArgs, SimulateArgs, StudyArgs, SurrogateArgs};

fn args_of<T: DeserializeOwned>(manifest: &Manifest) -> CliResult<T> {
    serde_json::from_value(manifest.args.clone())
        .map_err(|e| CliError::Data(format!("manifest args for `{}`: {e}", manifest.command)))
}

fn check_inputs(manifest: &Manifest) -> CliResult<()> {
    for input in &manifest.inputs {
        let now = digest_file(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Data(format!(
                "input {} changed since the recorded run",
                input.path
            )));
        }
    }
    Ok(())
}

fn rerun(manifest: &Manifest, out: PathBuf) -> CliResult<Manifest> {
    match manifest.command.as_str() {
        "design" => design::run(&DesignArgs { out, ..args_of(manifest)? }),
        "analyze" => analyze::run(&AnalyzeArgs { out, ..args_of(manifest)? }),
        "study" => study::run(&StudyArgs { out, ..args_of(manifest)? }),
        "surrogate" => surrogate::run(&SurrogateArgs { out, ..args_of(manifest)? }),
        "simulate" => {
            let args: SimulateArgs = args_of(manifest)?;
            let plan: SimulationPlan = manifest
                .resolved_config
                .clone()
                .ok_or_else(|| CliError::Data("simulate manifest has no resolved_config".into()))
                .and_then(|v| {
                    serde_json::from_value(v)
                        .map_err(|e| CliError::Data(format!("manifest resolved_config: {e}")))
                })?;
            let mut set = OutputSet::create(&out)?;
            simulate::execute(&plan, &mut set)?;
            let rebuilt = simulate::manifest(&plan, serde_json::to_value(&args)?, manifest.inputs.clone())?;
            set.finish(rebuilt)
        }
        other => Err(CliError::Data(format!("unknown command `{other}` in manifest"))),
    }
}

/// Re-runs the recorded command and fails unless every output matches.
pub fn run(args: &ReplayArgs) -> CliResult<()> {
    let manifest = read_manifest(&args.manifest)?;
    check_inputs(&manifest)?;
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let replayed = rerun(&manifest, out)?;
    let mismatched: Vec<&str> = manifest
        .outputs
        .iter()
        .filter(|o| !replayed.outputs.iter().any(|r| r == *o))
        .map(|o| o.path.as_str())
        .collect();
    if !mismatched.is_empty() || replayed.outputs.len() != manifest.outputs.len() {
        return Err(CliError::Mismatch(format!(
            "replayed outputs differ: {}",
            if mismatched.is_empty() { "file list".to_string() } else { mismatched.join(", ") }
        )));
    }
    println!("replay ok: {} outputs match", manifest.outputs.len());
    Ok(())
}
