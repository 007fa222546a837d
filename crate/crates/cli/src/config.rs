//! Simulation config files.
//!
//! ```toml
//! seed = 2024
//! replicates = 1000
//! designs = ["srs", "ets-var:1", "ets-pc1"]
//!
//! [data]                      # every key optional
//! n_total = 1000
//! n_validate = 100            # or validation_fraction = 0.1
//! p_exposures = 5
//! z_prob = 0.3
//! cov_structure = "equal_dependence"   # independence | unequal_dependence | custom
//! custom_sigma = [[1.0, 0.2], [0.2, 1.0]]
//! sigma_u = 1.0
//! outcome_mode = "separate"   # or "shared" with shared_betas / shared_preset
//! shared_preset = "all_equal" # only_first | only_second | all_equal
//!
//! [sweep]                     # optional: one run per value
//! parameter = "sigma_u"       # n_validate | validation_fraction | cov_structure | shared_preset
//! values = [0.25, 0.5, 1.0]
//! ```
//!
//! Unknown keys are errors.

use serde::{Deserialize, Serialize};
use twophase::designs::DesignKind;
use twophase::sim::{CovStructure, OutcomeMode, SharedPreset, SimConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    replicates: Option<usize>,
    designs: Option<Vec<DesignKind>>,
    #[serde(default)]
    data: DataSection,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    n_total: Option<usize>,
    n_validate: Option<usize>,
    validation_fraction: Option<f64>,
    p_exposures: Option<usize>,
    z_prob: Option<f64>,
    cov_structure: Option<CovStructure>,
    custom_sigma: Option<Vec<Vec<f64>>>,
    sigma_u: Option<f64>,
    outcome_mode: Option<OutcomeMode>,
    shared_betas: Option<Vec<f64>>,
    shared_preset: Option<SharedPreset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SigmaU,
    NValidate,
    ValidationFraction,
    CovStructure,
    SharedPreset,
}

impl SweepParameter {
    fn name(self) -> &'static str {
        match self {
            SweepParameter::SigmaU => "sigma_u",
            SweepParameter::NValidate => "n_validate",
            SweepParameter::ValidationFraction => "validation_fraction",
            SweepParameter::CovStructure => "cov_structure",
            SweepParameter::SharedPreset => "shared_preset",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    parameter: SweepParameter,
    values: Vec<toml::Value>,
}

/// One fully resolved simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub label: String,
    pub parameter: Option<String>,
    pub value: Option<String>,
    pub config: SimConfig,
}

/// Every setting a config file expands to, with all defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub settings: Vec<Setting>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Usage(format!("config error: {}", msg.into()))
}

fn fraction_to_n(fraction: f64, n_total: usize) -> CliResult<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(config_error(format!("validation_fraction must be in (0, 1), got {fraction}")));
    }
    Ok((fraction * n_total as f64).round() as usize)
}

fn apply_preset(config: &mut SimConfig, preset: SharedPreset) {
    config.outcome_mode = OutcomeMode::Shared;
    config.shared_betas = Some(preset.betas(config.p_exposures));
}

fn base_config(file: &ConfigFile) -> CliResult<SimConfig> {
    let d = &file.data;
    let defaults = SimConfig::default();
    let mut c = SimConfig {
        n_total: d.n_total.unwrap_or(defaults.n_total),
        p_exposures: d.p_exposures.unwrap_or(defaults.p_exposures),
        z_prob: d.z_prob.unwrap_or(defaults.z_prob),
        cov_structure: d.cov_structure.unwrap_or(defaults.cov_structure),
        custom_sigma: d.custom_sigma.clone(),
        sigma_u: d.sigma_u.unwrap_or(defaults.sigma_u),
        outcome_mode: d.outcome_mode.unwrap_or(defaults.outcome_mode),
        shared_betas: d.shared_betas.clone(),
        replicates: file.replicates.unwrap_or(defaults.replicates),
        designs: file.designs.clone().unwrap_or(defaults.designs.clone()),
        seed: file.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    c.n_validate = match (d.n_validate, d.validation_fraction) {
        (Some(_), Some(_)) => {
            return Err(config_error("give n_validate or validation_fraction, not both"))
        }
        (Some(n), None) => n,
        (None, Some(f)) => fraction_to_n(f, c.n_total)?,
        (None, None) => defaults.n_validate,
    };
    if let Some(preset) = d.shared_preset {
        if d.shared_betas.is_some() {
            return Err(config_error("give shared_betas or shared_preset, not both"));
        }
        apply_preset(&mut c, preset);
    }
    let preset_swept = matches!(&file.sweep, Some(s) if s.parameter == SweepParameter::SharedPreset);
    if c.outcome_mode == OutcomeMode::Shared && c.shared_betas.is_none() && !preset_swept {
        return Err(config_error("outcome_mode = \"shared\" needs shared_betas or shared_preset"));
    }
    Ok(c)
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn apply_sweep(
    base: &SimConfig,
    parameter: SweepParameter,
    value: &toml::Value,
) -> CliResult<SimConfig> {
    let mut c = base.clone();
    let bad = || {
        config_error(format!(
            "sweep value `{}` is not valid for {}",
            value_text(value),
            parameter.name()
        ))
    };
    let as_f64 = || value.as_float().or_else(|| value.as_integer().map(|i| i as f64));
    match parameter {
        SweepParameter::SigmaU => c.sigma_u = as_f64().ok_or_else(bad)?,
        SweepParameter::NValidate => {
            c.n_validate = value
                .as_integer()
                .and_then(|i| usize::try_from(i).ok())
                .ok_or_else(bad)?
        }
        SweepParameter::ValidationFraction => {
            c.n_validate = fraction_to_n(as_f64().ok_or_else(bad)?, c.n_total)?
        }
        SweepParameter::CovStructure => {
            c.cov_structure = value
                .as_str()
                .and_then(|s| CovStructure::deserialize(toml::Value::String(s.into())).ok())
                .ok_or_else(bad)?
        }
        SweepParameter::SharedPreset => {
            let preset = value
                .as_str()
                .and_then(|s| SharedPreset::deserialize(toml::Value::String(s.into())).ok())
                .ok_or_else(bad)?;
            apply_preset(&mut c, preset);
        }
    }
    Ok(c)
}

/// Parses and resolves a config, applying CLI overrides before the sweep.
pub fn resolve(
    text: &str,
    seed: Option<u64>,
    replicates: Option<usize>,
) -> CliResult<SimulationPlan> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_error(e.to_string()))?;
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let inner = inner.trim();
        if path.is_empty() || path == "." {
            config_error(inner.to_string())
        } else {
            config_error(format!("at `{path}`: {inner}"))
        }
    })?;
    let mut base = base_config(&file)?;
    if let Some(s) = seed {
        base.seed = s;
    }
    if let Some(r) = replicates {
        base.replicates = r;
    }
    let settings = match &file.sweep {
        None => vec![Setting {
            label: "base".into(),
            parameter: None,
            value: None,
            config: base,
        }],
        Some(sweep) => {
            if sweep.values.is_empty() {
                return Err(config_error("sweep.values is empty"));
            }
            sweep
                .values
                .iter()
                .map(|v| {
                    Ok(Setting {
                        label: format!("{}={}", sweep.parameter.name(), value_text(v)),
                        parameter: Some(sweep.parameter.name().into()),
                        value: Some(value_text(v)),
                        config: apply_sweep(&base, sweep.parameter, v)?,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    for s in &settings {
        s.config
            .validate()
            .map_err(|e| config_error(format!("{}: {e}", s.label)))?;
    }
    Ok(SimulationPlan { settings })
}
