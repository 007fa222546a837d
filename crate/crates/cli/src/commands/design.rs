use std::path::Path;

use serde::{Deserialize, Serialize};
use twophase::designs::{select, DesignKind, DesignSpec};
use twophase::numerics::Matrix;
use twophase::pca::PcaModel;
use twophase::randvar::derive_stream;
use twophase::study::StudySchema;
use twophase::Error;

use crate::error::{CliError, CliResult};
use crate::manifest::{digest_file, resolve_input, Manifest, OutputSet, ARTIFACT_VERSION, CONFIG_SCHEMA_VERSION};
use crate::output::csv_bytes;
use crate::{DesignArgs, KindArg};

/// Contents of `design.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignArtifact {
    pub kind: DesignKind,
    pub label: String,
    pub n_total: usize,
    pub n_validate: usize,
    /// Error-prone columns the design saw, in order.
    pub variables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pc1_scores: Option<Vec<f64>>,
}

impl DesignArtifact {
    /// The [`DesignSpec`] imputation needs; ETS-PC1* requires stored scores.
    pub fn to_spec(&self, n_rows: usize) -> CliResult<DesignSpec> {
        if self.n_total != n_rows {
            return Err(CliError::Data(format!(
                "design was built for {} rows but the data have {n_rows}",
                self.n_total
            )));
        }
        let pc1_scores = match self.kind {
            DesignKind::EtsPc1 => {
                let scores = self
                    .pc1_scores
                    .clone()
                    .ok_or(Error::MissingDesignArtifact("pc1_scores"))?;
                if scores.len() != n_rows {
                    return Err(CliError::Data(format!(
                        "design stores {} PC1 scores for {n_rows} rows",
                        scores.len()
                    )));
                }
                Some(std::sync::Arc::new(scores))
            }
            _ => None,
        };
        Ok(DesignSpec {
            kind: self.kind,
            n_validate: self.n_validate,
            pca_model: self.pca.clone(),
            pc1_scores,
        })
    }
}

pub fn design_kind(kind: KindArg, target: Option<usize>) -> CliResult<DesignKind> {
    match (kind, target) {
        (KindArg::EtsVar, None) => Err(CliError::Usage("--kind ets-var requires --target <j>".into())),
        (KindArg::EtsVar, Some(0)) => Err(CliError::Usage("--target is 1-based".into())),
        (KindArg::EtsVar, Some(j)) => Ok(DesignKind::EtsVar { target: j - 1 }),
        (_, Some(_)) => Err(CliError::Usage("--target only applies to --kind ets-var".into())),
        (KindArg::Srs, None) => Ok(DesignKind::Srs),
        (KindArg::EtsPc1, None) => Ok(DesignKind::EtsPc1),
    }
}

/// Error-prone matrix plus column names and optional ids.
pub fn read_error_prone(
    path: &Path,
    schema: Option<&StudySchema>,
) -> CliResult<(Matrix, Vec<String>, Option<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let names: Vec<String> = match schema {
        Some(s) => s.error_prone_columns.clone().unwrap_or_else(|| {
            s.exposure_columns.iter().map(|c| format!("{c}_star")).collect()
        }),
        None => headers
            .iter()
            .filter(|h| h.ends_with("_star"))
            .map(str::to_string)
            .collect(),
    };
    if names.is_empty() {
        return Err(Error::MissingColumn("*_star".into()).into());
    }
    let idx = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::MissingColumn(n.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let id_idx = match schema.and_then(|s| s.id_column.as_ref()) {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        None => None,
    };
    let mut data = Vec::new();
    let mut ids = id_idx.map(|_| Vec::new());
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        for &i in &idx {
            let cell = record.get(i).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::NonNumericCell {
                        row: r + 1,
                        column: headers[i].to_string(),
                        value: cell.to_string(),
                    }
                    .into())
                }
            }
        }
        if let (Some(ids), Some(i)) = (ids.as_mut(), id_idx) {
            ids.push(record.get(i).unwrap_or("").to_string());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Data(format!("{} has no data rows", path.display())));
    }
    Ok((Matrix::from_row_major(rows, idx.len(), data)?, names, ids))
}

pub fn run(args: &DesignArgs) -> CliResult<Manifest> {
    let kind = design_kind(args.kind, args.target)?;
    let resolved = DesignArgs {
        data: resolve_input(&args.data)?,
        schema: args.schema.as_deref().map(resolve_input).transpose()?,
        ..args.clone()
    };
    let schema = resolved.schema.as_deref().map(super::read_schema).transpose()?;
    let (xstar, variables, ids) = read_error_prone(&resolved.data, schema.as_ref())?;

    let mut rng = derive_stream(args.seed, 0);
    let (selection, spec) = select(kind, &mut rng, &xstar, args.n)?;

    let mut selected: Vec<usize> = selection.selected_indices().to_vec();
    selected.sort_unstable();
    let mut header = vec!["row_id"];
    if ids.is_some() {
        header.push("id");
    }
    let rows: Vec<Vec<String>> = selected
        .iter()
        .map(|&i| {
            let mut row = vec![(i + 1).to_string()];
            if let Some(ids) = &ids {
                row.push(ids[i].clone());
            }
            row
        })
        .collect();

    let artifact = DesignArtifact {
        kind,
        label: kind.label(),
        n_total: xstar.rows(),
        n_validate: args.n,
        variables,
        pca: spec.pca_model.clone(),
        pc1_scores: spec.pc1_scores.as_ref().map(|s| s.to_vec()),
    };

    let mut out = OutputSet::create(&args.out)?;
    out.write("selected.csv", &csv_bytes(&header, &rows)?)?;
    out.write_json("design.json", &artifact)?;
    let mut inputs = vec![digest_file(&resolved.data)?];
    if let Some(s) = &resolved.schema {
        inputs.push(digest_file(s)?);
    }
    out.finish(Manifest {
        command: "design".into(),
        version: ARTIFACT_VERSION.into(),
        config_schema: CONFIG_SCHEMA_VERSION,
        seed: Some(args.seed),
        args: serde_json::to_value(&resolved)?,
        resolved_config: None,
        inputs,
        outputs: Vec::new(),
    })
}

