pub mod analyze;
pub mod design;
pub mod replay;
pub mod simulate;
pub mod study;
pub mod surrogate;

use std::path::Path;

use serde::de::DeserializeOwned;
use twophase::study::StudySchema;

use crate::error::{CliError, CliResult};
use crate::manifest::resolve_input;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(resolve_input(path)?)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_schema(path: &Path) -> CliResult<StudySchema> {
    let schema: StudySchema = read_json(path)?;
    schema
        .check()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(schema)
}
