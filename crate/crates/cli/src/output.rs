//! CSV helpers shared by the commands.

use twophase::float_repr::to_text;

use crate::error::CliResult;

/// CSV bytes with `header` followed by `rows`; always has a header row.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row)?;
    }
    wtr.into_inner()
        .map_err(|e| crate::error::CliError::Data(format!("csv error: {e}")))
}

/// Text for an optional float cell; empty when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(to_text).unwrap_or_default()
}

pub fn num(v: f64) -> String {
    to_text(v)
}
