//! Column-oriented study data.

use serde::{Deserialize, Serialize};

use crate::designs::ValidationSelection;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub outcomes: Vec<String>,
    pub exposures: Vec<String>,
    pub error_prone: Vec<String>,
    pub confounders: Vec<String>,
}

impl ColumnNames {
    /// `y1.., x1.., x1_star.., z1..` naming.
    pub fn numbered(p: usize, n_confounders: usize) -> Self {
        Self {
            outcomes: (1..=p).map(|j| format!("y{j}")).collect(),
            exposures: (1..=p).map(|j| format!("x{j}")).collect(),
            error_prone: (1..=p).map(|j| format!("x{j}_star")).collect(),
            confounders: (1..=n_confounders).map(|k| format!("z{k}")).collect(),
        }
    }
}

/// Outcomes, error-free and error-prone exposures, confounders, and the
/// validation indicator for `N` subjects and `P` models.
///
/// Model `j` pairs `outcomes[j]` with `exposures[j]` / `error_prone[j]`.
/// Error-free values of unvalidated rows are stored as `NaN` once a
/// validation selection has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub ids: Option<Vec<String>>,
    pub outcomes: Vec<Vec<f64>>,
    pub exposures: Vec<Vec<f64>>,
    pub error_prone: Vec<Vec<f64>>,
    pub confounders: Vec<Vec<f64>>,
    pub validated: Vec<bool>,
    pub names: ColumnNames,
}

impl StudyTable {
    pub fn n_rows(&self) -> usize {
        self.validated.len()
    }

    pub fn n_models(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_validated(&self) -> usize {
        self.validated.iter().filter(|&&r| r).count()
    }

    pub fn has_error_prone(&self) -> bool {
        !self.error_prone.is_empty()
    }

    /// Checks column lengths and model pairing.
    pub fn check_shape(&self) -> Result<()> {
        let n = self.validated.len();
        let p = self.outcomes.len();
        if self.exposures.len() != p || (self.has_error_prone() && self.error_prone.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: self.exposures.len(),
            });
        }
        for col in self
            .outcomes
            .iter()
            .chain(&self.exposures)
            .chain(&self.error_prone)
            .chain(&self.confounders)
        {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: col.len(),
                });
            }
        }
        Ok(())
    }

    /// `N x P` matrix of the error-prone exposures.
    pub fn error_prone_matrix(&self) -> Result<Matrix> {
        if !self.has_error_prone() {
            return Err(Error::MissingPredictor {
                predictor: "error-prone exposures".into(),
                row: 0,
            });
        }
        let cols: Vec<&[f64]> = self.error_prone.iter().map(Vec::as_slice).collect();
        Matrix::from_columns(&cols)
    }

    /// Copy with `R` set from `selection` and unvalidated error-free values
    /// blanked.
    pub fn with_validation(&self, selection: &ValidationSelection) -> Result<StudyTable> {
        if selection.n_total() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                actual: selection.n_total(),
            });
        }
        let r = selection.indicator();
        let exposures = self
            .exposures
            .iter()
            .map(|col| {
                col.iter()
                    .zip(r)
                    .map(|(&x, &v)| if v { x } else { f64::NAN })
                    .collect()
            })
            .collect();
        Ok(StudyTable {
            exposures,
            validated: r.to_vec(),
            ..self.clone()
        })
    }

    /// Copy with every row marked validated; fails if any error-free value
    /// is missing.
    pub fn fully_validated(&self) -> Result<StudyTable> {
        for (j, col) in self.exposures.iter().enumerate() {
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingPredictor {
                    predictor: self.exposure_name(j),
                    row,
                });
            }
        }
        Ok(StudyTable {
            validated: vec![true; self.n_rows()],
            ..self.clone()
        })
    }

    pub fn exposure_name(&self, j: usize) -> String {
        self.names
            .exposures
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{}", j + 1))
    }

    pub fn error_prone_name(&self, j: usize) -> String {
        self.names
            .error_prone
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{}_star", j + 1))
    }

    pub fn outcome_name(&self, j: usize) -> String {
        self.names
            .outcomes
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("y{}", j + 1))
    }

    pub fn confounder_name(&self, k: usize) -> String {
        self.names
            .confounders
            .get(k)
            .cloned()
            .unwrap_or_else(|| format!("z{}", k + 1))
    }
}
