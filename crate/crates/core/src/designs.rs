//! Phase II validation-sample selection.
//!
//! Every design here sees only Phase I quantities. The ETS routines take the
//! ordering values (one error-prone exposure, or the error-prone exposure
//! matrix for the PC1 design) and never the error-free exposures, so the
//! resulting missingness is at random by construction.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pca::{pc_scores, pca_fit, PcaModel};
use crate::randvar::RngStream;

/// Serialized as its `Display` string (`srs`, `ets-var:1`, `ets-pc1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DesignKind {
    Srs,
    /// Extreme tails of error-prone exposure `target` (0-based).
    EtsVar { target: usize },
    EtsPc1,
}

impl DesignKind {
    /// Human-readable label, e.g. `ETS-X1*`.
    pub fn label(&self) -> String {
        match self {
            DesignKind::Srs => "SRS".to_string(),
            DesignKind::EtsVar { target } => format!("ETS-X{}*", target + 1),
            DesignKind::EtsPc1 => "ETS-PC1*".to_string(),
        }
    }
}

/// Parses `srs`, `ets-var:<j>` (1-based `j`) and `ets-pc1`.
impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "srs" => Ok(DesignKind::Srs),
            "ets-pc1" | "ets_pc1" => Ok(DesignKind::EtsPc1),
            other => {
                let rest = other
                    .strip_prefix("ets-var:")
                    .or_else(|| other.strip_prefix("ets_var:"))
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown design `{s}`")))?;
                let j: usize = rest
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad design target in `{s}`")))?;
                if j == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "design target is 1-based, got `{s}`"
                    )));
                }
                Ok(DesignKind::EtsVar { target: j - 1 })
            }
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignKind::Srs => f.write_str("srs"),
            DesignKind::EtsVar { target } => write!(f, "ets-var:{}", target + 1),
            DesignKind::EtsPc1 => f.write_str("ets-pc1"),
        }
    }
}

impl TryFrom<String> for DesignKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DesignKind> for String {
    fn from(kind: DesignKind) -> String {
        kind.to_string()
    }
}

/// The chosen design plus the artifacts downstream imputation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n_validate: usize,
    pub pca_model: Option<PcaModel>,
    pub pc1_scores: Option<Arc<Vec<f64>>>,
}

impl DesignSpec {
    pub fn srs(n_validate: usize) -> Self {
        Self {
            kind: DesignKind::Srs,
            n_validate,
            pca_model: None,
            pc1_scores: None,
        }
    }

    pub fn ets_var(target: usize, n_validate: usize) -> Self {
        Self {
            kind: DesignKind::EtsVar { target },
            n_validate,
            pca_model: None,
            pc1_scores: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationSelection {
    indicator: Vec<bool>,
    selected: Vec<usize>,
}

impl ValidationSelection {
    /// Builds a selection over `n_total` rows from (possibly unsorted) indices.
    pub fn from_indices(n_total: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut indicator = vec![false; n_total];
        for i in indices {
            if i >= n_total {
                return Err(Error::InvalidParameter(format!(
                    "row index {i} out of range for {n_total} rows"
                )));
            }
            indicator[i] = true;
        }
        Ok(Self::from_indicator(indicator))
    }

    pub fn from_indicator(indicator: Vec<bool>) -> Self {
        let selected = indicator
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| r.then_some(i))
            .collect();
        Self {
            indicator,
            selected,
        }
    }

    pub fn all(n_total: usize) -> Self {
        Self::from_indicator(vec![true; n_total])
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    /// Sorted ascending.
    pub fn selected_indices(&self) -> &[usize] {
        &self.selected
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    pub fn n_total(&self) -> usize {
        self.indicator.len()
    }
}

fn check_size(n_total: usize, n_validate: usize) -> Result<()> {
    if n_validate == 0 || n_validate > n_total {
        return Err(Error::SizeExceedsPopulation {
            n_validate,
            n_total,
        });
    }
    Ok(())
}

/// Simple random sample of `n_validate` rows without replacement.
pub fn design_srs(
    rng: &mut RngStream,
    n_total: usize,
    n_validate: usize,
) -> Result<ValidationSelection> {
    check_size(n_total, n_validate)?;
    let picked = index::sample(rng, n_total, n_validate);
    ValidationSelection::from_indices(n_total, picked)
}

/// Extreme tail sampling: the `⌊n/2⌋` smallest and `⌈n/2⌉` largest values.
///
/// Rows are ordered by `(value, index)`, so ties go to the lower index in
/// the lower tail and the higher index in the upper tail.
pub fn design_ets(values: &[f64], n_validate: usize) -> Result<ValidationSelection> {
    let n_total = values.len();
    check_size(n_total, n_validate)?;
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row });
    }
    let mut order: Vec<usize> = (0..n_total).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let lower = n_validate / 2;
    let upper = n_validate - lower;
    let picked = order[..lower]
        .iter()
        .chain(&order[n_total - upper..])
        .copied();
    ValidationSelection::from_indices(n_total, picked)
}

/// ETS on the first principal component of `xstar`.
///
/// PCA is refit on the full `xstar` on every call; the fitted model and the
/// PC1 scores travel with the returned [`DesignSpec`].
pub fn design_ets_pc1(
    xstar: &Matrix,
    n_validate: usize,
) -> Result<(ValidationSelection, DesignSpec)> {
    check_size(xstar.rows(), n_validate)?;
    let model = pca_fit(xstar)?;
    let scores = pc_scores(&model, xstar, 0)?;
    let selection = design_ets(&scores, n_validate)?;
    let spec = DesignSpec {
        kind: DesignKind::EtsPc1,
        n_validate,
        pca_model: Some(model),
        pc1_scores: Some(Arc::new(scores)),
    };
    Ok((selection, spec))
}

/// Runs `kind` against the Phase I error-prone exposures.
///
/// `rng` is consumed only by SRS.
pub fn select(
    kind: DesignKind,
    rng: &mut RngStream,
    xstar: &Matrix,
    n_validate: usize,
) -> Result<(ValidationSelection, DesignSpec)> {
    match kind {
        DesignKind::Srs => Ok((
            design_srs(rng, xstar.rows(), n_validate)?,
            DesignSpec::srs(n_validate),
        )),
        DesignKind::EtsVar { target } => {
            if target >= xstar.cols() {
                return Err(Error::InvalidParameter(format!(
                    "design target {} exceeds {} exposures",
                    target + 1,
                    xstar.cols()
                )));
            }
            Ok((
                design_ets(&xstar.column(target), n_validate)?,
                DesignSpec::ets_var(target, n_validate),
            ))
        }
        DesignKind::EtsPc1 => design_ets_pc1(xstar, n_validate),
    }
}
