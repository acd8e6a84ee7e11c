use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::nmf::{run_nmf, NmfConfig};
use crate::data::UnfoldedMatrix;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub p: usize,
    pub explained_variance_ratio: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Fits one factorization per rank in `p_range`, sharing every other setting
/// in `base`, to support choosing the number of sources by hand.
pub fn select_p_diagnostics(
    matrix: &UnfoldedMatrix,
    p_range: RangeInclusive<usize>,
    base: &NmfConfig,
) -> Result<Vec<RankDiagnostic>> {
    p_range
        .map(|p| {
            let res = run_nmf(matrix, &NmfConfig { p, ..*base })?;
            Ok(RankDiagnostic {
                p,
                explained_variance_ratio: res.explained_variance_ratio,
                objective: res.objective(),
                iterations: res.iterations,
            })
        })
        .collect()
}
