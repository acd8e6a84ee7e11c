use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1Rows,
    L2Rows,
}

/// A non-negative matrix whose non-zero rows have unit l1 or l2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub values: Array2<f64>,
    pub norm_kind: NormKind,
    /// Rows that were all zero and passed through unchanged.
    pub zero_rows: Vec<usize>,
}

pub fn normalize_rows(m: &Array2<f64>, kind: NormKind) -> Result<NormalizedMatrix> {
    if let Some(((row, col), &value)) = m.indexed_iter().find(|(_, &v)| !(v >= 0.0)) {
        return Err(Error::NegativeEntry { row, col, value });
    }
    let mut values = m.clone();
    let mut zero_rows = Vec::new();
    for (r, mut row) in values.rows_mut().into_iter().enumerate() {
        let norm = match kind {
            NormKind::L1Rows => row.sum(),
            NormKind::L2Rows => row.dot(&row).sqrt(),
        };
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        } else {
            zero_rows.push(r);
        }
    }
    Ok(NormalizedMatrix {
        values,
        norm_kind: kind,
        zero_rows,
    })
}
