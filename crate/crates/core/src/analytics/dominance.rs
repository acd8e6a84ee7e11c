use chrono::{DateTime, Utc};
use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multidr::ContributionTensor;

/// Inclusive run of timestamp indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceInterval {
    pub start: usize,
    pub end: usize,
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
}

/// Maximal runs of rows in a `t x p` matrix where column `source` is strictly
/// larger than every other column.
pub fn dominance_intervals(series: ArrayView2<f64>, source: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, row) in series.rows().into_iter().enumerate() {
        let x = row[source];
        let wins = row.iter().enumerate().all(|(k, &y)| k == source || x > y);
        match (wins, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, series.nrows() - 1));
    }
    out
}

/// Periods where `source` has the highest contribution at `station`. Ties
/// count as no dominance.
pub fn dominance_periods(
    contributions: &ContributionTensor,
    station: usize,
    source: usize,
) -> Result<Vec<DominanceInterval>> {
    let (_, n, p) = contributions.dim();
    if station >= n {
        return Err(Error::IndexOutOfRange { index: station, len: n });
    }
    if source >= p {
        return Err(Error::IndexOutOfRange { index: source, len: p });
    }
    let series = contributions.values.index_axis(Axis(1), station);
    Ok(dominance_intervals(series, source)
        .into_iter()
        .map(|(start, end)| DominanceInterval {
            start,
            end,
            from: contributions.time_index[start],
            to: contributions.time_index[end],
        })
        .collect())
}
