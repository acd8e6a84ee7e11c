use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::AuxiliarySeries;
use crate::multidr::ContributionTensor;

/// Cells backed by fewer pairs than this are undefined.
pub const MIN_PAIRS: usize = 3;

/// Pearson coefficient of paired samples, or `None` with fewer than
/// [`MIN_PAIRS`] pairs or a zero-variance side.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < MIN_PAIRS {
        return None;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return None;
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    r.is_finite().then(|| r.clamp(-1.0, 1.0))
}

/// Pearson coefficients between row and column variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `None` where undefined.
    pub r: Vec<Vec<Option<f64>>>,
    pub n_pairs: Vec<Vec<usize>>,
}

impl CorrelationTable {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.cols.iter().position(|c| c == col)?;
        self.r[i][j]
    }
}

/// Correlates each source's contributions against each measure over every
/// (station, timestamp) where the measure is present.
///
/// Measures are expected on the tensor's timestamps already.
pub fn correlate_sources(contributions: &ContributionTensor, measures: &[AuxiliarySeries]) -> CorrelationTable {
    let (t, n, p) = contributions.dim();
    let mut r = vec![vec![None; measures.len()]; p];
    let mut n_pairs = vec![vec![0; measures.len()]; p];
    for (m, measure) in measures.iter().enumerate() {
        let mut cells = Vec::new();
        for i in 0..t {
            for j in 0..n {
                if let Some(v) = measure.get(&contributions.station_index[j], contributions.time_index[i]) {
                    cells.push((i, j, v));
                }
            }
        }
        let ys: Vec<f64> = cells.iter().map(|c| c.2).collect();
        for k in 0..p {
            let xs: Vec<f64> = cells.iter().map(|&(i, j, _)| contributions.values[[i, j, k]]).collect();
            r[k][m] = pearson(&xs, &ys);
            n_pairs[k][m] = cells.len();
        }
    }
    CorrelationTable {
        rows: contributions.source_ids.clone(),
        cols: measures.iter().map(|m| m.name.clone()).collect(),
        r,
        n_pairs,
    }
}

/// Measure-by-measure correlations over keys present in both series.
pub fn correlate_measures(measures: &[AuxiliarySeries]) -> CorrelationTable {
    let m = measures.len();
    let mut r = vec![vec![None; m]; m];
    let mut n_pairs = vec![vec![0; m]; m];
    for a in 0..m {
        for b in a..m {
            let (xs, ys): (Vec<f64>, Vec<f64>) = paired(&measures[a].samples, &measures[b].samples).unzip();
            let cell = pearson(&xs, &ys);
            r[a][b] = cell;
            r[b][a] = cell;
            n_pairs[a][b] = xs.len();
            n_pairs[b][a] = xs.len();
        }
    }
    let names: Vec<String> = measures.iter().map(|s| s.name.clone()).collect();
    CorrelationTable {
        rows: names.clone(),
        cols: names,
        r,
        n_pairs,
    }
}

fn paired<'a, K: Ord>(a: &'a BTreeMap<K, f64>, b: &'a BTreeMap<K, f64>) -> impl Iterator<Item = (f64, f64)> + 'a {
    a.iter().filter_map(|(k, x)| b.get(k).map(|y| (*x, *y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_degenerate() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), None);
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0]), None);
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = pearson(&a, &b);
            prop_assert_eq!(r, pearson(&b, &a));
            if let Some(r) = r {
                prop_assert!(r.abs() <= 1.0);
            }
            if let Some(s) = pearson(&a, &a) {
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }
}
