use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Species shown per source by default.
pub const DEFAULT_TOP_SPECIES: usize = 15;

/// Spreadsheet-style label for source row `i`: A..Z, AA, AB, ...
pub fn source_label(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn source_labels(p: usize) -> Vec<String> {
    (0..p).map(source_label).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesRank {
    pub species: String,
    pub total: f64,
}

/// Species ordered by descending column total of the normalized profiles;
/// ties keep feature order. Returns the full ranking.
pub fn rank_species(h_hat: &Array2<f64>, features: &[String]) -> Vec<SpeciesRank> {
    let mut ranks: Vec<SpeciesRank> = features
        .iter()
        .enumerate()
        .map(|(k, f)| SpeciesRank {
            species: f.clone(),
            total: h_hat.column(k).sum(),
        })
        .collect();
    ranks.sort_by(|a, b| b.total.total_cmp(&a.total));
    ranks
}

/// The first [`DEFAULT_TOP_SPECIES`] entries of [`rank_species`].
pub fn top_species(h_hat: &Array2<f64>, features: &[String]) -> Vec<SpeciesRank> {
    let mut r = rank_species(h_hat, features);
    r.truncate(DEFAULT_TOP_SPECIES);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub source_id: String,
    pub concentrations: Vec<f64>,
    /// Species with non-zero concentration, highest first.
    pub top_species: Vec<String>,
}

pub fn interpret_row(h_hat: &Array2<f64>, features: &[String], row: usize) -> Result<SourceProfile> {
    if row >= h_hat.nrows() {
        return Err(Error::IndexOutOfRange {
            index: row,
            len: h_hat.nrows(),
        });
    }
    let concentrations = h_hat.row(row).to_vec();
    let mut order: Vec<usize> = (0..concentrations.len()).filter(|&k| concentrations[k] > 0.0).collect();
    order.sort_by(|&a, &b| concentrations[b].total_cmp(&concentrations[a]));
    Ok(SourceProfile {
        source_id: source_label(row),
        top_species: order.into_iter().map(|k| features[k].clone()).collect(),
        concentrations,
    })
}
