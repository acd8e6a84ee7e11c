use serde::{Deserialize, Serialize};

use super::tensor::SpatioTemporalTensor;
use crate::error::{Error, Result};

/// How unobserved tensor cells are filled before factorization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputePolicy {
    /// Linear interpolation along time per (station, feature), holding the
    /// nearest observation at the series edges.
    #[default]
    Interpolate,
    /// Median of all observations of the feature across stations and times.
    FeatureMedian,
    ZeroFill,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputedCount {
    pub station: String,
    pub feature: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub policy: ImputePolicy,
    pub total: usize,
    /// Non-zero counts only, in station-then-feature order.
    pub counts: Vec<ImputedCount>,
}

#[derive(Debug, Clone)]
pub struct Imputed {
    pub tensor: SpatioTemporalTensor,
    pub report: ImputationReport,
}

pub fn impute(tensor: &SpatioTemporalTensor, policy: ImputePolicy) -> Result<Imputed> {
    let (t, n, d) = tensor.dim();
    let mut values = tensor.values().clone();
    let mask = tensor.mask();

    let medians: Vec<Option<f64>> = match policy {
        ImputePolicy::FeatureMedian => (0..d)
            .map(|k| {
                let observed: Vec<f64> = (0..t)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| mask[[i, j, k]])
                    .map(|(i, j)| values[[i, j, k]])
                    .collect();
                median(observed)
            })
            .collect(),
        _ => Vec::new(),
    };

    let mut counts = Vec::new();
    for j in 0..n {
        for k in 0..d {
            let missing: Vec<usize> = (0..t).filter(|&i| !mask[[i, j, k]]).collect();
            if missing.is_empty() {
                continue;
            }
            let all_missing_err = || Error::AllMissingFeature {
                station: tensor.station_index()[j].clone(),
                feature: tensor.feature_index()[k].clone(),
            };
            match policy {
                ImputePolicy::ZeroFill => {
                    for &i in &missing {
                        values[[i, j, k]] = 0.0;
                    }
                }
                ImputePolicy::FeatureMedian => {
                    let fill = medians[k].ok_or_else(all_missing_err)?;
                    for &i in &missing {
                        values[[i, j, k]] = fill;
                    }
                }
                ImputePolicy::Interpolate => {
                    let observed: Vec<usize> = (0..t).filter(|&i| mask[[i, j, k]]).collect();
                    if observed.is_empty() {
                        return Err(all_missing_err());
                    }
                    for &i in &missing {
                        let after = observed.partition_point(|&o| o < i);
                        let fill = match (after.checked_sub(1).map(|a| observed[a]), observed.get(after)) {
                            (Some(lo), Some(&hi)) => {
                                let w = (i - lo) as f64 / (hi - lo) as f64;
                                values[[lo, j, k]] * (1.0 - w) + values[[hi, j, k]] * w
                            }
                            (Some(lo), None) => values[[lo, j, k]],
                            (None, Some(&hi)) => values[[hi, j, k]],
                            (None, None) => unreachable!("observed is non-empty"),
                        };
                        values[[i, j, k]] = fill;
                    }
                }
            }
            counts.push(ImputedCount {
                station: tensor.station_index()[j].clone(),
                feature: tensor.feature_index()[k].clone(),
                count: missing.len(),
            });
        }
    }

    let total = counts.iter().map(|c| c.count).sum();
    let tensor = SpatioTemporalTensor::complete(
        values,
        tensor.time_index().to_vec(),
        tensor.station_index().to_vec(),
        tensor.feature_index().to_vec(),
    )?;
    Ok(Imputed {
        tensor,
        report: ImputationReport { policy, total, counts },
    })
}

pub(crate) fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    Some(if xs.len() % 2 == 0 {
        0.5 * (xs[mid - 1] + xs[mid])
    } else {
        xs[mid]
    })
}
