use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AuxiliarySeries;
use crate::multidr::ContributionTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSeries {
    pub cluster_id: usize,
    pub members: Vec<String>,
    /// One mean contribution series per source.
    pub sources: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSeries {
    pub station_id: String,
    pub cluster_id: usize,
    pub sources: Vec<Vec<f64>>,
}

/// A station's PM2.5 on a regular grid at the series cadence. Missing
/// samples stay `None` so plotted lines break there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pm25Series {
    pub station_id: String,
    pub timestamps: Vec<DateTime<Utc>>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSeries {
    pub time_index: Vec<DateTime<Utc>>,
    pub source_ids: Vec<String>,
    pub clusters: Vec<ClusterSeries>,
    pub stations: Vec<StationSeries>,
    pub pm25: Vec<Pm25Series>,
}

/// Per-cluster mean contribution of each source at each timestamp, plus the
/// per-station series and, when given, the stations' PM2.5.
pub fn cluster_transitions(
    contributions: &ContributionTensor,
    labels: &[usize],
    pm25: Option<&AuxiliarySeries>,
) -> Result<TransitionSeries> {
    let (t, n, p) = contributions.dim();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} stations",
            labels.len()
        )));
    }
    let station_sources = |j: usize| -> Vec<Vec<f64>> {
        let slab = contributions.values.index_axis(Axis(1), j);
        (0..p).map(|k| slab.column(k).to_vec()).collect()
    };
    let clusters = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|c| {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let sources = (0..p)
                .map(|k| {
                    (0..t)
                        .map(|i| {
                            members.iter().map(|&j| contributions.values[[i, j, k]]).sum::<f64>() / members.len() as f64
                        })
                        .collect()
                })
                .collect();
            ClusterSeries {
                cluster_id: c,
                members: members
                    .iter()
                    .map(|&j| contributions.station_index[j].clone())
                    .collect(),
                sources,
            }
        })
        .collect();
    let stations = (0..n)
        .map(|j| StationSeries {
            station_id: contributions.station_index[j].clone(),
            cluster_id: labels[j],
            sources: station_sources(j),
        })
        .collect();
    let names: Vec<&str> = contributions.station_index.iter().map(String::as_str).collect();
    Ok(TransitionSeries {
        time_index: contributions.time_index.clone(),
        source_ids: contributions.source_ids.clone(),
        clusters,
        stations,
        pm25: pm25.map(|s| pm25_series(s, &names, None, None)).unwrap_or_default(),
    })
}

/// PM2.5 of the given stations within `[from, to]`, laid on the cadence grid
/// spanning the first to the last sample in range.
pub fn pm25_series(
    series: &AuxiliarySeries,
    stations: &[&str],
    from: Option<DateTime<Utc>>,
    to: Option<DateTime<Utc>>,
) -> Vec<Pm25Series> {
    let in_range = |ts: &DateTime<Utc>| from.is_none_or(|f| *ts >= f) && to.is_none_or(|e| *ts <= e);
    let stamps: BTreeSet<DateTime<Utc>> = stations
        .iter()
        .flat_map(|s| series.station_samples(s).map(|(ts, _)| ts))
        .filter(in_range)
        .collect();
    let grid: Vec<DateTime<Utc>> = match (stamps.first(), stamps.last()) {
        (Some(&first), Some(&last)) if series.cadence.num_seconds() > 0 => {
            let mut out = Vec::new();
            let mut ts = first;
            while ts <= last {
                out.push(ts);
                ts += series.cadence;
            }
            // Off-grid samples still show up.
            let extra: Vec<_> = stamps.iter().filter(|s| !out.contains(s)).copied().collect();
            out.extend(extra);
            out.sort();
            out
        }
        _ => stamps.into_iter().collect(),
    };
    stations
        .iter()
        .map(|&s| Pm25Series {
            station_id: s.to_string(),
            values: grid.iter().map(|&ts| series.get(s, ts)).collect(),
            timestamps: grid.clone(),
        })
        .collect()
}
