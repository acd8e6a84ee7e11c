use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CorrelationBasis, PipelineOutput};
use crate::analytics::{
    pm25_series, ClusterSeries, CorrelationTable, DominanceInterval, GridSummary, Pm25Series, StationSeries,
    TransitionSeries,
};
use crate::contrastive::{AlphaMode, ClusterCharacteristic};
use crate::error::{Error, Result};
use crate::factorization::{SourceProfile, SpeciesRank};
use crate::multidr::DrMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub p: usize,
    pub explained_variance_ratio: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Source profiles, species ranking and source/measure correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcesView {
    pub source_ids: Vec<String>,
    pub species: Vec<String>,
    /// Unit-l2 profile per source over `species`.
    pub profiles: Vec<SourceProfile>,
    /// All species by summed normalized concentration.
    pub ranking: Vec<SpeciesRank>,
    /// The leading `top_species` entries of `ranking`.
    pub top_species: Vec<String>,
    pub correlations: CorrelationTable,
    pub correlation_basis: CorrelationBasis,
    pub fit: FitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationPoint {
    pub station_id: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
    /// First-step summary per source.
    pub summary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityView {
    pub source_ids: Vec<String>,
    pub stations: Vec<StationPoint>,
    pub dr_method: DrMethod,
    pub k: usize,
    pub pc1_explained: f64,
    pub first_step_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsView {
    pub source_ids: Vec<String>,
    pub alpha_mode: AlphaMode,
    pub clusters: Vec<ClusterCharacteristic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapStation {
    pub station_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapView {
    pub timestamp: DateTime<Utc>,
    pub stations: Vec<MapStation>,
    pub grid: GridSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionsSourcesView {
    pub time_index: Vec<DateTime<Utc>>,
    pub source_ids: Vec<String>,
    pub clusters: Vec<ClusterSeries>,
    pub stations: Vec<StationSeries>,
}

/// Query of the PM2.5 transition view. Omitted fields mean all stations,
/// the first source and the full time range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pm25Query {
    pub stations: Option<Vec<String>>,
    pub source: Option<String>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesView {
    pub timestamps: Vec<DateTime<Utc>>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pm25StationView {
    pub station_id: String,
    pub cluster: usize,
    pub pm25: Pm25Series,
    /// Contribution of the selected source.
    pub contribution: SeriesView,
    pub dominance: Vec<DominanceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pm25View {
    pub source_id: String,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
    pub stations: Vec<Pm25StationView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationDominance {
    pub station_id: String,
    /// One interval list per source.
    pub sources: Vec<Vec<DominanceInterval>>,
}

/// Contents of `transitions.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionsExport {
    #[serde(flatten)]
    pub series: TransitionSeries,
    pub dominance: Vec<StationDominance>,
}

fn bad_query(m: String) -> Error {
    Error::InvalidConfig(m)
}

impl PipelineOutput {
    pub fn sources_view(&self) -> SourcesView {
        let f = &self.factorization;
        SourcesView {
            source_ids: self.source_ids.clone(),
            species: self.species.clone(),
            profiles: self.profiles.clone(),
            ranking: self.ranking.clone(),
            top_species: self
                .ranking
                .iter()
                .take(self.config.top_species)
                .map(|r| r.species.clone())
                .collect(),
            correlations: self.correlations.clone(),
            correlation_basis: self.config.correlation_basis,
            fit: FitSummary {
                p: f.p,
                explained_variance_ratio: f.explained_variance_ratio,
                objective: f.objective(),
                iterations: f.iterations,
                converged: f.converged,
            },
        }
    }

    pub fn similarity_view(&self) -> SimilarityView {
        let e = &self.embedding;
        SimilarityView {
            source_ids: self.source_ids.clone(),
            stations: self
                .stations
                .iter()
                .enumerate()
                .map(|(j, s)| StationPoint {
                    station_id: s.station_id.clone(),
                    name: s.name.clone(),
                    x: e.z[[j, 0]],
                    y: e.z[[j, 1]],
                    cluster: e.cluster_labels[j],
                    summary: e.y.row(j).to_vec(),
                })
                .collect(),
            dr_method: self.config.dr_method,
            k: e.k,
            pc1_explained: e.pc1_explained,
            first_step_degenerate: e.first_step_degenerate,
        }
    }

    pub fn characteristics_view(&self) -> CharacteristicsView {
        CharacteristicsView {
            source_ids: self.source_ids.clone(),
            alpha_mode: self.config.alpha_mode,
            clusters: self.characteristics.clone(),
        }
    }

    /// Stations and the grid slice at `ts`, defaulting to the first tensor
    /// timestamp.
    pub fn map_view(&self, ts: Option<DateTime<Utc>>) -> MapView {
        let timestamp = ts.unwrap_or(self.contributions.time_index[0]);
        MapView {
            timestamp,
            stations: self
                .stations
                .iter()
                .zip(&self.embedding.cluster_labels)
                .map(|(s, &cluster)| MapStation {
                    station_id: s.station_id.clone(),
                    name: s.name.clone(),
                    lat: s.lat,
                    lon: s.lon,
                    cluster,
                })
                .collect(),
            grid: self.grid_at(timestamp),
        }
    }

    pub fn transitions_sources_view(&self) -> TransitionsSourcesView {
        let t = &self.transitions;
        TransitionsSourcesView {
            time_index: t.time_index.clone(),
            source_ids: t.source_ids.clone(),
            clusters: t.clusters.clone(),
            stations: t.stations.clone(),
        }
    }

    pub fn transitions_pm25_view(&self, query: &Pm25Query) -> Result<Pm25View> {
        if let (Some(f), Some(t)) = (query.from, query.to) {
            if f > t {
                return Err(bad_query(format!("time range starts after it ends ({f} > {t})")));
            }
        }
        let source_id = query.source.clone().unwrap_or_else(|| self.source_ids[0].clone());
        let k = self
            .source_ids
            .iter()
            .position(|s| *s == source_id)
            .ok_or_else(|| bad_query(format!("unknown source `{source_id}`")))?;
        let ids: Vec<String> = match &query.stations {
            Some(list) => list.clone(),
            None => self.stations.iter().map(|s| s.station_id.clone()).collect(),
        };
        let mut idx = Vec::with_capacity(ids.len());
        for id in &ids {
            let j = self
                .contributions
                .station_index
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| bad_query(format!("unknown station `{id}`")))?;
            idx.push(j);
        }

        let times = &self.contributions.time_index;
        let in_range = |ts: &DateTime<Utc>| query.from.is_none_or(|f| *ts >= f) && query.to.is_none_or(|e| *ts <= e);
        let kept: Vec<usize> = (0..times.len()).filter(|&i| in_range(&times[i])).collect();
        let names: Vec<&str> = ids.iter().map(String::as_str).collect();
        let pm25 = match &self.pm25 {
            Some(series) => pm25_series(series, &names, query.from, query.to),
            None => ids
                .iter()
                .map(|id| Pm25Series {
                    station_id: id.clone(),
                    timestamps: Vec::new(),
                    values: Vec::new(),
                })
                .collect(),
        };

        let stations = idx
            .iter()
            .zip(pm25)
            .map(|(&j, pm25)| Pm25StationView {
                station_id: self.contributions.station_index[j].clone(),
                cluster: self.embedding.cluster_labels[j],
                pm25,
                contribution: SeriesView {
                    timestamps: kept.iter().map(|&i| times[i]).collect(),
                    values: kept.iter().map(|&i| self.contributions.values[[i, j, k]]).collect(),
                },
                dominance: clip_intervals(&self.dominance[j][k], &kept, times),
            })
            .collect();
        Ok(Pm25View {
            source_id,
            from: query.from,
            to: query.to,
            stations,
        })
    }

    pub fn transitions_export(&self) -> TransitionsExport {
        TransitionsExport {
            series: self.transitions.clone(),
            dominance: self
                .contributions
                .station_index
                .iter()
                .zip(&self.dominance)
                .map(|(id, sources)| StationDominance {
                    station_id: id.clone(),
                    sources: sources.clone(),
                })
                .collect(),
        }
    }
}

/// Intersects intervals with the contiguous index range `kept`.
fn clip_intervals(intervals: &[DominanceInterval], kept: &[usize], times: &[DateTime<Utc>]) -> Vec<DominanceInterval> {
    let (Some(&lo), Some(&hi)) = (kept.first(), kept.last()) else {
        return Vec::new();
    };
    intervals
        .iter()
        .filter(|iv| iv.end >= lo && iv.start <= hi)
        .map(|iv| {
            let (start, end) = (iv.start.max(lo), iv.end.min(hi));
            DominanceInterval {
                start,
                end,
                from: times[start],
                to: times[end],
            }
        })
        .collect()
}
