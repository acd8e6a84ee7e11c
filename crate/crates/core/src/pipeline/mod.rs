//! End-to-end run: impute, unfold, NMF, two-step reduction, clustering,
//! contrastive characterization and the analytics behind every view.

mod config;
mod json;
mod report;
mod views;

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::Serialize;

pub use config::{CorrelationBasis, PipelineConfig};
pub use json::{run_id, to_canonical_json, to_canonical_json_pretty, Envelope, SigFigFormatter};
pub use report::render_report;
pub use views::{
    CharacteristicsView, FitSummary, MapStation, MapView, Pm25Query, Pm25StationView, Pm25View, SeriesView,
    SimilarityView, SourcesView, StationDominance, StationPoint, TransitionsExport, TransitionsSourcesView,
};

use crate::analytics::{
    cluster_transitions, correlate_sources, dominance_periods, grid_pm25, CorrelationTable, DominanceInterval,
    GridSummary, TransitionSeries,
};
use crate::contrastive::{characterize_all, ClusterCharacteristic};
use crate::data::{fold_rows, impute, unfold, ImputationReport};
use crate::error::{Error, Result};
use crate::factorization::{
    interpret_row, rank_species, run_nmf, source_labels, FactorizationResult, NmfConfig, SourceProfile, SpeciesRank,
};
use crate::ingest::{align_to_tensor_cadence, AuxiliarySeries, Dataset, Station};
use crate::multidr::{embed_stations, ContributionTensor, MultiDrConfig, StationEmbedding};

/// Wall-clock time of one stage, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub millis: f64,
}

/// Everything a run produces. Views are pure reads of this.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub run_id: String,
    pub dataset_id: String,
    pub config: PipelineConfig,
    pub stations: Vec<Station>,
    pub species: Vec<String>,
    pub source_ids: Vec<String>,
    pub imputation: ImputationReport,
    pub factorization: FactorizationResult,
    pub profiles: Vec<SourceProfile>,
    pub ranking: Vec<SpeciesRank>,
    pub contributions: ContributionTensor,
    pub embedding: StationEmbedding,
    pub characteristics: Vec<ClusterCharacteristic>,
    pub correlations: CorrelationTable,
    pub transitions: TransitionSeries,
    /// Indexed `[station][source]`.
    pub dominance: Vec<Vec<Vec<DominanceInterval>>>,
    pub grid: BTreeMap<DateTime<Utc>, GridSummary>,
    pub pm25: Option<AuxiliarySeries>,
    pub warnings: Vec<String>,
    pub timings: Vec<StageTiming>,
}

struct Clock {
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage,
            millis: (now - self.last).as_secs_f64() * 1e3,
        });
        log::debug!(
            "{stage} done in {:.1} ms",
            self.timings.last().map_or(0.0, |t| t.millis)
        );
        self.last = now;
    }
}

pub fn run_pipeline(dataset: &Dataset, dataset_id: &str, config: &PipelineConfig) -> Result<PipelineOutput> {
    let (t, n, d) = dataset.species.dim();
    config.validate_for(t, n, d)?;
    let mut clock = Clock {
        last: Instant::now(),
        timings: Vec::new(),
    };
    let mut warnings = dataset.warnings.clone();

    let imputed = impute(&dataset.species, config.impute)?;
    let tensor = &imputed.tensor;
    clock.lap("impute");

    let matrix = unfold(tensor)?;
    let fit = run_nmf(
        &matrix,
        &NmfConfig {
            p: config.p,
            seed: config.seed,
            max_iter: config.max_iter,
            tol: config.tol,
            fill: config.nndsvd_fill,
        },
    )?;
    if !fit.converged {
        warnings.push(format!(
            "NMF stopped at max_iter = {} before reaching tol",
            config.max_iter
        ));
    }
    let species = tensor.feature_index().to_vec();
    let source_ids = source_labels(config.p);
    let profiles = (0..config.p)
        .map(|k| interpret_row(&fit.h_hat.values, &species, k))
        .collect::<Result<Vec<_>>>()?;
    let ranking = rank_species(&fit.h_hat.values, &species);
    clock.lap("nmf");

    let times = tensor.time_index().to_vec();
    let station_ids = tensor.station_index().to_vec();
    let contributions =
        ContributionTensor::from_normalized(&fit.w_hat, times.clone(), station_ids.clone(), source_ids.clone())?;
    let embedding = embed_stations(
        &contributions,
        &MultiDrConfig {
            k: config.k,
            dr_method: config.dr_method,
            umap: config.umap,
            seed: config.seed,
        },
    )?;
    if embedding.first_step_degenerate {
        warnings.push("contributions have no temporal variation; similarity uses temporal means".into());
    }
    clock.lap("multidr");

    let characteristics = match characterize_all(&embedding.y, &embedding.cluster_labels, config.alpha_mode) {
        Ok(c) => c,
        Err(Error::SingleCluster) => {
            warnings.push("only one cluster; nothing to contrast".into());
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    for c in &characteristics {
        warnings.extend(c.warnings.iter().cloned());
    }
    clock.lap("ccpca");

    let step = tensor
        .step()
        .ok_or_else(|| Error::InvalidTensor("cannot infer tensor cadence".into()))?;
    let mut aligned = Vec::new();
    for s in dataset.pollutants.iter().chain(&dataset.meteorology) {
        match align_to_tensor_cadence(s, &times, step) {
            Ok(a) => aligned.push(a.series),
            Err(e) => warnings.push(format!("{} left out of correlations: {e}", s.name)),
        }
    }
    let correlations = match config.correlation_basis {
        CorrelationBasis::Normalized => correlate_sources(&contributions, &aligned),
        CorrelationBasis::Raw => {
            let raw = ContributionTensor::new(
                fold_rows(&fit.w, t, n)?,
                times.clone(),
                station_ids.clone(),
                source_ids.clone(),
            )?;
            correlate_sources(&raw, &aligned)
        }
    };
    let pm25 = dataset.pm25().cloned();
    let transitions = cluster_transitions(&contributions, &embedding.cluster_labels, pm25.as_ref())?;
    let dominance = (0..n)
        .map(|j| {
            (0..config.p)
                .map(|k| dominance_periods(&contributions, j, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = BTreeMap::new();
    if let Some(g) = &dataset.grid {
        for ts in g.timestamps() {
            grid.insert(ts, grid_pm25(g, config.cell_deg, ts)?);
        }
    }
    clock.lap("analytics");

    let stations = station_ids
        .iter()
        .map(|id| {
            let pos = dataset
                .catalog
                .position(id)
                .expect("tensor stations come from the catalog");
            dataset.catalog.entries()[pos].clone()
        })
        .collect();

    Ok(PipelineOutput {
        run_id: run_id(dataset_id, config)?,
        dataset_id: dataset_id.to_string(),
        config: *config,
        stations,
        species,
        source_ids,
        imputation: imputed.report,
        factorization: fit,
        profiles,
        ranking,
        contributions,
        embedding,
        characteristics,
        correlations,
        transitions,
        dominance,
        grid,
        pm25,
        warnings,
        timings: clock.timings,
    })
}

impl PipelineOutput {
    pub fn envelope<T: Serialize>(&self, data: T) -> Envelope<'_, T> {
        Envelope {
            run_id: &self.run_id,
            seed: self.config.seed,
            config: &self.config,
            data,
        }
    }

    /// The grid slice at `ts`; empty when no sensor reported then.
    pub fn grid_at(&self, ts: DateTime<Utc>) -> GridSummary {
        self.grid.get(&ts).cloned().unwrap_or_else(|| {
            let any = self.grid.values().next();
            GridSummary {
                cell_deg: self.config.cell_deg,
                origin_lat: any.map_or(0.0, |g| g.origin_lat),
                origin_lon: any.map_or(0.0, |g| g.origin_lon),
                timestamp: ts,
                cells: Vec::new(),
            }
        })
    }
}
