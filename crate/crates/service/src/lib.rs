//! HTTP front-end: dataset upload, pipeline runs and view payloads.
//!
//! Runs execute on the blocking pool; their view payloads are read-only once
//! a run is done. The run and dataset registries share one lock.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use aerofactor::analytics::{anomaly_scan, ThresholdMode};
use aerofactor::ingest::{dataset_id, parse_timestamp, Dataset, DATASET_FILES, STATIONS_FILE};
use aerofactor::pipeline::{
    run_id, run_pipeline, to_canonical_json, PipelineConfig, PipelineOutput, Pm25Query, StageTiming,
};
use aerofactor::Error;
use axum::body::Bytes;
use axum::extract::{Multipart, Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Largest accepted upload, in bytes.
pub const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

/// Public record of one run.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineRun {
    pub run_id: String,
    pub dataset_id: String,
    pub status: RunStatus,
    pub seed: u64,
    pub config: PipelineConfig,
    pub timings: Vec<StageTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct RunEntry {
    run: PipelineRun,
    output: Option<Arc<PipelineOutput>>,
}

#[derive(Default)]
struct Registry {
    datasets: HashMap<String, Arc<Dataset>>,
    runs: HashMap<String, RunEntry>,
}

#[derive(Clone)]
pub struct AppState {
    data_dir: PathBuf,
    registry: Arc<Mutex<Registry>>,
}

impl AppState {
    /// Datasets persist under `data_dir/datasets/<dataset_id>`.
    pub fn new(data_dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let data_dir = data_dir.into();
        fs::create_dir_all(data_dir.join("datasets"))?;
        Ok(Self {
            data_dir,
            registry: Arc::default(),
        })
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.data_dir.join("datasets").join(id)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Registry> {
        self.registry.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Loads a persisted dataset, caching it in memory.
    fn dataset(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        if let Some(ds) = self.lock().datasets.get(id) {
            return Ok(ds.clone());
        }
        let valid_id = !id.is_empty() && id.chars().all(|c| c.is_ascii_hexdigit());
        let dir = self.dataset_dir(id);
        if !valid_id || !dir.is_dir() {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown dataset `{id}`")));
        }
        let ds =
            Arc::new(Dataset::load_dir(&dir).map_err(|e| ApiError::from_core(StatusCode::INTERNAL_SERVER_ERROR, &e))?);
        self.lock().datasets.insert(id.to_string(), ds.clone());
        Ok(ds)
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}/runs", post(start_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/sources", get(view_sources))
        .route("/runs/{id}/similarity", get(view_similarity))
        .route("/runs/{id}/characteristics", get(view_characteristics))
        .route("/runs/{id}/map", get(view_map))
        .route("/runs/{id}/transitions/sources", get(view_transitions_sources))
        .route("/runs/{id}/transitions/pm25", get(view_transitions_pm25))
        .route("/runs/{id}/anomalies", get(view_anomalies))
        .layer(axum::extract::DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    fn from_core(status: StatusCode, e: &Error) -> Self {
        let (file, line) = match e {
            Error::MalformedRow { file, line, .. }
            | Error::UnknownStation { file, line, .. }
            | Error::NegativeConcentration { file, line, .. } => (Some(file.clone()), Some(*line)),
            Error::DuplicateSample { file, second_line, .. } => (Some(file.clone()), Some(*second_line)),
            Error::MissingInput(p) => (p.file_name().map(|f| f.to_string_lossy().into_owned()), None),
            _ => (None, None),
        };
        Self {
            status,
            message: e.to_string(),
            diagnostics: vec![Diagnostic {
                file,
                line,
                message: e.to_string(),
            }],
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "<[Diagnostic]>::is_empty")]
    diagnostics: &'a [Diagnostic],
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.message,
            diagnostics: &self.diagnostics,
        };
        json_response(self.status, &body)
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match to_canonical_json(value) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn healthz() -> Response {
    json_response(StatusCode::OK, &serde_json::json!({ "status": "ok" }))
}

#[derive(Serialize)]
struct DatasetSummary {
    dataset_id: String,
    stations: usize,
    timestamps: usize,
    species: usize,
    files: Vec<String>,
    warnings: Vec<String>,
}

/// Maps a multipart field to one of the dataset file names.
fn dataset_file_name(field: Option<&str>, file: Option<&str>) -> Option<&'static str> {
    [field, file].into_iter().flatten().find_map(|name| {
        let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
        DATASET_FILES
            .iter()
            .copied()
            .find(|f| *f == base || f.strip_suffix(".csv") == Some(base))
    })
}

async fn upload_dataset(State(state): State<AppState>, mut multipart: Multipart) -> Result<Response, ApiError> {
    let mut files: Vec<(&'static str, Bytes)> = Vec::new();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("bad multipart body: {e}")))?
    {
        let name = dataset_file_name(field.name(), field.file_name()).ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                format!(
                    "unexpected part `{}`; expected one of {}",
                    field.name().unwrap_or(""),
                    DATASET_FILES.join(", ")
                ),
            )
        })?;
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("reading {name}: {e}")))?;
        if files.iter().any(|(n, _)| *n == name) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("{name} sent twice")));
        }
        files.push((name, bytes));
    }
    if !files.iter().any(|(n, _)| *n == STATIONS_FILE) {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, "catalog required: stations.csv is missing");
        err.diagnostics.push(Diagnostic {
            file: Some(STATIONS_FILE.into()),
            line: None,
            message: "catalog required".into(),
        });
        return Err(err);
    }

    let staging = state.data_dir.join(format!("staging-{}", unique_suffix()));
    let result = tokio::task::spawn_blocking(move || {
        stage_dataset(&staging, &files).inspect_err(|_| {
            let _ = fs::remove_dir_all(&staging);
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let (staging, dataset, id, names) = result?;

    let target = state.dataset_dir(&id);
    if target.is_dir() {
        let _ = fs::remove_dir_all(&staging);
    } else if let Err(e) = fs::rename(&staging, &target) {
        let _ = fs::remove_dir_all(&staging);
        return Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            format!("persisting dataset: {e}"),
        ));
    }
    let (t, n, d) = dataset.species.dim();
    let summary = DatasetSummary {
        dataset_id: id.clone(),
        stations: n,
        timestamps: t,
        species: d,
        files: names,
        warnings: dataset.warnings.clone(),
    };
    state.lock().datasets.insert(id, Arc::new(dataset));
    Ok(json_response(StatusCode::CREATED, &summary))
}

type Staged = (PathBuf, Dataset, String, Vec<String>);

fn stage_dataset(staging: &Path, files: &[(&'static str, Bytes)]) -> Result<Staged, ApiError> {
    let internal = |e: std::io::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    fs::create_dir_all(staging).map_err(internal)?;
    for (name, bytes) in files {
        fs::write(staging.join(name), bytes).map_err(internal)?;
    }
    let dataset = Dataset::load_dir(staging).map_err(|e| ApiError::from_core(StatusCode::BAD_REQUEST, &e))?;
    let id = dataset_id(staging).map_err(|e| ApiError::from_core(StatusCode::INTERNAL_SERVER_ERROR, &e))?;
    let names = DATASET_FILES
        .iter()
        .filter(|f| files.iter().any(|(n, _)| n == *f))
        .map(|f| f.to_string())
        .collect();
    Ok((staging.to_path_buf(), dataset, id, names))
}

fn unique_suffix() -> String {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    format!("{}-{}", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed))
}

#[derive(Deserialize, Default)]
struct RunParams {
    /// Respond only once the run has finished.
    #[serde(default)]
    wait: bool,
}

async fn start_run(
    State(state): State<AppState>,
    UrlPath(dataset): UrlPath<String>,
    Query(params): Query<RunParams>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let ds = state.dataset(&dataset)?;
    let config: PipelineConfig = if body.iter().all(u8::is_ascii_whitespace) {
        PipelineConfig::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("bad config: {e}")))?
    };
    let (t, n, d) = ds.species.dim();
    config
        .validate_for(t, n, d)
        .map_err(|e| ApiError::from_core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    let id = run_id(&dataset, &config).map_err(|e| ApiError::from_core(StatusCode::INTERNAL_SERVER_ERROR, &e))?;

    {
        let mut reg = state.lock();
        match reg.runs.get(&id).map(|e| e.run.status) {
            Some(RunStatus::Done) => return Ok(json_response(StatusCode::OK, &reg.runs[&id].run)),
            Some(RunStatus::Pending | RunStatus::Running) => {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    format!("run {id} is already in progress"),
                ));
            }
            Some(RunStatus::Failed) | None => {}
        }
        reg.runs.insert(
            id.clone(),
            RunEntry {
                run: PipelineRun {
                    run_id: id.clone(),
                    dataset_id: dataset.clone(),
                    status: RunStatus::Pending,
                    seed: config.seed,
                    config,
                    timings: Vec::new(),
                    error: None,
                },
                output: None,
            },
        );
    }

    let worker = state.clone();
    let run = id.clone();
    let handle = tokio::task::spawn_blocking(move || {
        worker.set_status(&run, RunStatus::Running);
        let result = run_pipeline(&ds, &dataset, &config);
        let mut reg = worker.lock();
        let entry = reg.runs.get_mut(&run).expect("run registered before start");
        match result {
            Ok(out) => {
                entry.run.status = RunStatus::Done;
                entry.run.timings = out.timings.clone();
                entry.output = Some(Arc::new(out));
            }
            Err(e) => {
                log::warn!("run {run} failed: {e}");
                entry.run.status = RunStatus::Failed;
                entry.run.error = Some(e.to_string());
            }
        }
    });
    if params.wait {
        handle
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        let reg = state.lock();
        return Ok(json_response(StatusCode::CREATED, &reg.runs[&id].run));
    }
    let reg = state.lock();
    Ok(json_response(StatusCode::ACCEPTED, &reg.runs[&id].run))
}

impl AppState {
    fn set_status(&self, run: &str, status: RunStatus) {
        if let Some(e) = self.lock().runs.get_mut(run) {
            e.run.status = status;
        }
    }

    fn finished(&self, id: &str) -> Result<Arc<PipelineOutput>, ApiError> {
        let reg = self.lock();
        let entry = reg
            .runs
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown run `{id}`")))?;
        entry.output.clone().ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                format!(
                    "run {id} is {}",
                    serde_json::to_string(&entry.run.status).unwrap_or_default()
                ),
            )
        })
    }
}

async fn get_run(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let reg = state.lock();
    let entry = reg
        .runs
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown run `{id}`")))?;
    Ok(json_response(StatusCode::OK, &entry.run))
}

fn view<T: Serialize>(out: &PipelineOutput, data: T) -> Response {
    json_response(StatusCode::OK, &out.envelope(data))
}

async fn view_sources(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    Ok(view(&out, out.sources_view()))
}

async fn view_similarity(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    Ok(view(&out, out.similarity_view()))
}

async fn view_characteristics(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    Ok(view(&out, out.characteristics_view()))
}

async fn view_transitions_sources(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    Ok(view(&out, out.transitions_sources_view()))
}

fn timestamp_param(name: &str, value: Option<&String>) -> Result<Option<DateTime<Utc>>, ApiError> {
    value
        .filter(|v| !v.is_empty())
        .map(|v| {
            parse_timestamp(v)
                .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("{name}: bad timestamp `{v}`")))
        })
        .transpose()
}

#[derive(Deserialize)]
struct MapParams {
    ts: Option<String>,
}

async fn view_map(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<MapParams>,
) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    let ts = timestamp_param("ts", params.ts.as_ref())?;
    Ok(view(&out, out.map_view(ts)))
}

#[derive(Deserialize)]
struct Pm25Params {
    stations: Option<String>,
    source: Option<String>,
    from: Option<String>,
    to: Option<String>,
}

async fn view_transitions_pm25(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<Pm25Params>,
) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    let query = Pm25Query {
        stations: params
            .stations
            .filter(|s| !s.is_empty())
            .map(|s| s.split(',').map(|x| x.trim().to_string()).collect()),
        source: params.source.filter(|s| !s.is_empty()),
        from: timestamp_param("from", params.from.as_ref())?,
        to: timestamp_param("to", params.to.as_ref())?,
    };
    let data = out
        .transitions_pm25_view(&query)
        .map_err(|e| ApiError::from_core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    Ok(view(&out, data))
}

#[derive(Deserialize)]
struct AnomalyParams {
    mode: Option<String>,
    threshold: Option<f64>,
}

async fn view_anomalies(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<AnomalyParams>,
) -> Result<Response, ApiError> {
    let out = state.finished(&id)?;
    let mode = match (params.mode.as_deref().unwrap_or("robust_z"), params.threshold) {
        ("absolute", t) => ThresholdMode::Absolute(t.unwrap_or(1000.0)),
        ("robust_z", t) => ThresholdMode::RobustZ(t.unwrap_or(5.0)),
        (other, _) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("unknown mode `{other}`; use absolute or robust_z"),
            ))
        }
    };
    let found = out.pm25.as_ref().map(|s| anomaly_scan(s, mode)).unwrap_or_default();
    Ok(view(
        &out,
        serde_json::json!({ "threshold_mode": mode, "anomalies": found }),
    ))
}
