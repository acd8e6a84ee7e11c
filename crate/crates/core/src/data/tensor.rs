use chrono::{DateTime, Duration, Utc};
use ndarray::{Array2, Array3, ArrayView1};

use crate::error::{Error, Result};

/// Species concentrations indexed by (time, station, feature), with a mask
/// marking which cells were actually observed.
///
/// Unobserved cells hold `0.0` in `values` until [`impute`](super::impute)
/// fills them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalTensor {
    values: Array3<f64>,
    mask: Array3<bool>,
    time_index: Vec<DateTime<Utc>>,
    station_index: Vec<String>,
    feature_index: Vec<String>,
}

impl SpatioTemporalTensor {
    pub fn new(
        values: Array3<f64>,
        mask: Array3<bool>,
        time_index: Vec<DateTime<Utc>>,
        station_index: Vec<String>,
        feature_index: Vec<String>,
    ) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::InvalidTensor(format!(
                "values shape {:?} differs from mask shape {:?}",
                values.dim(),
                mask.dim()
            )));
        }
        let (t, n, d) = values.dim();
        if time_index.len() != t || station_index.len() != n || feature_index.len() != d {
            return Err(Error::InvalidTensor(format!(
                "index lengths ({}, {}, {}) do not match shape ({t}, {n}, {d})",
                time_index.len(),
                station_index.len(),
                feature_index.len()
            )));
        }
        if time_index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTensor("time index must be strictly increasing".into()));
        }
        for ((i, j, k), &v) in values.indexed_iter() {
            if mask[[i, j, k]] && !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidTensor(format!(
                    "observed value {v} at ({i}, {j}, {k}) is not a finite non-negative number"
                )));
            }
        }
        Ok(Self {
            values,
            mask,
            time_index,
            station_index,
            feature_index,
        })
    }

    /// Builds a fully observed tensor.
    pub fn complete(
        values: Array3<f64>,
        time_index: Vec<DateTime<Utc>>,
        station_index: Vec<String>,
        feature_index: Vec<String>,
    ) -> Result<Self> {
        let mask = Array3::from_elem(values.dim(), true);
        Self::new(values, mask, time_index, station_index, feature_index)
    }

    /// `(t, n, d)`.
    pub fn dim(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array3<bool> {
        &self.mask
    }

    pub fn time_index(&self) -> &[DateTime<Utc>] {
        &self.time_index
    }

    pub fn station_index(&self) -> &[String] {
        &self.station_index
    }

    pub fn feature_index(&self) -> &[String] {
        &self.feature_index
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Most frequent step between consecutive timestamps; `None` for fewer
    /// than two timestamps.
    pub fn step(&self) -> Option<Duration> {
        modal_step(&self.time_index)
    }

    /// Restricts the tensor to the given station positions, in that order.
    pub fn select_stations(&self, stations: &[usize]) -> Result<Self> {
        let n = self.station_index.len();
        if let Some(&bad) = stations.iter().find(|&&j| j >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        let values = self.values.select(ndarray::Axis(1), stations);
        let mask = self.mask.select(ndarray::Axis(1), stations);
        let station_index = stations.iter().map(|&j| self.station_index[j].clone()).collect();
        Self::new(
            values,
            mask,
            self.time_index.clone(),
            station_index,
            self.feature_index.clone(),
        )
    }
}

pub(crate) fn modal_step(times: &[DateTime<Utc>]) -> Option<Duration> {
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for w in times.windows(2) {
        *counts.entry((w[1] - w[0]).num_seconds()).or_default() += 1;
    }
    // Ties resolve to the smallest step.
    let mut best: Option<(i64, usize)> = None;
    for (&secs, &c) in &counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((secs, c));
        }
    }
    best.map(|(secs, _)| Duration::seconds(secs))
}

/// The `(t * n) x d` matricization of a species tensor.
///
/// Row `r = i * n + j` holds the feature vector at time `i`, station `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedMatrix {
    pub values: Array2<f64>,
    pub n_times: usize,
    pub n_stations: usize,
}

impl UnfoldedMatrix {
    /// Wraps a plain matrix, treating each row as its own timestamp at a single
    /// station.
    pub fn from_matrix(values: Array2<f64>) -> Self {
        let rows = values.nrows();
        Self {
            values,
            n_times: rows,
            n_stations: 1,
        }
    }

    pub fn row_of(&self, time: usize, station: usize) -> usize {
        time * self.n_stations + station
    }

    pub fn coords_of(&self, row: usize) -> (usize, usize) {
        (row / self.n_stations, row % self.n_stations)
    }

    pub fn row(&self, time: usize, station: usize) -> ArrayView1<'_, f64> {
        self.values.row(self.row_of(time, station))
    }
}

/// Slices the tensor along time and station into `t * n` feature vectors.
pub fn unfold(tensor: &SpatioTemporalTensor) -> Result<UnfoldedMatrix> {
    let missing = tensor.missing_count();
    if missing > 0 {
        return Err(Error::UnimputedData(missing));
    }
    let (t, n, d) = tensor.dim();
    // Standard layout of (t, n, d) is already time-major, station-fastest.
    let values = tensor
        .values()
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((t * n, d))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(UnfoldedMatrix {
        values,
        n_times: t,
        n_stations: n,
    })
}

/// Inverse of [`unfold`] for any `(t * n) x c` matrix whose rows follow the
/// time-major, station-fastest ordering.
pub fn fold_rows(matrix: &Array2<f64>, n_times: usize, n_stations: usize) -> Result<Array3<f64>> {
    if matrix.nrows() != n_times * n_stations {
        return Err(Error::ShapeMismatch(format!(
            "{} rows cannot fold into {n_times} x {n_stations}",
            matrix.nrows()
        )));
    }
    let c = matrix.ncols();
    matrix
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n_times, n_stations, c))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Folds a source-major, station-fastest vector of length `n * p` into an
/// `n x p` matrix: `Y[j][k] = vec[k * n + j]`.
pub fn fold_to_station_by_source(vec: &[f64], n: usize, p: usize) -> Result<Array2<f64>> {
    if vec.len() != n * p {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} cannot fold into {n} x {p}",
            vec.len()
        )));
    }
    Ok(Array2::from_shape_fn((n, p), |(j, k)| vec[k * n + j]))
}

/// Inverse of [`fold_to_station_by_source`].
pub fn flatten_station_by_source(matrix: &Array2<f64>) -> Vec<f64> {
    let (n, p) = matrix.dim();
    let mut out = Vec::with_capacity(n * p);
    for k in 0..p {
        for j in 0..n {
            out.push(matrix[[j, k]]);
        }
    }
    out
}
