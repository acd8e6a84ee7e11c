use chrono::{DateTime, Utc};
use ndarray::{Array1, Array2, Array3, Axis};

use crate::data::{fold_rows, fold_to_station_by_source, NormalizedMatrix};
use crate::error::{Error, Result};
use crate::linalg::{column_means, symmetric_eigen};

/// Normalized contributions folded back to `(t, n, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionTensor {
    pub values: Array3<f64>,
    pub time_index: Vec<DateTime<Utc>>,
    pub station_index: Vec<String>,
    pub source_ids: Vec<String>,
}

impl ContributionTensor {
    pub fn new(
        values: Array3<f64>,
        time_index: Vec<DateTime<Utc>>,
        station_index: Vec<String>,
        source_ids: Vec<String>,
    ) -> Result<Self> {
        let (t, n, p) = values.dim();
        if time_index.len() != t || station_index.len() != n || source_ids.len() != p {
            return Err(Error::ShapeMismatch(format!(
                "contribution tensor ({t}, {n}, {p}) with index lengths ({}, {}, {})",
                time_index.len(),
                station_index.len(),
                source_ids.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::NonNegativityViolation(format!("contribution {v}")));
        }
        Ok(Self {
            values,
            time_index,
            station_index,
            source_ids,
        })
    }

    /// Folds the row-normalized contribution matrix (rows ordered time-major,
    /// station fastest).
    pub fn from_normalized(
        w_hat: &NormalizedMatrix,
        time_index: Vec<DateTime<Utc>>,
        station_index: Vec<String>,
        source_ids: Vec<String>,
    ) -> Result<Self> {
        let values = fold_rows(&w_hat.values, time_index.len(), station_index.len())?;
        Self::new(values, time_index, station_index, source_ids)
    }

    /// `(t, n, p)`.
    pub fn dim(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    /// Contribution series of one (station, source) pair.
    pub fn series(&self, station: usize, source: usize) -> Vec<f64> {
        self.values.index_axis(Axis(1), station).column(source).to_vec()
    }
}

/// Unfolds along time: row `k * n + j` is the series of source `k` at
/// station `j`, giving a `(p * n) x t` matrix.
pub fn instance_matrix(tensor: &ContributionTensor) -> Array2<f64> {
    let (t, n, p) = tensor.dim();
    Array2::from_shape_fn((p * n, t), |(r, i)| tensor.values[[i, r % n, r / n]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStep {
    /// Station x source summary.
    pub y: Array2<f64>,
    /// One score per (source, station) instance, source-major.
    pub scores: Vec<f64>,
    pub pc1_explained: f64,
    /// True when the instances had no temporal variation and `y` holds
    /// temporal means instead of principal-component scores.
    pub degenerate: bool,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Relative size below which temporal variation counts as none.
const FLAT_TOLERANCE: f64 = 1e-12;

/// Compresses each instance's time series to its score on the first
/// principal component over time, then folds the scores to station x source.
pub fn first_step_pca(tensor: &ContributionTensor) -> Result<FirstStep> {
    let (t, n, p) = tensor.dim();
    if t < 2 {
        return Err(Error::InvalidTensor(format!(
            "first-step reduction needs at least 2 timestamps, got {t}"
        )));
    }
    let x = instance_matrix(tensor);
    let m = x.nrows();
    let temporal_means: Vec<f64> = x.mean_axis(Axis(1)).expect("t >= 2").to_vec();

    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let all_flat = x.rows().into_iter().all(|row| {
        let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        hi - lo <= FLAT_TOLERANCE * scale
    });
    let fallback = || -> Result<FirstStep> {
        log::warn!("instances have no temporal variance; using temporal means");
        Ok(FirstStep {
            y: fold_to_station_by_source(&temporal_means, n, p)?,
            scores: temporal_means.clone(),
            pc1_explained: 0.0,
            degenerate: true,
        })
    };
    if all_flat || m < 2 {
        return fallback();
    }

    let centered = &x - &column_means(x.view());
    let denom = m as f64 - 1.0;
    let (direction, total) = if m <= t {
        // Gram route: eigenvectors of X X^T map to PCs through X^T.
        let gram = centered.dot(&centered.t()) / denom;
        let eig = symmetric_eigen(gram.view())?;
        let total: f64 = gram.diag().sum();
        let v = centered.t().dot(&eig.vectors.column(0));
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            return fallback();
        }
        (v / norm, total)
    } else {
        let cov = centered.t().dot(&centered) / denom;
        let eig = symmetric_eigen(cov.view())?;
        (eig.vectors.column(0).to_owned(), cov.diag().sum())
    };
    if total <= FLAT_TOLERANCE * scale * scale {
        return fallback();
    }

    let mut direction: Array1<f64> = direction;
    let mut scores = centered.dot(&direction).to_vec();
    let flip = match pearson(&scores, &temporal_means) {
        Some(r) if r != 0.0 => r < 0.0,
        _ => direction.sum() < 0.0,
    };
    if flip {
        direction.mapv_inplace(|v| -v);
        scores.iter_mut().for_each(|s| *s = -*s);
    }
    let score_var = scores.iter().map(|s| s * s).sum::<f64>() / denom;
    Ok(FirstStep {
        y: fold_to_station_by_source(&scores, n, p)?,
        scores,
        pc1_explained: (score_var / total).clamp(0.0, 1.0),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    pub(crate) fn contribution(values: Array3<f64>) -> ContributionTensor {
        let (t, n, p) = values.dim();
        let start = Utc.with_ymd_and_hms(2018, 3, 12, 0, 0, 0).unwrap();
        ContributionTensor::new(
            values,
            (0..t).map(|i| start + Duration::hours(12 * i as i64)).collect(),
            (0..n).map(|j| format!("s{j}")).collect(),
            (0..p).map(crate::factorization::source_label).collect(),
        )
        .unwrap()
    }

    #[test]
    fn instance_ordering_is_source_major() {
        let values = Array3::from_shape_fn((2, 3, 2), |(i, j, k)| (100 * k + 10 * j + i) as f64);
        let x = instance_matrix(&contribution(values));
        // Row k*n + j = source k, station j.
        assert_eq!(x.row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(x.row(2).to_vec(), vec![20.0, 21.0]);
        assert_eq!(x.row(3).to_vec(), vec![100.0, 101.0]);
    }

    #[test]
    fn shared_pattern_scaled_per_instance() {
        // x_r(t) = c_r * f(t): centered data is rank one, PC scores are
        // proportional to c_r - mean(c).
        let f = [1.0, 3.0, 2.0, 5.0, 4.0];
        let c = [0.5, 1.0, 2.0, 0.1, 3.0, 1.5];
        let (n, p) = (3, 2);
        let values = Array3::from_shape_fn((5, n, p), |(i, j, k)| c[k * n + j] * f[i]);
        let out = first_step_pca(&contribution(values)).unwrap();
        assert!(out.pc1_explained >= 0.999);
        let cm = c.iter().sum::<f64>() / 6.0;
        let ratio = out.scores[0] / (c[0] - cm);
        for r in 0..6 {
            assert!((out.scores[r] - ratio * (c[r] - cm)).abs() < 1e-9);
        }
        assert!(ratio > 0.0, "sign follows the temporal means");
        assert_eq!(out.y[[1, 1]], out.scores[n + 1]);
    }

    #[test]
    fn two_timestamps_symmetric_use_diagonal() {
        // Instances (1,1),(3,3),(2,2),(0,0) plus antisymmetric spread.
        let pts = [(1.0, 1.2), (3.0, 2.8), (2.2, 2.0), (0.0, 0.1)];
        let values = Array3::from_shape_fn((2, 4, 1), |(i, j, _)| if i == 0 { pts[j].0 } else { pts[j].1 });
        let x = instance_matrix(&contribution(values.clone()));
        let out = first_step_pca(&contribution(values)).unwrap();
        // Oracle: 2x2 eigendecomposition of the covariance by hand.
        let m = 4.0;
        let mean = [x.column(0).sum() / m, x.column(1).sum() / m];
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for r in 0..4 {
            let (u, v) = (x[[r, 0]] - mean[0], x[[r, 1]] - mean[1]);
            a += u * u;
            b += u * v;
            d += v * v;
        }
        let (a, b, d) = (a / 3.0, b / 3.0, d / 3.0);
        let lambda = 0.5 * (a + d) + ((0.5 * (a - d)).powi(2) + b * b).sqrt();
        let (vx, vy) = (b, lambda - a);
        let len = (vx * vx + vy * vy).sqrt();
        let (vx, vy) = (vx / len, vy / len);
        // Nearly diagonal.
        assert!((vx.abs() - vy.abs()).abs() < 0.1);
        for r in 0..4 {
            let want = (x[[r, 0]] - mean[0]) * vx + (x[[r, 1]] - mean[1]) * vy;
            assert!((out.scores[r].abs() - want.abs()).abs() < 1e-12);
        }
        let var: f64 = out.scores.iter().map(|s| s * s).sum::<f64>() / 3.0;
        assert!((var - lambda).abs() < 1e-9 * lambda);
    }

    #[test]
    fn constant_tensor_falls_back() {
        let out = first_step_pca(&contribution(Array3::from_elem((4, 3, 2), 0.5))).unwrap();
        assert!(out.degenerate);
        assert!(out.y.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn single_timestamp_rejected() {
        assert!(first_step_pca(&contribution(Array3::from_elem((1, 3, 2), 0.5))).is_err());
    }
}
