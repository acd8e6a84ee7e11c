use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::umap::{umap_embed, UmapParams};
use crate::error::{Error, Result};
use crate::linalg::{column_means, covariance, symmetric_eigen};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrMethod {
    #[default]
    Umap,
    Pca2,
}

/// Centered scores on the top two principal axes. Each axis is oriented so
/// its largest-magnitude loading is positive.
pub fn pca2(y: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, p) = y.dim();
    if n == 0 {
        return Err(Error::TooFewStations { n, min: 1 });
    }
    let centered = y - &column_means(y.view());
    let eig = symmetric_eigen(covariance(y.view()).view())?;
    let mut z = Array2::zeros((n, 2));
    for c in 0..p.min(2) {
        let mut axis = eig.vectors.column(c).to_owned();
        let lead = axis
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if lead < 0.0 {
            axis.mapv_inplace(|v| -v);
        }
        z.column_mut(c).assign(&centered.dot(&axis));
    }
    Ok(z)
}

/// Rescales each column of the PCA layout to `[0, 10]` and adds tiny seeded
/// jitter so coincident points can separate.
fn umap_init(y: &Array2<f64>, seed: u64) -> Result<Array2<f64>> {
    let mut z = pca2(y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a17);
    for mut col in z.axis_iter_mut(Axis(1)) {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        for v in col.iter_mut() {
            let base = if range > 0.0 { 10.0 * (*v - lo) / range } else { 5.0 };
            *v = base + 1e-4 * (rng.random::<f64>() - 0.5);
        }
    }
    Ok(z)
}

/// Reduces the station x source summary to 2-D coordinates.
pub fn second_step_embed(y: &Array2<f64>, method: DrMethod, params: &UmapParams, seed: u64) -> Result<Array2<f64>> {
    match method {
        DrMethod::Pca2 => pca2(y),
        DrMethod::Umap => {
            let n = y.nrows();
            if n < 3 {
                return Err(Error::TooFewStations { n, min: 3 });
            }
            let init = umap_init(y, seed)?;
            umap_embed(y, &init, params, seed)
        }
    }
}
