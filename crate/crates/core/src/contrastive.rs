//! Contrastive characterization of station clusters.
//!
//! For a target cluster against the remaining stations, the loading vector
//! is the top eigenvector of `C_tg - alpha * C_bg`, where both covariances are
//! taken over the station x source summary rows.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, covariance, symmetric_eigen};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "alpha")]
pub enum AlphaMode {
    /// Scan the contrast grid and keep the best-scoring alpha.
    #[default]
    Auto,
    Fixed(f64),
}

/// Added to the background variance in the auto-alpha score.
pub const SCORE_EPSILON: f64 = 1e-12;

/// Minimum share of the target's top variance a direction must keep to be
/// eligible under auto alpha.
pub const MIN_TARGET_VARIANCE_SHARE: f64 = 0.1;

/// `{0} ∪ {10^e : e = -2, -2 + 1/9, ..., 2}`.
pub fn alpha_grid() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..=36).map(|i| 10f64.powf(-2.0 + i as f64 / 9.0)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCharacteristic {
    pub cluster_id: usize,
    /// Unit-length loading per source.
    pub loadings: Vec<f64>,
    pub alpha: f64,
    /// Largest eigenvalue of the contrastive covariance.
    pub eigenvalue: f64,
    pub eigengap: f64,
    /// False for clusters too small to estimate a covariance.
    pub reliable: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

struct Split {
    target: Array2<f64>,
    background: Array2<f64>,
}

fn split(y: &Array2<f64>, labels: &[usize], cluster_id: usize) -> Result<Split> {
    if labels.len() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            y.nrows()
        )));
    }
    let (tg, bg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == cluster_id);
    Ok(Split {
        target: y.select(Axis(0), &tg),
        background: y.select(Axis(0), &bg),
    })
}

/// Orients `a` so it points from the background mean toward the target mean;
/// when that projection is zero the largest-magnitude entry is made positive.
fn orient(a: &mut Array1<f64>, diff: &Array1<f64>) {
    let proj = a.dot(diff);
    let flip = if proj != 0.0 {
        proj < 0.0
    } else {
        let lead = a
            .iter()
            .copied()
            .fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
        lead < 0.0
    };
    if flip {
        a.mapv_inplace(|v| -v);
    }
}

struct Solved {
    loadings: Array1<f64>,
    eigenvalue: f64,
    eigengap: f64,
}

fn solve(c_tg: &Array2<f64>, c_bg: &Array2<f64>, alpha: f64, diff: &Array1<f64>) -> Result<Solved> {
    let m = c_tg - &(c_bg * alpha);
    let eig = symmetric_eigen(m.view())?;
    let mut a = eig.vectors.column(0).to_owned();
    let norm = a.dot(&a).sqrt();
    a /= norm;
    orient(&mut a, diff);
    Ok(Solved {
        loadings: a,
        eigenvalue: eig.values[0],
        eigengap: eig.values.get(1).map_or(0.0, |l2| eig.values[0] - l2),
    })
}

fn quad(c: &Array2<f64>, a: &Array1<f64>) -> f64 {
    a.dot(&c.dot(a))
}

/// Characterizes one cluster against all other stations.
pub fn characterize(
    y: &Array2<f64>,
    labels: &[usize],
    cluster_id: usize,
    alpha_mode: AlphaMode,
) -> Result<ClusterCharacteristic> {
    let s = split(y, labels, cluster_id)?;
    let (n_tg, n_bg) = (s.target.nrows(), s.background.nrows());
    if n_tg < 2 || n_bg < 2 {
        return Err(Error::ClusterTooSmall {
            cluster_id,
            target: n_tg,
            background: n_bg,
        });
    }
    let c_tg = covariance(s.target.view());
    let c_bg = covariance(s.background.view());
    let diff = column_means(s.target.view()) - column_means(s.background.view());
    let mut warnings = Vec::new();

    let top_tg = symmetric_eigen(c_tg.view())?.values[0];
    let degenerate = !(top_tg > 0.0);
    let alpha = match alpha_mode {
        AlphaMode::Fixed(a) if a < 0.0 || !a.is_finite() => {
            return Err(Error::InvalidConfig(format!(
                "alpha must be a non-negative number, got {a}"
            )));
        }
        _ if degenerate => {
            warnings.push("target covariance is zero; using alpha = 0".to_string());
            0.0
        }
        AlphaMode::Fixed(a) => a,
        AlphaMode::Auto => {
            let mut best = (0.0, f64::NEG_INFINITY);
            for alpha in alpha_grid() {
                let sol = solve(&c_tg, &c_bg, alpha, &diff)?;
                let tv = quad(&c_tg, &sol.loadings);
                if tv < MIN_TARGET_VARIANCE_SHARE * top_tg {
                    continue;
                }
                let score = tv / (quad(&c_bg, &sol.loadings) + SCORE_EPSILON);
                if score > best.1 {
                    best = (alpha, score);
                }
            }
            best.0
        }
    };
    let sol = solve(&c_tg, &c_bg, alpha, &diff)?;
    Ok(ClusterCharacteristic {
        cluster_id,
        loadings: sol.loadings.to_vec(),
        alpha,
        eigenvalue: sol.eigenvalue,
        eigengap: sol.eigengap,
        reliable: true,
        warnings,
    })
}

/// Record for a cluster whose target or background is too small for a
/// covariance: the loadings are the normalized mean difference.
fn unreliable(y: &Array2<f64>, labels: &[usize], cluster_id: usize) -> Result<ClusterCharacteristic> {
    let s = split(y, labels, cluster_id)?;
    let diff = column_means(s.target.view()) - column_means(s.background.view());
    let norm = diff.dot(&diff).sqrt();
    let p = y.ncols();
    let mut loadings = if norm > 0.0 {
        diff / norm
    } else {
        let mut e = Array1::zeros(p);
        if p > 0 {
            e[0] = 1.0;
        }
        e
    };
    orient(&mut loadings, &Array1::zeros(p));
    Ok(ClusterCharacteristic {
        cluster_id,
        loadings: loadings.to_vec(),
        alpha: 0.0,
        eigenvalue: 0.0,
        eigengap: 0.0,
        reliable: false,
        warnings: vec![format!(
            "cluster {cluster_id} has {} members against {} others; loadings follow the mean difference",
            s.target.nrows(),
            s.background.nrows()
        )],
    })
}

/// One characteristic per populated cluster, in ascending cluster id.
pub fn characterize_all(
    y: &Array2<f64>,
    labels: &[usize],
    alpha_mode: AlphaMode,
) -> Result<Vec<ClusterCharacteristic>> {
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    if clusters.len() < 2 {
        return Err(Error::SingleCluster);
    }
    clusters
        .into_iter()
        .map(|c| match characterize(y, labels, c, alpha_mode) {
            Err(Error::ClusterTooSmall { .. }) => unreliable(y, labels, c),
            other => other,
        })
        .collect()
}
