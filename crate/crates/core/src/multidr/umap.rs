//! A small, single-threaded UMAP for embedding a few dozen points in 2-D.
//!
//! Steps: exact Euclidean kNN, smooth kNN distances, fuzzy union of the
//! directed membership graphs, then negative-sampling SGD on the
//! cross-entropy between the graph and the low-dimensional similarities
//! `1 / (1 + a d^(2b))`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    /// Neighborhood size including the point itself; `None` picks
    /// `min(15, n - 1)`.
    pub n_neighbors: Option<usize>,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            n_neighbors: None,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: 500,
            negative_sample_rate: 5,
            learning_rate: 1.0,
        }
    }
}

impl UmapParams {
    pub fn neighbors_for(&self, n: usize) -> usize {
        self.n_neighbors.unwrap_or_else(|| 15.min(n.saturating_sub(1)))
    }
}

/// Fits `1 / (1 + a x^(2b))` to the target curve that is 1 below `min_dist`
/// and decays as `exp(-(x - min_dist) / spread)` beyond it.
pub fn fit_ab(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let loss = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };

    // Levenberg-Marquardt on (a, b).
    let (mut a, mut b, mut mu) = (1.0f64, 1.0f64, 1e-3);
    let mut cur = loss(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let x2b = x.powf(2.0 * b);
            let denom = 1.0 + a * x2b;
            let f = 1.0 / denom;
            let da = -x2b / (denom * denom);
            let db = -a * x2b * 2.0 * x.ln() / (denom * denom);
            let r = f - y;
            let g = [da, db];
            for i in 0..2 {
                jtr[i] += g[i] * r;
                for j in 0..2 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let m00 = jtj[0][0] * (1.0 + mu);
        let m11 = jtj[1][1] * (1.0 + mu);
        let det = m00 * m11 - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let step_b = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let (na, nb) = (a - step_a, b - step_b);
        let next = if na > 0.0 && nb > 0.0 {
            loss(na, nb)
        } else {
            f64::INFINITY
        };
        if next < cur {
            let done = (cur - next) < 1e-15 * cur.max(1e-300);
            a = na;
            b = nb;
            cur = next;
            mu = (mu * 0.3).max(1e-12);
            if done {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each point, the indices and distances of its `k - 1` nearest other
/// points, nearest first (ties by index).
fn knn(data: &Array2<f64>, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = data.nrows();
    let rows: Vec<Vec<f64>> = data.rows().into_iter().map(|r| r.to_vec()).collect();
    (0..n)
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, sq_dist(&rows[i], &rows[j]).sqrt()))
                .collect();
            d.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
            d.truncate(k - 1);
            d
        })
        .collect()
}

/// Per-point `(rho, sigma)` so that memberships to the `k - 1` neighbors sum
/// to `log2(k)`.
fn smooth_knn_dist(neighbors: &[Vec<(usize, f64)>], k: usize) -> Vec<(f64, f64)> {
    let target = (k as f64).log2();
    let mean_all = {
        let all: Vec<f64> = neighbors.iter().flatten().map(|x| x.1).collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    };
    neighbors
        .iter()
        .map(|nb| {
            let rho = nb.iter().map(|x| x.1).find(|&d| d > 0.0).unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0, f64::INFINITY, 1.0);
            for _ in 0..64 {
                let psum: f64 = nb
                    .iter()
                    .map(|&(_, d)| {
                        let d = d - rho;
                        if d > 0.0 {
                            (-d / mid).exp()
                        } else {
                            1.0
                        }
                    })
                    .sum();
                if (psum - target).abs() < 1e-5 {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = 0.5 * (lo + hi);
                } else {
                    lo = mid;
                    mid = if hi == f64::INFINITY {
                        mid * 2.0
                    } else {
                        0.5 * (lo + hi)
                    };
                }
            }
            let mean_local = nb.iter().map(|x| x.1).sum::<f64>() / nb.len().max(1) as f64;
            let floor = 1e-3 * if rho > 0.0 { mean_local } else { mean_all };
            (rho, mid.max(floor))
        })
        .collect()
}

/// Symmetric fuzzy membership graph as `(i, j, weight)` edges in row order,
/// both directions present.
fn fuzzy_graph(data: &Array2<f64>, k: usize) -> Vec<(usize, usize, f64)> {
    let n = data.nrows();
    let neighbors = knn(data, k);
    let params = smooth_knn_dist(&neighbors, k);
    let mut w = Array2::<f64>::zeros((n, n));
    for (i, nb) in neighbors.iter().enumerate() {
        let (rho, sigma) = params[i];
        for &(j, d) in nb {
            w[[i, j]] = (-((d - rho).max(0.0)) / sigma).exp();
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (w[[i, j]], w[[j, i]]);
            let v = a + b - a * b;
            if i != j && v > 0.0 {
                edges.push((i, j, v));
            }
        }
    }
    edges
}

/// Embeds the rows of `data` in 2-D starting from `init` (n x 2).
pub fn umap_embed(data: &Array2<f64>, init: &Array2<f64>, params: &UmapParams, seed: u64) -> Result<Array2<f64>> {
    let n = data.nrows();
    if n < 3 {
        return Err(Error::TooFewStations { n, min: 3 });
    }
    let k = params.neighbors_for(n);
    if k < 2 || k >= n {
        return Err(Error::BadNeighborCount { n_neighbors: k, n });
    }
    let (a, b) = fit_ab(params.spread, params.min_dist);
    let n_epochs = params.n_epochs.max(1);

    let mut edges = fuzzy_graph(data, k);
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    edges.retain(|e| e.2 >= max_w / n_epochs as f64);
    let epochs_per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let neg_rate = params.negative_sample_rate.max(1) as f64;
    let epochs_per_negative: Vec<f64> = epochs_per_sample.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emb: Vec<[f64; 2]> = init.rows().into_iter().map(|r| [r[0], r[1]]).collect();
    let clip = |v: f64| v.clamp(-4.0, 4.0);

    for epoch in 0..n_epochs {
        let e = epoch as f64;
        let alpha = params.learning_rate * (1.0 - e / n_epochs as f64);
        for (idx, &(j, kk, _)) in edges.iter().enumerate() {
            if next_sample[idx] > e {
                continue;
            }
            let d2 = sq_dist(&emb[j], &emb[kk]);
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for d in 0..2 {
                let g = clip(coeff * (emb[j][d] - emb[kk][d]));
                emb[j][d] += g * alpha;
                emb[kk][d] -= g * alpha;
            }
            next_sample[idx] += epochs_per_sample[idx];

            let n_neg = ((e - next_negative[idx]) / epochs_per_negative[idx]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                let d2 = sq_dist(&emb[j], &emb[other]);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else if other == j {
                    continue;
                } else {
                    0.0
                };
                for d in 0..2 {
                    let g = if coeff > 0.0 {
                        clip(coeff * (emb[j][d] - emb[other][d]))
                    } else {
                        4.0
                    };
                    emb[j][d] += g * alpha;
                }
            }
            next_negative[idx] += n_neg as f64 * epochs_per_negative[idx];
        }
    }

    let z = Array2::from_shape_fn((n, 2), |(i, d)| emb[i][d]);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("embedding diverged".into()));
    }
    Ok(z)
}
