use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Groups rows of a coordinate matrix. Labels are `0..k` numbered by first
/// occurrence in row order.
pub trait StationClusterer {
    fn cluster(&self, points: &Array2<f64>, seed: u64) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
}

impl KMeans {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            n_init: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    centroids
        .rows()
        .into_iter()
        .enumerate()
        .map(|(c, row)| (c, sq_dist(point, row)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // Fewer distinct points than k: take any unchosen row.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    points.select(ndarray::Axis(0), &chosen)
}

fn lloyd(points: &Array2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> KMeansFit {
    let (n, dim) = points.dim();
    let k = centroids.nrows();
    let assign = |c: &Array2<f64>| -> Vec<usize> { points.rows().into_iter().map(|p| nearest(p, c).0).collect() };
    let mut labels = assign(&centroids);
    for _ in 0..max_iter {
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sums.row_mut(l).scaled_add(1.0, &points.row(i));
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // Re-seed an empty cluster at the point worst served by the
                // current assignment.
                let far = (0..n)
                    .map(|i| (i, sq_dist(points.row(i), centroids.row(labels[i]))))
                    .fold((0, -1.0), |b, cur| if cur.1 > b.1 { cur } else { b })
                    .0;
                centroids.row_mut(c).assign(&points.row(far));
                labels[far] = c;
            }
        }
        let next = assign(&centroids);
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .sum();
    KMeansFit {
        labels,
        centroids,
        inertia,
    }
}

/// Renumbers labels by first occurrence and permutes centroids to match.
fn canonicalize(fit: KMeansFit) -> KMeansFit {
    let k = fit.centroids.nrows();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &fit.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let order: Vec<usize> = (0..next)
        .map(|new| map.iter().position(|&m| m == new).expect("mapped"))
        .collect();
    KMeansFit {
        labels: fit.labels.iter().map(|&l| map[l]).collect(),
        centroids: fit.centroids.select(ndarray::Axis(0), &order),
        inertia: fit.inertia,
    }
}

impl KMeans {
    pub fn fit(&self, points: &Array2<f64>, seed: u64) -> Result<KMeansFit> {
        let n = points.nrows();
        if self.k == 0 || self.k > n {
            return Err(Error::KTooLarge { k: self.k, n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<KMeansFit> = None;
        for _ in 0..self.n_init.max(1) {
            let init = plus_plus(points, self.k, &mut rng);
            let fit = lloyd(points, init, self.max_iter);
            if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
                best = Some(fit);
            }
        }
        Ok(canonicalize(best.expect("at least one restart")))
    }
}

impl StationClusterer for KMeans {
    fn cluster(&self, points: &Array2<f64>, seed: u64) -> Result<Vec<usize>> {
        Ok(self.fit(points, seed)?.labels)
    }
}

/// k-means with k-means++ seeding and 10 restarts.
pub fn cluster_stations(z: &Array2<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    KMeans::new(k).cluster(z, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn k_one_and_k_n() {
        let z = array![[0.0, 0.0], [1.0, 2.0], [5.0, 1.0], [3.0, 3.0]];
        assert_eq!(cluster_stations(&z, 1, 3).unwrap(), vec![0; 4]);
        let fit = KMeans::new(4).fit(&z, 3).unwrap();
        assert_eq!(fit.labels, vec![0, 1, 2, 3]);
        assert_eq!(fit.inertia, 0.0);
        assert!(matches!(cluster_stations(&z, 5, 0), Err(Error::KTooLarge { .. })));
        assert!(matches!(cluster_stations(&z, 0, 0), Err(Error::KTooLarge { .. })));
    }

    #[test]
    fn labels_follow_first_occurrence() {
        let z = array![[10.0, 10.0], [0.0, 0.0], [10.1, 10.0], [0.1, 0.0]];
        assert_eq!(cluster_stations(&z, 2, 42).unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn duplicate_points_with_large_k() {
        let z = array![[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]];
        let fit = KMeans::new(3).fit(&z, 0).unwrap();
        assert_eq!(fit.inertia, 0.0);
    }
}
