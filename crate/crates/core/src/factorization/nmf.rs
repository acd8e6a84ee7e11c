use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::nndsvd::{nndsvd, NndsvdFill};
use crate::data::{normalize_rows, NormKind, NormalizedMatrix, UnfoldedMatrix};
use crate::error::{Error, Result};

/// Added to update denominators so all-zero factors stay finite.
pub const DENOMINATOR_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfConfig {
    pub p: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    pub fill: NndsvdFill,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            p: 1,
            seed: 0,
            max_iter: 500,
            tol: 1e-6,
            fill: NndsvdFill::Zeros,
        }
    }
}

impl NmfConfig {
    pub fn with_rank(p: usize) -> Self {
        Self { p, ..Self::default() }
    }
}

/// NMF factors of the unfolded species matrix and their normalized forms.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    /// Contributions, `(t * n) x p`.
    pub w: Array2<f64>,
    /// Source profiles, `p x d`.
    pub h: Array2<f64>,
    /// `W` with unit-l1 rows.
    pub w_hat: NormalizedMatrix,
    /// `H` with unit-l2 rows.
    pub h_hat: NormalizedMatrix,
    pub p: usize,
    /// Squared Frobenius loss at initialization and after every iteration.
    pub objective_trace: Vec<f64>,
    pub explained_variance_ratio: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

impl FactorizationResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial loss")
    }
}

fn squared_residual(v: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let wh = w.dot(h);
    v.iter().zip(wh.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `1 - ||V - WH||^2 / ||V - mean(V)||^2`, clamped to `[0, 1]`.
pub fn explained_variance_ratio(v: &Array2<f64>, residual: f64) -> f64 {
    let mean = v.mean().unwrap_or(0.0);
    let total: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    if total <= 0.0 {
        return if residual <= 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - residual / total).clamp(0.0, 1.0)
}

/// Factorizes `V ~ WH` with Lee-Seung multiplicative updates for the squared
/// Frobenius loss, starting from NNDSVD.
pub fn run_nmf(matrix: &UnfoldedMatrix, config: &NmfConfig) -> Result<FactorizationResult> {
    let v = &matrix.values;
    let (rows, cols) = v.dim();
    let p = config.p;
    if p == 0 || p > rows.min(cols) {
        return Err(Error::RankTooLarge { p, max: rows.min(cols) });
    }
    if let Some(((row, col), &value)) = v.indexed_iter().find(|(_, &x)| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::NegativeEntry { row, col, value });
    }

    let (mut w, mut h) = nndsvd(v, p, config.fill, config.seed)?;
    let mut trace = vec![squared_residual(v, &w, &h)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        // H <- H * (W^T V) / (W^T W H)
        let numer = w.t().dot(v);
        let denom = w.t().dot(&w).dot(&h);
        ndarray::Zip::from(&mut h)
            .and(&numer)
            .and(&denom)
            .for_each(|x, &a, &b| *x *= a / (b + DENOMINATOR_EPSILON));

        // W <- W * (V H^T) / (W H H^T)
        let numer = v.dot(&h.t());
        let denom = w.dot(&h.dot(&h.t()));
        ndarray::Zip::from(&mut w)
            .and(&numer)
            .and(&denom)
            .for_each(|x, &a, &b| *x *= a / (b + DENOMINATOR_EPSILON));

        debug_assert!(w.iter().chain(h.iter()).all(|&x| x >= 0.0));
        iterations += 1;

        let prev = *trace.last().expect("non-empty");
        let cur = squared_residual(v, &w, &h);
        trace.push(cur);
        if prev <= 0.0 || (prev - cur) / prev < config.tol {
            converged = true;
            break;
        }
    }

    if let Some(x) = w.iter().chain(h.iter()).find(|&&x| !(x >= 0.0)) {
        return Err(Error::NonNegativityViolation(format!("factor entry {x}")));
    }

    let w_hat = normalize_rows(&w, NormKind::L1Rows)?;
    let h_hat = normalize_rows(&h, NormKind::L2Rows)?;
    let explained = explained_variance_ratio(v, *trace.last().expect("non-empty"));
    Ok(FactorizationResult {
        w,
        h,
        w_hat,
        h_hat,
        p,
        objective_trace: trace,
        explained_variance_ratio: explained,
        seed: config.seed,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rank_one_outer_product_is_recovered() {
        // outer([1, 2], [1, 0, 1])
        let v = array![[1.0, 0.0, 1.0], [2.0, 0.0, 2.0]];
        let res = run_nmf(&UnfoldedMatrix::from_matrix(v.clone()), &NmfConfig::with_rank(1)).unwrap();
        let wh = res.w.dot(&res.h);
        let err: f64 = v
            .iter()
            .zip(wh.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-6, "residual {err}");
    }

    #[test]
    fn full_rank_explains_everything() {
        let v = array![[3.0, 1.0, 0.5], [0.2, 4.0, 1.0], [1.0, 0.3, 5.0]];
        let res = run_nmf(
            &UnfoldedMatrix::from_matrix(v.clone()),
            &NmfConfig {
                p: 3,
                max_iter: 5000,
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        // Independent residual check.
        let wh = res.w.dot(&res.h);
        let resid: f64 = v.iter().zip(wh.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        let mean = v.sum() / 9.0;
        let total: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
        assert!(1.0 - resid / total >= 0.999);
        assert!(res.explained_variance_ratio >= 0.999);
    }

    #[test]
    fn rank_bounds() {
        let v = UnfoldedMatrix::from_matrix(array![[1.0, 2.0], [3.0, 4.0]]);
        assert!(matches!(
            run_nmf(&v, &NmfConfig::with_rank(3)),
            Err(Error::RankTooLarge { .. })
        ));
        assert!(matches!(
            run_nmf(&v, &NmfConfig::with_rank(0)),
            Err(Error::RankTooLarge { .. })
        ));
        let neg = UnfoldedMatrix::from_matrix(array![[1.0, -2.0]]);
        assert!(matches!(
            run_nmf(&neg, &NmfConfig::with_rank(1)),
            Err(Error::NegativeEntry { .. })
        ));
    }

    #[test]
    fn trace_monotone_and_normalized_outputs() {
        let v = Array2::from_shape_fn((30, 8), |(i, j)| ((i * 7 + j * 3) % 11) as f64 + 0.1);
        let res = run_nmf(&UnfoldedMatrix::from_matrix(v), &NmfConfig::with_rank(3)).unwrap();
        for pair in res.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{pair:?}");
        }
        for (r, row) in res.h_hat.values.rows().into_iter().enumerate() {
            if !res.h_hat.zero_rows.contains(&r) {
                assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
            }
        }
        for (r, row) in res.w_hat.values.rows().into_iter().enumerate() {
            if !res.w_hat.zero_rows.contains(&r) {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
        }
    }
}
