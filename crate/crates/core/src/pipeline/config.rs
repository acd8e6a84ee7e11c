use serde::{Deserialize, Serialize};

use crate::analytics::DEFAULT_CELL_DEG;
use crate::contrastive::AlphaMode;
use crate::data::ImputePolicy;
use crate::error::{Error, Result};
use crate::factorization::{NndsvdFill, DEFAULT_TOP_SPECIES};
use crate::multidr::{DrMethod, UmapParams};

/// Which contribution matrix the source/measure correlations use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationBasis {
    /// Row-normalized contributions.
    #[default]
    Normalized,
    /// Unnormalized `W`.
    Raw,
}

/// Every tunable of one pipeline run. Missing fields take defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub p: usize,
    pub k: usize,
    pub seed: u64,
    pub dr_method: DrMethod,
    pub umap: UmapParams,
    pub alpha_mode: AlphaMode,
    pub impute: ImputePolicy,
    pub cell_deg: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub nndsvd_fill: NndsvdFill,
    pub correlation_basis: CorrelationBasis,
    pub top_species: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            p: 7,
            k: 3,
            seed: 0,
            dr_method: DrMethod::default(),
            umap: UmapParams::default(),
            alpha_mode: AlphaMode::default(),
            impute: ImputePolicy::default(),
            cell_deg: DEFAULT_CELL_DEG,
            max_iter: 500,
            tol: 1e-6,
            nndsvd_fill: NndsvdFill::default(),
            correlation_basis: CorrelationBasis::default(),
            top_species: DEFAULT_TOP_SPECIES,
        }
    }
}

impl PipelineConfig {
    /// Checks bounds that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.p == 0 {
            return fail("p must be at least 1".into());
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if !(self.cell_deg > 0.0 && self.cell_deg.is_finite()) {
            return fail(format!("cell_deg must be positive, got {}", self.cell_deg));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return fail(format!("tol must be non-negative, got {}", self.tol));
        }
        if self.top_species == 0 {
            return fail("top_species must be at least 1".into());
        }
        if let AlphaMode::Fixed(a) = self.alpha_mode {
            if !(a >= 0.0 && a.is_finite()) {
                return fail(format!("alpha must be non-negative, got {a}"));
            }
        }
        let u = &self.umap;
        if !(u.min_dist >= 0.0 && u.spread > 0.0 && u.min_dist.is_finite() && u.spread.is_finite()) {
            return fail(format!(
                "umap needs min_dist >= 0 and spread > 0, got {} and {}",
                u.min_dist, u.spread
            ));
        }
        if u.n_epochs == 0 || u.negative_sample_rate == 0 || !(u.learning_rate > 0.0 && u.learning_rate.is_finite()) {
            return fail("umap n_epochs, negative_sample_rate and learning_rate must be positive".into());
        }
        if matches!(u.n_neighbors, Some(k) if k < 2) {
            return fail("umap n_neighbors must be at least 2".into());
        }
        Ok(())
    }

    /// Checks bounds against a tensor of `t` timestamps, `n` stations and
    /// `d` species.
    pub fn validate_for(&self, t: usize, n: usize, d: usize) -> Result<()> {
        self.validate()?;
        let fail = |m: String| Err(Error::InvalidConfig(m));
        let max_p = (t * n).min(d);
        if self.p > max_p {
            return fail(format!("p = {} exceeds min(t * n, d) = {max_p}", self.p));
        }
        if self.k > n {
            return fail(format!("k = {} exceeds the {n} stations", self.k));
        }
        if t < 2 {
            return fail(format!("need at least 2 timestamps, got {t}"));
        }
        if self.dr_method == DrMethod::Umap {
            if n < 3 {
                return fail(format!("umap needs at least 3 stations, got {n}"));
            }
            let k = self.umap.neighbors_for(n);
            if k >= n {
                return fail(format!("umap n_neighbors = {k} must be below the {n} stations"));
            }
        }
        Ok(())
    }
}
