//! Material parameters and the per-particle material field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Poisson ratio used for every tissue; it is not estimated.
pub const TISSUE_POISSON_RATIO: f64 = 0.45;

/// Converts Young's modulus and Poisson ratio into `(μ_E, λ_E)`.
pub fn lame_from_young_poisson(young: f64, poisson: f64) -> Result<(f64, f64)> {
    if !(0.0..0.5).contains(&poisson) {
        return Err(Error::Domain(format!(
            "Poisson ratio {poisson} outside [0, 0.5)"
        )));
    }
    if !(young > 0.0) || !young.is_finite() {
        return Err(Error::Domain(format!("Young's modulus {young} must be positive")));
    }
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    Ok((mu, lambda))
}

/// Inverse of [`lame_from_young_poisson`] for the Young's modulus.
pub fn young_from_lame(mu: f64, lambda: f64) -> f64 {
    mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu)
}

/// `λ_E` implied by a shear modulus at fixed Poisson ratio.
pub fn lambda_from_mu(mu: f64, poisson: f64) -> f64 {
    2.0 * mu * poisson / (1.0 - 2.0 * poisson)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub mu_e: f64,
    pub lambda_e: f64,
    pub eta_v: f64,
    pub gamma_v: f64,
}

impl MaterialParams {
    /// Builds parameters from `(μ_E, η_v, γ_v)` with `λ_E` tied to μ_E
    /// through the fixed tissue Poisson ratio.
    pub fn from_shear(mu_e: f64, eta_v: f64, gamma_v: f64) -> Self {
        MaterialParams {
            mu_e,
            lambda_e: lambda_from_mu(mu_e, TISSUE_POISSON_RATIO),
            eta_v,
            gamma_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu_e > 0.0
            && self.lambda_e > 0.0
            && self.eta_v >= 0.0
            && self.gamma_v >= 0.0
            && [self.mu_e, self.lambda_e, self.eta_v, self.gamma_v]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid material parameters {self:?}")))
        }
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        // E = 2.9e3 at ν = 0.45 gives μ_E = 1e3.
        MaterialParams::from_shear(1.0e3, 0.0, 0.0)
    }
}

/// Per-particle material parameters; entry `i` belongs to particle `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub params: Vec<MaterialParams>,
    pub cluster_id: Vec<usize>,
    pub cluster_count: usize,
}

impl MaterialField {
    pub fn uniform(len: usize, params: MaterialParams) -> Self {
        MaterialField {
            params: vec![params; len],
            cluster_id: vec![0; len],
            cluster_count: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Replaces the cluster assignment without touching parameters.
    pub fn set_clusters(&mut self, cluster_id: Vec<usize>, cluster_count: usize) -> Result<()> {
        if cluster_id.len() != self.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cluster ids for {} particles",
                cluster_id.len(),
                self.params.len()
            )));
        }
        if let Some(bad) = cluster_id.iter().find(|&&c| c >= cluster_count) {
            return Err(Error::InvalidConfig(format!(
                "cluster id {bad} out of range for {cluster_count} clusters"
            )));
        }
        self.cluster_id = cluster_id;
        self.cluster_count = cluster_count;
        Ok(())
    }

    /// Writes one parameter set per cluster into every member particle.
    pub fn apply_cluster_params(&mut self, per_cluster: &[MaterialParams]) -> Result<()> {
        if per_cluster.len() != self.cluster_count {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter sets for {} clusters",
                per_cluster.len(),
                self.cluster_count
            )));
        }
        for (p, &c) in self.params.iter_mut().zip(&self.cluster_id) {
            *p = per_cluster[c];
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_id.len() != self.params.len() {
            return Err(Error::DimensionMismatch("cluster map length".into()));
        }
        for p in &self.params {
            p.validate()?;
        }
        if self.cluster_id.iter().any(|&c| c >= self.cluster_count) {
            return Err(Error::InvalidConfig("cluster id out of range".into()));
        }
        Ok(())
    }
}
