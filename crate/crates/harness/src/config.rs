//! Experiment configuration: the sweep grid, the success policy, and the
//! lambda policy, loaded from a JSON file.
//!
//! A sweep cell is one point of the cartesian product
//! `ambient_dims x dims x deltas x missing x lambdas`; every cell shares the
//! subspace count and sampling density. An empty `lambdas` axis means the
//! default policy `lambda = 2 sqrt(n / (6 ln N))` evaluated per cell.

use serde::{Deserialize, Serialize};

use crate::fnv1a;

#[derive(Clone, Debug, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessPolicy {
    pub require_detection: bool,
    pub require_nontrivial: bool,
    /// Predicted-vs-truth label disagreement rate must be <= this.
    pub max_clustering_error: f64,
}

impl Default for SuccessPolicy {
    fn default() -> Self {
        Self {
            require_detection: true,
            require_nontrivial: true,
            max_clustering_error: 0.0,
        }
    }
}

/// Bisection over the number of missing entries per column, looking for the
/// largest m whose success frequency still reaches `target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MStarSpec {
    pub target: f64,
    pub trials: usize,
}

impl Default for MStarSpec {
    fn default() -> Self {
        Self {
            target: 0.9,
            trials: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ambient dimension axis (n).
    pub ambient_dims: Vec<usize>,
    /// Number of subspaces L, fixed across the grid.
    pub num_subspaces: usize,
    /// Subspace dimension axis (d); every subspace in a cell uses the same d.
    pub dims: Vec<usize>,
    /// Sampling density: each subspace draws round(kappa * d) points.
    pub kappa: f64,
    /// Corruption-level axis. Positive values add norm-bounded noise.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// Missing-entries-per-column axis. Positive values zero entries instead
    /// of adding noise; mixing both models in one grid is rejected.
    #[serde(default = "default_missing")]
    pub missing: Vec<usize>,
    /// Explicit lambda axis; empty means the per-cell default policy.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// Trials per cell.
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub success: SuccessPolicy,
    /// Draw the corruption toward a foreign subspace instead of uniformly.
    #[serde(default)]
    pub adversarial: bool,
    /// Measure r and mu per trial (expensive; leave-one-out solves).
    #[serde(default)]
    pub measure_geometry: bool,
    /// When set, estimate m*(cell) by bisection instead of sweeping `missing`.
    #[serde(default)]
    pub m_star: Option<MStarSpec>,
}

fn default_deltas() -> Vec<f64> {
    vec![0.0]
}

fn default_missing() -> Vec<usize> {
    vec![0]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ambient_dims.is_empty() || self.dims.is_empty() {
            return Err(err("ambient_dims and dims must be non-empty"));
        }
        if self.deltas.is_empty() || self.missing.is_empty() {
            return Err(err("deltas and missing axes must be non-empty"));
        }
        if self.num_subspaces == 0 {
            return Err(err("num_subspaces must be at least 1"));
        }
        if self.trials == 0 {
            return Err(err("trials must be at least 1"));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(err("kappa must be positive and finite"));
        }
        if self.ambient_dims.contains(&0) || self.dims.contains(&0) {
            return Err(err("dimensions must be positive"));
        }
        let n_min = *self.ambient_dims.iter().min().unwrap();
        if self.dims.iter().any(|&d| d >= n_min) {
            return Err(err(
                "every subspace dimension must be below every ambient dimension",
            ));
        }
        if self.deltas.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(err("deltas must be finite and nonnegative"));
        }
        if self.missing.iter().any(|&m| m >= n_min) {
            return Err(err(
                "missing entries per column must leave at least one observed",
            ));
        }
        let noisy = self.deltas.iter().any(|&d| d > 0.0);
        let masked = self.missing.iter().any(|&m| m > 0);
        if noisy && masked {
            return Err(err(
                "deltas > 0 and missing > 0 cannot be combined; the corruption models are alternatives",
            ));
        }
        if self.lambdas.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(err("lambdas must be positive and finite"));
        }
        if let Some(spec) = &self.m_star {
            if spec.trials == 0 {
                return Err(err("m_star.trials must be at least 1"));
            }
            if !(spec.target > 0.0 && spec.target <= 1.0) {
                return Err(err("m_star.target must lie in (0, 1]"));
            }
            if noisy {
                return Err(err("m_star bisection requires deltas = [0]"));
            }
            if masked {
                return Err(err(
                    "m_star bisection replaces the missing axis; set it to [0]",
                ));
            }
        }
        if !(self.success.max_clustering_error.is_finite()
            && self.success.max_clustering_error >= 0.0)
        {
            return Err(err("max_clustering_error must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Points per cell: L * round(kappa * d).
    pub fn points_per_cell(&self, d: usize) -> usize {
        self.num_subspaces * (self.kappa * d as f64).round() as usize
    }

    /// The default lambda policy, natural log.
    pub fn default_lambda(n: usize, total_points: usize) -> f64 {
        2.0 * (n as f64 / (6.0 * (total_points as f64).ln())).sqrt()
    }

    /// Grid cells in axis order: n, d, delta, m, lambda.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.ambient_dims {
            for &d in &self.dims {
                let total = self.points_per_cell(d);
                let lambdas: Vec<(f64, bool)> = if self.lambdas.is_empty() {
                    vec![(Self::default_lambda(n, total), true)]
                } else {
                    self.lambdas.iter().map(|&l| (l, false)).collect()
                };
                for &delta in &self.deltas {
                    for &m in &self.missing {
                        for &(lambda, auto) in &lambdas {
                            out.push(self.cell(n, d, delta, m, lambda, auto));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn cell(
        &self,
        n: usize,
        d: usize,
        delta: f64,
        m: usize,
        lambda: f64,
        auto_lambda: bool,
    ) -> Cell {
        let descriptor = format!(
            "n={n};L={};d={d};kappa={};delta={delta};m={m};lambda={lambda}",
            self.num_subspaces, self.kappa,
        );
        Cell {
            id: fnv1a(descriptor.as_bytes()),
            n,
            num_subspaces: self.num_subspaces,
            d,
            total_points: self.points_per_cell(d),
            kappa: self.kappa,
            delta,
            m,
            lambda,
            auto_lambda,
        }
    }
}

/// One fully resolved grid point. `id` is a hash of the parameter values, so
/// equal parameters get equal ids across runs and differing parameters get
/// (practically) distinct ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub id: u64,
    pub n: usize,
    pub num_subspaces: usize,
    pub d: usize,
    pub total_points: usize,
    pub kappa: f64,
    pub delta: f64,
    pub m: usize,
    pub lambda: f64,
    /// Lambda came from the default policy rather than the config axis.
    pub auto_lambda: bool,
}

impl Cell {
    pub fn id_hex(&self) -> String {
        format!("{:016x}", self.id)
    }
}
