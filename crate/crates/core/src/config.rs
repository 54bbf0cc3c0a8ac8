//! Run configuration shared by every stage; serialized next to each report.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Uniform probe lattice over `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Samples on the real axis over `[x_min, x_max]`.
    pub boundary_samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -1.0,
            x_max: 2.0,
            y_min: 1.0 / 64.0,
            y_max: 2.0,
            nx: 24,
            ny: 16,
            boundary_samples: 241,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Deepest dyadic generation examined by exhaustive checks.
    pub max_generation: u32,
    /// Number of grid offsets `m/N_t` averaged by the smooth interpolant.
    pub t_samples: u32,
    pub seed: u64,
    pub tol_eig: f64,
    pub barycenter_tol: f64,
    pub barycenter_max_iter: usize,
    pub boundary_tol: f64,
    pub residual_budget: f64,
    pub node_tol: f64,
    /// Proximity threshold for the two-colouring, half-plane normalization.
    pub separation_floor: f64,
    /// `M` used when fitting density exponents.
    pub density_m: f64,
    /// Largest fitted exponent accepted by the density verdict.
    pub alpha_max: f64,
    /// Number of exponents tried by the covering builder.
    pub gamma_schedule_len: usize,
    pub c_pack_ceiling: f64,
    pub c_chain_ceiling: f64,
    /// Separation of the thinned centers, half-plane normalization; must exceed 5.
    pub thin_separation: f64,
    /// Radius of exact constancy around each node, half-plane normalization.
    pub node_patch_radius: f64,
    /// Finite-difference step relative to `Im z`.
    pub fd_step: f64,
    pub grid: GridSpec,
    /// Random pairs sampled for the Lipschitz ratio of the smooth interpolant.
    pub lipschitz_pairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_generation: 12,
            t_samples: 64,
            seed: 0,
            tol_eig: 1e-9,
            barycenter_tol: 1e-10,
            barycenter_max_iter: 10_000,
            boundary_tol: 1e-3,
            residual_budget: 1e-2,
            node_tol: 1e-10,
            separation_floor: 0.2,
            density_m: 4.0,
            alpha_max: 0.7,
            gamma_schedule_len: 6,
            c_pack_ceiling: 64.0,
            c_chain_ceiling: 16.0,
            thin_separation: 5.5,
            node_patch_radius: 0.1,
            fd_step: (-14f64).exp2(),
            grid: GridSpec::default(),
            lipschitz_pairs: 1000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_eig", self.tol_eig),
            ("barycenter_tol", self.barycenter_tol),
            ("boundary_tol", self.boundary_tol),
            ("residual_budget", self.residual_budget),
            ("node_tol", self.node_tol),
            ("separation_floor", self.separation_floor),
            ("density_m", self.density_m),
            ("alpha_max", self.alpha_max),
            ("c_pack_ceiling", self.c_pack_ceiling),
            ("c_chain_ceiling", self.c_chain_ceiling),
            ("node_patch_radius", self.node_patch_radius),
            ("fd_step", self.fd_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Schema(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_generation == 0 || self.max_generation > 30 {
            return Err(Error::Schema("max_generation must lie in 1..=30".into()));
        }
        if self.t_samples == 0 || !self.t_samples.is_power_of_two() || self.t_samples > 1 << 16 {
            return Err(Error::Schema("t_samples must be a power of two ≤ 65536".into()));
        }
        if !(self.thin_separation > 5.0) {
            return Err(Error::Schema("thin_separation must exceed 5".into()));
        }
        if self.barycenter_max_iter == 0 || self.gamma_schedule_len == 0 {
            return Err(Error::Schema("iteration counts must be positive".into()));
        }
        let g = &self.grid;
        if !(g.x_min < g.x_max && 0.0 < g.y_min && g.y_min < g.y_max)
            || g.nx < 2
            || g.ny < 2
            || g.boundary_samples < 2
        {
            return Err(Error::Schema("grid spec is degenerate".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    /// Offset resolution `log₂ N_t`.
    pub fn offset_bits(&self) -> u32 {
        self.t_samples.trailing_zeros()
    }
}
