use serde::{Deserialize, Serialize};

use crate::rng::{mix, splitmix64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    None,
    /// `ζ(x) = σ(2u − 1)` with `u ∈ [0, 1)` hashed from the bits of `x`.
    UniformHash,
}

/// Bounded, deterministic pseudo-noise: `|ζ(x)| ≤ σ` and `ζ` is a function of `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            mode: NoiseMode::None,
            seed: 0,
        }
    }

    pub fn uniform_hash(sigma: f64, seed: u64) -> Self {
        Self {
            sigma,
            mode: NoiseMode::UniformHash,
            seed,
        }
    }

    pub fn sample(&self, x: &[f64]) -> f64 {
        match self.mode {
            NoiseMode::None => 0.0,
            NoiseMode::UniformHash => {
                if self.sigma == 0.0 {
                    return 0.0;
                }
                let h = x
                    .iter()
                    .fold(splitmix64(self.seed), |h, v| mix(h, v.to_bits()));
                let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                self.sigma * (2.0 * u - 1.0)
            }
        }
    }
}
