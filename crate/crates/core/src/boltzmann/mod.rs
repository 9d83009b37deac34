//! Target systems, Metropolis data generation, importance weights and the
//! effective-sample-size metrics.

mod mcmc;
mod metrics;

use serde::{Deserialize, Serialize};

pub use mcmc::{mcmc_sample, McmcConfig, McmcRun};
pub use metrics::{
    clip_indices, effective_speedup, ess_clipped, ess_kish, importance_weights, ImportanceWeights, RunSummary, DEFAULT_CLIP_PCT,
};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    LennardJones,
    Gaussian,
    GaussianMixture,
}

/// A target `μ(x) ∝ exp(−β u(x))` over `n` particles in `d` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub beta: f64,
    pub n: usize,
    pub d: usize,
    /// Lennard-Jones minimum distance.
    pub r_m: f64,
    pub epsilon: f64,
    pub tau: f64,
    /// Mixture component means in `R^d`, back to back. Every particle sees
    /// the same mixture.
    pub means: Vec<f64>,
    /// Per-coordinate variance of the Gaussian and of each mixture
    /// component.
    pub variance: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            kind: SystemKind::Gaussian,
            beta: 1.0,
            n: 4,
            d: 2,
            r_m: 1.0,
            epsilon: 1.0,
            tau: 1.0,
            means: Vec::new(),
            variance: 1.0,
        }
    }
}

impl SystemSpec {
    pub fn lennard_jones(n: usize, d: usize) -> Self {
        SystemSpec {
            kind: SystemKind::LennardJones,
            n,
            d,
            ..SystemSpec::default()
        }
    }

    pub fn gaussian(n: usize, d: usize, beta: f64) -> Self {
        SystemSpec { n, d, beta, ..SystemSpec::default() }
    }

    pub fn gaussian_mixture(n: usize, d: usize, means: Vec<f64>, variance: f64) -> Self {
        SystemSpec {
            kind: SystemKind::GaussianMixture,
            n,
            d,
            means,
            variance,
            ..SystemSpec::default()
        }
    }

    pub fn width(&self) -> usize {
        self.n * self.d
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| {
            Err(Error::Config {
                key: format!("system.{key}"),
                reason,
            })
        };
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta", format!("must be positive, got {}", self.beta));
        }
        if self.n == 0 || self.d == 0 {
            return bad("n", "particle count and dimension must be positive".into());
        }
        match self.kind {
            SystemKind::LennardJones => {
                if !(self.r_m > 0.0) {
                    return bad("r_m", format!("must be positive, got {}", self.r_m));
                }
                if !(self.tau > 0.0) {
                    return bad("tau", format!("must be positive, got {}", self.tau));
                }
            }
            SystemKind::Gaussian => {
                if !(self.variance > 0.0) {
                    return bad("variance", format!("must be positive, got {}", self.variance));
                }
            }
            SystemKind::GaussianMixture => {
                if !(self.variance > 0.0) {
                    return bad("variance", format!("must be positive, got {}", self.variance));
                }
                if self.means.is_empty() || self.means.len() % self.d != 0 {
                    return bad("means", format!("need a non-empty list of {}-vectors", self.d));
                }
            }
        }
        Ok(())
    }

    /// Potential energy `u(x)` of one configuration.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width() {
            return Err(Error::ArityMismatch {
                expected: self.width(),
                got: x.len(),
            });
        }
        match self.kind {
            SystemKind::LennardJones => lj_energy(x, self),
            SystemKind::Gaussian => Ok(x.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.variance)),
            SystemKind::GaussianMixture => Ok(mixture_energy(x, self)),
        }
    }

    /// `−β u(x)`.
    pub fn log_target(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.beta * self.energy(x)?)
    }
}

/// `ε/(2τ) Σ_{i≠j} ((r_m/d_ij)¹² − 2(r_m/d_ij)⁶)` over ordered pairs.
pub fn lj_energy(x: &[f64], spec: &SystemSpec) -> Result<f64> {
    let d = spec.d;
    let n = x.len() / d;
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r2: f64 = (0..d).map(|a| (x[i * d + a] - x[j * d + a]).powi(2)).sum();
            if r2 == 0.0 {
                return Err(Error::Singular(i, j));
            }
            let s6 = (spec.r_m * spec.r_m / r2).powi(3);
            // Each unordered pair appears twice in the ordered sum.
            sum += 2.0 * (s6 * s6 - 2.0 * s6);
        }
    }
    Ok(spec.epsilon / (2.0 * spec.tau) * sum)
}

fn mixture_energy(x: &[f64], spec: &SystemSpec) -> f64 {
    let d = spec.d;
    let inv = 1.0 / (2.0 * spec.variance);
    x.chunks(d)
        .map(|p| {
            let e: Vec<f64> = spec
                .means
                .chunks(d)
                .map(|m| -p.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * inv)
                .collect();
            let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            -(top + e.iter().map(|v| (v - top).exp()).sum::<f64>().ln())
        })
        .sum()
}

#[cfg(test)]
mod tests;
