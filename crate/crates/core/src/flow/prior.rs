use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard normal base distribution over `n × d`, optionally restricted
/// to configurations with zero centre of mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub n: usize,
    pub d: usize,
    pub mean_free: bool,
}

impl PriorSpec {
    pub fn new(n: usize, d: usize, mean_free: bool) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("prior needs n ≥ 1 and d ≥ 1"));
        }
        if mean_free && n == 1 {
            return Err(Error::invalid("a mean-free prior needs at least two particles"));
        }
        Ok(PriorSpec { n, d, mean_free })
    }

    pub fn width(&self) -> usize {
        self.n * self.d
    }

    /// Dimension of the support.
    pub fn support_dim(&self) -> usize {
        if self.mean_free {
            (self.n - 1) * self.d
        } else {
            self.n * self.d
        }
    }

    /// `count` samples back to back.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let w = self.width();
        let mut x: Vec<f64> = (0..count * w).map(|_| rng.sample(StandardNormal)).collect();
        if self.mean_free {
            for s in x.chunks_mut(w) {
                remove_mean(s, self.d);
            }
        }
        x
    }

    /// Log-density of one configuration. In mean-free mode this is the
    /// density on the zero-mean subspace and assumes `x` lies on it.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        -0.5 * sq - 0.5 * self.support_dim() as f64 * (2.0 * PI).ln()
    }

    pub fn log_density_batch(&self, x: &[f64]) -> Vec<f64> {
        x.chunks(self.width()).map(|s| self.log_density(s)).collect()
    }
}

/// Subtracts the per-axis mean over particles.
pub fn remove_mean(x: &mut [f64], d: usize) {
    let n = x.len() / d;
    for a in 0..d {
        let mean = (0..n).map(|p| x[p * d + a]).sum::<f64>() / n as f64;
        for p in 0..n {
            x[p * d + a] -= mean;
        }
    }
}
