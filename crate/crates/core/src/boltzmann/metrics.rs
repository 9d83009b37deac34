use serde::{Deserialize, Serialize};

use super::SystemSpec;
use crate::error::{Error, Result};
use crate::flow::WeightedSamples;

/// Percentile removed on each side by default.
pub const DEFAULT_CLIP_PCT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceWeights {
    /// Finite log weights of the retained samples.
    pub log_w: Vec<f64>,
    /// Sample index of each retained weight.
    pub kept: Vec<usize>,
    /// Samples whose energy or model density was not finite.
    pub rejected: Vec<usize>,
}

impl ImportanceWeights {
    pub fn n_rejected(&self) -> usize {
        self.rejected.len()
    }
}

/// `log w_i = −β u(x_i) − log ρ₁(x_i)`, unnormalized. Samples with a
/// singular or non-finite energy are excluded and counted; their entry in
/// `samples.log_w` is `−∞`.
pub fn importance_weights(samples: &mut WeightedSamples, spec: &SystemSpec) -> Result<ImportanceWeights> {
    if samples.n != spec.n || samples.d != spec.d {
        return Err(Error::shape(format!(
            "samples are {}×{}, system is {}×{}",
            samples.n, samples.d, spec.n, spec.d
        )));
    }
    let mut out = ImportanceWeights {
        log_w: Vec::with_capacity(samples.len()),
        kept: Vec::with_capacity(samples.len()),
        rejected: Vec::new(),
    };
    let mut full = Vec::with_capacity(samples.len());
    for i in 0..samples.len() {
        let lw = match spec.energy(samples.sample(i)) {
            Ok(u) => -spec.beta * u - samples.log_rho1[i],
            Err(Error::Singular(..)) => f64::NAN,
            Err(e) => return Err(e),
        };
        if lw.is_finite() {
            out.log_w.push(lw);
            out.kept.push(i);
            full.push(lw);
        } else {
            out.rejected.push(i);
            full.push(f64::NEG_INFINITY);
        }
    }
    samples.log_w = full;
    Ok(out)
}

/// Kish effective sample size `(Σw)² / (N Σw²)` as a fraction of `N`.
/// Entries of `−∞` count as zero weights.
pub fn ess_kish(log_w: &[f64]) -> Result<f64> {
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("log weights".into()));
    }
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::invalid("no sample carries positive weight"));
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &v in log_w {
        let w = (v - top).exp();
        s1 += w;
        s2 += w * w;
    }
    Ok(s1 * s1 / (log_w.len() as f64 * s2))
}

/// Indices kept after dropping the `⌊N·pct/100⌋` lowest and highest log
/// weights (ranked by value, ties by index), in their original order.
pub fn clip_indices(log_w: &[f64], pct: f64) -> Result<Vec<usize>> {
    if !(0.0..50.0).contains(&pct) {
        return Err(Error::invalid(format!("clip percentile must lie in [0, 50), got {pct}")));
    }
    if log_w.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("log weights".into()));
    }
    let cut = (log_w.len() as f64 * pct / 100.0).floor() as usize;
    if 2 * cut >= log_w.len() {
        return Err(Error::invalid("no weights left after clipping"));
    }
    let mut order: Vec<usize> = (0..log_w.len()).collect();
    order.sort_by(|&a, &b| log_w[a].total_cmp(&log_w[b]).then(a.cmp(&b)));
    let mut keep = vec![true; log_w.len()];
    for &i in order[..cut].iter().chain(&order[log_w.len() - cut..]) {
        keep[i] = false;
    }
    Ok((0..log_w.len()).filter(|&i| keep[i]).collect())
}

/// [`ess_kish`] over the weights retained by [`clip_indices`].
pub fn ess_clipped(log_w: &[f64], pct: f64) -> Result<f64> {
    let kept: Vec<f64> = clip_indices(log_w, pct)?.into_iter().map(|i| log_w[i]).collect();
    ess_kish(&kept)
}

/// What the effective speed-up needs from one sampling run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ess: f64,
    pub n_samples: usize,
    pub rt_s: f64,
    /// Hardware usage factor; 1 on a single CPU.
    pub usage: f64,
}

impl RunSummary {
    pub fn new(ess: f64, n_samples: usize, rt_s: f64) -> Self {
        RunSummary { ess, n_samples, rt_s, usage: 1.0 }
    }

    /// Effective samples per unit of compute.
    pub fn relative_ess(&self) -> Result<f64> {
        if !(self.rt_s > 0.0) || !(self.usage > 0.0) {
            return Err(Error::invalid("runtime and usage factor must be positive"));
        }
        Ok(self.ess * self.n_samples as f64 / (self.rt_s * self.usage))
    }
}

pub fn effective_speedup(run: &RunSummary, baseline: &RunSummary) -> Result<f64> {
    let base = baseline.relative_ess()?;
    if base == 0.0 {
        return Err(Error::invalid("baseline has no effective samples"));
    }
    Ok(run.relative_ess()? / base)
}
