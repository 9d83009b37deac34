use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SystemSpec;
use crate::error::{Error, Result};
use crate::flow::remove_mean;
use crate::io::Dataset;

/// Single-particle Metropolis random walk settings. One sweep proposes a
/// Gaussian move for every particle in turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Recorded configurations.
    pub samples: usize,
    pub burn_in: usize,
    /// Sweeps between recorded states.
    pub thin: usize,
    pub step_size: f64,
    /// Sweeps per acceptance check.
    pub window: usize,
    /// Subtract the centre of mass from every recorded state.
    pub center: bool,
    /// Set from the run seed when loaded from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            samples: 10_000,
            burn_in: 1_000,
            thin: 10,
            step_size: 0.3,
            window: 100,
            center: false,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: format!("mcmc.{key}"),
                reason: reason.into(),
            })
        };
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size", "must be positive");
        }
        if self.samples == 0 {
            return bad("samples", "must be positive");
        }
        if self.thin == 0 {
            return bad("thin", "must be positive");
        }
        if self.window == 0 {
            return bad("window", "must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct McmcRun {
    pub data: Dataset,
    pub acceptance_rate: f64,
    pub proposals: usize,
    pub accepted: usize,
}

/// Lattice start with spacing `r_m` for Lennard-Jones, the origin
/// otherwise.
fn initial_state(spec: &SystemSpec) -> Vec<f64> {
    match spec.kind {
        super::SystemKind::LennardJones => {
            let side = (1..).find(|s: &usize| s.pow(spec.d as u32) >= spec.n).unwrap_or(1);
            let mut x = Vec::with_capacity(spec.width());
            for i in 0..spec.n {
                let mut rem = i;
                for _ in 0..spec.d {
                    x.push((rem % side) as f64 * spec.r_m);
                    rem /= side;
                }
            }
            x
        }
        _ => vec![0.0; spec.width()],
    }
}

fn log_target(spec: &SystemSpec, x: &[f64]) -> f64 {
    match spec.log_target(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::NEG_INFINITY,
    }
}

/// Runs the chain and returns the recorded states as an unlabeled dataset.
pub fn mcmc_sample(spec: &SystemSpec, cfg: &McmcConfig) -> Result<McmcRun> {
    spec.validate()?;
    cfg.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = initial_state(spec);
    let mut lp = log_target(spec, &x);
    if !lp.is_finite() {
        return Err(Error::NonFinite("initial MCMC state".into()));
    }
    let total = cfg.burn_in + cfg.samples * cfg.thin;
    let mut out = Vec::with_capacity(cfg.samples * spec.width());
    let (mut proposals, mut accepted, mut window_acc) = (0usize, 0usize, 0usize);
    let mut prop = x.clone();
    for sweep in 1..=total {
        for i in 0..n {
            prop.copy_from_slice(&x);
            for a in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                prop[i * d + a] += cfg.step_size * z;
            }
            let lq = log_target(spec, &prop);
            let u: f64 = rng.gen();
            proposals += 1;
            if lq.is_finite() && u.ln() < lq - lp {
                std::mem::swap(&mut x, &mut prop);
                lp = lq;
                accepted += 1;
                window_acc += 1;
            }
        }
        if sweep % cfg.window == 0 {
            if window_acc == 0 {
                return Err(Error::NoAcceptance { sweep, window: cfg.window });
            }
            window_acc = 0;
        }
        if sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0 {
            let start = out.len();
            out.extend_from_slice(&x);
            if cfg.center {
                remove_mean(&mut out[start..], d);
            }
        }
    }
    let data = Dataset::new(n, d, out, vec![0; n * cfg.samples])?;
    Ok(McmcRun {
        data,
        acceptance_rate: accepted as f64 / proposals as f64,
        proposals,
        accepted,
    })
}
