//! Conditional flow matching: linear interpolant targets, minibatch optimal
//! transport pairing, the regression loss and an Adam training loop.

mod ot;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use ot::{hungarian, minibatch_ot_coupling, squared_cost, Coupling};

use crate::autodiff::DetachGroup;
use crate::error::{Error, Result};
use crate::flow::PriorSpec;
use crate::io::{g17, Dataset};
use crate::network::{HompParams, NetworkProgram};

/// `x_t = t·x1 + (1−t)·x0 + σ·ε` and `u_t = x1 − x0` for a batch with one
/// time per sample.
pub fn interpolant_sample<R: Rng + ?Sized>(
    x0: &[f64],
    x1: &[f64],
    t: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise scale must be non-negative, got {sigma}")));
    }
    if x0.len() != x1.len() || t.is_empty() || x0.len() % t.len() != 0 {
        return Err(Error::shape("endpoint batches and times do not line up"));
    }
    let w = x0.len() / t.len();
    let mut xt = Vec::with_capacity(x0.len());
    let mut ut = Vec::with_capacity(x0.len());
    for (i, (&a, &b)) in x0.iter().zip(x1).enumerate() {
        let ti = t[i / w];
        let eps: f64 = if sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        xt.push(ti * b + (1.0 - ti) * a + sigma * eps);
        ut.push(b - a);
    }
    Ok((xt, ut))
}

/// One prepared regression batch.
#[derive(Clone, Debug, PartialEq)]
pub struct CfmBatch {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub t: Vec<f64>,
    pub sigma: f64,
    pub xt: Vec<f64>,
    pub ut: Vec<f64>,
}

impl CfmBatch {
    /// Pairs `x0` with `x1` (optionally by minibatch OT), draws times and
    /// noise, and builds the interpolants.
    pub fn prepare<R: Rng + ?Sized>(
        x0: Vec<f64>,
        x1: Vec<f64>,
        width: usize,
        sigma: f64,
        ot: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let x1 = if ot {
            let c = minibatch_ot_coupling(&x0, &x1, width)?;
            c.perm.iter().flat_map(|&j| x1[j * width..(j + 1) * width].to_vec()).collect()
        } else {
            x1
        };
        let count = x0.len() / width.max(1);
        let t: Vec<f64> = (0..count).map(|_| rng.gen::<f64>()).collect();
        let (xt, ut) = interpolant_sample(&x0, &x1, &t, sigma, rng)?;
        Ok(CfmBatch { x0, x1, t, sigma, xt, ut })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Batch mean of `‖b_θ(x_t, t) − u_t‖²` and its gradient with respect to
/// every weight.
pub fn cfm_loss(params: &HompParams, labels: &[usize], batch: &CfmBatch) -> Result<(f64, Vec<f64>)> {
    let mut prog = NetworkProgram::build(params, &batch.xt, labels, &batch.t)?;
    prog.program_mut().set_detach(DetachGroup::Conditioner, false);
    let count = batch.len() as f64;
    let resid: Vec<f64> = prog.output().iter().zip(&batch.ut).map(|(b, u)| b - u).collect();
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / count;
    if !loss.is_finite() {
        return Err(Error::NonFinite("flow matching loss".into()));
    }
    let cot: Vec<f64> = resid.iter().map(|r| 2.0 * r / count).collect();
    let grad = prog.program().param_vjp(&cot)?;
    Ok((loss, grad))
}

/// Loss only.
pub fn cfm_loss_value(params: &HompParams, labels: &[usize], batch: &CfmBatch) -> Result<f64> {
    let prog = NetworkProgram::build(params, &batch.xt, labels, &batch.t)?;
    let loss = prog
        .output()
        .iter()
        .zip(&batch.ut)
        .map(|(b, u)| (b - u) * (b - u))
        .sum::<f64>()
        / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("flow matching loss".into()));
    }
    Ok(loss)
}

/// Adam with `β = (0.9, 0.999)` and `ε = 1e−8`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(params.len(), grad.len());
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Epochs over which the rate moves linearly from initial to final.
    pub lr_decay_epochs: usize,
    pub sigma: f64,
    pub val_fraction: f64,
    /// Write a numbered checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    pub ot_coupling: bool,
    /// Set from the run seed when loaded from a config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 256,
            lr_initial: 5e-3,
            lr_final: 5e-4,
            lr_decay_epochs: 20,
            sigma: 0.01,
            val_fraction: 0.1,
            checkpoint_every: 0,
            ot_coupling: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: format!("train.{key}"),
                reason: reason.into(),
            })
        };
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        if self.batch_size == 0 || self.batch_size > 512 {
            return bad("batch_size", "must lie in 1..=512");
        }
        if !(self.lr_initial > 0.0 && self.lr_final > 0.0) {
            return bad("lr_initial", "learning rates must be positive");
        }
        if !(self.sigma >= 0.0) {
            return bad("sigma", "must be non-negative");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction", "must lie in [0, 1)");
        }
        Ok(())
    }

    /// Rate for a zero-based epoch: linear from initial to final over the
    /// first `lr_decay_epochs`, then constant.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_decay_epochs {
            return self.lr_final;
        }
        let f = (epoch as f64 / self.lr_decay_epochs as f64).min(1.0);
        self.lr_initial + f * (self.lr_final - self.lr_initial)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
    pub wallclock_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub best: PathBuf,
    pub last: PathBuf,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub loss_csv: PathBuf,
    pub params: HompParams,
}

/// Trains `params` on `data` and writes `best`/`last` checkpoints and
/// `loss.csv` into `out_dir`. Prior draws come from `prior`.
pub fn train(
    config: &TrainConfig,
    data: &Dataset,
    mut params: HompParams,
    prior: &PriorSpec,
    out_dir: &Path,
) -> Result<TrainReport> {
    config.validate()?;
    let arch = params.config().clone();
    if data.n != arch.n_particles || data.d != arch.dim || prior.n != data.n || prior.d != data.d {
        return Err(Error::Data(format!(
            "data is {}×{}, network expects {}×{}",
            data.n, data.d, arch.n_particles, arch.dim
        )));
    }
    if data.is_empty() {
        return Err(Error::Data("training data is empty".into()));
    }
    let labels = data.shared_labels()?;
    let w = data.n * data.d;
    fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((data.len() as f64) * config.val_fraction).floor() as usize;
    let n_val = n_val.min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let gather = |idx: &[usize]| -> Vec<f64> { idx.iter().flat_map(|&i| data.sample(i).to_vec()).collect() };

    // Validation batches are drawn once so epochs are comparable.
    let mut val_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_7a1d);
    let mut val_batches = Vec::new();
    for chunk in val_idx.chunks(config.batch_size) {
        let x1 = gather(chunk);
        let x0 = prior.sample(&mut val_rng, chunk.len());
        val_batches.push(CfmBatch::prepare(x0, x1, w, config.sigma, config.ot_coupling, &mut val_rng)?);
    }

    let mut adam = Adam::new(params.len());
    let mut log = Vec::with_capacity(config.epochs);
    let best_stem = out_dir.join("best");
    let last_stem = out_dir.join("last");
    let mut best: Option<(f64, usize)> = None;
    let start = Instant::now();
    let mut csv = String::from("epoch,train_loss,val_loss,lr,wallclock_s\n");
    let mut train_order = train_idx.to_vec();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        train_order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for chunk in train_order.chunks(config.batch_size) {
            let x1 = gather(chunk);
            let x0 = prior.sample(&mut rng, chunk.len());
            let batch = CfmBatch::prepare(x0, x1, w, config.sigma, config.ot_coupling, &mut rng)?;
            let (loss, grad) = cfm_loss(&params, &labels, &batch)?;
            let mut values = params.values().to_vec();
            adam.update(&mut values, &grad, lr);
            params.set_values(&values)?;
            total += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = total / seen as f64;
        let val_loss = if val_batches.is_empty() {
            None
        } else {
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for b in &val_batches {
                acc += cfm_loss_value(&params, &labels, b)? * b.len() as f64;
                cnt += b.len();
            }
            Some(acc / cnt as f64)
        };
        let score = val_loss.unwrap_or(train_loss);
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, epoch));
            params.save(&best_stem)?;
        }
        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
            params.save(&out_dir.join(format!("epoch_{:04}", epoch + 1)))?;
        }
        let entry = EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
            wallclock_s: start.elapsed().as_secs_f64(),
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            entry.epoch,
            g17(entry.train_loss),
            entry.val_loss.map(g17).unwrap_or_default(),
            g17(entry.lr),
            g17(entry.wallclock_s)
        );
        log.push(entry);
    }
    let last = params.save(&last_stem)?;
    let loss_csv = out_dir.join("loss.csv");
    fs::write(&loss_csv, csv)?;
    let (_, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainReport {
        best: best_stem.with_extension("json"),
        last,
        best_epoch,
        log,
        loss_csv,
        params,
    })
}

#[cfg(test)]
mod tests;
