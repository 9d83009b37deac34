use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::bench::SweepConfig;
use crate::boltzmann::{McmcConfig, SystemSpec};
use crate::error::{Error, Result};
use crate::flow::DivergenceMode;
use crate::network::ArchConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub count: usize,
    /// RK4 steps over `t ∈ [0, 1]`.
    pub steps: usize,
    pub divergence: DivergenceMode,
    pub batch: usize,
    /// Particle labels; empty means all zero.
    pub labels: Vec<usize>,
    /// Mean-free prior; defaults to `arch.pd`.
    pub mean_free: Option<bool>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            count: 1000,
            steps: 20,
            divergence: DivergenceMode::Hollow,
            batch: 64,
            labels: Vec::new(),
            mean_free: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub clip_pct: f64,
    /// Metrics JSON of a baseline run; enables the effective speed-up.
    pub baseline_metrics: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            clip_pct: crate::boltzmann::DEFAULT_CLIP_PCT,
            baseline_metrics: None,
        }
    }
}

/// Everything one invocation needs. Sub-seeds are derived from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub arch: ArchConfig,
    pub mcmc: McmcConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
    pub bench: SweepConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemSpec::default(),
            arch: ArchConfig::default(),
            mcmc: McmcConfig::default(),
            train: TrainConfig::default(),
            sample: SampleConfig::default(),
            eval: EvalConfig::default(),
            bench: SweepConfig::default(),
            seed: 0,
            out: PathBuf::from("runs/default"),
        }
    }
}

fn config_err(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Overlays `top` on `base`. Objects carrying different `kind` tags are
/// replaced rather than merged.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            let retag = matches!((b.get("kind"), t.get("kind")), (Some(x), Some(y)) if x != y);
            if retag {
                *b = t;
                return;
            }
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Applies one `dotted.key=value` override. The value is read as JSON when
/// it parses, as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(spec, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(config_err(spec, "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_err(parts[..i].join("."), "not an object"))?;
        if i + 1 == parts.len() {
            match obj.get_mut(*part) {
                Some(slot) => merge(slot, value),
                None => {
                    obj.insert(part.to_string(), value);
                }
            }
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

impl RunConfig {
    /// Defaults, then the file, then `--set` overrides; validated.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| config_err("--config", format!("{}: {e}", p.display())))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| config_err("--config", e.to_string()))?;
            if !file.is_object() {
                return Err(config_err("--config", "top level must be a JSON object"));
            }
            merge(&mut value, file);
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg = Self::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            config_err(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })
    }

    /// Copies the run seed into every component that draws random numbers.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.mcmc.seed = seed;
        self.train.seed = seed;
        self.bench.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.arch.validate()?;
        self.mcmc.validate()?;
        self.train.validate()?;
        if self.arch.n_particles != self.system.n {
            return Err(config_err(
                "arch.n_particles",
                format!("network has {} particles, system has {}", self.arch.n_particles, self.system.n),
            ));
        }
        if self.arch.dim != self.system.d {
            return Err(config_err(
                "arch.dim",
                format!("network works in {} dimensions, system in {}", self.arch.dim, self.system.d),
            ));
        }
        let s = &self.sample;
        if s.count == 0 {
            return Err(config_err("sample.count", "must be positive"));
        }
        if s.steps == 0 {
            return Err(config_err("sample.steps", "must be positive"));
        }
        if s.batch == 0 {
            return Err(config_err("sample.batch", "must be positive"));
        }
        if !s.labels.is_empty() && s.labels.len() != self.arch.n_particles {
            return Err(config_err("sample.labels", "need one label per particle"));
        }
        if s.labels.iter().any(|&z| z >= self.arch.num_types) {
            return Err(config_err("sample.labels", "label exceeds arch.num_types"));
        }
        if s.mean_free == Some(true) && self.arch.n_particles < 2 {
            return Err(config_err("sample.mean_free", "needs at least two particles"));
        }
        if !(0.0..50.0).contains(&self.eval.clip_pct) {
            return Err(config_err("eval.clip_pct", "must lie in [0, 50)"));
        }
        let b = &self.bench;
        if b.ns.is_empty() || b.ns.iter().any(|&n| n <= b.k) {
            return Err(config_err("bench.ns", "need a non-empty list of sizes above bench.k"));
        }
        if b.repeats < 3 {
            return Err(config_err("bench.repeats", "must be at least 3"));
        }
        if b.samples == 0 || b.d == 0 || b.n_hidden == 0 || b.steps == 0 {
            return Err(config_err("bench", "sizes must be positive"));
        }
        Ok(())
    }

    pub fn mean_free_prior(&self) -> bool {
        self.sample.mean_free.unwrap_or(self.arch.pd)
    }

    pub fn labels(&self) -> Vec<usize> {
        if self.sample.labels.is_empty() {
            vec![0; self.arch.n_particles]
        } else {
            self.sample.labels.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
