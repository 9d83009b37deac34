use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ArchConfig;
use crate::error::{Error, Result};

pub(crate) const TIME_FEATURES: usize = 2;

/// One named weight array inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All learnable weights plus the architecture they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct HompParams {
    config: ArchConfig,
    blocks: Vec<ParamBlock>,
    values: Vec<f64>,
    seed: Option<u64>,
}

fn layout(c: &ArchConfig) -> Vec<(String, usize, usize)> {
    let h = c.n_hidden;
    let mut out = Vec::new();
    let mut dense = |prefix: &str, i: usize, o: usize| {
        out.push((format!("{prefix}.w"), i, o));
        out.push((format!("{prefix}.b"), 1, o));
    };
    dense("embed.l1", c.embed_width(), h);
    dense("embed.l2", h, h);
    dense("embed.gate", h, h);
    dense("init_msg.l1", h, h);
    dense("init_msg.l2", h, h);
    dense("init_msg.gate", h, h);
    dense("init_upd.l1", h, h);
    dense("init_upd.l2", h, h);
    dense("init_upd.gate", h, h);
    dense("msg.l1", 3 * h + TIME_FEATURES, h);
    dense("msg.l2", h, 3 * h);
    dense("upd.l1", 2 * h, h);
    dense("upd.l2", h, 2 * h);
    dense("attn.l1", 2 * h + TIME_FEATURES, h);
    dense("attn.l2", h, 1);
    dense("attn_value.l1", h, h);
    dense("attn_value.l2", h, 2 * h);
    dense("attn_proj.scalar", h, h);
    dense("attn_proj.gate", h, h);
    dense("readout.l1", 2 * h, h);
    dense("readout.l2", h, 2 * h);
    if !c.equivariant {
        dense("readout.direct", h, c.dim);
    }
    out
}

impl HompParams {
    /// All weights zero.
    pub fn zeros(config: ArchConfig) -> Result<Self> {
        config.validate()?;
        let mut offset = 0;
        let blocks: Vec<ParamBlock> = layout(&config)
            .into_iter()
            .map(|(name, rows, cols)| {
                let b = ParamBlock { name, rows, cols, offset };
                offset += rows * cols;
                b
            })
            .collect();
        Ok(HompParams {
            config,
            blocks,
            values: vec![0.0; offset],
            seed: None,
        })
    }

    /// Weights drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn init(config: ArchConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in &p.blocks {
            if b.name.ends_with(".w") {
                let normal = Normal::new(0.0, (1.0 / b.rows as f64).sqrt()).expect("positive std");
                for v in &mut p.values[b.offset..b.offset + b.len()] {
                    *v = normal.sample(&mut rng);
                }
            }
        }
        p.seed = Some(seed);
        Ok(p)
    }

    /// Weights and biases all drawn from `N(0, scale²)`, used to probe
    /// structural properties with generic values.
    pub fn random(config: ArchConfig, seed: u64, scale: f64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
        for b in &p.blocks {
            let s = if b.name.ends_with(".w") { (1.0 / b.rows as f64).sqrt() } else { 1.0 };
            for v in &mut p.values[b.offset..b.offset + b.len()] {
                *v = s * normal.sample(&mut rng);
            }
        }
        p.seed = Some(seed);
        Ok(p)
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn block_info(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.block_info(name).map(|b| &self.values[b.offset..b.offset + b.len()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let b = self.block_info(name)?.clone();
        Some(&mut self.values[b.offset..b.offset + b.len()])
    }

    /// Replaces every weight; the length must match.
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::ArityMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter update".into()));
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    /// Writes `<stem>.json` (manifest) and `<stem>.bin` (little-endian f64
    /// weights in manifest order) and returns the manifest path.
    pub fn save(&self, stem: &Path) -> Result<std::path::PathBuf> {
        let manifest = Manifest {
            format: FORMAT.into(),
            config: self.config.clone(),
            seed: self.seed,
            blocks: self.blocks.clone(),
            total: self.values.len(),
            weights: stem
                .with_extension("bin")
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        let json_path = stem.with_extension("json");
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(stem.with_extension("bin"), bytes)?;
        fs::write(&json_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(json_path)
    }

    /// Loads a checkpoint given its manifest path.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path)?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format != FORMAT {
            return Err(Error::Data(format!("unknown checkpoint format `{}`", m.format)));
        }
        let mut p = HompParams::zeros(m.config)?;
        if p.blocks != m.blocks || p.values.len() != m.total {
            return Err(Error::Data("checkpoint layout does not match its architecture".into()));
        }
        let bin = manifest_path.with_file_name(&m.weights);
        let bytes = fs::read(&bin)?;
        if bytes.len() != 8 * m.total {
            return Err(Error::Data(format!(
                "{} holds {} bytes, expected {}",
                bin.display(),
                bytes.len(),
                8 * m.total
            )));
        }
        for (v, chunk) in p.values.iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        }
        if p.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("checkpoint weights".into()));
        }
        p.seed = m.seed;
        Ok(p)
    }
}

const FORMAT: &str = "hollowflow-checkpoint-v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    config: ArchConfig,
    seed: Option<u64>,
    blocks: Vec<ParamBlock>,
    total: usize,
    weights: String,
}
