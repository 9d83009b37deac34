use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which network family produces the vector field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Message passing on the non-backtracking line graph.
    Hollow,
    /// Ordinary message passing on the particle graph.
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Plain,
    /// Unnormalized attention: `a(h_ij, h_ki) · φ̃(h_ij)`.
    Attention,
    /// Attention weights normalized over each line-graph neighbourhood.
    AttentionSoftmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphMode {
    Knn { k: usize },
    MultiHead { heads: usize, overlap: usize },
    Full,
}

/// Architecture hyperparameters. Stored verbatim in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub model: ModelKind,
    pub n_particles: usize,
    pub dim: usize,
    pub n_hidden: usize,
    /// Message-passing steps (`T^lg` for the hollow model).
    pub steps: usize,
    /// Work on pairwise differences (translation invariant).
    pub pd: bool,
    pub message: MessageKind,
    pub graph: GraphMode,
    /// Append a per-particle one-hot index to every embedding.
    pub unique_embedding: bool,
    /// When false, raw coordinates enter the scalar channel and the readout
    /// gains a linear `d`-output, trading rotation equivariance for capacity.
    pub equivariant: bool,
    pub n_rbf: usize,
    pub cutoff: f64,
    pub num_types: usize,
    /// Line-graph pruning; only disabled for diagnostics.
    pub prune: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            model: ModelKind::Hollow,
            n_particles: 4,
            dim: 2,
            n_hidden: 16,
            steps: 2,
            pd: true,
            message: MessageKind::Plain,
            graph: GraphMode::Knn { k: 3 },
            unique_embedding: false,
            equivariant: true,
            n_rbf: 8,
            cutoff: 5.0,
            num_types: 1,
            prune: true,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::Config { key: format!("arch.{key}"), reason });
        if self.n_particles == 0 {
            return bad("n_particles", "must be at least 1".into());
        }
        if !(2..=3).contains(&self.dim) {
            return bad("dim", format!("must be 2 or 3, got {}", self.dim));
        }
        if self.n_hidden == 0 {
            return bad("n_hidden", "must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps", "at least one message-passing step is required".into());
        }
        if self.n_rbf == 0 {
            return bad("n_rbf", "must be positive".into());
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return bad("cutoff", "must be positive and finite".into());
        }
        if self.num_types == 0 {
            return bad("num_types", "must be positive".into());
        }
        match self.graph {
            GraphMode::Knn { k } if self.n_particles > 1 && (k == 0 || k >= self.n_particles) => {
                bad("graph.k", format!("k={k} must lie in 1..={}", self.n_particles - 1))
            }
            GraphMode::MultiHead { heads, overlap } if heads == 0 || overlap >= heads => bad(
                "graph.heads",
                format!("need heads ≥ 1 and overlap < heads, got {heads}/{overlap}"),
            ),
            _ => Ok(()),
        }
    }

    pub(crate) fn embed_width(&self) -> usize {
        self.n_rbf
            + self.num_types
            + if self.unique_embedding { self.n_particles } else { 0 }
            + if self.equivariant { 0 } else { self.dim }
    }
}
