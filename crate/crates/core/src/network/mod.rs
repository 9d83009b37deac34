//! The vector field `b_θ(x, t)`: a two-channel (scalar and vector) message
//! passing network that runs either on the non-backtracking line graph
//! (hollow model) or directly on the particle graph (baseline).
//!
//! Scalars are built from distances and inner products; vectors only mix by
//! per-channel gating and addition, so rotating the input rotates the
//! output. In the hollow model the readout detaches the line-graph features
//! and the source positions under
//! [`DetachGroup::Conditioner`](crate::autodiff::DetachGroup::Conditioner), leaving a block-diagonal Jacobian.

mod build;
mod config;
mod params;

pub use build::{
    baseline_forward, embed, homp_forward, particle_graphs, HeadTrace, LineRow, NetworkProgram, ParticleConfiguration,
};
pub use config::{ArchConfig, GraphMode, MessageKind, ModelKind};
pub use params::{HompParams, ParamBlock};
