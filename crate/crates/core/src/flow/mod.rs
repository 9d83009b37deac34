//! Continuous normalizing flow: fixed-step RK4 transport of samples and of
//! their log-density, with the divergence from hollow probes, brute-force
//! reverse passes or finite differences.

mod field;
mod integrate;
mod prior;

pub use field::{
    fd_divergence, program_divergence, DivergenceMode, FieldEval, LinearField, NetworkField, VectorField, FD_STEP,
};
pub use integrate::{rk4_integrate, sample_with_likelihood, Direction, FlowState, WeightedSamples};
pub use prior::{remove_mean, PriorSpec};
