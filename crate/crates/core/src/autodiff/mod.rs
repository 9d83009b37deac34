//! Minimal reverse-mode automatic differentiation over row-major real
//! matrices.
//!
//! Programs are recorded on a [`Tape`], frozen into an [`AdjointProgram`],
//! evaluated with [`AdjointProgram::forward_eval`] and differentiated with
//! vector-Jacobian products. Stop-gradient markers ([`DetachGroup`]) can be
//! toggled after recording; this is how the block-diagonal part of a hollow
//! network's Jacobian is isolated.

mod fd;
mod kernels;
mod probes;
mod program;
mod tape;

pub use fd::{full_jacobian_fd, DenseMatrix};
pub use probes::{jacobian_diagonal, jacobian_diagonal_brute, jacobian_reverse, ProbeVectorSet};
pub use program::{AdjointProgram, Counters};
pub use tape::{DetachGroup, Tape, Var};
