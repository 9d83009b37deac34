pub mod autodiff;
pub mod bench;
pub mod boltzmann;
pub mod cli;
pub mod graph;
pub mod io;
pub mod flow;
pub mod network;
pub mod train;
pub mod error;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/autodiff.md")]
    pub struct Autodiff;
    #[doc = include_str!("../../../book/src/line_graphs.md")]
    pub struct LineGraphs;
    #[doc = include_str!("../../../book/src/network.md")]
    pub struct Network;
    #[doc = include_str!("../../../book/src/flows.md")]
    pub struct Flows;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/boltzmann.md")]
    pub struct Boltzmann;
    #[doc = include_str!("../../../book/src/bench.md")]
    pub struct Bench;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
