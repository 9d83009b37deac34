//! Graph construction: kNN graphs, non-backtracking line graphs, the
//! backtracking array that drives pruning, and multi-head scale-separated
//! edge partitions.

mod backtrack;
mod digraph;
mod line_graph;
mod multihead;

pub use backtrack::{connectivity_profile, init_backtracking, prune_and_update, BacktrackArray, StepCount};
pub(crate) use backtrack::propagate as propagate_unpruned;
pub use digraph::{build_knn_graph, fully_connected, DirectedGraph};
pub use line_graph::{LineGraph, Triple};
pub use multihead::{partition_multihead, HeadPartition};

pub(crate) fn distance(positions: &[f64], d: usize, i: usize, j: usize) -> f64 {
    let a = &positions[i * d..(i + 1) * d];
    let b = &positions[j * d..(j + 1) * d];
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
