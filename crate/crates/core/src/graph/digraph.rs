use std::collections::BTreeSet;

use super::distance;
use crate::error::{Error, Result};

/// A directed graph without self-loops. Edges are kept sorted by `(i, j)`;
/// an edge's position in that order is its id.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    k: Option<usize>,
}

impl DirectedGraph {
    /// Builds a graph from an edge list; duplicates are merged.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, k: Option<usize>) -> Result<Self> {
        let set: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(i, j) in &set {
            if i == j {
                return Err(Error::invalid(format!("self-loop ({i},{i}) is not allowed")));
            }
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i},{j}) out of range for n={n}")));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (id, &(i, j)) in edges.iter().enumerate() {
            out_edges[i].push(id);
            in_edges[j].push(id);
        }
        Ok(DirectedGraph {
            n,
            edges,
            out_edges,
            in_edges,
            k,
        })
    }

    /// Adds the reverse of every edge.
    pub fn symmetrized(&self) -> Self {
        let edges = self.edges.iter().flat_map(|&(i, j)| [(i, j), (j, i)]);
        DirectedGraph::from_edges(self.n, edges, self.k).expect("reversing valid edges stays valid")
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    /// Ids of edges leaving `i`.
    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.out_edges[i]
    }

    /// Ids of edges entering `j`; their sources form `𝒩(j)`.
    pub fn in_edges(&self, j: usize) -> &[usize] {
        &self.in_edges[j]
    }

    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&(i, j)).ok()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edge_id(i, j).is_some()
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(i, j)| self.contains(j, i))
    }
}

/// Every ordered pair of distinct nodes.
pub fn fully_connected(n: usize) -> DirectedGraph {
    let edges = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
    DirectedGraph::from_edges(n, edges, None).expect("complete graph is valid")
}

/// Symmetrized k-nearest-neighbour graph. Each node receives edges from its
/// `k` nearest neighbours; distance ties go to the smaller node index.
pub fn build_knn_graph(positions: &[f64], d: usize, k: usize) -> Result<DirectedGraph> {
    if d == 0 || positions.len() % d != 0 {
        return Err(Error::shape(format!("{} coordinates do not split into d={d}", positions.len())));
    }
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kNN positions".into()));
    }
    let n = positions.len() / d;
    if k == 0 || k + 1 > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut edges = Vec::with_capacity(2 * n * k);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    for j in 0..n {
        candidates.clear();
        candidates.extend((0..n).filter(|&i| i != j).map(|i| (distance(positions, d, i, j), i)));
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in &candidates[..k] {
            edges.push((i, j));
            edges.push((j, i));
        }
    }
    DirectedGraph::from_edges(n, edges, Some(k))
}
