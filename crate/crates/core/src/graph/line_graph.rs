use super::DirectedGraph;

/// A line-graph edge `(i, j, k)`: information flows from line node `(i, j)`
/// to line node `(j, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triple {
    pub nodes: (usize, usize, usize),
    /// Line-node id of `(i, j)`.
    pub src: usize,
    /// Line-node id of `(j, k)`.
    pub dst: usize,
}

/// The non-backtracking line graph of a [`DirectedGraph`].
///
/// Line-node ids coincide with edge ids of the underlying graph. Pruning
/// clears entries of the active mask; triples are never rebuilt.
#[derive(Clone, Debug)]
pub struct LineGraph {
    graph: DirectedGraph,
    triples: Vec<Triple>,
    incoming: Vec<Vec<usize>>,
    active: Vec<bool>,
}

impl LineGraph {
    pub fn new(graph: &DirectedGraph) -> Self {
        let mut triples = Vec::new();
        for (src, &(i, j)) in graph.edges().iter().enumerate() {
            for &dst in graph.out_edges(j) {
                let (_, k) = graph.edge(dst);
                if k != i {
                    triples.push(Triple {
                        nodes: (i, j, k),
                        src,
                        dst,
                    });
                }
            }
        }
        let mut incoming = vec![Vec::new(); graph.edge_count()];
        for (id, t) in triples.iter().enumerate() {
            incoming[t.dst].push(id);
        }
        let active = vec![true; triples.len()];
        LineGraph {
            graph: graph.clone(),
            triples,
            incoming,
            active,
        }
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn line_node(&self, id: usize) -> (usize, usize) {
        self.graph.edge(id)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn edge_count(&self) -> usize {
        self.triples.len()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_active(&self, triple: usize) -> bool {
        self.active[triple]
    }

    pub(crate) fn deactivate(&mut self, triple: usize) {
        self.active[triple] = false;
    }

    /// Triple ids `(l, i, j)` feeding line node `(i, j)`, active or not.
    pub fn incoming(&self, line: usize) -> &[usize] {
        &self.incoming[line]
    }

    /// Active triples feeding line node `(i, j)`.
    pub fn active_incoming(&self, line: usize) -> impl Iterator<Item = &Triple> + '_ {
        self.incoming[line]
            .iter()
            .filter(|&&t| self.active[t])
            .map(|&t| &self.triples[t])
    }

    pub fn active_triples(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter().zip(&self.active).filter(|(_, &a)| a).map(|(t, _)| t)
    }

    /// `𝒩^lg(i,j)` as original node ids `l`, using every triple.
    pub fn neighbors(&self, line: usize) -> Vec<usize> {
        self.incoming[line].iter().map(|&t| self.triples[t].nodes.0).collect()
    }
}
