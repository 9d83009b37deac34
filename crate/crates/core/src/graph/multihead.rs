use super::{distance, DirectedGraph};
use crate::error::{Error, Result};

/// Scale-separated split of the fully connected edge set into `H` heads.
#[derive(Clone, Debug)]
pub struct HeadPartition {
    heads: Vec<DirectedGraph>,
    chunks: Vec<Vec<(usize, usize)>>,
    overlap: usize,
    length_ranges: Vec<(f64, f64)>,
}

impl HeadPartition {
    /// Symmetrized graph of each head.
    pub fn heads(&self) -> &[DirectedGraph] {
        &self.heads
    }

    /// Edges assigned to each head before symmetrization.
    pub fn chunks(&self) -> &[Vec<(usize, usize)>] {
        &self.chunks
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Shortest and longest edge of each chunk.
    pub fn length_ranges(&self) -> &[(f64, f64)] {
        &self.length_ranges
    }
}

/// Sorts all ordered pairs by length (ties by endpoints) and cuts the list
/// into `heads` chunks. With `overlap = 0` the chunks are contiguous and
/// disjoint. Otherwise each chunk holds about `#E / (heads - overlap)` edges
/// and the windows are spread evenly from the start to the end of the list.
pub fn partition_multihead(positions: &[f64], d: usize, heads: usize, overlap: usize) -> Result<HeadPartition> {
    if heads == 0 {
        return Err(Error::InvalidPartition("at least one head is required".into()));
    }
    if overlap >= heads {
        return Err(Error::InvalidPartition(format!(
            "overlap {overlap} must be smaller than head count {heads}"
        )));
    }
    if d == 0 || positions.len() % d != 0 {
        return Err(Error::shape(format!("{} coordinates do not split into d={d}", positions.len())));
    }
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("head partition positions".into()));
    }
    let n = positions.len() / d;
    let mut sorted: Vec<(f64, (usize, usize))> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| (distance(positions, d, i, j), (i, j)))
        .collect();
    sorted.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1 .0.min(a.1 .1).cmp(&b.1 .0.min(b.1 .1)))
            .then(a.1.cmp(&b.1))
    });
    let total = sorted.len();
    let groups = heads - overlap;
    let (base, rem) = (total / groups, total % groups);
    let sizes: Vec<usize> = (0..heads).map(|h| base + usize::from(h < rem)).collect();
    let mut starts = Vec::with_capacity(heads);
    if overlap == 0 {
        let mut acc = 0;
        for &s in &sizes {
            starts.push(acc);
            acc += s;
        }
    } else {
        for (h, &s) in sizes.iter().enumerate() {
            let span = (total - s) as f64;
            let start = if heads > 1 {
                (h as f64 * span / (heads - 1) as f64).round() as usize
            } else {
                0
            };
            starts.push(start.min(total - s));
        }
    }
    let mut chunks = Vec::with_capacity(heads);
    let mut graphs = Vec::with_capacity(heads);
    let mut ranges = Vec::with_capacity(heads);
    for (&start, &size) in starts.iter().zip(&sizes) {
        let window = &sorted[start..start + size];
        let edges: Vec<(usize, usize)> = window.iter().map(|&(_, e)| e).collect();
        ranges.push(match (window.first(), window.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => (f64::NAN, f64::NAN),
        });
        graphs.push(DirectedGraph::from_edges(n, edges.iter().copied(), None)?.symmetrized());
        chunks.push(edges);
    }
    Ok(HeadPartition {
        heads: graphs,
        chunks,
        overlap,
        length_ranges: ranges,
    })
}
