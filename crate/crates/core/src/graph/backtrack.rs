use super::{DirectedGraph, LineGraph};

/// Boolean dependence tracker `B(t)`: row per line node `(i, j)`, column
/// per original node `k`. Stored as packed bit rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BacktrackArray {
    rows: usize,
    cols: usize,
    words: usize,
    bits: Vec<u64>,
    step: usize,
}

impl BacktrackArray {
    pub fn new(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64).max(1);
        BacktrackArray {
            rows,
            cols,
            words,
            bits: vec![0; rows * words],
            step: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.rows && col < self.cols);
        self.bits[row * self.words + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize) {
        assert!(row < self.rows && col < self.cols);
        self.bits[row * self.words + col / 64] |= 1 << (col % 64);
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words..(row + 1) * self.words]
    }

    /// Marked columns of one row, ascending.
    pub fn row_entries(&self, row: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(row, c)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Entrywise `self ≥ other`.
    pub fn dominates(&self, other: &BacktrackArray) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.bits.iter().zip(&other.bits).all(|(a, b)| b & !a == 0)
    }

    /// Storage size in bytes.
    pub fn byte_size(&self) -> usize {
        self.bits.len() * std::mem::size_of::<u64>()
    }
}

/// Builds `B(0)`. Without pd, row `(i, j)` marks `i`; with pd it marks `i`
/// and every `l` in `𝒩^lg(i, j)`, since the initial feature aggregates over
/// those sources relative to `x_i`.
pub fn init_backtracking(lg: &LineGraph, pd: bool) -> BacktrackArray {
    let mut b = BacktrackArray::new(lg.node_count(), lg.graph().node_count());
    for row in 0..lg.node_count() {
        let (i, _) = lg.line_node(row);
        b.set(row, i);
        if pd {
            for l in lg.neighbors(row) {
                b.set(row, l);
            }
        }
    }
    b
}

/// One pruning step: deactivates every active triple `(i, j, k)` whose
/// source row `(i, j)` already depends on `k`, then propagates dependences
/// along the surviving triples. Returns the number removed and `B(t+1)`.
pub fn prune_and_update(lg: &mut LineGraph, b: &BacktrackArray) -> (usize, BacktrackArray) {
    let mut removed = 0;
    for id in 0..lg.edge_count() {
        let t = lg.triples()[id];
        if lg.is_active(id) && b.get(t.src, t.nodes.2) {
            lg.deactivate(id);
            removed += 1;
        }
    }
    let next = propagate(lg, b);
    (removed, next)
}

/// `B(t+1)` from `B(t)` over the currently active triples, without pruning.
pub(crate) fn propagate(lg: &LineGraph, b: &BacktrackArray) -> BacktrackArray {
    let mut next = b.clone();
    next.step = b.step + 1;
    for t in lg.active_triples() {
        let w = next.words;
        let (src, dst) = (t.src, t.dst);
        for word in 0..w {
            next.bits[dst * w + word] |= b.row_words(src)[word];
        }
    }
    next
}

/// Active and removed line-graph edge counts at one message-passing step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StepCount {
    pub t: usize,
    pub active: usize,
    pub removed: usize,
}

/// Active line-graph edges seen by each step `t = 0..steps`, after that
/// step's pruning.
pub fn connectivity_profile(graph: &DirectedGraph, pd: bool, steps: usize) -> Vec<StepCount> {
    let mut lg = LineGraph::new(graph);
    let mut b = init_backtracking(&lg, pd);
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let (removed, next) = prune_and_update(&mut lg, &b);
        out.push(StepCount {
            t,
            active: lg.active_count(),
            removed,
        });
        b = next;
    }
    out
}
