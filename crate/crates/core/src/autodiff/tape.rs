//! Program recording.
//!
//! A [`Tape`] records a straight-line program over row-major real matrices.
//! Recording is purely structural: shapes are checked and index tables are
//! stored, but no arithmetic happens until the finished
//! [`AdjointProgram`](super::AdjointProgram) is evaluated.

use std::sync::Arc;

use super::program::AdjointProgram;

/// Handle to a node of a recorded program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Groups of stop-gradient markers that can be switched on and off after
/// recording.
///
/// `Always` markers are part of the function definition. `Conditioner`
/// markers cut the input-excluding feature path of a hollow network so that
/// the remaining Jacobian is block-diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DetachGroup {
    Always,
    Conditioner,
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Input { offset: usize },
    Param { trainable: bool },
    Const,
    /// `x · w (+ b)` with `x: r×i`, `w: i×o`, `b: 1×o`.
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    Tanh(Var),
    /// Multiply every row of `x` by the matching entry of the column `s`.
    ScaleRows(Var, Var),
    /// Divide every row of `x` by the matching entry of the column `s`.
    DivRows(Var, Var),
    Gather { x: Var, index: Arc<[usize]> },
    SegmentSum { x: Var, segment: Arc<[usize]> },
    SegmentSoftmax { x: Var, segment: Arc<[usize]> },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    /// Smoothed Euclidean row norm `sqrt(|row|^2 + eps)`.
    RowNorm(Var),
    /// Gaussian radial basis expansion of a column.
    Rbf { x: Var, centers: Arc<[f64]>, gamma: f64 },
    /// `g: r×c`, `u: r×d` → `r×(c·d)`, channel `c` equal to `g_c · u`.
    Outer(Var, Var),
    /// `g: r×c`, `v: r×(c·d)` → `g_c · v_c` per channel.
    ChannelScale(Var, Var),
    /// `a, b: r×(c·d)` → `r×c` of per-channel inner products.
    ChannelDot(Var, Var),
    /// `g: r×c`, `v: r×(c·d)` → `r×d`, `Σ_c g_c v_c`.
    ChannelContract(Var, Var),
    SumAll(Var),
    Detach { x: Var, group: DetachGroup },
}

impl Op {
    pub(crate) fn parents(&self) -> Vec<Var> {
        match self {
            Op::Input { .. } | Op::Param { .. } | Op::Const => Vec::new(),
            Op::Linear { x, w, b } => {
                let mut p = vec![*x, *w];
                p.extend(b.iter().copied());
                p
            }
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::ScaleRows(a, b)
            | Op::DivRows(a, b)
            | Op::Outer(a, b)
            | Op::ChannelScale(a, b)
            | Op::ChannelDot(a, b)
            | Op::ChannelContract(a, b) => vec![*a, *b],
            Op::Scale(a, _) | Op::Silu(a) | Op::Tanh(a) | Op::RowNorm(a) | Op::SumAll(a) => vec![*a],
            Op::Gather { x, .. }
            | Op::SegmentSum { x, .. }
            | Op::SegmentSoftmax { x, .. }
            | Op::Slice { x, .. }
            | Op::Rbf { x, .. }
            | Op::Detach { x, .. } => vec![*x],
            Op::Concat(parts) => parts.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct NodeRecord {
    pub op: Op,
    pub rows: usize,
    pub cols: usize,
    /// Stored values of parameter and constant leaves.
    pub stored: Option<Vec<f64>>,
}

impl NodeRecord {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Records a program; see the module docs.
///
/// Shape errors are programming errors in the caller and panic with a
/// message naming the offending op.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    pub(crate) nodes: Vec<NodeRecord>,
    pub(crate) inputs: Vec<Var>,
    pub(crate) input_width: usize,
    pub(crate) params: Vec<Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn rows(&self, v: Var) -> usize {
        self.nodes[v.0].rows
    }

    pub fn cols(&self, v: Var) -> usize {
        self.nodes[v.0].cols
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, stored: Option<Vec<f64>>) -> Var {
        let id = Var(self.nodes.len());
        self.nodes.push(NodeRecord {
            op,
            rows,
            cols,
            stored,
        });
        id
    }

    /// A differentiable input; its values are supplied at evaluation time.
    /// Inputs are laid out in creation order in the evaluation vector.
    pub fn input(&mut self, rows: usize, cols: usize) -> Var {
        let offset = self.input_width;
        self.input_width += rows * cols;
        let v = self.push(Op::Input { offset }, rows, cols, None);
        self.inputs.push(v);
        v
    }

    /// A parameter leaf. Trainable parameters receive gradients from
    /// [`AdjointProgram::param_vjp`](super::AdjointProgram::param_vjp).
    pub fn param(&mut self, values: Vec<f64>, rows: usize, cols: usize, trainable: bool) -> Var {
        assert_eq!(values.len(), rows * cols, "param: value count does not match shape");
        let v = self.push(Op::Param { trainable }, rows, cols, Some(values));
        self.params.push(v);
        v
    }

    pub fn constant(&mut self, values: Vec<f64>, rows: usize, cols: usize) -> Var {
        assert_eq!(values.len(), rows * cols, "constant: value count does not match shape");
        self.push(Op::Const, rows, cols, Some(values))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(vec![0.0; rows * cols], rows, cols)
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (r, i) = self.shape(x);
        let (wi, o) = self.shape(w);
        assert_eq!(i, wi, "linear: input width {i} vs weight rows {wi}");
        if let Some(b) = b {
            assert_eq!(self.nodes[b.0].len(), o, "linear: bias width");
        }
        self.push(Op::Linear { x, w, b }, r, o, None)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> (usize, usize) {
        let sa = self.shape(a);
        assert_eq!(sa, self.shape(b), "{what}: shape mismatch");
        sa
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.same_shape(a, b, "add");
        self.push(Op::Add(a, b), r, c, None)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.same_shape(a, b, "sub");
        self.push(Op::Sub(a, b), r, c, None)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.same_shape(a, b, "mul");
        self.push(Op::Mul(a, b), r, c, None)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let (r, c) = self.shape(a);
        self.push(Op::Scale(a, factor), r, c, None)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        self.push(Op::Silu(a), r, c, None)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        self.push(Op::Tanh(a), r, c, None)
    }

    pub fn scale_rows(&mut self, x: Var, s: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(s), (r, 1), "scale_rows: scale must be a column");
        self.push(Op::ScaleRows(x, s), r, c, None)
    }

    pub fn div_rows(&mut self, x: Var, s: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(s), (r, 1), "div_rows: divisor must be a column");
        self.push(Op::DivRows(x, s), r, c, None)
    }

    /// Row `r` of the result is row `index[r]` of `x`.
    pub fn gather(&mut self, x: Var, index: Arc<[usize]>) -> Var {
        let (rows, c) = self.shape(x);
        assert!(index.iter().all(|&i| i < rows), "gather: index out of range");
        let r = index.len();
        self.push(Op::Gather { x, index }, r, c, None)
    }

    /// Sums rows of `x` into `segments` buckets; row `r` goes to `segment[r]`.
    /// Empty buckets are zero.
    pub fn segment_sum(&mut self, x: Var, segment: Arc<[usize]>, segments: usize) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(segment.len(), r, "segment_sum: one segment id per row");
        assert!(segment.iter().all(|&s| s < segments), "segment_sum: id out of range");
        self.push(Op::SegmentSum { x, segment }, segments, c, None)
    }

    /// Softmax of a column within each segment.
    pub fn segment_softmax(&mut self, x: Var, segment: Arc<[usize]>) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(c, 1, "segment_softmax: logits must be a column");
        assert_eq!(segment.len(), r, "segment_softmax: one segment id per row");
        self.push(Op::SegmentSoftmax { x, segment }, r, 1, None)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat: no parts");
        let r = self.rows(parts[0]);
        assert!(parts.iter().all(|&p| self.rows(p) == r), "concat: row mismatch");
        let c = parts.iter().map(|&p| self.cols(p)).sum();
        self.push(Op::Concat(parts.to_vec()), r, c, None)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape(x);
        assert!(start + len <= c, "slice: columns {start}..{} out of {c}", start + len);
        self.push(Op::Slice { x, start }, r, len, None)
    }

    pub fn row_norm(&mut self, x: Var) -> Var {
        let r = self.rows(x);
        self.push(Op::RowNorm(x), r, 1, None)
    }

    pub fn rbf(&mut self, x: Var, centers: Arc<[f64]>, gamma: f64) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(c, 1, "rbf: input must be a column");
        let k = centers.len();
        self.push(Op::Rbf { x, centers, gamma }, r, k, None)
    }

    pub fn outer(&mut self, g: Var, u: Var) -> Var {
        let (r, c) = self.shape(g);
        let (ru, d) = self.shape(u);
        assert_eq!(r, ru, "outer: row mismatch");
        self.push(Op::Outer(g, u), r, c * d, None)
    }

    pub fn channel_scale(&mut self, g: Var, v: Var) -> Var {
        let (r, c) = self.shape(g);
        let (rv, cd) = self.shape(v);
        assert!(r == rv && c > 0 && cd % c == 0, "channel_scale: shape mismatch");
        self.push(Op::ChannelScale(g, v), r, cd, None)
    }

    pub fn channel_dot(&mut self, a: Var, b: Var, channels: usize) -> Var {
        let (r, cd) = self.same_shape(a, b, "channel_dot");
        assert!(channels > 0 && cd % channels == 0, "channel_dot: channel count");
        // the channel count is recovered from the output shape
        self.push(Op::ChannelDot(a, b), r, channels, None)
    }

    pub fn channel_contract(&mut self, g: Var, v: Var) -> Var {
        let (r, c) = self.shape(g);
        let (rv, cd) = self.shape(v);
        assert!(r == rv && c > 0 && cd % c == 0, "channel_contract: shape mismatch");
        self.push(Op::ChannelContract(g, v), r, cd / c, None)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        self.push(Op::SumAll(x), 1, 1, None)
    }

    /// Identity in value; gradient is cut while the marker's group is enabled.
    pub fn detach(&mut self, x: Var, group: DetachGroup) -> Var {
        let (r, c) = self.shape(x);
        self.push(Op::Detach { x, group }, r, c, None)
    }

    /// Freezes the recording. `outputs` are concatenated, in order, into the
    /// program's output vector.
    pub fn finish(self, outputs: &[Var]) -> AdjointProgram {
        AdjointProgram::new(self, outputs.to_vec())
    }
}
