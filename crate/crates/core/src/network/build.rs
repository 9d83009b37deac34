use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::params::TIME_FEATURES;
use super::{ArchConfig, GraphMode, HompParams, MessageKind, ModelKind};
use crate::autodiff::{AdjointProgram, DetachGroup, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{
    build_knn_graph, fully_connected, init_backtracking, partition_multihead, prune_and_update, BacktrackArray,
    DirectedGraph, LineGraph,
};

/// Positions, labels and flow time of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleConfiguration {
    x: Vec<f64>,
    z: Vec<usize>,
    t: f64,
    d: usize,
}

impl ParticleConfiguration {
    pub fn new(x: Vec<f64>, z: Vec<usize>, t: f64, d: usize) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {d}")));
        }
        if x.is_empty() || x.len() % d != 0 {
            return Err(Error::shape(format!("{} coordinates for d={d}", x.len())));
        }
        if z.len() != x.len() / d {
            return Err(Error::shape(format!("{} labels for {} particles", z.len(), x.len() / d)));
        }
        if x.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::NonFinite("particle configuration".into()));
        }
        Ok(ParticleConfiguration { x, z, t, d })
    }

    /// All labels zero.
    pub fn unlabeled(x: Vec<f64>, t: f64, d: usize) -> Result<Self> {
        let n = x.len().checked_div(d).unwrap_or(0);
        Self::new(x, vec![0; n], t, d)
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.z
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// A line-graph node `(i, j)` of one sample, in batch row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineRow {
    pub sample: usize,
    pub i: usize,
    pub j: usize,
}

/// Recorded intermediate state of one head of a hollow network.
#[derive(Clone, Debug)]
pub struct HeadTrace {
    pub rows: Vec<LineRow>,
    /// `(s, v)` feature nodes of `h^t` for `t = 0..=T`.
    pub features: Vec<(Var, Var)>,
    /// `B(t)` per step and sample.
    pub backtrack: Vec<Vec<BacktrackArray>>,
    /// Active `(src row, dst row)` pairs used by each step.
    pub active: Vec<Vec<(usize, usize)>>,
    pub removed: Vec<usize>,
    /// Softmax attention weights per step, one per active pair.
    pub alphas: Vec<Option<Var>>,
    /// Aggregated scalar messages per step.
    pub messages: Vec<Var>,
}

/// A recorded and evaluated vector-field program for a batch of samples.
#[derive(Debug)]
pub struct NetworkProgram {
    program: AdjointProgram,
    inputs: Vec<f64>,
    output: Vec<f64>,
    kind: ModelKind,
    batch: usize,
    n: usize,
    d: usize,
    heads: Vec<HeadTrace>,
    edges: usize,
    lg_edges: usize,
}

impl NetworkProgram {
    /// Records the network on a batch (`x` is `batch × n × d`, one time per
    /// sample, labels shared) and runs the forward pass.
    pub fn build(params: &HompParams, x: &[f64], z: &[usize], t: &[f64]) -> Result<Self> {
        check_inputs(params, x, z, t)?;
        let graphs = sample_graphs(params, x)?;
        Self::record(params, x, z, t, graphs)
    }

    /// Like [`build`](Self::build) but with caller-supplied graphs, one list
    /// of head graphs per sample.
    pub fn build_with_graphs(
        params: &HompParams,
        x: &[f64],
        z: &[usize],
        t: &[f64],
        graphs: Vec<Vec<DirectedGraph>>,
    ) -> Result<Self> {
        check_inputs(params, x, z, t)?;
        let n = params.config().n_particles;
        if graphs.len() != t.len() {
            return Err(Error::shape(format!("{} graph lists for {} samples", graphs.len(), t.len())));
        }
        let heads = graphs.first().map_or(0, Vec::len);
        if graphs.iter().any(|g| g.len() != heads || g.iter().any(|h| h.node_count() != n)) {
            return Err(Error::shape("every sample needs the same number of head graphs over n nodes"));
        }
        Self::record(params, x, z, t, graphs)
    }

    fn record(params: &HompParams, x: &[f64], z: &[usize], t: &[f64], graphs: Vec<Vec<DirectedGraph>>) -> Result<Self> {
        let c = params.config();
        let (n, d) = (c.n_particles, c.dim);
        let batch = t.len();
        let mut b = Recorder::new(params, batch, z, t);
        let xv = b.tape.input(batch * n, d);
        let mut heads = Vec::new();
        let mut edges = 0;
        let mut lg_edges = 0;
        let mut total: Option<Var> = None;
        let head_count = graphs.first().map_or(0, Vec::len);
        for q in 0..head_count {
            let per_sample: Vec<&DirectedGraph> = graphs.iter().map(|g| &g[q]).collect();
            edges += per_sample.iter().map(|g| g.edge_count()).sum::<usize>();
            let out = match c.model {
                ModelKind::Hollow => {
                    let lgs: Vec<LineGraph> = per_sample.iter().map(|g| LineGraph::new(g)).collect();
                    lg_edges += lgs.iter().map(LineGraph::edge_count).sum::<usize>();
                    let (out, trace) = b.hollow_head(xv, lgs);
                    heads.push(trace);
                    out
                }
                ModelKind::Baseline => b.baseline_head(xv, &per_sample),
            };
            if let Some(out) = out {
                total = Some(match total {
                    Some(acc) => b.tape.add(acc, out),
                    None => out,
                });
            }
        }
        let output = match total {
            Some(o) => o,
            None => {
                let z = b.tape.zeros(batch * n, d);
                // keep the input reachable so reverse passes stay well defined
                let zero_x = b.tape.scale(xv, 0.0);
                b.tape.add(z, zero_x)
            }
        };
        let mut program = b.tape.finish(&[output]);
        let out = program.forward_eval(x)?;
        Ok(NetworkProgram {
            program,
            inputs: x.to_vec(),
            output: out,
            kind: c.model,
            batch,
            n,
            d,
            heads,
            edges,
            lg_edges,
        })
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn program(&self) -> &AdjointProgram {
        &self.program
    }

    pub fn program_mut(&mut self) -> &mut AdjointProgram {
        &mut self.program
    }

    /// Re-runs the recorded program at new positions with the graph and
    /// pruning frozen. Used by finite-difference oracles.
    pub fn reevaluate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.program.forward_eval(x)?;
        self.inputs = x.to_vec();
        self.output = out.clone();
        Ok(out)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn heads(&self) -> &[HeadTrace] {
        &self.heads
    }

    /// Edges of the particle graphs, summed over heads and samples.
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Line-graph edges before pruning, summed over heads and samples.
    pub fn line_edge_count(&self) -> usize {
        self.lg_edges
    }
}

/// `b_θ(x, t)` of the hollow network for one configuration.
pub fn homp_forward(params: &HompParams, cfg: &ParticleConfiguration) -> Result<Vec<f64>> {
    if params.config().model != ModelKind::Hollow {
        return Err(Error::invalid("homp_forward needs a hollow architecture"));
    }
    forward(params, cfg)
}

/// `b_θ(x, t)` of the baseline network for one configuration.
pub fn baseline_forward(params: &HompParams, cfg: &ParticleConfiguration) -> Result<Vec<f64>> {
    if params.config().model != ModelKind::Baseline {
        return Err(Error::invalid("baseline_forward needs a baseline architecture"));
    }
    forward(params, cfg)
}

fn forward(params: &HompParams, cfg: &ParticleConfiguration) -> Result<Vec<f64>> {
    let c = params.config();
    if cfg.n() != c.n_particles || cfg.d() != c.dim {
        return Err(Error::shape(format!(
            "configuration is {}×{}, network expects {}×{}",
            cfg.n(),
            cfg.d(),
            c.n_particles,
            c.dim
        )));
    }
    let p = NetworkProgram::build(params, cfg.positions(), cfg.labels(), &[cfg.time()])?;
    Ok(p.output)
}

fn check_inputs(params: &HompParams, x: &[f64], z: &[usize], t: &[f64]) -> Result<()> {
    let c = params.config();
    let (n, d) = (c.n_particles, c.dim);
    let batch = t.len();
    if x.len() != batch * n * d {
        return Err(Error::shape(format!(
            "{} coordinates for {batch} samples of {n}×{d}",
            x.len()
        )));
    }
    if z.len() != n {
        return Err(Error::shape(format!("{} labels for {n} particles", z.len())));
    }
    if let Some(&bad) = z.iter().find(|&&zi| zi >= c.num_types) {
        return Err(Error::invalid(format!("label {bad} ≥ num_types {}", c.num_types)));
    }
    if x.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network input".into()));
    }
    Ok(())
}

/// Embedding `(s, v)` of one difference or position vector `u` with label
/// `z`; `index` is the particle index used by unique embeddings.
pub fn embed(params: &HompParams, u: &[f64], z: usize, index: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = params.config();
    if u.len() != c.dim {
        return Err(Error::shape(format!("embedding input has {} entries, d={}", u.len(), c.dim)));
    }
    if z >= c.num_types || index >= c.n_particles {
        return Err(Error::invalid(format!("label {z} or index {index} out of range")));
    }
    let mut labels = vec![0; c.n_particles];
    labels[index] = z;
    let mut r = Recorder::new(params, 1, &labels, &[0.0]);
    let uv = r.tape.input(1, c.dim);
    let attrs = r.attributes(&[index]);
    let f = r.embed(uv, attrs);
    let mut program = r.tape.finish(&[f.s, f.v]);
    let out = program.forward_eval(u)?;
    let (s, v) = out.split_at(c.n_hidden);
    Ok((s.to_vec(), v.to_vec()))
}

/// Graph (one per head) of every sample in the batch.
fn sample_graphs(params: &HompParams, x: &[f64]) -> Result<Vec<Vec<DirectedGraph>>> {
    let c = params.config();
    x.chunks(c.n_particles * c.dim).map(|xb| particle_graphs(c, xb)).collect()
}

/// The head graphs the network builds for one configuration.
pub fn particle_graphs(c: &ArchConfig, x: &[f64]) -> Result<Vec<DirectedGraph>> {
    let (n, d) = (c.n_particles, c.dim);
    if x.len() != n * d {
        return Err(Error::ArityMismatch { expected: n * d, got: x.len() });
    }
    if n == 1 {
        let heads = match c.graph {
            GraphMode::MultiHead { heads, .. } => heads,
            _ => 1,
        };
        return Ok(vec![fully_connected(1); heads]);
    }
    Ok(match c.graph {
        GraphMode::Knn { k } => vec![build_knn_graph(x, d, k)?],
        GraphMode::Full => vec![fully_connected(n)],
        GraphMode::MultiHead { heads, overlap } => partition_multihead(x, d, heads, overlap)?.heads().to_vec(),
    })
}

#[derive(Clone, Copy)]
struct Feat {
    s: Var,
    v: Var,
}

struct Recorder<'p> {
    tape: Tape,
    params: &'p HompParams,
    weights: HashMap<String, Var>,
    batch: usize,
    n: usize,
    d: usize,
    h: usize,
    z: Vec<usize>,
    t: Vec<f64>,
    centers: Arc<[f64]>,
    gamma: f64,
}

impl<'p> Recorder<'p> {
    fn new(params: &'p HompParams, batch: usize, z: &[usize], t: &[f64]) -> Self {
        let c = params.config();
        let mut tape = Tape::new();
        let mut weights = HashMap::new();
        for b in params.blocks() {
            let vals = params.values()[b.offset..b.offset + b.len()].to_vec();
            weights.insert(b.name.clone(), tape.param(vals, b.rows, b.cols, true));
        }
        let k = c.n_rbf;
        let centers: Arc<[f64]> = (0..k)
            .map(|i| if k == 1 { 0.0 } else { c.cutoff * i as f64 / (k - 1) as f64 })
            .collect();
        let spacing = if k == 1 { c.cutoff } else { c.cutoff / (k - 1) as f64 };
        Recorder {
            tape,
            params,
            weights,
            batch,
            n: c.n_particles,
            d: c.dim,
            h: c.n_hidden,
            z: z.to_vec(),
            t: t.to_vec(),
            centers,
            gamma: 1.0 / (2.0 * spacing * spacing),
        }
    }

    fn w(&self, name: &str) -> Var {
        self.weights[name]
    }

    fn dense(&mut self, x: Var, prefix: &str) -> Var {
        let (w, b) = (self.w(&format!("{prefix}.w")), self.w(&format!("{prefix}.b")));
        self.tape.linear(x, w, Some(b))
    }

    fn mlp(&mut self, x: Var, l1: &str, l2: &str) -> Var {
        let hidden = self.dense(x, l1);
        let hidden = self.tape.silu(hidden);
        self.dense(hidden, l2)
    }

    fn idx(v: Vec<usize>) -> Arc<[usize]> {
        v.into()
    }

    /// Label one-hots (plus the particle index one-hot when enabled) for the
    /// given global node ids.
    fn attributes(&mut self, nodes: &[usize]) -> Var {
        let c = self.params.config();
        let unique = if c.unique_embedding { self.n } else { 0 };
        let width = c.num_types + unique;
        let mut vals = vec![0.0; nodes.len() * width];
        for (r, &g) in nodes.iter().enumerate() {
            let i = g % self.n;
            vals[r * width + self.z[i]] = 1.0;
            if unique > 0 {
                vals[r * width + c.num_types + i] = 1.0;
            }
        }
        self.tape.constant(vals, nodes.len(), width)
    }

    fn time_features(&mut self, samples: impl Iterator<Item = usize>) -> Var {
        let mut vals = Vec::new();
        for b in samples {
            let t = self.t[b];
            vals.push((PI * t).sin());
            vals.push((PI * t).cos());
        }
        let rows = vals.len() / TIME_FEATURES;
        self.tape.constant(vals, rows, TIME_FEATURES)
    }

    fn embed(&mut self, u: Var, attrs: Var) -> Feat {
        let norm = self.tape.row_norm(u);
        let radial = self.tape.rbf(norm, self.centers.clone(), self.gamma);
        let mut parts = vec![radial, attrs];
        if !self.params.config().equivariant {
            parts.push(u);
        }
        let inp = self.tape.concat(&parts);
        let s = self.mlp(inp, "embed.l1", "embed.l2");
        let g = self.dense(s, "embed.gate");
        let g = self.tape.tanh(g);
        let dir = self.tape.div_rows(u, norm);
        let v = self.tape.outer(g, dir);
        Feat { s, v }
    }

    /// Scalar MLP plus a per-channel gate on the vectors.
    fn gated(&mut self, f: Feat, prefix: &str) -> Feat {
        let s = self.mlp(f.s, &format!("{prefix}.l1"), &format!("{prefix}.l2"));
        let g = self.dense(f.s, &format!("{prefix}.gate"));
        let g = self.tape.tanh(g);
        let v = self.tape.channel_scale(g, f.v);
        Feat { s, v }
    }

    fn gather(&mut self, f: Feat, index: &Arc<[usize]>) -> Feat {
        Feat {
            s: self.tape.gather(f.s, index.clone()),
            v: self.tape.gather(f.v, index.clone()),
        }
    }

    fn segment_sum(&mut self, f: Feat, seg: &Arc<[usize]>, count: usize) -> Feat {
        Feat {
            s: self.tape.segment_sum(f.s, seg.clone(), count),
            v: self.tape.segment_sum(f.v, seg.clone(), count),
        }
    }

    fn zero_feat(&mut self, rows: usize) -> Feat {
        Feat {
            s: self.tape.zeros(rows, self.h),
            v: self.tape.zeros(rows, self.h * self.d),
        }
    }

    /// One round of messages from `src` rows into `dst` rows followed by the
    /// residual update. Returns the new features, the aggregated scalar
    /// message and the attention weights when normalized.
    fn message_round(
        &mut self,
        h: Feat,
        rows: usize,
        src: Vec<usize>,
        dst: Vec<usize>,
        time: Var,
    ) -> (Feat, Var, Option<Var>) {
        let hd = self.h;
        let mut alpha = None;
        let agg = if src.is_empty() {
            self.zero_feat(rows)
        } else {
            let (src, dst) = (Self::idx(src), Self::idx(dst));
            let fs = self.gather(h, &src);
            let fd = self.gather(h, &dst);
            let msg = match self.params.config().message {
                MessageKind::Plain => {
                    let dots = self.tape.channel_dot(fd.v, fs.v, hd);
                    let inp = self.tape.concat(&[fd.s, fs.s, dots, time]);
                    let out = self.mlp(inp, "msg.l1", "msg.l2");
                    let ms = self.tape.slice(out, 0, hd);
                    let g1 = self.tape.slice(out, hd, hd);
                    let g1 = self.tape.tanh(g1);
                    let g2 = self.tape.slice(out, 2 * hd, hd);
                    let g2 = self.tape.tanh(g2);
                    let a = self.tape.channel_scale(g1, fs.v);
                    let b = self.tape.channel_scale(g2, fd.v);
                    Feat {
                        s: ms,
                        v: self.tape.add(a, b),
                    }
                }
                MessageKind::Attention => {
                    let inp = self.tape.concat(&[fd.s, fs.s, time]);
                    let a = self.mlp(inp, "attn.l1", "attn.l2");
                    let val = self.mlp(fd.s, "attn_value.l1", "attn_value.l2");
                    let vs = self.tape.slice(val, 0, hd);
                    let vg = self.tape.slice(val, hd, hd);
                    let vg = self.tape.tanh(vg);
                    let vv = self.tape.channel_scale(vg, fd.v);
                    Feat {
                        s: self.tape.scale_rows(vs, a),
                        v: self.tape.scale_rows(vv, a),
                    }
                }
                MessageKind::AttentionSoftmax => {
                    let inp = self.tape.concat(&[fd.s, fs.s, time]);
                    let logits = self.mlp(inp, "attn.l1", "attn.l2");
                    let a = self.tape.segment_softmax(logits, dst.clone());
                    alpha = Some(a);
                    let ps = self.dense(fs.s, "attn_proj.scalar");
                    let pg = self.dense(fs.s, "attn_proj.gate");
                    let pg = self.tape.tanh(pg);
                    let pv = self.tape.channel_scale(pg, fs.v);
                    Feat {
                        s: self.tape.scale_rows(ps, a),
                        v: self.tape.scale_rows(pv, a),
                    }
                }
            };
            self.segment_sum(msg, &dst, rows)
        };
        let inp = self.tape.concat(&[h.s, agg.s]);
        let out = self.mlp(inp, "upd.l1", "upd.l2");
        let ds = self.tape.slice(out, 0, hd);
        let gate = self.tape.slice(out, hd, hd);
        let gate = self.tape.tanh(gate);
        let s = self.tape.add(h.s, ds);
        let dv = self.tape.channel_scale(gate, agg.v);
        let v = self.tape.add(h.v, dv);
        (Feat { s, v }, agg.s, alpha)
    }

    /// `R(h, n)` summed into destination particles.
    fn readout(&mut self, h: Feat, nf: Feat, dst: &Arc<[usize]>) -> Var {
        let hd = self.h;
        let inp = self.tape.concat(&[h.s, nf.s]);
        let hidden = self.dense(inp, "readout.l1");
        let hidden = self.tape.silu(hidden);
        let g = self.dense(hidden, "readout.l2");
        let gh = self.tape.slice(g, 0, hd);
        let gn = self.tape.slice(g, hd, hd);
        let a = self.tape.channel_contract(gh, h.v);
        let b = self.tape.channel_contract(gn, nf.v);
        let mut out = self.tape.add(a, b);
        if !self.params.config().equivariant {
            let direct = self.dense(hidden, "readout.direct");
            out = self.tape.add(out, direct);
        }
        self.tape.segment_sum(out, dst.clone(), self.batch * self.n)
    }

    fn hollow_head(&mut self, x: Var, mut lgs: Vec<LineGraph>) -> (Option<Var>, HeadTrace) {
        let c = self.params.config().clone();
        let n = self.n;
        let mut rows = Vec::new();
        let mut row_src = Vec::new();
        let mut row_dst = Vec::new();
        let mut offsets = Vec::with_capacity(lgs.len());
        for (b, lg) in lgs.iter().enumerate() {
            offsets.push(rows.len());
            for &(i, j) in lg.graph().edges() {
                rows.push(LineRow { sample: b, i, j });
                row_src.push(b * n + i);
                row_dst.push(b * n + j);
            }
        }
        let r = rows.len();
        let mut trace = HeadTrace {
            rows,
            features: Vec::new(),
            backtrack: Vec::new(),
            active: Vec::new(),
            removed: Vec::new(),
            alphas: Vec::new(),
            messages: Vec::new(),
        };
        if r == 0 {
            return (None, trace);
        }
        let src_idx = Self::idx(row_src.clone());
        let dst_idx = Self::idx(row_dst.clone());
        let src_attr = self.attributes(&row_src);

        let (mut h, node_emb) = if c.pd {
            let xs = self.tape.gather(x, src_idx.clone());
            let xd = self.tape.gather(x, dst_idx.clone());
            let diff = self.tape.sub(xs, xd);
            let e = self.embed(diff, src_attr);
            let pe = self.gated(e, "init_msg");
            let mut tsrc = Vec::new();
            let mut tdst = Vec::new();
            for (lg, &off) in lgs.iter().zip(&offsets) {
                for t in lg.triples() {
                    tsrc.push(off + t.src);
                    tdst.push(off + t.dst);
                }
            }
            let agg = if tsrc.is_empty() {
                self.zero_feat(r)
            } else {
                let gathered = self.gather(pe, &Self::idx(tsrc));
                self.segment_sum(gathered, &Self::idx(tdst), r)
            };
            (self.gated(agg, "init_upd"), None)
        } else {
            let all: Vec<usize> = (0..self.batch * n).collect();
            let attrs = self.attributes(&all);
            let emb = self.embed(x, attrs);
            (self.gather(emb, &src_idx), Some(emb))
        };
        trace.features.push((h.s, h.v));

        let mut bs: Vec<BacktrackArray> = lgs.iter().map(|lg| init_backtracking(lg, c.pd)).collect();
        for _ in 0..c.steps {
            let mut removed = 0;
            let mut next = Vec::with_capacity(bs.len());
            for (lg, b) in lgs.iter_mut().zip(&bs) {
                if c.prune {
                    let (rm, nb) = prune_and_update(lg, b);
                    removed += rm;
                    next.push(nb);
                } else {
                    next.push(crate::graph::propagate_unpruned(lg, b));
                }
            }
            let mut src = Vec::new();
            let mut dst = Vec::new();
            for (lg, &off) in lgs.iter().zip(&offsets) {
                for t in lg.active_triples() {
                    src.push(off + t.src);
                    dst.push(off + t.dst);
                }
            }
            let rows = &trace.rows;
            let time = self.time_features(dst.iter().map(|&d| rows[d].sample));
            trace.active.push(src.iter().copied().zip(dst.iter().copied()).collect());
            trace.removed.push(removed);
            trace.backtrack.push(std::mem::replace(&mut bs, next));
            let (nh, msg, alpha) = self.message_round(h, r, src, dst, time);
            h = nh;
            trace.features.push((h.s, h.v));
            trace.messages.push(msg);
            trace.alphas.push(alpha);
        }
        trace.backtrack.push(bs);

        let hs = self.tape.detach(h.s, DetachGroup::Conditioner);
        let hv = self.tape.detach(h.v, DetachGroup::Conditioner);
        let nf = match node_emb {
            None => {
                let xc = self.tape.detach(x, DetachGroup::Conditioner);
                let xs = self.tape.gather(xc, src_idx.clone());
                let xd = self.tape.gather(x, dst_idx.clone());
                let diff = self.tape.sub(xs, xd);
                let attrs = self.attributes(&row_src);
                self.embed(diff, attrs)
            }
            Some(emb) => self.gather(emb, &dst_idx),
        };
        let out = self.readout(Feat { s: hs, v: hv }, nf, &dst_idx);
        (Some(out), trace)
    }

    fn baseline_head(&mut self, x: Var, graphs: &[&DirectedGraph]) -> Option<Var> {
        let c = self.params.config().clone();
        let n = self.n;
        let nodes = self.batch * n;
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut sample = Vec::new();
        for (b, g) in graphs.iter().enumerate() {
            for &(i, j) in g.edges() {
                src.push(b * n + i);
                dst.push(b * n + j);
                sample.push(b);
            }
        }
        if src.is_empty() {
            return None;
        }
        let src_idx = Self::idx(src.clone());
        let dst_idx = Self::idx(dst.clone());
        let all: Vec<usize> = (0..nodes).collect();
        let (mut h, edge_feat) = if c.pd {
            let xs = self.tape.gather(x, src_idx.clone());
            let xd = self.tape.gather(x, dst_idx.clone());
            let diff = self.tape.sub(xs, xd);
            let attrs = self.attributes(&src);
            let e = self.embed(diff, attrs);
            let pe = self.gated(e, "init_msg");
            let agg = self.segment_sum(pe, &dst_idx, nodes);
            (self.gated(agg, "init_upd"), e)
        } else {
            let attrs = self.attributes(&all);
            let emb = self.embed(x, attrs);
            let nj = self.gather(emb, &dst_idx);
            (emb, nj)
        };
        for _ in 0..c.steps {
            let time = self.time_features(sample.iter().copied());
            let (nh, _, _) = self.message_round(h, nodes, src.clone(), dst.clone(), time);
            h = nh;
        }
        let hi = self.gather(h, &src_idx);
        Some(self.readout(hi, edge_feat, &dst_idx))
    }
}
