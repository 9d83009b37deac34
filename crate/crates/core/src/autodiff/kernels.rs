//! Forward and reverse kernels for every recorded op.

use super::tape::{NodeRecord, Op};

pub(crate) const NORM_EPS: f64 = 1e-12;

pub(crate) fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Input { .. } => "input",
        Op::Param { .. } => "param",
        Op::Const => "const",
        Op::Linear { .. } => "linear",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::Silu(..) => "silu",
        Op::Tanh(..) => "tanh",
        Op::ScaleRows(..) => "scale_rows",
        Op::DivRows(..) => "div_rows",
        Op::Gather { .. } => "gather",
        Op::SegmentSum { .. } => "segment_sum",
        Op::SegmentSoftmax { .. } => "segment_softmax",
        Op::Concat(..) => "concat",
        Op::Slice { .. } => "slice",
        Op::RowNorm(..) => "row_norm",
        Op::Rbf { .. } => "rbf",
        Op::Outer(..) => "outer",
        Op::ChannelScale(..) => "channel_scale",
        Op::ChannelDot(..) => "channel_dot",
        Op::ChannelContract(..) => "channel_contract",
        Op::SumAll(..) => "sum_all",
        Op::Detach { .. } => "detach",
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn forward(op: &Op, node: &NodeRecord, nodes: &[NodeRecord], vals: &[Vec<f64>], out: &mut [f64]) {
    let cols = node.cols;
    match op {
        Op::Input { .. } | Op::Param { .. } | Op::Const => unreachable!("leaves are not evaluated"),
        Op::Linear { x, w, b } => {
            let xv = &vals[x.0];
            let wv = &vals[w.0];
            let inner = nodes[x.0].cols;
            for r in 0..node.rows {
                let row = &mut out[r * cols..(r + 1) * cols];
                if let Some(b) = b {
                    row.copy_from_slice(&vals[b.0]);
                }
                let xr = &xv[r * inner..(r + 1) * inner];
                for (i, &xi) in xr.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let wr = &wv[i * cols..(i + 1) * cols];
                    for (o, &wio) in row.iter_mut().zip(wr) {
                        *o += xi * wio;
                    }
                }
            }
        }
        Op::Add(a, b) => {
            for ((o, x), y) in out.iter_mut().zip(&vals[a.0]).zip(&vals[b.0]) {
                *o = x + y;
            }
        }
        Op::Sub(a, b) => {
            for ((o, x), y) in out.iter_mut().zip(&vals[a.0]).zip(&vals[b.0]) {
                *o = x - y;
            }
        }
        Op::Mul(a, b) => {
            for ((o, x), y) in out.iter_mut().zip(&vals[a.0]).zip(&vals[b.0]) {
                *o = x * y;
            }
        }
        Op::Scale(a, f) => {
            for (o, x) in out.iter_mut().zip(&vals[a.0]) {
                *o = f * x;
            }
        }
        Op::Silu(a) => {
            for (o, &x) in out.iter_mut().zip(&vals[a.0]) {
                *o = x * sigmoid(x);
            }
        }
        Op::Tanh(a) => {
            for (o, &x) in out.iter_mut().zip(&vals[a.0]) {
                *o = x.tanh();
            }
        }
        Op::ScaleRows(x, s) => {
            let (xv, sv) = (&vals[x.0], &vals[s.0]);
            for r in 0..node.rows {
                let f = sv[r];
                for c in 0..cols {
                    out[r * cols + c] = xv[r * cols + c] * f;
                }
            }
        }
        Op::DivRows(x, s) => {
            let (xv, sv) = (&vals[x.0], &vals[s.0]);
            for r in 0..node.rows {
                let f = 1.0 / sv[r];
                for c in 0..cols {
                    out[r * cols + c] = xv[r * cols + c] * f;
                }
            }
        }
        Op::Gather { x, index } => {
            let xv = &vals[x.0];
            for (r, &src) in index.iter().enumerate() {
                out[r * cols..(r + 1) * cols].copy_from_slice(&xv[src * cols..(src + 1) * cols]);
            }
        }
        Op::SegmentSum { x, segment } => {
            let xv = &vals[x.0];
            for (r, &seg) in segment.iter().enumerate() {
                let dst = &mut out[seg * cols..(seg + 1) * cols];
                for (o, v) in dst.iter_mut().zip(&xv[r * cols..(r + 1) * cols]) {
                    *o += v;
                }
            }
        }
        Op::SegmentSoftmax { x, segment } => {
            let xv = &vals[x.0];
            let segs = segment.iter().copied().max().map_or(0, |m| m + 1);
            let mut max = vec![f64::NEG_INFINITY; segs];
            for (r, &s) in segment.iter().enumerate() {
                max[s] = max[s].max(xv[r]);
            }
            let mut total = vec![0.0; segs];
            for (r, &s) in segment.iter().enumerate() {
                let e = (xv[r] - max[s]).exp();
                out[r] = e;
                total[s] += e;
            }
            for (r, &s) in segment.iter().enumerate() {
                out[r] /= total[s];
            }
        }
        Op::Concat(parts) => {
            let mut start = 0;
            for p in parts {
                let pc = nodes[p.0].cols;
                let pv = &vals[p.0];
                for r in 0..node.rows {
                    out[r * cols + start..r * cols + start + pc].copy_from_slice(&pv[r * pc..(r + 1) * pc]);
                }
                start += pc;
            }
        }
        Op::Slice { x, start } => {
            let xc = nodes[x.0].cols;
            let xv = &vals[x.0];
            for r in 0..node.rows {
                out[r * cols..(r + 1) * cols].copy_from_slice(&xv[r * xc + start..r * xc + start + cols]);
            }
        }
        Op::RowNorm(x) => {
            let xc = nodes[x.0].cols;
            let xv = &vals[x.0];
            for r in 0..node.rows {
                let sq: f64 = xv[r * xc..(r + 1) * xc].iter().map(|v| v * v).sum();
                out[r] = (sq + NORM_EPS).sqrt();
            }
        }
        Op::Rbf { x, centers, gamma } => {
            let xv = &vals[x.0];
            for r in 0..node.rows {
                for (k, mu) in centers.iter().enumerate() {
                    let dlt = xv[r] - mu;
                    out[r * cols + k] = (-gamma * dlt * dlt).exp();
                }
            }
        }
        Op::Outer(g, u) => {
            let (gv, uv) = (&vals[g.0], &vals[u.0]);
            let ch = nodes[g.0].cols;
            let d = nodes[u.0].cols;
            for r in 0..node.rows {
                for c in 0..ch {
                    let gc = gv[r * ch + c];
                    for a in 0..d {
                        out[r * cols + c * d + a] = gc * uv[r * d + a];
                    }
                }
            }
        }
        Op::ChannelScale(g, v) => {
            let (gv, vv) = (&vals[g.0], &vals[v.0]);
            let ch = nodes[g.0].cols;
            let d = cols / ch;
            for r in 0..node.rows {
                for c in 0..ch {
                    let gc = gv[r * ch + c];
                    let base = r * cols + c * d;
                    for a in 0..d {
                        out[base + a] = gc * vv[base + a];
                    }
                }
            }
        }
        Op::ChannelDot(a, b) => {
            let (av, bv) = (&vals[a.0], &vals[b.0]);
            let width = nodes[a.0].cols;
            let d = width / cols;
            for r in 0..node.rows {
                for c in 0..cols {
                    let base = r * width + c * d;
                    let mut s = 0.0;
                    for k in 0..d {
                        s += av[base + k] * bv[base + k];
                    }
                    out[r * cols + c] = s;
                }
            }
        }
        Op::ChannelContract(g, v) => {
            let (gv, vv) = (&vals[g.0], &vals[v.0]);
            let ch = nodes[g.0].cols;
            let width = nodes[v.0].cols;
            let d = cols;
            for r in 0..node.rows {
                for c in 0..ch {
                    let gc = gv[r * ch + c];
                    let base = r * width + c * d;
                    for a in 0..d {
                        out[r * d + a] += gc * vv[base + a];
                    }
                }
            }
        }
        Op::SumAll(x) => {
            out[0] = vals[x.0].iter().sum();
        }
        Op::Detach { x, .. } => out.copy_from_slice(&vals[x.0]),
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    op: &Op,
    node: &NodeRecord,
    nodes: &[NodeRecord],
    vals: &[Vec<f64>],
    y: &[f64],
    g: &[f64],
    active: &[bool],
    adj: &mut [Vec<f64>],
) {
    let cols = node.cols;
    let rows = node.rows;
    match op {
        Op::Input { .. } | Op::Param { .. } | Op::Const => {}
        Op::Linear { x, w, b } => {
            let inner = nodes[x.0].cols;
            if active[x.0] {
                let wv = &vals[w.0];
                let gx = &mut adj[x.0];
                for r in 0..rows {
                    let gr = &g[r * cols..(r + 1) * cols];
                    for i in 0..inner {
                        let wr = &wv[i * cols..(i + 1) * cols];
                        let mut s = 0.0;
                        for (a, b) in gr.iter().zip(wr) {
                            s += a * b;
                        }
                        gx[r * inner + i] += s;
                    }
                }
            }
            if active[w.0] {
                let xv = &vals[x.0];
                let gw = &mut adj[w.0];
                for r in 0..rows {
                    let gr = &g[r * cols..(r + 1) * cols];
                    for i in 0..inner {
                        let xi = xv[r * inner + i];
                        if xi == 0.0 {
                            continue;
                        }
                        let row = &mut gw[i * cols..(i + 1) * cols];
                        for (o, gv) in row.iter_mut().zip(gr) {
                            *o += xi * gv;
                        }
                    }
                }
            }
            if let Some(b) = b {
                if active[b.0] {
                    let gb = &mut adj[b.0];
                    for r in 0..rows {
                        for (o, gv) in gb.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                            *o += gv;
                        }
                    }
                }
            }
        }
        Op::Add(a, b) => {
            for p in [a, b] {
                if active[p.0] {
                    for (o, gv) in adj[p.0].iter_mut().zip(g) {
                        *o += gv;
                    }
                }
            }
        }
        Op::Sub(a, b) => {
            if active[a.0] {
                for (o, gv) in adj[a.0].iter_mut().zip(g) {
                    *o += gv;
                }
            }
            if active[b.0] {
                for (o, gv) in adj[b.0].iter_mut().zip(g) {
                    *o -= gv;
                }
            }
        }
        Op::Mul(a, b) => {
            if active[a.0] {
                let bv = &vals[b.0];
                for ((o, gv), bb) in adj[a.0].iter_mut().zip(g).zip(bv) {
                    *o += gv * bb;
                }
            }
            if active[b.0] {
                let av = &vals[a.0];
                for ((o, gv), aa) in adj[b.0].iter_mut().zip(g).zip(av) {
                    *o += gv * aa;
                }
            }
        }
        Op::Scale(a, f) => {
            if active[a.0] {
                for (o, gv) in adj[a.0].iter_mut().zip(g) {
                    *o += f * gv;
                }
            }
        }
        Op::Silu(a) => {
            if active[a.0] {
                let xv = &vals[a.0];
                for ((o, gv), &x) in adj[a.0].iter_mut().zip(g).zip(xv) {
                    let s = sigmoid(x);
                    *o += gv * s * (1.0 + x * (1.0 - s));
                }
            }
        }
        Op::Tanh(a) => {
            if active[a.0] {
                for ((o, gv), &yv) in adj[a.0].iter_mut().zip(g).zip(y) {
                    *o += gv * (1.0 - yv * yv);
                }
            }
        }
        Op::ScaleRows(x, s) => {
            if active[x.0] {
                let sv = &vals[s.0];
                let gx = &mut adj[x.0];
                for r in 0..rows {
                    for c in 0..cols {
                        gx[r * cols + c] += g[r * cols + c] * sv[r];
                    }
                }
            }
            if active[s.0] {
                let xv = &vals[x.0];
                let gs = &mut adj[s.0];
                for r in 0..rows {
                    let mut acc = 0.0;
                    for c in 0..cols {
                        acc += g[r * cols + c] * xv[r * cols + c];
                    }
                    gs[r] += acc;
                }
            }
        }
        Op::DivRows(x, s) => {
            let sv = &vals[s.0];
            if active[x.0] {
                let gx = &mut adj[x.0];
                for r in 0..rows {
                    let inv = 1.0 / sv[r];
                    for c in 0..cols {
                        gx[r * cols + c] += g[r * cols + c] * inv;
                    }
                }
            }
            if active[s.0] {
                let gs = &mut adj[s.0];
                for r in 0..rows {
                    let mut acc = 0.0;
                    for c in 0..cols {
                        acc += g[r * cols + c] * y[r * cols + c];
                    }
                    gs[r] -= acc / sv[r];
                }
            }
        }
        Op::Gather { x, index } => {
            if active[x.0] {
                let gx = &mut adj[x.0];
                for (r, &src) in index.iter().enumerate() {
                    for c in 0..cols {
                        gx[src * cols + c] += g[r * cols + c];
                    }
                }
            }
        }
        Op::SegmentSum { x, segment } => {
            if active[x.0] {
                let gx = &mut adj[x.0];
                for (r, &seg) in segment.iter().enumerate() {
                    for c in 0..cols {
                        gx[r * cols + c] += g[seg * cols + c];
                    }
                }
            }
        }
        Op::SegmentSoftmax { x, segment } => {
            if active[x.0] {
                let segs = segment.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; segs];
                for (r, &s) in segment.iter().enumerate() {
                    dot[s] += g[r] * y[r];
                }
                let gx = &mut adj[x.0];
                for (r, &s) in segment.iter().enumerate() {
                    gx[r] += y[r] * (g[r] - dot[s]);
                }
            }
        }
        Op::Concat(parts) => {
            let mut start = 0;
            for p in parts {
                let pc = nodes[p.0].cols;
                if active[p.0] {
                    let gp = &mut adj[p.0];
                    for r in 0..rows {
                        for c in 0..pc {
                            gp[r * pc + c] += g[r * cols + start + c];
                        }
                    }
                }
                start += pc;
            }
        }
        Op::Slice { x, start } => {
            if active[x.0] {
                let xc = nodes[x.0].cols;
                let gx = &mut adj[x.0];
                for r in 0..rows {
                    for c in 0..cols {
                        gx[r * xc + start + c] += g[r * cols + c];
                    }
                }
            }
        }
        Op::RowNorm(x) => {
            if active[x.0] {
                let xc = nodes[x.0].cols;
                let xv = &vals[x.0];
                let gx = &mut adj[x.0];
                for r in 0..rows {
                    let f = g[r] / y[r];
                    for c in 0..xc {
                        gx[r * xc + c] += f * xv[r * xc + c];
                    }
                }
            }
        }
        Op::Rbf { x, centers, gamma } => {
            if active[x.0] {
                let xv = &vals[x.0];
                let gx = &mut adj[x.0];
                for r in 0..rows {
                    let mut acc = 0.0;
                    for (k, mu) in centers.iter().enumerate() {
                        acc += g[r * cols + k] * y[r * cols + k] * (-2.0 * gamma * (xv[r] - mu));
                    }
                    gx[r] += acc;
                }
            }
        }
        Op::Outer(gate, u) => {
            let ch = nodes[gate.0].cols;
            let d = nodes[u.0].cols;
            if active[gate.0] {
                let uv = &vals[u.0];
                let gg = &mut adj[gate.0];
                for r in 0..rows {
                    for c in 0..ch {
                        let mut acc = 0.0;
                        for a in 0..d {
                            acc += g[r * cols + c * d + a] * uv[r * d + a];
                        }
                        gg[r * ch + c] += acc;
                    }
                }
            }
            if active[u.0] {
                let gv = &vals[gate.0];
                let gu = &mut adj[u.0];
                for r in 0..rows {
                    for c in 0..ch {
                        let gc = gv[r * ch + c];
                        for a in 0..d {
                            gu[r * d + a] += g[r * cols + c * d + a] * gc;
                        }
                    }
                }
            }
        }
        Op::ChannelScale(gate, v) => {
            let ch = nodes[gate.0].cols;
            let d = cols / ch;
            if active[gate.0] {
                let vv = &vals[v.0];
                let gg = &mut adj[gate.0];
                for r in 0..rows {
                    for c in 0..ch {
                        let base = r * cols + c * d;
                        let mut acc = 0.0;
                        for a in 0..d {
                            acc += g[base + a] * vv[base + a];
                        }
                        gg[r * ch + c] += acc;
                    }
                }
            }
            if active[v.0] {
                let gv = &vals[gate.0];
                let gvv = &mut adj[v.0];
                for r in 0..rows {
                    for c in 0..ch {
                        let gc = gv[r * ch + c];
                        let base = r * cols + c * d;
                        for a in 0..d {
                            gvv[base + a] += g[base + a] * gc;
                        }
                    }
                }
            }
        }
        Op::ChannelDot(a, b) => {
            let width = nodes[a.0].cols;
            let d = width / cols;
            for (this, other) in [(a, b), (b, a)] {
                if active[this.0] {
                    let ov = &vals[other.0];
                    let gt = &mut adj[this.0];
                    for r in 0..rows {
                        for c in 0..cols {
                            let gc = g[r * cols + c];
                            let base = r * width + c * d;
                            for k in 0..d {
                                gt[base + k] += gc * ov[base + k];
                            }
                        }
                    }
                }
            }
        }
        Op::ChannelContract(gate, v) => {
            let ch = nodes[gate.0].cols;
            let width = nodes[v.0].cols;
            let d = cols;
            if active[gate.0] {
                let vv = &vals[v.0];
                let gg = &mut adj[gate.0];
                for r in 0..rows {
                    for c in 0..ch {
                        let base = r * width + c * d;
                        let mut acc = 0.0;
                        for a in 0..d {
                            acc += g[r * d + a] * vv[base + a];
                        }
                        gg[r * ch + c] += acc;
                    }
                }
            }
            if active[v.0] {
                let gv = &vals[gate.0];
                let gvv = &mut adj[v.0];
                for r in 0..rows {
                    for c in 0..ch {
                        let gc = gv[r * ch + c];
                        let base = r * width + c * d;
                        for a in 0..d {
                            gvv[base + a] += g[r * d + a] * gc;
                        }
                    }
                }
            }
        }
        Op::SumAll(x) => {
            if active[x.0] {
                for o in adj[x.0].iter_mut() {
                    *o += g[0];
                }
            }
        }
        Op::Detach { x, .. } => {
            // only reached when the marker's group is disabled
            if active[x.0] {
                for (o, gv) in adj[x.0].iter_mut().zip(g) {
                    *o += gv;
                }
            }
        }
    }
}
