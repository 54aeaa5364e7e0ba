//! Reverse-mode differentiation over vector-valued nodes.
//!
//! Nodes are appended in evaluation order, so every node's inputs precede
//! it and a single reverse sweep visits each node once after all of its
//! consumers.

use super::params::{Grads, ParamId, ScorerParams};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Row {
        p: ParamId,
        row: usize,
    },
    /// `W x (+ b)`.
    Affine {
        w: ParamId,
        b: Option<ParamId>,
        x: NodeId,
    },
    Add(Vec<NodeId>),
    Concat(Vec<NodeId>),
    Slice {
        x: NodeId,
        start: usize,
    },
    Tanh(NodeId),
    /// Elementwise maximum; `arg[k]` is the winning input for coordinate k.
    Max {
        xs: Vec<NodeId>,
        arg: Vec<usize>,
    },
    /// One LSTM step. Value is `[h; c]`.
    Lstm {
        x: NodeId,
        prev: Option<NodeId>,
        w: ParamId,
        b: ParamId,
        gates: Vec<f64>,
        tanh_c: Vec<f64>,
    },
    /// `softmax(s^T W B) B` over the rows of B.
    Attend {
        s: NodeId,
        w: ParamId,
        rows: Vec<NodeId>,
        alpha: Vec<f64>,
        q: Vec<f64>,
    },
    /// Negative log-probability of `gold` under a softmax restricted to
    /// `valid`.
    Nll {
        logits: NodeId,
        valid: Vec<usize>,
        gold: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += W x` for a row-major `rows × cols` matrix.
fn matvec_into(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += W^T g`.
fn matvec_t_into(w: &[f64], cols: usize, g: &[f64], out: &mut [f64]) {
    for (gi, row) in g.iter().zip(w.chunks_exact(cols)) {
        if *gi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += gi * a;
        }
    }
}

/// `G += g x^T`.
fn outer_into(g: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (gi, row) in g.iter().zip(out.chunks_exact_mut(cols)) {
        if *gi == 0.0 {
            continue;
        }
        for (o, a) in row.iter_mut().zip(x) {
            *o += gi * a;
        }
    }
}

fn add_into(acc: &mut Vec<f64>, g: &[f64]) {
    if acc.is_empty() {
        acc.extend_from_slice(g);
    } else {
        for (a, b) in acc.iter_mut().zip(g) {
            *a += b;
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, params: &ScorerParams, p: ParamId) -> NodeId {
        self.push(params.tensors[p].data.clone(), Op::Param(p))
    }

    pub fn row(&mut self, params: &ScorerParams, p: ParamId, row: usize) -> NodeId {
        let t = &params.tensors[p];
        let value = t.data[row * t.cols..(row + 1) * t.cols].to_vec();
        self.push(value, Op::Row { p, row })
    }

    pub fn affine(
        &mut self,
        params: &ScorerParams,
        w: ParamId,
        b: Option<ParamId>,
        x: NodeId,
    ) -> NodeId {
        let wt = &params.tensors[w];
        assert_eq!(
            wt.cols,
            self.nodes[x].value.len(),
            "affine input size for {}",
            wt.name
        );
        let mut out = match b {
            Some(b) => params.tensors[b].data.clone(),
            None => vec![0.0; wt.rows],
        };
        matvec_into(&wt.data, wt.cols, &self.nodes[x].value, &mut out);
        self.push(out, Op::Affine { w, b, x })
    }

    pub fn add(&mut self, xs: Vec<NodeId>) -> NodeId {
        let mut out = vec![0.0; self.nodes[xs[0]].value.len()];
        for &x in &xs {
            for (o, v) in out.iter_mut().zip(&self.nodes[x].value) {
                *o += v;
            }
        }
        self.push(out, Op::Add(xs))
    }

    pub fn concat(&mut self, xs: Vec<NodeId>) -> NodeId {
        let out: Vec<f64> = xs
            .iter()
            .flat_map(|&x| self.nodes[x].value.iter().copied())
            .collect();
        self.push(out, Op::Concat(xs))
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let out = self.nodes[x].value[start..start + len].to_vec();
        self.push(out, Op::Slice { x, start })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x].value.iter().map(|v| v.tanh()).collect();
        self.push(out, Op::Tanh(x))
    }

    pub fn max(&mut self, xs: Vec<NodeId>) -> NodeId {
        let dim = self.nodes[xs[0]].value.len();
        let mut out = vec![f64::NEG_INFINITY; dim];
        let mut arg = vec![0; dim];
        for (i, &x) in xs.iter().enumerate() {
            for (k, v) in self.nodes[x].value.iter().enumerate() {
                if *v > out[k] {
                    out[k] = *v;
                    arg[k] = i;
                }
            }
        }
        self.push(out, Op::Max { xs, arg })
    }

    /// One LSTM step from `prev = [h; c]` (zeros when absent).
    pub fn lstm(
        &mut self,
        params: &ScorerParams,
        w: ParamId,
        b: ParamId,
        x: NodeId,
        prev: Option<NodeId>,
    ) -> NodeId {
        let wt = &params.tensors[w];
        let hidden = wt.rows / 4;
        let xv = &self.nodes[x].value;
        let zeros = vec![0.0; 2 * hidden];
        let pv = prev.map_or(&zeros[..], |p| &self.nodes[p].value[..]);
        assert_eq!(
            wt.cols,
            xv.len() + hidden,
            "lstm input size for {}",
            wt.name
        );
        let z: Vec<f64> = xv.iter().chain(&pv[..hidden]).copied().collect();
        let mut pre = params.tensors[b].data.clone();
        matvec_into(&wt.data, wt.cols, &z, &mut pre);
        let mut gates = vec![0.0; 4 * hidden];
        for k in 0..3 * hidden {
            gates[k] = sigmoid(pre[k]);
        }
        for k in 3 * hidden..4 * hidden {
            gates[k] = pre[k].tanh();
        }
        let mut value = vec![0.0; 2 * hidden];
        let mut tanh_c = vec![0.0; hidden];
        for k in 0..hidden {
            let (i, f, o, g) = (
                gates[k],
                gates[hidden + k],
                gates[2 * hidden + k],
                gates[3 * hidden + k],
            );
            let c = f * pv[hidden + k] + i * g;
            tanh_c[k] = c.tanh();
            value[k] = o * tanh_c[k];
            value[hidden + k] = c;
        }
        self.push(
            value,
            Op::Lstm {
                x,
                prev,
                w,
                b,
                gates,
                tanh_c,
            },
        )
    }

    /// Attention of `s` over `rows`; an empty row list gives a zero vector
    /// of length `width`.
    pub fn attend(
        &mut self,
        params: &ScorerParams,
        w: ParamId,
        s: NodeId,
        rows: Vec<NodeId>,
        width: usize,
    ) -> NodeId {
        let wt = &params.tensors[w];
        let mut q = vec![0.0; wt.cols];
        matvec_t_into(&wt.data, wt.cols, &self.nodes[s].value, &mut q);
        let scores: Vec<f64> = rows
            .iter()
            .map(|&r| self.nodes[r].value.iter().zip(&q).map(|(a, b)| a * b).sum())
            .collect();
        let alpha = softmax(&scores);
        let mut out = vec![0.0; width];
        for (&r, a) in rows.iter().zip(&alpha) {
            for (o, v) in out.iter_mut().zip(&self.nodes[r].value) {
                *o += a * v;
            }
        }
        self.push(
            out,
            Op::Attend {
                s,
                w,
                rows,
                alpha,
                q,
            },
        )
    }

    /// Scalar loss node; also returns the masked distribution.
    pub fn nll(&mut self, logits: NodeId, valid: Vec<usize>, gold: usize) -> NodeId {
        let masked: Vec<f64> = valid.iter().map(|&i| self.nodes[logits].value[i]).collect();
        let probs = softmax(&masked);
        let pos = valid
            .iter()
            .position(|&i| i == gold)
            .expect("gold action is valid");
        let loss = -probs[pos].ln();
        self.push(
            vec![loss],
            Op::Nll {
                logits,
                valid,
                gold,
                probs,
            },
        )
    }

    /// Accumulates d(root)/d(param) into `grads`. `root` must be a scalar.
    pub fn backward(&self, root: NodeId, params: &ScorerParams, grads: &mut Grads) {
        let mut g: Vec<Vec<f64>> = vec![Vec::new(); root + 1];
        g[root] = vec![1.0];
        for id in (0..=root).rev() {
            if g[id].is_empty() {
                continue;
            }
            let gid = std::mem::take(&mut g[id]);
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => add_into(&mut grads.tensors[*p], &gid),
                Op::Row { p, row } => {
                    let cols = params.tensors[*p].cols;
                    for (a, b) in grads.tensors[*p][row * cols..(row + 1) * cols]
                        .iter_mut()
                        .zip(&gid)
                    {
                        *a += b;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wt = &params.tensors[*w];
                    outer_into(&gid, &self.nodes[*x].value, &mut grads.tensors[*w]);
                    if let Some(b) = b {
                        add_into(&mut grads.tensors[*b], &gid);
                    }
                    let mut gx = vec![0.0; wt.cols];
                    matvec_t_into(&wt.data, wt.cols, &gid, &mut gx);
                    add_into(&mut g[*x], &gx);
                }
                Op::Add(xs) => {
                    for &x in xs {
                        add_into(&mut g[x], &gid);
                    }
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for &x in xs {
                        let n = self.nodes[x].value.len();
                        add_into(&mut g[x], &gid[off..off + n]);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let mut gx = vec![0.0; self.nodes[*x].value.len()];
                    gx[*start..*start + gid.len()].copy_from_slice(&gid);
                    add_into(&mut g[*x], &gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<f64> = gid
                        .iter()
                        .zip(&node.value)
                        .map(|(gv, y)| gv * (1.0 - y * y))
                        .collect();
                    add_into(&mut g[*x], &gx);
                }
                Op::Max { xs, arg } => {
                    for (i, &x) in xs.iter().enumerate() {
                        let gx: Vec<f64> = gid
                            .iter()
                            .zip(arg)
                            .map(|(gv, &a)| if a == i { *gv } else { 0.0 })
                            .collect();
                        add_into(&mut g[x], &gx);
                    }
                }
                Op::Lstm {
                    x,
                    prev,
                    w,
                    b,
                    gates,
                    tanh_c,
                } => {
                    let wt = &params.tensors[*w];
                    let hidden = wt.rows / 4;
                    let xv = &self.nodes[*x].value;
                    let zeros = vec![0.0; 2 * hidden];
                    let pv = prev.map_or(&zeros[..], |p| &self.nodes[p].value[..]);
                    let mut dpre = vec![0.0; 4 * hidden];
                    let mut dprev = vec![0.0; 2 * hidden];
                    for k in 0..hidden {
                        let (i, f, o, gg) = (
                            gates[k],
                            gates[hidden + k],
                            gates[2 * hidden + k],
                            gates[3 * hidden + k],
                        );
                        let (gh, gc) = (gid[k], gid[hidden + k]);
                        let tc = tanh_c[k];
                        let d_o = gh * tc;
                        let d_c = gc + gh * o * (1.0 - tc * tc);
                        dpre[k] = d_c * gg * i * (1.0 - i);
                        dpre[hidden + k] = d_c * pv[hidden + k] * f * (1.0 - f);
                        dpre[2 * hidden + k] = d_o * o * (1.0 - o);
                        dpre[3 * hidden + k] = d_c * i * (1.0 - gg * gg);
                        dprev[hidden + k] = d_c * f;
                    }
                    let z: Vec<f64> = xv.iter().chain(&pv[..hidden]).copied().collect();
                    outer_into(&dpre, &z, &mut grads.tensors[*w]);
                    add_into(&mut grads.tensors[*b], &dpre);
                    let mut gz = vec![0.0; wt.cols];
                    matvec_t_into(&wt.data, wt.cols, &dpre, &mut gz);
                    add_into(&mut g[*x], &gz[..xv.len()]);
                    if let Some(p) = prev {
                        dprev[..hidden].copy_from_slice(&gz[xv.len()..]);
                        add_into(&mut g[*p], &dprev);
                    }
                }
                Op::Attend {
                    s,
                    w,
                    rows,
                    alpha,
                    q,
                } => {
                    if rows.is_empty() {
                        continue;
                    }
                    let galpha: Vec<f64> = rows
                        .iter()
                        .map(|&r| {
                            self.nodes[r]
                                .value
                                .iter()
                                .zip(&gid)
                                .map(|(a, b)| a * b)
                                .sum()
                        })
                        .collect();
                    let mean: f64 = alpha.iter().zip(&galpha).map(|(a, b)| a * b).sum();
                    let mut gq = vec![0.0; q.len()];
                    for (j, &r) in rows.iter().enumerate() {
                        let gscore = alpha[j] * (galpha[j] - mean);
                        let rv = &self.nodes[r].value;
                        for (o, v) in gq.iter_mut().zip(rv) {
                            *o += gscore * v;
                        }
                        let gr: Vec<f64> = gid
                            .iter()
                            .zip(q)
                            .map(|(gv, qv)| alpha[j] * gv + gscore * qv)
                            .collect();
                        add_into(&mut g[r], &gr);
                    }
                    let wt = &params.tensors[*w];
                    let sv = &self.nodes[*s].value;
                    outer_into(sv, &gq, &mut grads.tensors[*w]);
                    let mut gs = vec![0.0; wt.rows];
                    matvec_into(&wt.data, wt.cols, &gq, &mut gs);
                    add_into(&mut g[*s], &gs);
                }
                Op::Nll {
                    logits,
                    valid,
                    gold,
                    probs,
                } => {
                    let mut gl = vec![0.0; self.nodes[*logits].value.len()];
                    for (&i, p) in valid.iter().zip(probs) {
                        gl[i] = gid[0] * (p - if i == *gold { 1.0 } else { 0.0 });
                    }
                    add_into(&mut g[*logits], &gl);
                }
            }
        }
    }
}

/// Numerically stable softmax; empty input gives empty output.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let Some(m) = xs.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
