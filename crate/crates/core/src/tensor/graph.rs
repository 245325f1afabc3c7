use super::kernels::{mm_nn, mm_nt, mm_tn};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`]. Only meaningful for the graph that
/// created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    MatMul(Var, Var),
    BatchMatMul { a: Var, b: Var, transpose_b: bool },
    Add(Var, Var),
    /// `b`'s shape is a suffix of `a`'s shape.
    AddBroadcast(Var, Var),
    Mul(Var, Var),
    /// `s`'s shape is a prefix of `x`'s shape.
    MulBroadcast { x: Var, s: Var },
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Conv1d { x: Var, w: Var, b: Var, pad_left: usize },
    Conv2d { x: Var, k: Var },
    Mean { x: Var, map: Vec<usize>, count: usize },
    Sum(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Reshape(Var),
    Patchify { x: Var, patch_len: usize, stride: usize },
    Dropout { x: Var, mask: Vec<f64> },
    WeightedBce { probs: Var, targets: Vec<f64>, pos_weight: f64, eps: f64 },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | AddBroadcast(a, b) | Mul(a, b) => vec![*a, *b],
            BatchMatMul { a, b, .. } => vec![*a, *b],
            MulBroadcast { x, s } => vec![*x, *s],
            Scale(x, _) | Relu(x) | Sigmoid(x) | Softmax(x) | Sum(x) | Reshape(x) => vec![*x],
            LayerNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Conv1d { x, w, b, .. } => vec![*x, *w, *b],
            Conv2d { x, k } => vec![*x, *k],
            Mean { x, .. } | Patchify { x, .. } | Dropout { x, .. } => vec![*x],
            Concat { inputs, .. } => inputs.clone(),
            WeightedBce { probs, .. } => vec![*probs],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only operation tape. Nodes are stored in creation order, which is
/// a valid topological order because an operation can only reference
/// existing nodes.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
    fault: Option<(String, f64)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trainable leaf; its gradient is available after
    /// [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Registers an untracked leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Test fixture: scales the upstream gradient of every `op` node by
    /// `factor` during backward, producing a deliberately wrong rule.
    #[doc(hidden)]
    pub fn inject_backward_fault(&mut self, op: &str, factor: f64) {
        self.fault = Some((op.to_string(), factor));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward root with respect to a tracked leaf.
    /// `None` for constants, intermediates, or leaves the root does not
    /// depend on.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if let Some(i) = value.data().iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} produced {} at index {i}",
                op_name(&op),
                value.data()[i]
            )));
        }
        let mut requires_grad = false;
        for v in op.inputs() {
            if v.0 >= self.nodes.len() {
                return Err(Error::Autodiff(format!("unknown node {}", v.0)));
            }
            requires_grad |= self.nodes[v.0].requires_grad;
        }
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Reverse sweep from a scalar root. Each node is visited once; leaf
    /// gradients are stored on the graph. A graph supports a single sweep.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Autodiff("backward already ran on this graph".into()));
        }
        let node = self
            .nodes
            .get(root.0)
            .ok_or_else(|| Error::Autodiff(format!("unknown node {}", root.0)))?;
        if node.value.numel() != 1 {
            return Err(Error::Autodiff(format!(
                "backward root must be scalar, got shape {:?}",
                node.value.shape()
            )));
        }
        if !node.requires_grad {
            return Err(Error::Autodiff("root does not depend on any tracked parameter".into()));
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                let shape = self.nodes[i].value.shape().to_vec();
                self.nodes[i].grad = Some(Tensor::from_raw(shape, g));
            } else {
                let g = match &self.fault {
                    Some((op, factor)) if op == op_name(&self.nodes[i].op) => g.iter().map(|v| v * factor).collect(),
                    _ => g,
                };
                self.backprop(i, &g, &mut grads);
            }
        }
        self.backward_done = true;
        Ok(())
    }

    fn val(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    /// Runs `f` on the gradient buffer of `v` (allocating it on first use)
    /// when `v` is tracked.
    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let n = self.nodes[v.0].value.numel();
        let buf = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        f(buf);
    }

    fn backprop(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let (av, bv) = (self.val(*a), self.val(*b));
                self.acc(grads, *a, |da| mm_nt(g, bv, da, m, n, k));
                self.acc(grads, *b, |db| mm_tn(av, g, db, k, m, n));
            }
            Op::BatchMatMul { a, b, transpose_b } => {
                let sa = self.shape(*a);
                let (groups, m, k) = (sa[0], sa[1], sa[2]);
                let n = if *transpose_b { self.shape(*b)[1] } else { self.shape(*b)[2] };
                let (av, bv) = (self.val(*a), self.val(*b));
                let (sa_len, sb_len, sg_len) = (m * k, k * n, m * n);
                self.acc(grads, *a, |da| {
                    for q in 0..groups {
                        let gq = &g[q * sg_len..(q + 1) * sg_len];
                        let bq = &bv[q * sb_len..(q + 1) * sb_len];
                        let daq = &mut da[q * sa_len..(q + 1) * sa_len];
                        if *transpose_b {
                            mm_nn(gq, bq, daq, m, n, k);
                        } else {
                            mm_nt(gq, bq, daq, m, n, k);
                        }
                    }
                });
                self.acc(grads, *b, |db| {
                    for q in 0..groups {
                        let gq = &g[q * sg_len..(q + 1) * sg_len];
                        let aq = &av[q * sa_len..(q + 1) * sa_len];
                        let dbq = &mut db[q * sb_len..(q + 1) * sb_len];
                        if *transpose_b {
                            mm_tn(gq, aq, dbq, n, m, k);
                        } else {
                            mm_tn(aq, gq, dbq, k, m, n);
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, |da| add_into(da, g));
                self.acc(grads, *b, |db| add_into(db, g));
            }
            Op::AddBroadcast(a, b) => {
                self.acc(grads, *a, |da| add_into(da, g));
                self.acc(grads, *b, |db| {
                    let nb = db.len();
                    for chunk in g.chunks(nb) {
                        add_into(db, chunk);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.val(*a), self.val(*b));
                self.acc(grads, *a, |da| {
                    for ((d, &gi), &y) in da.iter_mut().zip(g).zip(bv) {
                        *d += gi * y;
                    }
                });
                self.acc(grads, *b, |db| {
                    for ((d, &gi), &x) in db.iter_mut().zip(g).zip(av) {
                        *d += gi * x;
                    }
                });
            }
            Op::MulBroadcast { x, s } => {
                let (xv, sv) = (self.val(*x), self.val(*s));
                let inner = xv.len() / sv.len();
                self.acc(grads, *x, |dx| {
                    for (j, &sj) in sv.iter().enumerate() {
                        for t in j * inner..(j + 1) * inner {
                            dx[t] += g[t] * sj;
                        }
                    }
                });
                self.acc(grads, *s, |ds| {
                    for (j, d) in ds.iter_mut().enumerate() {
                        let r = j * inner..(j + 1) * inner;
                        *d += g[r.clone()].iter().zip(&xv[r]).map(|(a, b)| a * b).sum::<f64>();
                    }
                });
            }
            Op::Scale(x, c) => {
                self.acc(grads, *x, |dx| {
                    for (d, &gi) in dx.iter_mut().zip(g) {
                        *d += c * gi;
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.val(*x);
                self.acc(grads, *x, |dx| {
                    for ((d, &gi), &xi) in dx.iter_mut().zip(g).zip(xv) {
                        if xi > 0.0 {
                            *d += gi;
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                self.acc(grads, *x, |dx| {
                    for ((d, &gi), &y) in dx.iter_mut().zip(g).zip(out) {
                        *d += gi * y * (1.0 - y);
                    }
                });
            }
            Op::Softmax(x) => {
                let c = *node.value.shape().last().unwrap();
                self.acc(grads, *x, |dx| {
                    for ((drow, grow), yrow) in dx.chunks_mut(c).zip(g.chunks(c)).zip(out.chunks(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((d, &gi), &y) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += y * (gi - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let c = self.shape(*gamma)[0];
                let gv = self.val(*gamma);
                self.acc(grads, *beta, |db| {
                    for grow in g.chunks(c) {
                        add_into(db, grow);
                    }
                });
                self.acc(grads, *gamma, |dg| {
                    for (grow, hrow) in g.chunks(c).zip(xhat.chunks(c)) {
                        for ((d, &gi), &h) in dg.iter_mut().zip(grow).zip(hrow) {
                            *d += gi * h;
                        }
                    }
                });
                self.acc(grads, *x, |dx| {
                    let cf = c as f64;
                    for (r, (drow, (grow, hrow))) in
                        dx.chunks_mut(c).zip(g.chunks(c).zip(xhat.chunks(c))).enumerate()
                    {
                        let dh: Vec<f64> = grow.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let sum_dh: f64 = dh.iter().sum();
                        let sum_dh_h: f64 = dh.iter().zip(hrow).map(|(a, b)| a * b).sum();
                        for ((d, &dhi), &h) in drow.iter_mut().zip(&dh).zip(hrow) {
                            *d += rstd[r] / cf * (cf * dhi - sum_dh - h * sum_dh_h);
                        }
                    }
                });
            }
            Op::Conv1d { x, w, b, pad_left } => {
                let (rows, len) = (self.shape(*x)[0], self.shape(*x)[1]);
                let (feats, k) = (self.shape(*w)[0], self.shape(*w)[1]);
                let out_len = node.value.shape()[1];
                let (xv, wv) = (self.val(*x), self.val(*w));
                let pl = *pad_left as isize;
                self.acc(grads, *b, |db| {
                    for gpos in g.chunks(feats) {
                        add_into(db, gpos);
                    }
                });
                self.acc(grads, *x, |dx| {
                    for r in 0..rows {
                        for i in 0..out_len {
                            let gi = &g[(r * out_len + i) * feats..(r * out_len + i + 1) * feats];
                            for j in 0..k {
                                let src = i as isize + j as isize - pl;
                                if src < 0 || src >= len as isize {
                                    continue;
                                }
                                let s: f64 = (0..feats).map(|f| gi[f] * wv[f * k + j]).sum();
                                dx[r * len + src as usize] += s;
                            }
                        }
                    }
                });
                self.acc(grads, *w, |dw| {
                    for r in 0..rows {
                        for i in 0..out_len {
                            let gi = &g[(r * out_len + i) * feats..(r * out_len + i + 1) * feats];
                            for j in 0..k {
                                let src = i as isize + j as isize - pl;
                                if src < 0 || src >= len as isize {
                                    continue;
                                }
                                let xs = xv[r * len + src as usize];
                                for f in 0..feats {
                                    dw[f * k + j] += gi[f] * xs;
                                }
                            }
                        }
                    }
                });
            }
            Op::Conv2d { x, k } => {
                let s = self.shape(*x);
                let (bsz, h, w, c) = (s[0], s[1], s[2], s[3]);
                let (kh, kw) = (self.shape(*k)[0], self.shape(*k)[1]);
                let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
                let (xv, kv) = (self.val(*x), self.val(*k));
                let mut dx_local = self.nodes[x.0].requires_grad.then(|| vec![0.0; xv.len()]);
                let mut dk_local = self.nodes[k.0].requires_grad.then(|| vec![0.0; kv.len()]);
                for bi in 0..bsz {
                    for hi in 0..h {
                        for wi in 0..w {
                            let o = ((bi * h + hi) * w + wi) * c;
                            let go = &g[o..o + c];
                            for a in 0..kh {
                                let sh = hi as isize + a as isize - ph;
                                if sh < 0 || sh >= h as isize {
                                    continue;
                                }
                                for bcol in 0..kw {
                                    let sw = wi as isize + bcol as isize - pw;
                                    if sw < 0 || sw >= w as isize {
                                        continue;
                                    }
                                    let src = ((bi * h + sh as usize) * w + sw as usize) * c;
                                    let kval = kv[a * kw + bcol];
                                    if let Some(dx) = dx_local.as_mut() {
                                        for (d, &gi) in dx[src..src + c].iter_mut().zip(go) {
                                            *d += kval * gi;
                                        }
                                    }
                                    if let Some(dk) = dk_local.as_mut() {
                                        dk[a * kw + bcol] +=
                                            go.iter().zip(&xv[src..src + c]).map(|(p, q)| p * q).sum::<f64>();
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(local) = dx_local {
                    self.acc(grads, *x, |dx| add_into(dx, &local));
                }
                if let Some(local) = dk_local {
                    self.acc(grads, *k, |dk| add_into(dk, &local));
                }
            }
            Op::Mean { x, map, count } => {
                let inv = 1.0 / *count as f64;
                self.acc(grads, *x, |dx| {
                    for (d, &m) in dx.iter_mut().zip(map) {
                        *d += g[m] * inv;
                    }
                });
            }
            Op::Sum(x) => {
                self.acc(grads, *x, |dx| {
                    for d in dx.iter_mut() {
                        *d += g[0];
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for v in inputs {
                    let chunk = self.shape(*v)[*axis] * inner;
                    self.acc(grads, *v, |dv| {
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + chunk];
                            add_into(&mut dv[o * chunk..(o + 1) * chunk], src);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Reshape(x) => {
                self.acc(grads, *x, |dx| add_into(dx, g));
            }
            Op::Patchify { x, patch_len, stride } => {
                let (rows, len) = (self.shape(*x)[0], self.shape(*x)[1]);
                let patches = node.value.shape()[1];
                self.acc(grads, *x, |dx| {
                    for r in 0..rows {
                        for p in 0..patches {
                            for j in 0..*patch_len {
                                dx[r * len + p * stride + j] += g[(r * patches + p) * patch_len + j];
                            }
                        }
                    }
                });
            }
            Op::Dropout { x, mask } => {
                self.acc(grads, *x, |dx| {
                    for ((d, &gi), &m) in dx.iter_mut().zip(g).zip(mask) {
                        *d += gi * m;
                    }
                });
            }
            Op::WeightedBce { probs, targets, pos_weight, eps } => {
                let pv = self.val(*probs);
                let m = pv.len() as f64;
                self.acc(grads, *probs, |dp| {
                    for ((d, &p), &y) in dp.iter_mut().zip(pv).zip(targets) {
                        // the clamp is flat outside [eps, 1 - eps]
                        if p <= *eps || p >= 1.0 - eps {
                            continue;
                        }
                        *d += -g[0] / m * (pos_weight * y / p - (1.0 - y) / (1.0 - p));
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::BatchMatMul { .. } => "batch_matmul",
        Op::Add(..) => "add",
        Op::AddBroadcast(..) => "add_broadcast",
        Op::Mul(..) => "mul",
        Op::MulBroadcast { .. } => "mul_broadcast",
        Op::Scale(..) => "scale",
        Op::Relu(..) => "relu",
        Op::Sigmoid(..) => "sigmoid",
        Op::Softmax(..) => "softmax",
        Op::LayerNorm { .. } => "layer_norm",
        Op::Conv1d { .. } => "conv1d",
        Op::Conv2d { .. } => "conv2d",
        Op::Mean { .. } => "mean",
        Op::Sum(..) => "sum",
        Op::Concat { .. } => "concat",
        Op::Reshape(..) => "reshape",
        Op::Patchify { .. } => "patchify",
        Op::Dropout { .. } => "dropout",
        Op::WeightedBce { .. } => "weighted_bce",
    }
}
