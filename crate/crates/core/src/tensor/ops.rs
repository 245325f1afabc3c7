use super::graph::{Graph, Op, Var};
use super::kernels::{mm_nn, mm_nt, reduction_map};
use super::Tensor;
use crate::error::{Error, Result};
use rand::Rng;

/// Zero padding applied by [`Graph::conv1d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output length is `len - k + 1`.
    Valid,
    /// Output length equals input length. Even kernels pad one more on the right.
    Same,
}

fn shape_err(msg: String) -> Error {
    Error::Shape(msg)
}

impl Graph {
    /// `[m,k] · [k,n] -> [m,n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        mm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push(Tensor::from_raw(vec![m, n], out), Op::MatMul(a, b))
    }

    /// Batched product over a leading group axis:
    /// `[g,m,k] · [g,k,n]`, or `[g,m,k] · [g,n,k]ᵀ` when `transpose_b`.
    pub fn batch_matmul(&mut self, a: Var, b: Var, transpose_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let inner_b = if transpose_b { sb.get(2) } else { sb.get(1) };
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || inner_b != Some(&sa[2]) {
            return Err(shape_err(format!("batch_matmul {sa:?} x {sb:?} (transpose_b={transpose_b})")));
        }
        let (groups, m, k) = (sa[0], sa[1], sa[2]);
        let n = if transpose_b { sb[1] } else { sb[2] };
        let mut out = vec![0.0; groups * m * n];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for q in 0..groups {
            let aq = &av[q * m * k..(q + 1) * m * k];
            let bq = &bv[q * k * n..(q + 1) * k * n];
            let oq = &mut out[q * m * n..(q + 1) * m * n];
            if transpose_b {
                mm_nt(aq, bq, oq, m, k, n);
            } else {
                mm_nn(aq, bq, oq, m, k, n);
            }
        }
        self.push(Tensor::from_raw(vec![groups, m, n], out), Op::BatchMatMul { a, b, transpose_b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        self.push(Tensor::from_raw(self.shape(a).to_vec(), out), Op::Add(a, b))
    }

    /// `a + b` where `b`'s shape equals a trailing suffix of `a`'s shape,
    /// e.g. adding a bias row or a positional table.
    pub fn add_broadcast(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != sb[..] {
            return Err(shape_err(format!("add_broadcast {sa:?} + {sb:?}")));
        }
        let bv = self.value(b).data();
        let nb = bv.len();
        let out = self.value(a).data().iter().enumerate().map(|(i, x)| x + bv[i % nb]).collect();
        self.push(Tensor::from_raw(sa, out), Op::AddBroadcast(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        self.push(Tensor::from_raw(self.shape(a).to_vec(), out), Op::Mul(a, b))
    }

    /// `x * s` where `s`'s shape equals a leading prefix of `x`'s shape;
    /// each `s` entry scales the trailing block it indexes.
    pub fn mul_broadcast(&mut self, x: Var, s: Var) -> Result<Var> {
        let (sx, ss) = (self.shape(x).to_vec(), self.shape(s).to_vec());
        if ss.len() > sx.len() || sx[..ss.len()] != ss[..] {
            return Err(shape_err(format!("mul_broadcast {sx:?} * {ss:?}")));
        }
        let sv = self.value(s).data();
        let inner = self.value(x).numel() / sv.len();
        let out = self.value(x).data().iter().enumerate().map(|(i, v)| v * sv[i / inner]).collect();
        self.push(Tensor::from_raw(sx, out), Op::MulBroadcast { x, s })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x).data().iter().map(|v| v * c).collect();
        self.push(Tensor::from_raw(self.shape(x).to_vec(), out), Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).data().iter().map(|&v| v.max(0.0)).collect();
        self.push(Tensor::from_raw(self.shape(x).to_vec(), out), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).data().iter().map(|&v| sigmoid(v)).collect();
        self.push(Tensor::from_raw(self.shape(x).to_vec(), out), Op::Sigmoid(x))
    }

    /// Softmax over the last axis, with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let c = *self.shape(x).last().unwrap();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(c) {
            softmax_in_place(row);
        }
        self.push(Tensor::from_raw(self.shape(x).to_vec(), out), Op::Softmax(x))
    }

    /// Normalizes the last axis to zero mean / unit variance, then applies
    /// the elementwise affine `gamma`, `beta` (both of the last-axis extent).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let c = *self.shape(x).last().unwrap();
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(shape_err(format!(
                "layer_norm over {c} features with gamma {:?}, beta {:?}",
                self.shape(gamma),
                self.shape(beta)
            )));
        }
        let xv = self.value(x).data();
        let (gv, bv) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xv.len() / c;
        let mut xhat = vec![0.0; xv.len()];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * c..(r + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[r * c + j] = h;
                out[r * c + j] = h * gv[j] + bv[j];
            }
        }
        self.push(
            Tensor::from_raw(self.shape(x).to_vec(), out),
            Op::LayerNorm { x, gamma, beta, xhat, rstd },
        )
    }

    /// Cross-correlation of each row of `x: [rows, len]` with every filter of
    /// `w: [features, k]`, plus `b: [features]`. Output `[rows, out_len, features]`.
    /// Kernels are not flipped.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, padding: Padding) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x).to_vec(), self.shape(w).to_vec(), self.shape(b).to_vec());
        if sx.len() != 2 || sw.len() != 2 || sb != [sw[0]] {
            return Err(shape_err(format!("conv1d x {sx:?}, w {sw:?}, b {sb:?}")));
        }
        let (rows, len) = (sx[0], sx[1]);
        let (feats, k) = (sw[0], sw[1]);
        let (pad_left, pad_right) = match padding {
            Padding::Valid => (0, 0),
            Padding::Same => ((k - 1) / 2, k - 1 - (k - 1) / 2),
        };
        if k > len + pad_left + pad_right {
            return Err(Error::InvalidArgument(format!(
                "kernel of length {k} exceeds padded input of length {}",
                len + pad_left + pad_right
            )));
        }
        let out_len = len + pad_left + pad_right - k + 1;
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = vec![0.0; rows * out_len * feats];
        let pl = pad_left as isize;
        for r in 0..rows {
            let xr = &xv[r * len..(r + 1) * len];
            for i in 0..out_len {
                let o = &mut out[(r * out_len + i) * feats..(r * out_len + i + 1) * feats];
                o.copy_from_slice(bv);
                for j in 0..k {
                    let src = i as isize + j as isize - pl;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let xs = xr[src as usize];
                    for (f, of) in o.iter_mut().enumerate() {
                        *of += xs * wv[f * k + j];
                    }
                }
            }
        }
        self.push(
            Tensor::from_raw(vec![rows, out_len, feats], out),
            Op::Conv1d { x, w, b, pad_left },
        )
    }

    /// Same-padded 2D cross-correlation of `x: [batch, h, w, c]` with a single
    /// scalar kernel `k: [kh, kw]` shared across the trailing feature axis.
    /// Both kernel extents must be odd.
    pub fn conv2d(&mut self, x: Var, k: Var) -> Result<Var> {
        let (sx, sk) = (self.shape(x).to_vec(), self.shape(k).to_vec());
        if sx.len() != 4 || sk.len() != 2 {
            return Err(shape_err(format!("conv2d x {sx:?}, kernel {sk:?}")));
        }
        let (kh, kw) = (sk[0], sk[1]);
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidArgument(format!("conv2d kernel extents must be odd, got {kh}x{kw}")));
        }
        let (bsz, h, w, c) = (sx[0], sx[1], sx[2], sx[3]);
        let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
        let (xv, kv) = (self.value(x).data(), self.value(k).data());
        let mut out = vec![0.0; xv.len()];
        for bi in 0..bsz {
            for hi in 0..h {
                for wi in 0..w {
                    let o = ((bi * h + hi) * w + wi) * c;
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
                            for f in 0..c {
                                out[o + f] += kval * xv[src + f];
                            }
                        }
                    }
                }
            }
        }
        self.push(Tensor::from_raw(sx, out), Op::Conv2d { x, k })
    }

    /// Mean over `axes`; reduced axes are removed (all axes reduced gives `[1]`).
    pub fn mean(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted.iter().any(|&a| a >= shape.len()) {
            return Err(Error::InvalidArgument(format!("mean axes {axes:?} for shape {shape:?}")));
        }
        let count: usize = sorted.iter().map(|&a| shape[a]).product();
        let (out_shape, map) = reduction_map(&shape, &sorted);
        let mut out = vec![0.0; out_shape.iter().product()];
        for (&m, v) in map.iter().zip(self.value(x).data()) {
            out[m] += v;
        }
        for o in out.iter_mut() {
            *o /= count as f64;
        }
        self.push(Tensor::from_raw(out_shape, out), Op::Mean { x, map, count })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::InvalidArgument(format!("concat axis {axis} for rank {}", base.len())));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(shape_err(format!("concat {:?} with {:?} on axis {axis}", base, s)));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let chunk = self.shape(*v)[axis] * inner;
                out.extend_from_slice(&self.value(*v).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        self.push(Tensor::from_raw(shape, out), Op::Concat { inputs: inputs.to_vec(), axis })
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape.to_vec())?;
        self.push(t, Op::Reshape(x))
    }

    /// Splits each row of `x: [rows, len]` into `⌊(len-P)/S⌋+1` windows of
    /// length `P` taken every `S` steps: output `[rows, patches, P]`.
    pub fn patchify(&mut self, x: Var, patch_len: usize, stride: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 2 {
            return Err(shape_err(format!("patchify expects [rows, len], got {sx:?}")));
        }
        let (rows, len) = (sx[0], sx[1]);
        let patches = patch_count(len, patch_len, stride)?;
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(rows * patches * patch_len);
        for r in 0..rows {
            for p in 0..patches {
                let start = r * len + p * stride;
                out.extend_from_slice(&xv[start..start + patch_len]);
            }
        }
        self.push(
            Tensor::from_raw(vec![rows, patches, patch_len], out),
            Op::Patchify { x, patch_len, stride },
        )
    }

    /// Inverted dropout. In evaluation mode (or at rate 0) this returns `x`
    /// itself without recording anything.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).numel())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let out = zip_map(self.value(x).data(), &mask, |a, m| a * m);
        self.push(Tensor::from_raw(self.shape(x).to_vec(), out), Op::Dropout { x, mask })
    }

    /// Class-weighted binary cross-entropy on probabilities, averaged over
    /// all entries of `probs`. Probabilities are clamped to `[eps, 1-eps]`.
    pub fn weighted_bce(&mut self, probs: Var, targets: &[f64], pos_weight: f64, eps: f64) -> Result<Var> {
        let pv = self.value(probs).data();
        if pv.len() != targets.len() {
            return Err(shape_err(format!("{} probabilities vs {} targets", pv.len(), targets.len())));
        }
        if let Some(y) = targets.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!("label {y} is not in {{0, 1}}")));
        }
        if !(pos_weight > 0.0 && pos_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("pos_weight must be positive, got {pos_weight}")));
        }
        let loss = bce_value(pv, targets, pos_weight, eps);
        self.push(
            Tensor::scalar(loss),
            Op::WeightedBce { probs, targets: targets.to_vec(), pos_weight, eps },
        )
    }

    fn same_shape(&self, name: &str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!("{name} {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }
}

/// Number of patches `⌊(len - P)/S⌋ + 1`.
pub fn patch_count(len: usize, patch_len: usize, stride: usize) -> Result<usize> {
    if patch_len == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch length and stride must be positive".into()));
    }
    if patch_len > len {
        return Err(Error::InvalidArgument(format!(
            "patch length {patch_len} exceeds series length {len}"
        )));
    }
    Ok((len - patch_len) / stride + 1)
}

pub(crate) fn bce_value(probs: &[f64], targets: &[f64], pos_weight: f64, eps: f64) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            pos_weight * y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    -total / probs.len() as f64
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_hand_examples() {
        let mut g = Graph::new();
        let eye = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let v = g.constant(t(&[2, 1], &[3.0, 7.0]));
        let r = g.matmul(eye, v).unwrap();
        assert_eq!(g.value(r).data(), &[3.0, 7.0]);
        let a = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let ones = g.constant(t(&[2, 1], &[1.0, 1.0]));
        let r = g.matmul(a, ones).unwrap();
        assert_eq!(g.value(r).data(), &[3.0, 7.0]);
        assert!(matches!(g.matmul(ones, ones), Err(Error::Shape(_))));
    }

    #[test]
    fn conv1d_hand_examples() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 3], &[1.0, 2.0, 3.0]));
        let w = g.constant(t(&[1, 3], &[1.0, 0.0, -1.0]));
        let b = g.constant(t(&[1], &[0.0]));
        let y = g.conv1d(x, w, b, Padding::Valid).unwrap();
        assert_eq!(g.shape(y), &[1, 1, 1]);
        assert_eq!(g.value(y).data(), &[-2.0]);

        let id = g.constant(t(&[1, 1], &[1.0]));
        let y = g.conv1d(x, id, b, Padding::Same).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);

        let long = g.constant(t(&[1, 4], &[1.0; 4]));
        assert!(matches!(g.conv1d(x, long, b, Padding::Valid), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn conv2d_identity_zero_and_even_kernel() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..2 * 3 * 4).map(|i| i as f64 * 0.5 - 3.0).collect();
        let x = g.constant(t(&[1, 2, 3, 4], &data));
        let one = g.constant(t(&[1, 1], &[1.0]));
        let y = g.conv2d(x, one).unwrap();
        assert_eq!(g.value(y).data(), &data[..]);
        let zero = g.constant(Tensor::zeros([3, 3]));
        let y = g.conv2d(x, zero).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
        let even = g.constant(Tensor::zeros([2, 3]));
        assert!(matches!(g.conv2d(x, even), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn softmax_and_activations() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[0.0, 0.0]));
        let s = g.softmax(x).unwrap();
        assert_eq!(g.value(s).data(), &[0.5, 0.5]);

        let raw = [0.3, -1.2, 2.5];
        let x = g.constant(t(&[3], &raw));
        let shifted = g.constant(t(&[3], &raw.map(|v| v + 100.0)));
        let a = g.softmax(x).unwrap();
        let b = g.softmax(shifted).unwrap();
        assert!(g.value(a).max_abs_diff(g.value(b)) < 1e-12);

        let z = g.constant(t(&[1], &[0.0]));
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(s).item(), 0.5);

        let m = g.constant(t(&[3], &[1.0, 2.0, 3.0]));
        let mean = g.mean(m, &[0]).unwrap();
        assert_eq!(g.value(mean).item(), 2.0);
        assert!(matches!(g.mean(m, &[1]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dropout_eval_is_identity_and_rate_checked() {
        let mut rng = rand::thread_rng();
        let mut g = Graph::new();
        let x = g.constant(t(&[3], &[1.0, 2.0, 3.0]));
        assert_eq!(g.dropout(x, 0.2, false, &mut rng).unwrap(), x);
        assert!(g.dropout(x, 1.0, true, &mut rng).is_err());
        let y = g.dropout(x, 0.5, true, &mut rng).unwrap();
        for (&o, &i) in g.value(y).data().iter().zip(&[1.0, 2.0, 3.0]) {
            assert!(o == 0.0 || o == 2.0 * i);
        }
    }

    #[test]
    fn mean_over_inner_axes() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let x = g.constant(t(&[2, 3, 4], &data));
        let m = g.mean(x, &[1, 2]).unwrap();
        assert_eq!(g.shape(m), &[2]);
        assert_abs_diff_eq!(g.value(m).data()[0], 5.5);
        assert_abs_diff_eq!(g.value(m).data()[1], 17.5);
        let m = g.mean(x, &[0]).unwrap();
        assert_eq!(g.shape(m), &[3, 4]);
        assert_abs_diff_eq!(g.value(m).data()[0], 6.0);
    }

    #[test]
    fn concat_and_patchify_layouts() {
        let mut g = Graph::new();
        let a = g.constant(t(&[2, 1], &[1.0, 2.0]));
        let b = g.constant(t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        assert!(g.concat(&[a, b], 0).is_err());

        let x = g.constant(t(&[1, 10], &(0..10).map(f64::from).collect::<Vec<_>>()));
        let p = g.patchify(x, 4, 2).unwrap();
        assert_eq!(g.shape(p), &[1, 4, 4]);
        let starts: Vec<f64> = g.value(p).data().chunks(4).map(|c| c[0]).collect();
        assert_eq!(starts, vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn overflow_is_an_error() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1], &[1e300]));
        assert!(matches!(g.scale(x, 1e300), Err(Error::NonFinite(_))));
    }

    #[test]
    fn weighted_bce_examples() {
        let mut g = Graph::new();
        let p = g.constant(t(&[1], &[0.5]));
        let l = g.weighted_bce(p, &[1.0], 1.0, 1e-7).unwrap();
        assert_abs_diff_eq!(g.value(l).item(), std::f64::consts::LN_2, epsilon = 1e-15);
        let l = g.weighted_bce(p, &[1.0], 4.0, 1e-7).unwrap();
        assert_abs_diff_eq!(g.value(l).item(), 4.0 * std::f64::consts::LN_2, epsilon = 1e-15);
        let zero = g.constant(t(&[1], &[0.0]));
        let l = g.weighted_bce(zero, &[0.0], 1.0, 1e-7).unwrap();
        assert!(g.value(l).item() < 1e-6);
        assert!(matches!(g.weighted_bce(p, &[2.0], 1.0, 1e-7), Err(Error::InvalidArgument(_))));
    }
}
