//! Building blocks of the network, each a composition of [`Graph`] ops.
//! Shapes use `B` batch, `d` channels, `p` patches, `D` embedding width.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Padding, Tensor, Var};
use rand::Rng;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Multi-kernel patch embedding. `patches: [rows, P]`, each kernel
/// `(w: [d_i, k], b: [d_i])`. Every kernel runs a same-padded convolution
/// along the patch and is mean-pooled over patch positions; the pooled
/// features are concatenated to `[rows, K * d_i]`.
pub fn embed_patches(g: &mut Graph, patches: Var, kernels: &[(Var, Var)]) -> Result<Var> {
    let mut pooled = Vec::with_capacity(kernels.len());
    for &(w, b) in kernels {
        let conv = g.conv1d(patches, w, b, Padding::Same)?;
        pooled.push(g.mean(conv, &[1])?);
    }
    g.concat(&pooled, 1)
}

/// Linear stand-in for [`embed_patches`]: `patches · w + b`.
pub fn linear_embed(g: &mut Graph, patches: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(patches, w)?;
    g.add_broadcast(y, b)
}

/// `e: [groups, p, d′]` to `e · w_p + w_pos`, with `w_pos: [p, D]` shared
/// across groups.
pub fn project_position(g: &mut Graph, e: Var, w_p: Var, w_pos: Var) -> Result<Var> {
    let s = g.shape(e).to_vec();
    if s.len() != 3 {
        return Err(Error::Shape(format!("project_position expects [groups, p, d'], got {s:?}")));
    }
    let flat = g.reshape(e, &[s[0] * s[1], s[2]])?;
    let proj = g.matmul(flat, w_p)?;
    let width = g.shape(proj)[1];
    let proj = g.reshape(proj, &[s[0], s[1], width])?;
    g.add_broadcast(proj, w_pos)
}

/// Cross-variable temporal convolution over the `(d, p)` grid of
/// `x: [B, d, p, D]` with a scalar kernel shared across features.
pub fn cvt_conv(g: &mut Graph, x: Var, kernel: Var) -> Result<Var> {
    g.conv2d(x, kernel)
}

/// Weights of one pre-norm encoder layer.
#[derive(Clone, Debug)]
pub struct EncoderWeights {
    pub ln1: (Var, Var),
    /// Per head `(w_q, w_k, w_v)`, each `[D, d_k]`.
    pub heads: Vec<(Var, Var, Var)>,
    /// `[h * d_k, D]`, no bias.
    pub w_o: Var,
    pub ln2: (Var, Var),
    pub ff1: (Var, Var),
    pub ff2: (Var, Var),
}

/// Multi-head self-attention over the `p` patches of each group of
/// `x: [groups, p, D]`. Attention matrices `[groups, p, p]` are appended to
/// `attention` when given.
pub fn multi_head_attention(
    g: &mut Graph,
    x: Var,
    heads: &[(Var, Var, Var)],
    w_o: Var,
    mut attention: Option<&mut Vec<Tensor>>,
) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let (groups, p, width) = (s[0], s[1], s[2]);
    let flat = g.reshape(x, &[groups * p, width])?;
    let mut outs = Vec::with_capacity(heads.len());
    for &(wq, wk, wv) in heads {
        let dk = g.shape(wq)[1];
        let mut project = |w: Var| -> Result<Var> {
            let y = g.matmul(flat, w)?;
            g.reshape(y, &[groups, p, dk])
        };
        let (q, k, v) = (project(wq)?, project(wk)?, project(wv)?);
        let scores = g.batch_matmul(q, k, true)?;
        let scores = g.scale(scores, 1.0 / (dk as f64).sqrt())?;
        let attn = g.softmax(scores)?;
        if let Some(store) = attention.as_deref_mut() {
            store.push(g.value(attn).clone());
        }
        outs.push(g.batch_matmul(attn, v, false)?);
    }
    let cat = g.concat(&outs, 2)?;
    let cat_width = g.shape(cat)[2];
    let cat = g.reshape(cat, &[groups * p, cat_width])?;
    let y = g.matmul(cat, w_o)?;
    g.reshape(y, &[groups, p, width])
}

/// `x + MHSA(LN(x))`, then `y + FFN(LN(y))` with a ReLU feed-forward.
pub fn encoder_layer(
    g: &mut Graph,
    x: Var,
    w: &EncoderWeights,
    attention: Option<&mut Vec<Tensor>>,
) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let h = g.layer_norm(x, w.ln1.0, w.ln1.1, LAYER_NORM_EPS)?;
    let a = multi_head_attention(g, h, &w.heads, w.w_o, attention)?;
    let x = g.add(x, a)?;

    let h = g.layer_norm(x, w.ln2.0, w.ln2.1, LAYER_NORM_EPS)?;
    let h = g.reshape(h, &[s[0] * s[1], s[2]])?;
    let h = g.matmul(h, w.ff1.0)?;
    let h = g.add_broadcast(h, w.ff1.1)?;
    let h = g.relu(h)?;
    let h = g.matmul(h, w.ff2.0)?;
    let h = g.add_broadcast(h, w.ff2.1)?;
    let h = g.reshape(h, &s)?;
    g.add(x, h)
}

/// Squeeze-and-excitation over channels of `x: [B, d, p, D]`:
/// `s = sigmoid(relu(mean_{p,D}(x) · w1) · w2)`, output `x * s` per channel.
/// Returns the recalibrated tensor and the gates `[B, d]`.
pub fn se_recalibrate(g: &mut Graph, x: Var, w1: Var, w2: Var) -> Result<(Var, Var)> {
    if g.shape(x).len() != 4 {
        return Err(Error::Shape(format!("se_recalibrate expects [B, d, p, D], got {:?}", g.shape(x))));
    }
    let squeeze = g.mean(x, &[2, 3])?;
    let z = g.matmul(squeeze, w1)?;
    let z = g.relu(z)?;
    let z = g.matmul(z, w2)?;
    let gates = g.sigmoid(z)?;
    Ok((g.mul_broadcast(x, gates)?, gates))
}

/// Flattens each sample of `x: [B, ...]` in row-major order, applies dropout
/// and `sigmoid(H · w + b)`. Output `[B, 1]`.
pub fn predict_head<R: Rng + ?Sized>(
    g: &mut Graph,
    x: Var,
    w: Var,
    b: Var,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let flat = g.reshape(x, &[s[0], s[1..].iter().product()])?;
    let h = g.dropout(flat, dropout, training, rng)?;
    let logits = g.matmul(h, w)?;
    let logits = g.add_broadcast(logits, b)?;
    g.sigmoid(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn identity_kernel_gives_patch_mean() {
        let mut g = Graph::new();
        let patches = g.constant(t(&[2, 4], vec![1.0, 2.0, 3.0, 6.0, -1.0, 0.0, 1.0, 4.0]));
        let w = g.param(t(&[1, 1], vec![1.0]));
        let b = g.param(Tensor::zeros([1]));
        let e = embed_patches(&mut g, patches, &[(w, b)]).unwrap();
        assert_eq!(g.value(e).data(), &[3.0, 1.0]);
    }

    #[test]
    fn embedding_width_is_kernels_times_features() {
        let mut g = Graph::new();
        let mut r = rng();
        let patches = g.constant(Tensor::uniform([5, 8], 1.0, &mut r));
        let kernels: Vec<(Var, Var)> = [3, 5, 7]
            .iter()
            .map(|&k| (g.param(Tensor::uniform([16, k], 0.3, &mut r)), g.param(Tensor::zeros([16]))))
            .collect();
        let e = embed_patches(&mut g, patches, &kernels).unwrap();
        assert_eq!(g.shape(e), &[5, 48]);
    }

    #[test]
    fn projection_identity_and_zero_input() {
        let mut g = Graph::new();
        let mut r = rng();
        let e_val = Tensor::uniform([1, 3, 4], 1.0, &mut r);
        let e = g.constant(e_val.clone());
        let mut eye = vec![0.0; 16];
        for i in 0..4 {
            eye[i * 5] = 1.0;
        }
        let w_p = g.param(t(&[4, 4], eye));
        let w_pos = g.param(Tensor::zeros([3, 4]));
        let out = project_position(&mut g, e, w_p, w_pos).unwrap();
        assert_eq!(g.value(out), &e_val);

        let zero = g.constant(Tensor::zeros([2, 3, 4]));
        let pos_val = Tensor::uniform([3, 4], 1.0, &mut r);
        let w_pos = g.param(pos_val.clone());
        let out = project_position(&mut g, zero, w_p, w_pos).unwrap();
        for b in 0..2 {
            assert_eq!(&g.value(out).data()[b * 12..(b + 1) * 12], pos_val.data());
        }
    }

    #[test]
    fn single_patch_attention_is_value_path() {
        let mut g = Graph::new();
        let mut r = rng();
        let x = g.constant(Tensor::uniform([3, 1, 4], 1.0, &mut r));
        let heads: Vec<_> = (0..2)
            .map(|_| {
                let mut m = || g.param(Tensor::uniform([4, 2], 0.5, &mut r));
                (m(), m(), m())
            })
            .collect();
        let w_o = g.param(Tensor::uniform([4, 4], 0.5, &mut r));
        let mut attn = Vec::new();
        let out = multi_head_attention(&mut g, x, &heads, w_o, Some(&mut attn)).unwrap();
        assert!(attn.iter().all(|a| a.data().iter().all(|&v| v == 1.0)));

        let flat = g.reshape(x, &[3, 4]).unwrap();
        let vs: Vec<Var> = heads.iter().map(|h| g.matmul(flat, h.2).unwrap()).collect();
        let cat = g.concat(&vs, 1).unwrap();
        let expected = g.matmul(cat, w_o).unwrap();
        assert!(g.value(out).data().iter().zip(g.value(expected).data()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_se_weights_halve_input() {
        let mut g = Graph::new();
        let mut r = rng();
        let xv = Tensor::uniform([2, 2, 3, 4], 1.0, &mut r);
        let x = g.constant(xv.clone());
        let w1 = g.param(Tensor::zeros([2, 2]));
        let w2 = g.param(Tensor::zeros([2, 2]));
        let (y, gates) = se_recalibrate(&mut g, x, w1, w2).unwrap();
        assert!(g.value(gates).data().iter().all(|&s| s == 0.5));
        assert!(g.value(y).data().iter().zip(xv.data()).all(|(a, b)| *a == b / 2.0));

        let zero = g.constant(Tensor::zeros([1, 2, 3, 4]));
        let w1 = g.param(Tensor::uniform([2, 2], 1.0, &mut r));
        let (y, _) = se_recalibrate(&mut g, zero, w1, w2).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn head_zero_weights_and_bias_monotonicity() {
        let mut g = Graph::new();
        let mut r = rng();
        let x = g.constant(Tensor::uniform([3, 2, 7, 16], 1.0, &mut r));
        let w = g.param(Tensor::zeros([224, 1]));
        let b0 = g.param(Tensor::zeros([1]));
        let y = predict_head(&mut g, x, w, b0, 0.5, false, &mut r).unwrap();
        assert_eq!(g.value(y).data(), &[0.5; 3]);

        let w = g.param(Tensor::uniform([224, 1], 0.1, &mut r));
        let y0 = predict_head(&mut g, x, w, b0, 0.0, false, &mut r).unwrap();
        let b5 = g.param(Tensor::full([1], 5.0));
        let y5 = predict_head(&mut g, x, w, b5, 0.0, false, &mut r).unwrap();
        for (a, b) in g.value(y0).data().iter().zip(g.value(y5).data()) {
            assert!(b > a);
        }
    }
}
