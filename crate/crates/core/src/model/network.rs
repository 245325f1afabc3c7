use super::layers::{self, EncoderWeights};
use super::{ModelConfig, BCE_EPS};
use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Samples per forward pass in [`SeizureFormer::predict`].
const PREDICT_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq)]
enum EmbedIdx {
    Cnn(Vec<(usize, usize)>),
    Linear(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
struct LayerIdx {
    ln1: (usize, usize),
    heads: Vec<(usize, usize, usize)>,
    w_o: usize,
    ln2: (usize, usize),
    ff1: (usize, usize),
    ff2: (usize, usize),
}

/// Positions of each weight in the flat parameter list.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    embed: EmbedIdx,
    w_p: usize,
    w_pos: usize,
    cvt: Option<usize>,
    layers: Vec<LayerIdx>,
    se: Option<(usize, usize)>,
    head: (usize, usize),
}

struct Builder<'a> {
    names: Vec<String>,
    params: Vec<Tensor>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn push(&mut self, name: String, t: Tensor) -> usize {
        self.names.push(name);
        self.params.push(t);
        self.params.len() - 1
    }

    /// Weight drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    fn weight(&mut self, name: String, shape: &[usize], fan_in: usize) -> usize {
        let t = Tensor::uniform(shape.to_vec(), 1.0 / (fan_in as f64).sqrt(), self.rng);
        self.push(name, t)
    }

    fn zeros(&mut self, name: String, shape: &[usize]) -> usize {
        self.push(name, Tensor::zeros(shape.to_vec()))
    }

    fn layer_norm(&mut self, prefix: &str, width: usize) -> (usize, usize) {
        let gamma = self.push(format!("{prefix}.gamma"), Tensor::full([width], 1.0));
        (gamma, self.zeros(format!("{prefix}.beta"), &[width]))
    }
}

fn build(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Tensor>, Layout) {
    let (d, p, dm) = (cfg.channels, cfg.patches(), cfg.embed_dim);
    let d_emb = cfg.embed_features();
    let mut b = Builder { names: Vec::new(), params: Vec::new(), rng };

    let embed = if cfg.use_cnn_embed {
        EmbedIdx::Cnn(
            cfg.kernel_sizes
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let w = b.weight(format!("embed.conv{i}.weight"), &[cfg.kernel_features, k], k);
                    (w, b.zeros(format!("embed.conv{i}.bias"), &[cfg.kernel_features]))
                })
                .collect(),
        )
    } else {
        let w = b.weight("embed.linear.weight".into(), &[cfg.patch_len, d_emb], cfg.patch_len);
        EmbedIdx::Linear(w, b.zeros("embed.linear.bias".into(), &[d_emb]))
    };
    let w_p = b.weight("proj.weight".into(), &[d_emb, dm], d_emb);
    let w_pos = b.zeros("proj.position".into(), &[p, dm]);
    let (kd, kp) = cfg.cvt_kernel;
    // Centered delta: the block starts as the identity map.
    let cvt = cfg.use_cvt.then(|| {
        let mut k = Tensor::zeros(vec![kd, kp]);
        k.data_mut()[(kd / 2) * kp + kp / 2] = 1.0;
        b.push("cvt.kernel".into(), k)
    });

    let dk = cfg.head_dim();
    let layers = (0..cfg.encoder_layers)
        .map(|l| {
            let pre = format!("encoder.{l}");
            let ln1 = b.layer_norm(&format!("{pre}.ln1"), dm);
            let heads = (0..cfg.heads)
                .map(|j| {
                    let q = b.weight(format!("{pre}.head{j}.query"), &[dm, dk], dm);
                    let k = b.weight(format!("{pre}.head{j}.key"), &[dm, dk], dm);
                    (q, k, b.weight(format!("{pre}.head{j}.value"), &[dm, dk], dm))
                })
                .collect();
            let w_o = b.weight(format!("{pre}.out"), &[cfg.heads * dk, dm], cfg.heads * dk);
            let ln2 = b.layer_norm(&format!("{pre}.ln2"), dm);
            let ff1 = (
                b.weight(format!("{pre}.ff1.weight"), &[dm, cfg.ffn_dim], dm),
                b.zeros(format!("{pre}.ff1.bias"), &[cfg.ffn_dim]),
            );
            let ff2 = (
                b.weight(format!("{pre}.ff2.weight"), &[cfg.ffn_dim, dm], cfg.ffn_dim),
                b.zeros(format!("{pre}.ff2.bias"), &[dm]),
            );
            LayerIdx { ln1, heads, w_o, ln2, ff1, ff2 }
        })
        .collect();
    let se = cfg.use_se.then(|| {
        let r = cfg.se_reduction;
        (b.weight("se.w1".into(), &[d, r], d), b.weight("se.w2".into(), &[r, d], r))
    });
    let flat = d * p * dm;
    let head = (b.weight("head.weight".into(), &[flat, 1], flat), b.zeros("head.bias".into(), &[1]));
    let layout = Layout { embed, w_p, w_pos, cvt, layers, se, head };
    (b.names, b.params, layout)
}

/// Intermediate values recorded by [`SeizureFormer::forward_trace`].
#[derive(Clone, Debug, Default)]
pub struct ForwardTrace {
    /// Per-channel shapes after each stage, then the `[B, 1]` output.
    pub shapes: Vec<(&'static str, Vec<usize>)>,
    /// One `[B*d, p, p]` matrix per encoder layer and head, layer-major.
    pub attention: Vec<Tensor>,
    /// `[B, d]` channel gates, when the SE block is on.
    pub se_gates: Option<Tensor>,
    /// `[B, d, p, D]` encoder output, before recalibration.
    pub encoded: Option<Tensor>,
    /// `[B, 1]` probabilities.
    pub output: Option<Tensor>,
}

/// The patch-attention risk classifier with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SeizureFormer {
    config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

impl SeizureFormer {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (names, params, layout) = build(&config, &mut rng);
        Ok(Self { config, names, params, layout })
    }

    /// Rebuilds a model from named tensors, which must match the layout
    /// implied by `config` exactly.
    pub fn from_named(config: ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if named.len() != model.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                named.len()
            )));
        }
        for (i, (name, t)) in named.into_iter().enumerate() {
            if name != model.names[i] || t.shape() != model.params[i].shape() {
                return Err(Error::Config(format!(
                    "parameter {i}: expected {} {:?}, found {name} {:?}",
                    model.names[i],
                    model.params[i].shape(),
                    t.shape()
                )));
            }
            model.params[i] = t;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.params[i])
    }

    pub fn num_weights(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Stacks window samples into a `[B, d, n]` channel-major batch.
    pub fn encode_batch(&self, samples: &[&WindowSample]) -> Result<Tensor> {
        encode_windows(samples, self.config.channels, self.config.lookback)
    }

    /// Records the network on `g`. `params` are graph handles for
    /// [`Self::params`] in order; `x` is `[B, d, n]`. Returns `[B, 1]`.
    pub fn forward_graph<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        params: &[Var],
        x: Var,
        training: bool,
        rng: &mut R,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<Var> {
        let cfg = &self.config;
        let l = &self.layout;
        let sx = g.shape(x).to_vec();
        if sx.len() != 3 || sx[1] != cfg.channels || sx[2] != cfg.lookback {
            return Err(Error::Shape(format!(
                "expected input [B, {}, {}], got {sx:?}",
                cfg.channels, cfg.lookback
            )));
        }
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!("{} parameter handles for {} parameters", params.len(), self.params.len())));
        }
        let (batch, d, p, dm) = (sx[0], cfg.channels, cfg.patches(), cfg.embed_dim);
        let groups = batch * d;
        let mut record = |name: &'static str, shape: Vec<usize>| {
            if let Some(t) = trace.as_deref_mut() {
                t.shapes.push((name, shape));
            }
        };

        let series = g.reshape(x, &[groups, cfg.lookback])?;
        let patches = g.patchify(series, cfg.patch_len, cfg.stride)?;
        record("patches", vec![p, cfg.patch_len]);
        let rows = g.reshape(patches, &[groups * p, cfg.patch_len])?;
        let emb = match &l.embed {
            EmbedIdx::Cnn(kernels) => {
                let kv: Vec<(Var, Var)> = kernels.iter().map(|&(w, b)| (params[w], params[b])).collect();
                layers::embed_patches(g, rows, &kv)?
            }
            EmbedIdx::Linear(w, b) => layers::linear_embed(g, rows, params[*w], params[*b])?,
        };
        let width = g.shape(emb)[1];
        record("embedding", vec![p, width]);
        let emb = g.reshape(emb, &[groups, p, width])?;
        let h = layers::project_position(g, emb, params[l.w_p], params[l.w_pos])?;
        record("projection", vec![p, dm]);

        let mut h = g.reshape(h, &[batch, d, p, dm])?;
        record("stacked", vec![d, p, dm]);
        if let Some(k) = l.cvt {
            h = layers::cvt_conv(g, h, params[k])?;
        }
        record("cvt", vec![d, p, dm]);

        let mut h = g.reshape(h, &[groups, p, dm])?;
        for layer in &l.layers {
            let w = EncoderWeights {
                ln1: (params[layer.ln1.0], params[layer.ln1.1]),
                heads: layer.heads.iter().map(|&(q, k, v)| (params[q], params[k], params[v])).collect(),
                w_o: params[layer.w_o],
                ln2: (params[layer.ln2.0], params[layer.ln2.1]),
                ff1: (params[layer.ff1.0], params[layer.ff1.1]),
                ff2: (params[layer.ff2.0], params[layer.ff2.1]),
            };
            let store = trace.as_deref_mut().map(|t| &mut t.attention);
            h = layers::encoder_layer(g, h, &w, store)?;
        }
        let mut h = g.reshape(h, &[batch, d, p, dm])?;
        if let Some(t) = trace.as_deref_mut() {
            t.shapes.push(("encoder", vec![d, p, dm]));
            t.encoded = Some(g.value(h).clone());
        }
        if let Some((w1, w2)) = l.se {
            let (y, gates) = layers::se_recalibrate(g, h, params[w1], params[w2])?;
            if let Some(t) = trace.as_deref_mut() {
                t.se_gates = Some(g.value(gates).clone());
            }
            h = y;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.shapes.push(("se", vec![d, p, dm]));
        }
        let out = layers::predict_head(g, h, params[l.head.0], params[l.head.1], cfg.dropout, training, rng)?;
        if let Some(t) = trace {
            t.shapes.push(("output", g.shape(out).to_vec()));
            t.output = Some(g.value(out).clone());
        }
        Ok(out)
    }

    /// Forward pass on a fresh graph; returns `[B, 1]` probabilities.
    pub fn forward<R: Rng + ?Sized>(&self, x: &Tensor, training: bool, rng: &mut R) -> Result<Tensor> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
        let xv = g.constant(x.clone());
        let out = self.forward_graph(&mut g, &params, xv, training, rng, None)?;
        Ok(g.value(out).clone())
    }

    /// Evaluation-mode forward that records intermediate values.
    pub fn forward_trace(&self, x: &Tensor) -> Result<ForwardTrace> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
        let xv = g.constant(x.clone());
        let mut trace = ForwardTrace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.forward_graph(&mut g, &params, xv, false, &mut rng, Some(&mut trace))?;
        Ok(trace)
    }

    /// Weighted BCE of the `[B, 1]` output against `targets` and its
    /// gradient for every parameter, in parameter order.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        targets: &[f64],
        pos_weight: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|t| g.param(t.clone())).collect();
        let xv = g.constant(x.clone());
        let probs = self.forward_graph(&mut g, &params, xv, training, rng, None)?;
        let loss = g.weighted_bce(probs, targets, pos_weight, BCE_EPS)?;
        g.backward(loss)?;
        let grads = params
            .iter()
            .zip(&self.params)
            .map(|(&v, t)| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
            .collect();
        Ok((g.value(loss).item(), grads))
    }

    /// All parameters concatenated in order.
    pub fn flat_params(&self) -> Tensor {
        let data: Vec<f64> = self.params.iter().flat_map(|t| t.data().iter().copied()).collect();
        Tensor::from_raw(vec![data.len()], data)
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_weights() {
            return Err(Error::Shape(format!("{} values for {} weights", flat.len(), self.num_weights())));
        }
        let mut offset = 0;
        for t in &mut self.params {
            let n = t.numel();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Evaluation-mode probabilities, one per sample.
    pub fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(PREDICT_CHUNK) {
            let refs: Vec<&WindowSample> = chunk.iter().collect();
            let x = self.encode_batch(&refs)?;
            out.extend_from_slice(self.forward(&x, false, &mut rng)?.data());
        }
        Ok(out)
    }
}

/// `[B, channels, lookback]` batch from day-major window samples.
pub fn encode_windows(samples: &[&WindowSample], channels: usize, lookback: usize) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut data = Vec::with_capacity(samples.len() * channels * lookback);
    for s in samples {
        if s.channels != channels || s.lookback != lookback {
            return Err(Error::Shape(format!(
                "sample is {}x{}, model expects lookback {lookback} with {channels} channels",
                s.lookback, s.channels
            )));
        }
        for c in 0..channels {
            data.extend((0..lookback).map(|t| s.value(t, c)));
        }
    }
    Tensor::new(vec![samples.len(), channels, lookback], data)
}
