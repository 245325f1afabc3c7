//! Finite-difference gradient checks over every graph operation, every
//! model layer and the assembled network.

use crate::error::Result;
use crate::model::layers::{self, EncoderWeights};
use crate::model::{ModelConfig, SeizureFormer, BCE_EPS};
use crate::tensor::gradcheck::{finite_difference_error, grad_check_with_fault, DEFAULT_EPSILON, TOLERANCE};
use crate::tensor::{Graph, Padding, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one named check: the worst relative error over every input.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error < TOLERANCE
    }

    /// `name  error  PASS|FAIL`, as printed by the command line.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        format!("{:<24} {:.3e}  {verdict}", self.name, self.max_error)
    }
}

/// Small network used by the full-model check: batch 2, two channels,
/// 16 days, P=4, S=2, D=8, two heads, one layer.
pub fn gradcheck_model_config() -> ModelConfig {
    ModelConfig {
        lookback: 16,
        channels: 2,
        patch_len: 4,
        stride: 2,
        kernel_sizes: vec![1, 3],
        kernel_features: 3,
        embed_dim: 8,
        heads: 2,
        encoder_layers: 1,
        ffn_dim: 8,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

type Build = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

struct Case {
    name: &'static str,
    inputs: Vec<Tensor>,
    build: Build,
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape.to_vec(), 1.0, rng)
}

/// Contracts `y` with a fixed random tensor so the scalar depends on every
/// output coordinate with a distinct weight.
fn contract(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.constant(rand_tensor(g.shape(y), &mut rng));
    let p = g.mul(y, w)?;
    g.sum(p)
}

fn case<F>(name: &'static str, inputs: Vec<Tensor>, f: F) -> Case
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var> + 'static,
{
    let build: Build = Box::new(move |g, v| {
        let y = f(g, v)?;
        contract(g, y, 99)
    });
    Case { name, inputs, build }
}

/// Max error over all inputs, each checked with the others held constant.
fn run_case(c: &Case, fault: Option<(&str, f64)>) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for i in 0..c.inputs.len() {
        let err = grad_check_with_fault(
            |g, xi| {
                let vars: Vec<Var> = c
                    .inputs
                    .iter()
                    .enumerate()
                    .map(|(j, t)| if j == i { xi } else { g.constant(t.clone()) })
                    .collect();
                (c.build)(g, &vars)
            },
            &c.inputs[i],
            DEFAULT_EPSILON,
            fault,
        )?;
        worst = worst.max(err);
    }
    Ok(CheckResult { name: c.name.to_string(), max_error: worst })
}

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<Case> {
    let mut t = |shape: &[usize]| rand_tensor(shape, rng);
    let probs = Tensor::new([4, 1], vec![0.2, 0.7, 0.45, 0.9]).expect("static shape");
    vec![
        case("matmul", vec![t(&[3, 4]), t(&[4, 2])], |g, v| g.matmul(v[0], v[1])),
        case("batch_matmul", vec![t(&[2, 3, 4]), t(&[2, 4, 2])], |g, v| g.batch_matmul(v[0], v[1], false)),
        case("batch_matmul_t", vec![t(&[2, 3, 4]), t(&[2, 5, 4])], |g, v| g.batch_matmul(v[0], v[1], true)),
        case("add", vec![t(&[3, 4]), t(&[3, 4])], |g, v| g.add(v[0], v[1])),
        case("add_broadcast", vec![t(&[2, 3, 4]), t(&[3, 4])], |g, v| g.add_broadcast(v[0], v[1])),
        case("mul", vec![t(&[3, 4]), t(&[3, 4])], |g, v| g.mul(v[0], v[1])),
        case("mul_broadcast", vec![t(&[2, 3, 4]), t(&[2, 3])], |g, v| g.mul_broadcast(v[0], v[1])),
        case("scale", vec![t(&[5])], |g, v| g.scale(v[0], -1.7)),
        case("relu", vec![t(&[4, 5])], |g, v| g.relu(v[0])),
        case("sigmoid", vec![t(&[4, 5])], |g, v| g.sigmoid(v[0])),
        case("softmax", vec![t(&[3, 5])], |g, v| g.softmax(v[0])),
        case("layer_norm", vec![t(&[3, 6]), t(&[6]), t(&[6])], |g, v| {
            g.layer_norm(v[0], v[1], v[2], layers::LAYER_NORM_EPS)
        }),
        case("conv1d_same", vec![t(&[2, 7]), t(&[3, 3]), t(&[3])], |g, v| {
            g.conv1d(v[0], v[1], v[2], Padding::Same)
        }),
        case("conv1d_valid", vec![t(&[2, 7]), t(&[2, 4]), t(&[2])], |g, v| {
            g.conv1d(v[0], v[1], v[2], Padding::Valid)
        }),
        case("conv2d", vec![t(&[2, 3, 4, 2]), t(&[3, 3])], |g, v| g.conv2d(v[0], v[1])),
        case("mean", vec![t(&[2, 3, 4])], |g, v| g.mean(v[0], &[1, 2])),
        case("sum", vec![t(&[2, 3])], |g, v| {
            let s = g.sum(v[0])?;
            g.scale(s, 1.0)
        }),
        case("concat", vec![t(&[2, 3]), t(&[2, 2])], |g, v| g.concat(&[v[0], v[1]], 1)),
        case("reshape", vec![t(&[2, 6])], |g, v| g.reshape(v[0], &[3, 4])),
        case("patchify", vec![t(&[2, 9])], |g, v| g.patchify(v[0], 4, 2)),
        case("dropout", vec![t(&[4, 6])], |g, v| {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            g.dropout(v[0], 0.3, true, &mut rng)
        }),
        case("weighted_bce", vec![probs], |g, v| {
            let l = g.weighted_bce(v[0], &[1.0, 0.0, 1.0, 0.0], 2.5, BCE_EPS)?;
            g.reshape(l, &[1])
        }),
    ]
}

fn layer_cases(rng: &mut ChaCha8Rng) -> Vec<Case> {
    let mut t = |shape: &[usize]| rand_tensor(shape, rng);
    let (dm, dk) = (8, 4);
    let encoder_inputs = vec![
        t(&[2, 3, dm]),
        Tensor::full([dm], 1.0),
        t(&[dm]),
        t(&[dm, dk]),
        t(&[dm, dk]),
        t(&[dm, dk]),
        t(&[dm, dk]),
        t(&[dm, dk]),
        t(&[dm, dk]),
        t(&[2 * dk, dm]),
        Tensor::full([dm], 1.0),
        t(&[dm]),
        t(&[dm, 6]),
        t(&[6]),
        t(&[6, dm]),
        t(&[dm]),
    ];
    vec![
        case("embed_patches", vec![t(&[4, 6]), t(&[2, 1]), t(&[2]), t(&[2, 3]), t(&[2]), t(&[2, 5]), t(&[2])], |g, v| {
            layers::embed_patches(g, v[0], &[(v[1], v[2]), (v[3], v[4]), (v[5], v[6])])
        }),
        case("linear_embed", vec![t(&[4, 6]), t(&[6, 3]), t(&[3])], |g, v| layers::linear_embed(g, v[0], v[1], v[2])),
        case("project_position", vec![t(&[2, 3, 5]), t(&[5, 4]), t(&[3, 4])], |g, v| {
            layers::project_position(g, v[0], v[1], v[2])
        }),
        case("cvt_conv", vec![t(&[2, 2, 5, 3]), t(&[3, 3])], |g, v| layers::cvt_conv(g, v[0], v[1])),
        case("attention", vec![t(&[2, 3, dm]), t(&[dm, dk]), t(&[dm, dk]), t(&[dm, dk]), t(&[dk, dm])], |g, v| {
            layers::multi_head_attention(g, v[0], &[(v[1], v[2], v[3])], v[4], None)
        }),
        case("encoder_layer", encoder_inputs, |g, v| {
            let w = EncoderWeights {
                ln1: (v[1], v[2]),
                heads: vec![(v[3], v[4], v[5]), (v[6], v[7], v[8])],
                w_o: v[9],
                ln2: (v[10], v[11]),
                ff1: (v[12], v[13]),
                ff2: (v[14], v[15]),
            };
            layers::encoder_layer(g, v[0], &w, None)
        }),
        case("se_recalibrate", vec![t(&[2, 3, 2, 4]).shifted(0.5), t(&[3, 2]), t(&[2, 3])], |g, v| {
            Ok(layers::se_recalibrate(g, v[0], v[1], v[2])?.0)
        }),
        case("predict_head", vec![t(&[3, 2, 4]), t(&[8, 1]), t(&[1])], |g, v| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            layers::predict_head(g, v[0], v[1], v[2], 0.25, true, &mut rng)
        }),
    ]
}

trait Shifted {
    fn shifted(self, by: f64) -> Self;
}

impl Shifted for Tensor {
    /// Moves the SE squeeze away from the ReLU kink at zero.
    fn shifted(mut self, by: f64) -> Self {
        self.data_mut().iter_mut().for_each(|v| *v += by);
        self
    }
}

/// Weighted-BCE loss of the small network on a fixed two-sample batch,
/// checked against every parameter at once.
pub fn check_full_model(fault: Option<(&str, f64)>) -> Result<CheckResult> {
    let cfg = gradcheck_model_config();
    let mut model = SeizureFormer::new(cfg.clone(), 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for t in model.params_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(-0.2..0.2));
    }
    let x = Tensor::uniform([2, cfg.channels, cfg.lookback], 1.5, &mut rng);
    let targets = [1.0, 0.0];
    let pos_weight = 3.0;

    let mut g = Graph::new();
    if let Some((op, factor)) = fault {
        g.inject_backward_fault(op, factor);
    }
    let params: Vec<Var> = model.params().iter().map(|t| g.param(t.clone())).collect();
    let xv = g.constant(x.clone());
    let mut no_dropout = ChaCha8Rng::seed_from_u64(0);
    let probs = model.forward_graph(&mut g, &params, xv, false, &mut no_dropout, None)?;
    let loss = g.weighted_bce(probs, &targets, pos_weight, BCE_EPS)?;
    g.backward(loss)?;
    let analytic: Vec<f64> = params
        .iter()
        .zip(model.params())
        .flat_map(|(&v, t)| g.grad(v).map_or_else(|| vec![0.0; t.numel()], |gr| gr.data().to_vec()))
        .collect();
    let analytic = Tensor::new(vec![analytic.len()], analytic)?;

    let max_error = finite_difference_error(&analytic, &model.flat_params(), DEFAULT_EPSILON, |flat| {
        let mut m = model.clone();
        m.set_flat_params(flat.data())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(m.loss_and_gradients(&x, &targets, pos_weight, false, &mut rng)?.0)
    })?;
    Ok(CheckResult { name: "seizureformer".into(), max_error })
}

/// Every operation, every layer, then the full network. `fault` corrupts
/// the backward rule of the named graph operation.
pub fn gradcheck_suite(fault: Option<(&str, f64)>) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<Case> = op_cases(&mut rng).into_iter().chain(layer_cases(&mut rng)).collect();
    let mut out = cases.iter().map(|c| run_case(c, fault)).collect::<Result<Vec<_>>>()?;
    out.push(check_full_model(fault)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let results = gradcheck_suite(None).unwrap();
        for r in &results {
            assert!(r.passed(), "{}", r.line());
        }
        assert!(results.iter().any(|r| r.name == "seizureformer"));
    }

    #[test]
    fn injected_fault_is_reported() {
        let results = gradcheck_suite(Some(("softmax", 1.5))).unwrap();
        let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
        for name in ["softmax", "attention", "encoder_layer", "seizureformer"] {
            assert!(failed.contains(&name), "{name} not flagged: {failed:?}");
        }
        assert!(!failed.contains(&"matmul"));
    }
}
