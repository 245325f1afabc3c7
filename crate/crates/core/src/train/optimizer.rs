use crate::error::{Error, Result};
use crate::tensor::Tensor;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Adam with decoupled weight decay.
    #[default]
    Adam,
    /// Plain gradient descent with decoupled weight decay.
    Sgd,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::Config(format!("unknown optimizer `{s}` (expected adam|sgd)"))),
        }
    }
}

/// Update rule state. Both rules apply decay as `θ -= lr * wd * θ`
/// alongside the gradient step, using the pre-step `θ`.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|t| vec![0.0; t.numel()]).collect();
        Self { kind, lr, weight_decay, step: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() || params.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        if let Some((i, _)) = params.iter().zip(grads).enumerate().find(|(_, (p, g))| p.shape() != g.shape()) {
            return Err(Error::Shape(format!(
                "gradient {i} has shape {:?}, parameter has {:?}",
                grads[i].shape(),
                params[i].shape()
            )));
        }
        self.step += 1;
        let (lr, wd) = (self.lr, self.weight_decay);
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (j, (theta, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let update = match self.kind {
                    OptimizerKind::Sgd => gj,
                    OptimizerKind::Adam => {
                        m[j] = BETA1 * m[j] + (1.0 - BETA1) * gj;
                        v[j] = BETA2 * v[j] + (1.0 - BETA2) * gj * gj;
                        (m[j] / c1) / ((v[j] / c2).sqrt() + ADAM_EPS)
                    }
                };
                *theta -= lr * update + lr * wd * *theta;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_without_decay_leave_params() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut p = vec![Tensor::new([2], vec![1.5, -2.0]).unwrap()];
            let mut opt = Optimizer::new(kind, 0.1, 0.0, &p);
            opt.step(&mut p, &[Tensor::zeros([2])]).unwrap();
            assert_eq!(p[0].data(), &[1.5, -2.0]);
        }
    }

    #[test]
    fn step_descends_square() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut p = vec![Tensor::scalar(1.0)];
            let mut opt = Optimizer::new(kind, 0.01, 0.0, &p);
            let grad = Tensor::scalar(2.0 * p[0].item());
            opt.step(&mut p, &[grad]).unwrap();
            assert!(p[0].item().powi(2) < 1.0);
        }
        // first Adam step moves by exactly lr
        let mut p = vec![Tensor::scalar(1.0)];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 0.0, &p);
        opt.step(&mut p, &[Tensor::scalar(2.0)]).unwrap();
        assert!((p[0].item() - 0.99).abs() < 1e-9);
    }

    #[test]
    fn decay_shrinks_magnitude() {
        let mut p = vec![Tensor::new([2], vec![1.0, -1.0]).unwrap()];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.01, &p);
        opt.step(&mut p, &[Tensor::zeros([2])]).unwrap();
        assert!(p[0].data().iter().all(|v| v.abs() < 1.0));
        assert_eq!(p[0].data(), &[1.0 - 0.001, -1.0 + 0.001]);
    }

    #[test]
    fn mismatched_grads() {
        let mut p = vec![Tensor::zeros([2])];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.0, &p);
        assert!(opt.step(&mut p, &[]).is_err());
        assert!(opt.step(&mut p, &[Tensor::zeros([3])]).is_err());
    }
}
