//! Comparison models fit on the same window samples as the main network:
//! logistic and Poisson regression on the flattened window plus an
//! intercept, and a trend/seasonal linear model.

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::BCE_EPS;
use crate::tensor::{Graph, Tensor, Var};
use crate::train::Classifier;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;
/// Ridge added to the curvature matrix only, never to the objective.
const CURVATURE_JITTER: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlmFamily {
    /// Logit link, 0/1 targets.
    Bernoulli,
    /// Log link, count targets.
    Poisson,
}

/// Fitted generalized linear model. `weights[0]` is the intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct GlmFit {
    pub family: GlmFamily,
    pub weights: Vec<f64>,
    pub l2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

impl GlmFit {
    pub fn linear_predictor(&self, features: &[f64]) -> f64 {
        self.weights[0] + self.weights[1..].iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Probability for Bernoulli, expected count for Poisson.
    pub fn predict_one(&self, features: &[f64]) -> f64 {
        let eta = self.linear_predictor(features);
        match self.family {
            GlmFamily::Bernoulli => sigmoid(eta),
            GlmFamily::Poisson => eta.exp(),
        }
    }

    pub fn predict(&self, samples: &[WindowSample]) -> Vec<f64> {
        samples.iter().map(|s| self.predict_one(&s.x)).collect()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^v)` without overflow.
fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

/// Penalized log-likelihood, its gradient and the negated Hessian.
fn objective(
    family: GlmFamily,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    l2: f64,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let eta = x * w;
    let (mut ll, mut resid, mut curv) = (0.0, DVector::zeros(y.len()), DVector::zeros(y.len()));
    for i in 0..y.len() {
        let (e, t) = (eta[i], y[i]);
        match family {
            GlmFamily::Bernoulli => {
                let p = sigmoid(e);
                ll += t * e - softplus(e);
                resid[i] = t - p;
                curv[i] = p * (1.0 - p);
            }
            GlmFamily::Poisson => {
                let mu = e.exp();
                ll += t * e - mu;
                resid[i] = t - mu;
                curv[i] = mu;
            }
        }
    }
    let mut penalty = w.clone();
    penalty[0] = 0.0;
    let value = ll - 0.5 * l2 * penalty.norm_squared();
    let grad = x.transpose() * resid - l2 * &penalty;
    let mut scaled = x.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= curv[i];
    }
    let mut neg_hess = x.transpose() * scaled;
    for j in 1..w.len() {
        neg_hess[(j, j)] += l2;
    }
    (value, grad, neg_hess)
}

/// Maximizes the L2-penalized (intercept unpenalized) log-likelihood by
/// ascent along the Newton direction, halving the step until the objective
/// improves. Stops when the gradient norm drops below [`GRAD_TOLERANCE`] or
/// after [`MAX_ITERATIONS`]; failing to converge is reported, not an error.
pub fn fit_glm(family: GlmFamily, features: &[&[f64]], targets: &[f64], l2: f64) -> Result<GlmFit> {
    let n = features.len();
    if n == 0 || n != targets.len() {
        return Err(Error::InvalidArgument(format!("{n} feature rows for {} targets", targets.len())));
    }
    if !(l2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("l2 must be non-negative, got {l2}")));
    }
    let k = features[0].len();
    if features.iter().any(|f| f.len() != k) {
        return Err(Error::Shape("feature rows differ in length".into()));
    }
    if features.iter().flat_map(|f| f.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("non-finite feature".into()));
    }
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
    let y = DVector::from_column_slice(targets);
    let mut w = DVector::zeros(k + 1);
    let (mut value, mut grad, mut neg_hess) = objective(family, &x, &y, &w, l2);
    let mut iterations = 0;
    while grad.norm() >= GRAD_TOLERANCE && iterations < MAX_ITERATIONS {
        iterations += 1;
        for j in 0..=k {
            neg_hess[(j, j)] += CURVATURE_JITTER;
        }
        let direction = match neg_hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => grad.clone(),
        };
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-12 {
            let candidate = &w + step * &direction;
            let next = objective(family, &x, &y, &candidate, l2);
            if next.0.is_finite() && next.0 >= value {
                w = candidate;
                (value, grad, neg_hess) = next;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let grad_norm = grad.norm();
    Ok(GlmFit {
        family,
        weights: w.iter().copied().collect(),
        l2,
        iterations,
        converged: grad_norm < GRAD_TOLERANCE,
        grad_norm,
    })
}

/// Logistic regression of the window label on the flattened window.
pub fn logistic_fit(samples: &[WindowSample], l2: f64) -> Result<GlmFit> {
    let pos = samples.iter().filter(|s| s.y).count();
    if pos == 0 || pos == samples.len() {
        return Err(Error::Degenerate(format!(
            "logistic regression needs both classes ({pos} positives of {})",
            samples.len()
        )));
    }
    let features: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let y: Vec<f64> = samples.iter().map(|s| f64::from(u8::from(s.y))).collect();
    fit_glm(GlmFamily::Bernoulli, &features, &y, l2)
}

/// Poisson regression of the summed horizon LE count on the flattened window.
pub fn poisson_fit(samples: &[WindowSample], l2: f64) -> Result<GlmFit> {
    let features: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let y: Vec<f64> = samples.iter().map(|s| f64::from(s.horizon_le)).collect();
    fit_glm(GlmFamily::Poisson, &features, &y, l2)
}

/// Centered moving average per channel of a day-major `n x d` window with
/// edge replication, and the remainder. Returns `(trend, seasonal)`.
pub fn decompose(x: &[f64], lookback: usize, channels: usize, window: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!("moving-average window must be odd, got {window}")));
    }
    if window > lookback {
        return Err(Error::InvalidArgument(format!("moving-average window {window} exceeds lookback {lookback}")));
    }
    let half = (window / 2) as isize;
    let last = lookback as isize - 1;
    let mut trend = vec![0.0; x.len()];
    for t in 0..lookback {
        for c in 0..channels {
            let total: f64 = (-half..=half)
                .map(|o| x[(t as isize + o).clamp(0, last) as usize * channels + c])
                .sum();
            trend[t * channels + c] = total / window as f64;
        }
    }
    let seasonal = x.iter().zip(&trend).map(|(a, b)| a - b).collect();
    Ok((trend, seasonal))
}

/// `sigmoid(w_trend · trend + w_seasonal · seasonal + b)` over the flattened
/// decomposition of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DLinear {
    pub lookback: usize,
    pub channels: usize,
    pub window: usize,
    /// `[w_trend (n*d, 1), w_seasonal (n*d, 1), bias (1)]`
    params: Vec<Tensor>,
}

impl DLinear {
    pub const DEFAULT_WINDOW: usize = 5;

    /// Zero-initialized model.
    pub fn new(lookback: usize, channels: usize, window: usize) -> Result<Self> {
        decompose(&vec![0.0; lookback * channels], lookback, channels, window)?;
        let width = lookback * channels;
        Ok(Self {
            lookback,
            channels,
            window,
            params: vec![Tensor::zeros([width, 1]), Tensor::zeros([width, 1]), Tensor::zeros([1])],
        })
    }

    fn decomposed_batch(&self, batch: &[&WindowSample]) -> Result<(Tensor, Tensor)> {
        let width = self.lookback * self.channels;
        let mut trend = Vec::with_capacity(batch.len() * width);
        let mut seasonal = Vec::with_capacity(batch.len() * width);
        for s in batch {
            if s.x.len() != width {
                return Err(Error::Shape(format!("window of {} values, expected {width}", s.x.len())));
            }
            let (t, r) = decompose(&s.x, self.lookback, self.channels, self.window)?;
            trend.extend(t);
            seasonal.extend(r);
        }
        Ok((Tensor::new(vec![batch.len(), width], trend)?, Tensor::new(vec![batch.len(), width], seasonal)?))
    }

    fn forward_graph(&self, g: &mut Graph, params: &[Var], batch: &[&WindowSample]) -> Result<Var> {
        let (trend, seasonal) = self.decomposed_batch(batch)?;
        let (t, s) = (g.constant(trend), g.constant(seasonal));
        let zt = g.matmul(t, params[0])?;
        let zs = g.matmul(s, params[1])?;
        let z = g.add(zt, zs)?;
        let z = g.add_broadcast(z, params[2])?;
        g.sigmoid(z)
    }
}

impl Classifier for DLinear {
    fn params(&self) -> &[Tensor] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    fn batch_loss(&self, batch: &[&WindowSample], pos_weight: f64, _: &mut ChaCha8Rng) -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|t| g.param(t.clone())).collect();
        let probs = self.forward_graph(&mut g, &params, batch)?;
        let y: Vec<f64> = batch.iter().map(|s| f64::from(u8::from(s.y))).collect();
        let loss = g.weighted_bce(probs, &y, pos_weight, BCE_EPS)?;
        g.backward(loss)?;
        let grads = params.iter().map(|&v| g.grad(v).cloned().expect("every weight reaches the loss")).collect();
        Ok((g.value(loss).item(), grads))
    }

    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let params: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
        let refs: Vec<&WindowSample> = samples.iter().collect();
        let out = self.forward_graph(&mut g, &params, &refs)?;
        Ok(g.value(out).data().to_vec())
    }
}

/// Baseline kinds reported next to the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Logistic,
    Poisson,
    DLinear,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Logistic, BaselineKind::Poisson, BaselineKind::DLinear];

    pub fn key(self) -> &'static str {
        match self {
            BaselineKind::Logistic => "logistic",
            BaselineKind::Poisson => "poisson",
            BaselineKind::DLinear => "dlinear",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};

    fn sample(x: Vec<f64>, y: bool, le: u32) -> WindowSample {
        let n = x.len();
        WindowSample {
            x,
            lookback: n,
            channels: 1,
            y,
            horizon: 1,
            anchor_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            horizon_le: le,
        }
    }

    /// Gradient of the penalized objective, recomputed from scratch.
    fn naive_gradient(fit: &GlmFit, features: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; fit.weights.len()];
        for (f, &t) in features.iter().zip(targets) {
            let r = t - fit.predict_one(f);
            g[0] += r;
            for (j, v) in f.iter().enumerate() {
                g[j + 1] += r * v;
            }
        }
        for j in 1..g.len() {
            g[j] -= fit.l2 * fit.weights[j];
        }
        g
    }

    fn random_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<Vec<f64>> = (0..120).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let binary = features.iter().map(|f| f64::from(u8::from(f[0] + 0.5 * rng.gen_range(-1.0..1.0) > 0.0))).collect();
        let counts = features.iter().map(|f| (2.0 * (f[1] + 1.0) + rng.gen_range(0.0..2.0)).floor()).collect();
        (features, binary, counts)
    }

    #[test]
    fn logistic_monotone_on_separable_points() {
        let s = vec![sample(vec![-1.0], false, 0), sample(vec![1.0], true, 0)];
        let fit = logistic_fit(&s, 1.0).unwrap();
        let p = fit.predict(&s);
        assert!(p[1] > p[0]);
        assert!(fit.converged);
        let all_neg = vec![sample(vec![-1.0], false, 0), sample(vec![1.0], false, 0)];
        assert!(matches!(logistic_fit(&all_neg, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gradients_vanish_at_optimum() {
        for seed in 0..3 {
            let (features, binary, counts) = random_problem(seed);
            let rows: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
            for (family, targets) in [(GlmFamily::Bernoulli, &binary), (GlmFamily::Poisson, &counts)] {
                let fit = fit_glm(family, &rows, targets, 1.0).unwrap();
                assert!(fit.converged, "{family:?}");
                let g = naive_gradient(&fit, &features, targets);
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm < GRAD_TOLERANCE, "{family:?} {norm}");
            }
        }
    }

    #[test]
    fn objective_not_below_zero_weights() {
        let (features, binary, counts) = random_problem(7);
        let rows: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
        for (family, targets) in [(GlmFamily::Bernoulli, &binary), (GlmFamily::Poisson, &counts)] {
            let x = DMatrix::from_fn(rows.len(), 5, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
            let y = DVector::from_column_slice(targets);
            let fit = fit_glm(family, &rows, targets, 1.0).unwrap();
            let at_zero = objective(family, &x, &y, &DVector::zeros(5), 1.0).0;
            let at_fit = objective(family, &x, &y, &DVector::from_column_slice(&fit.weights), 1.0).0;
            assert!(at_fit >= at_zero);
        }
    }

    #[test]
    fn poisson_intercept_only_recovers_mean() {
        let zero = GlmFit { family: GlmFamily::Poisson, weights: vec![0.0, 0.0], l2: 0.0, iterations: 0, converged: true, grad_norm: 0.0 };
        assert_eq!(zero.predict_one(&[3.0]), 1.0);
        let rows: Vec<&[f64]> = vec![&[]; 10];
        let fit = fit_glm(GlmFamily::Poisson, &rows, &[4.0; 10], 1.0).unwrap();
        assert!((fit.predict_one(&[]) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn decomposition_identities() {
        let (trend, seasonal) = decompose(&[2.0; 12], 6, 2, 5).unwrap();
        assert!(trend.iter().all(|&t| (t - 2.0).abs() < 1e-15));
        assert!(seasonal.iter().all(|&s| s.abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (trend, seasonal) = decompose(&x, 10, 2, 5).unwrap();
        for i in 0..20 {
            assert!((trend[i] + seasonal[i] - x[i]).abs() < 1e-12);
        }
        // first day of channel 0: x0, x0, x0, x1, x2
        let expected = (3.0 * x[0] + x[2] + x[4]) / 5.0;
        assert!((trend[0] - expected).abs() < 1e-12);
        assert!(decompose(&x, 10, 2, 11).is_err());
        assert!(decompose(&x, 10, 2, 4).is_err());
    }

    #[test]
    fn dlinear_predicts_half_at_init_and_learns() {
        use crate::data::Splits;
        use crate::train::{evaluate, train_loop, TrainConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut make = |n: usize| -> Vec<WindowSample> {
            (0..n)
                .map(|i| {
                    let y = i % 2 == 0;
                    let level = if y { 1.0 } else { -1.0 };
                    let mut s = sample((0..8).map(|_| level + rng.gen_range(-1.0..1.0)).collect(), y, 0);
                    s.anchor_date = s.anchor_date + chrono::Days::new(i as u64);
                    s
                })
                .collect()
        };
        let splits = Splits { train: make(80), val: make(20), test: make(20) };
        let mut model = DLinear::new(8, 1, 5).unwrap();
        assert!(model.predict(&splits.test).unwrap().iter().all(|&p| p == 0.5));
        train_loop(&mut model, &splits, &TrainConfig { batch_size: 16, max_epochs: 10, ..Default::default() }).unwrap();
        assert!(evaluate(&model, &splits.test).unwrap().roc_auc > 0.9);
    }
}
