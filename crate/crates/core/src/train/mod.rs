//! Mini-batch training with class-weighted loss, early stopping on
//! validation ROC AUC and seeded shuffling.

mod manifest;
mod optimizer;

pub use manifest::{sha256_hex, RunManifest};
pub use optimizer::{Optimizer, OptimizerKind};

use crate::data::{compute_pos_weight, Splits, WindowSample};
use crate::error::{Error, Result};
use crate::metrics::{roc_auc, MetricsReport};
use crate::model::{parse_value, SeizureFormer};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A model trainable by [`train_loop`].
pub trait Classifier: Clone {
    fn params(&self) -> &[Tensor];
    fn params_mut(&mut self) -> &mut [Tensor];
    /// Weighted BCE over `batch` in training mode and its gradient per
    /// parameter, in [`Classifier::params`] order.
    fn batch_loss(&self, batch: &[&WindowSample], pos_weight: f64, rng: &mut ChaCha8Rng) -> Result<(f64, Vec<Tensor>)>;
    /// Evaluation-mode scores, one per sample.
    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>>;
}

impl Classifier for SeizureFormer {
    fn params(&self) -> &[Tensor] {
        SeizureFormer::params(self)
    }

    fn params_mut(&mut self) -> &mut [Tensor] {
        SeizureFormer::params_mut(self)
    }

    fn batch_loss(&self, batch: &[&WindowSample], pos_weight: f64, rng: &mut ChaCha8Rng) -> Result<(f64, Vec<Tensor>)> {
        let x = self.encode_batch(batch)?;
        let y: Vec<f64> = batch.iter().map(|s| f64::from(u8::from(s.y))).collect();
        self.loss_and_gradients(&x, &y, pos_weight, true, rng)
    }

    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
        SeizureFormer::predict(self, samples)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            batch_size: 64,
            weight_decay: 1e-4,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    /// Large-batch setting used for full-cohort training.
    pub fn paper() -> Self {
        Self { batch_size: 2048, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size, patience and max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("optimizer", self.optimizer.as_str().to_string()),
        ]
    }

    /// Sets one field from text; `Ok(false)` for keys that are not
    /// training fields.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "optimizer" => self.optimizer = OptimizerKind::parse(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::EarlyStopped => "early_stopping",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    /// Mean batch loss per epoch.
    pub train_loss: Vec<f64>,
    pub val_roc_auc: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    pub pos_weight: f64,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.val_roc_auc.len()
    }

    pub fn best_val_roc_auc(&self) -> f64 {
        self.val_roc_auc[self.best_epoch]
    }
}

/// Tracks the best score seen; a score must strictly exceed the best to
/// count as an improvement, so ties keep the earliest epoch.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None }
    }

    /// Records `score` for `epoch`; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        match self.best {
            Some((_, best)) if score <= best => false,
            _ => {
                self.best = Some((epoch, score));
                true
            }
        }
    }

    /// True once `patience` epochs after the best have passed.
    pub fn should_stop(&self, epoch: usize) -> bool {
        self.best.is_some_and(|(b, _)| epoch - b >= self.patience)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Trains `model` in place and leaves it holding the parameters of the
/// best validation epoch.
pub fn train_loop<M: Classifier>(model: &mut M, splits: &Splits, cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    let train_labels: Vec<bool> = splits.train.iter().map(|s| s.y).collect();
    let pos_weight = compute_pos_weight(&train_labels)?;
    let val_labels: Vec<bool> = splits.val.iter().map(|s| s.y).collect();
    let val_pos = val_labels.iter().filter(|&&y| y).count();
    if val_pos == 0 || val_pos == val_labels.len() {
        return Err(Error::Degenerate(format!(
            "single-class validation split ({val_pos} positives, {} negatives)",
            val_labels.len() - val_pos
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.weight_decay, model.params());
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params().to_vec();
    let mut train_loss = Vec::new();
    let mut val_roc_auc = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&WindowSample> = idx.iter().map(|&i| &splits.train[i]).collect();
            let (loss, grads) = model.batch_loss(&batch, pos_weight, &mut rng)?;
            optimizer.step(model.params_mut(), &grads)?;
            total += loss;
            batches += 1;
        }
        train_loss.push(total / batches as f64);

        let auc = roc_auc(&model.predict(&splits.val)?, &val_labels)?;
        val_roc_auc.push(auc);
        if stopper.observe(epoch, auc) {
            best_params = model.params().to_vec();
        }
        if stopper.should_stop(epoch) {
            stop_reason = StopReason::EarlyStopped;
            break;
        }
    }
    model.params_mut().clone_from_slice(&best_params);
    Ok(TrainHistory {
        train_loss,
        val_roc_auc,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        stop_reason,
        pos_weight,
    })
}

/// Evaluation-mode scores and both AUCs over `samples`.
pub fn evaluate<M: Classifier>(model: &M, samples: &[WindowSample]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on zero samples".into()));
    }
    let scores = model.predict(samples)?;
    MetricsReport::compute(scores, samples.iter().map(|s| s.y).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use chrono::NaiveDate;

    /// Logistic regression on the window mean; small and fast to train.
    #[derive(Clone, Debug)]
    struct MeanLogit {
        params: Vec<Tensor>,
    }

    impl Classifier for MeanLogit {
        fn params(&self) -> &[Tensor] {
            &self.params
        }
        fn params_mut(&mut self) -> &mut [Tensor] {
            &mut self.params
        }
        fn batch_loss(&self, batch: &[&WindowSample], pw: f64, _: &mut ChaCha8Rng) -> Result<(f64, Vec<Tensor>)> {
            let (w, b) = (self.params[0].data()[0], self.params[1].data()[0]);
            let (mut loss, mut gw, mut gb) = (0.0, 0.0, 0.0);
            for s in batch {
                let m = s.x.iter().sum::<f64>() / s.x.len() as f64;
                let p = 1.0 / (1.0 + (-(w * m + b)).exp());
                let y = f64::from(u8::from(s.y));
                loss -= pw * y * p.ln() + (1.0 - y) * (1.0 - p).ln();
                let dz = pw * y * (p - 1.0) + (1.0 - y) * p;
                gw += dz * m;
                gb += dz;
            }
            let n = batch.len() as f64;
            Ok((loss / n, vec![Tensor::scalar(gw / n), Tensor::scalar(gb / n)]))
        }
        fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>> {
            let (w, b) = (self.params[0].data()[0], self.params[1].data()[0]);
            Ok(samples.iter().map(|s| w * s.x.iter().sum::<f64>() / s.x.len() as f64 + b).collect())
        }
    }

    fn sample(day: u64, value: f64, y: bool) -> WindowSample {
        WindowSample {
            x: vec![value; 4],
            lookback: 2,
            channels: 2,
            y,
            horizon: 1,
            anchor_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(day),
            horizon_le: 0,
        }
    }

    fn noisy_splits(seed: u64) -> Splits {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut make = |n: usize, start: u64| -> Vec<WindowSample> {
            (0..n)
                .map(|i| {
                    let y = i % 3 == 0;
                    let v = if y { 0.5 } else { -0.5 } + rng.gen_range(-1.5..1.5);
                    sample(start + i as u64, v, y)
                })
                .collect()
        };
        Splits { train: make(60, 0), val: make(30, 100), test: make(30, 200) }
    }

    #[test]
    fn early_stopping_rule() {
        let mut s = EarlyStopping::new(1);
        assert!(s.observe(0, 0.9));
        assert!(!s.should_stop(0));
        assert!(!s.observe(1, 0.8));
        assert!(s.should_stop(1));
        assert_eq!(s.best_epoch(), Some(0));

        let mut s = EarlyStopping::new(5);
        s.observe(0, 0.7);
        assert!(!s.observe(1, 0.7));
        assert_eq!(s.best_epoch(), Some(0));
    }

    #[test]
    fn deterministic_and_best_params_restored() {
        let splits = noisy_splits(1);
        let cfg = TrainConfig { batch_size: 8, learning_rate: 0.05, max_epochs: 40, patience: 3, ..Default::default() };
        let init = MeanLogit { params: vec![Tensor::scalar(-1.0), Tensor::scalar(0.0)] };
        let (mut a, mut b) = (init.clone(), init.clone());
        let ha = train_loop(&mut a, &splits, &cfg).unwrap();
        let hb = train_loop(&mut b, &splits, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.params, b.params);
        assert_eq!(ha.pos_weight, 2.0);
        let best = ha.val_roc_auc.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(ha.best_val_roc_auc(), best);
        assert_eq!(ha.val_roc_auc.iter().position(|&v| v == best), Some(ha.best_epoch));
        let again = evaluate(&a, &splits.val).unwrap();
        assert_eq!(again.roc_auc, ha.best_val_roc_auc());
        if ha.stop_reason == StopReason::EarlyStopped {
            assert_eq!(ha.epochs() - 1 - ha.best_epoch, cfg.patience);
        }
    }

    #[test]
    fn degenerate_splits_are_rejected() {
        let mut splits = noisy_splits(2);
        for s in &mut splits.val {
            s.y = false;
        }
        let mut m = MeanLogit { params: vec![Tensor::scalar(0.0), Tensor::scalar(0.0)] };
        assert!(matches!(train_loop(&mut m, &splits, &TrainConfig::default()), Err(Error::Degenerate(_))));
        let mut splits = noisy_splits(2);
        for s in &mut splits.train {
            s.y = true;
        }
        assert!(matches!(train_loop(&mut m, &splits, &TrainConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn evaluate_constant_and_perfect() {
        let splits = noisy_splits(3);
        let constant = MeanLogit { params: vec![Tensor::scalar(0.0), Tensor::scalar(0.0)] };
        assert_eq!(evaluate(&constant, &splits.test).unwrap().roc_auc, 0.5);
        let clean: Vec<WindowSample> = (0..20).map(|i| sample(i, if i % 2 == 0 { 1.0 } else { -1.0 }, i % 2 == 0)).collect();
        let ranker = MeanLogit { params: vec![Tensor::scalar(1.0), Tensor::scalar(0.0)] };
        let r = evaluate(&ranker, &clean).unwrap();
        assert_eq!(r.roc_auc, 1.0);
        assert_eq!(r.roc_auc, roc_auc(&r.scores, &r.labels).unwrap());
    }

    #[test]
    fn seizureformer_trains_one_epoch() {
        let cfg = ModelConfig { lookback: 8, patch_len: 4, stride: 2, kernel_sizes: vec![3], ..Default::default() };
        let mut model = SeizureFormer::new(cfg, 0).unwrap();
        let mut splits = noisy_splits(4);
        for block in [&mut splits.train, &mut splits.val, &mut splits.test] {
            for s in block.iter_mut() {
                s.x = vec![s.x[0]; 16];
                s.lookback = 8;
            }
        }
        let h = train_loop(&mut model, &splits, &TrainConfig { max_epochs: 2, ..Default::default() }).unwrap();
        assert_eq!(h.epochs(), 2);
        assert!(h.train_loss.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn config_pairs_round_trip() {
        let cfg = TrainConfig { learning_rate: 0.01, optimizer: OptimizerKind::Sgd, seed: 9, ..Default::default() };
        let mut back = TrainConfig::paper();
        for (k, v) in cfg.to_pairs() {
            assert!(back.set(k, &v).unwrap());
        }
        assert_eq!(back, cfg);
        assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
    }
}
