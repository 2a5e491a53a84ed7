//! Full-batch projected gradient descent on mean binary cross-entropy.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NormalizationStats, RawRecord};
use crate::error::{LnnError, Result};
use crate::expr::Expression;
use crate::grad::{bce_sample, bce_sample_grad, GradientTape};
use crate::logic::{CrispnessConfig, TruthValue};
use crate::rules::{bind_params, InitStrategy, RuleSpec};
use crate::schema::NUM_FEATURES;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub alpha: f64,
    pub slope: f64,
    pub seed: u64,
    pub init: InitStrategy,
    pub decision_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 500,
            alpha: 0.7,
            slope: 10.0,
            seed: DEFAULT_SEED,
            init: InitStrategy::Randomized { seed: DEFAULT_SEED },
            decision_threshold: 0.5,
        }
    }
}

impl TrainConfig {
    /// Sets the seed; a randomized init follows it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let InitStrategy::Randomized { .. } = self.init {
            self.init = InitStrategy::Randomized { seed };
        }
        self
    }

    pub fn crispness(&self) -> Result<CrispnessConfig> {
        CrispnessConfig::new(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LnnError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.slope > 0.0 && self.slope.is_finite()) {
            return Err(LnnError::Config(format!(
                "slope must be positive, got {}",
                self.slope
            )));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(LnnError::Config(format!(
                "decision threshold must lie in (0, 1), got {}",
                self.decision_threshold
            )));
        }
        self.crispness().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub rule: RuleSpec,
    pub expression: Expression,
    pub config: TrainConfig,
    pub stats: NormalizationStats,
    /// Mean training loss after each epoch's update.
    pub history: Vec<f64>,
}

impl TrainedModel {
    /// Probability for an already-normalized record.
    pub fn predict_normalized(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        self.expression.eval_unchecked(features)
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Vec<f64> {
        ds.features.iter().map(|x| self.predict_normalized(x)).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().copied()
    }
}

/// Mean cross-entropy with log floor `1e-12`.
pub fn bce(labels: &[u8], probs: &[TruthValue]) -> Result<f64> {
    if labels.len() != probs.len() {
        return Err(LnnError::structure(format!(
            "{} labels but {} probabilities",
            labels.len(),
            probs.len()
        )));
    }
    if labels.is_empty() {
        return Err(LnnError::structure("cross-entropy of an empty batch"));
    }
    let total: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, p)| bce_sample(y, p.get()))
        .sum();
    Ok(total / labels.len() as f64)
}

/// Mean loss at the current parameters; fills `grads` with the mean gradient.
fn batch_pass(expr: &Expression, ds: &Dataset, tape: &mut GradientTape, grads: &mut [f64]) -> f64 {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let n = ds.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in ds.features.iter().zip(&ds.labels) {
        let p = tape.forward(expr, x);
        loss += bce_sample(y, p);
        let dp = bce_sample_grad(y, p);
        if dp != 0.0 {
            tape.backward(expr, x, dp / n, grads);
        }
    }
    loss / n
}

fn mean_loss(expr: &Expression, ds: &Dataset) -> f64 {
    let total: f64 = ds
        .features
        .iter()
        .zip(&ds.labels)
        .map(|(x, &y)| bce_sample(y, expr.eval_unchecked(x)))
        .sum();
    total / ds.len() as f64
}

pub fn train(spec: &RuleSpec, dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    train_with_observer(spec, dataset, config, |_, _| {})
}

/// As [`train`]; `observe(epoch, expression)` runs after each epoch's
/// update and projection.
pub fn train_with_observer(
    spec: &RuleSpec,
    dataset: &Dataset,
    config: &TrainConfig,
    mut observe: impl FnMut(usize, &Expression),
) -> Result<TrainedModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(LnnError::Config("training set is empty".into()));
    }
    let cfg = config.crispness()?;
    let mut expr = bind_params(spec, config.init, cfg, config.slope)?;
    expr.validate(NUM_FEATURES)?;

    let mut tape = GradientTape::new();
    let mut grads = vec![0.0; expr.param_count()];
    let mut params = expr.param_values();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let loss = batch_pass(&expr, dataset, &mut tape, &mut grads);
        if epoch > 0 {
            history.push(loss);
        }
        for (p, g) in params.iter_mut().zip(&grads) {
            *p -= config.learning_rate * g;
        }
        expr.set_param_values(&params)?;
        expr.project_all(cfg)?;
        params = expr.param_values();
        debug_assert!(expr.violations(cfg).is_empty(), "infeasible after epoch {epoch}");
        observe(epoch, &expr);
    }
    if config.epochs > 0 {
        history.push(mean_loss(&expr, dataset));
    }
    Ok(TrainedModel {
        rule: spec.clone(),
        expression: expr,
        config: config.clone(),
        stats: dataset.stats.clone(),
        history,
    })
}

/// Normalizes a raw record with the model's statistics and evaluates it.
pub fn predict(model: &TrainedModel, raw: &RawRecord) -> TruthValue {
    TruthValue::saturating(model.predict_normalized(&model.stats.transform(raw)))
}

/// 1 iff `probability >= threshold`.
pub fn classify(probability: f64, threshold: f64) -> u8 {
    u8::from(probability >= threshold)
}
