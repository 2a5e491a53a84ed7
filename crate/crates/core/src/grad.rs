//! Reverse-mode gradients of the per-record cross-entropy loss with respect to
//! every `beta`, weight and threshold in an expression.

use crate::error::{LnnError, Result};
use crate::expr::{Expression, ParamSet};
use crate::logic::{clamp01, clamp01_slope, sigmoid, TruthValue};

/// Floor applied inside the logarithms of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

/// Cross-entropy of one prediction.
pub fn bce_sample(label: u8, p: f64) -> f64 {
    if label == 1 {
        -p.max(LOG_EPS).ln()
    } else {
        -(1.0 - p).max(LOG_EPS).ln()
    }
}

/// `d bce_sample / d p`. Zero where the log floor is active.
pub fn bce_sample_grad(label: u8, p: f64) -> f64 {
    if label == 1 {
        if p > LOG_EPS {
            -1.0 / p
        } else {
            0.0
        }
    } else if 1.0 - p > LOG_EPS {
        1.0 / (1.0 - p)
    } else {
        0.0
    }
}

/// Per-call scratch space: forward values and pre-clamp activations for every
/// node in preorder, plus one gradient slot per parameter.
#[derive(Debug, Clone, Default)]
pub struct GradientTape {
    pub values: Vec<f64>,
    pub preactivations: Vec<f64>,
    pub gradients: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Backprop {
    pub probability: TruthValue,
    pub loss: f64,
    pub gradients: ParamSet,
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forward pass; returns the root value. The tree must already be validated
    /// against the feature width.
    pub(crate) fn forward(&mut self, expr: &Expression, features: &[f64]) -> f64 {
        self.values.clear();
        self.preactivations.clear();
        self.fwd(expr, features)
    }

    fn fwd(&mut self, expr: &Expression, x: &[f64]) -> f64 {
        let idx = self.values.len();
        self.values.push(0.0);
        self.preactivations.push(f64::NAN);
        let (value, pre) = match expr {
            Expression::Predicate { feature, params } => {
                let f = x[*feature];
                (f * sigmoid(params.slope * (f - params.theta)), f64::NAN)
            }
            Expression::And { children, params } => {
                let mut z = params.beta;
                for (c, w) in children.iter().zip(&params.weights) {
                    z -= w * (1.0 - self.fwd(c, x));
                }
                (clamp01(z), z)
            }
            Expression::Or { children, params } => {
                let mut z = params.beta;
                for (c, w) in children.iter().zip(&params.weights) {
                    z -= w * self.fwd(c, x);
                }
                (1.0 - clamp01(z), z)
            }
            Expression::Not(child) => (1.0 - self.fwd(child, x), f64::NAN),
        };
        self.values[idx] = value;
        self.preactivations[idx] = pre;
        value
    }

    /// Accumulates `scale * d(root)/d(param)` into `grads` using the values of the
    /// last forward pass.
    pub(crate) fn backward(&self, expr: &Expression, features: &[f64], scale: f64, grads: &mut [f64]) {
        let mut node = 0;
        let mut param = 0;
        self.bwd(expr, features, scale, &mut node, &mut param, grads);
    }

    fn bwd(
        &self,
        expr: &Expression,
        x: &[f64],
        upstream: f64,
        node: &mut usize,
        param: &mut usize,
        grads: &mut [f64],
    ) {
        let idx = *node;
        *node += 1;
        match expr {
            Expression::Predicate { feature, params } => {
                let f = x[*feature];
                let s = sigmoid(params.slope * (f - params.theta));
                grads[*param] += upstream * (-params.slope * f * s * (1.0 - s));
                *param += 1;
            }
            Expression::And { children, params } | Expression::Or { children, params } => {
                let is_or = matches!(expr, Expression::Or { .. });
                let slope = clamp01_slope(self.preactivations[idx]);
                // d(out)/dz: +1 for a conjunction, -1 through the outer negation of a disjunction.
                let dz = if is_or {
                    -upstream * slope
                } else {
                    upstream * slope
                };
                let base = *param;
                *param += 1 + params.arity();
                grads[base] += dz;
                for (i, (c, w)) in children.iter().zip(&params.weights).enumerate() {
                    let xi = self.values[*node];
                    if is_or {
                        grads[base + 1 + i] += dz * -xi;
                        self.bwd(c, x, -dz * w, node, param, grads);
                    } else {
                        grads[base + 1 + i] += dz * -(1.0 - xi);
                        self.bwd(c, x, dz * w, node, param, grads);
                    }
                }
            }
            Expression::Not(child) => self.bwd(child, x, -upstream, node, param, grads),
        }
    }
}

/// Probability, loss and exact loss gradients for one labelled record.
pub fn forward_backward(expr: &Expression, features: &[f64], label: u8) -> Result<Backprop> {
    if label > 1 {
        return Err(LnnError::structure(format!("label must be 0 or 1, got {label}")));
    }
    expr.validate(features.len())?;
    let mut tape = GradientTape::new();
    let p = tape.forward(expr, features);
    tape.gradients = vec![0.0; expr.param_count()];
    let dp = bce_sample_grad(label, p);
    let mut grads = std::mem::take(&mut tape.gradients);
    tape.backward(expr, features, dp, &mut grads);
    let set = expr.param_set();
    Ok(Backprop {
        probability: TruthValue::saturating(p),
        loss: bce_sample(label, p),
        gradients: ParamSet {
            addresses: set.addresses,
            values: grads,
        },
    })
}

/// Central differences `(L(p + h) - L(p - h)) / 2h` for every parameter, each
/// from two fresh forward evaluations.
pub fn finite_difference_grad(expr: &Expression, features: &[f64], label: u8, h: f64) -> Result<ParamSet> {
    if h <= 0.0 || !h.is_finite() {
        return Err(LnnError::Config(format!("step must be positive, got {h}")));
    }
    expr.validate(features.len())?;
    let set = expr.param_set();
    let mut probe = expr.clone();
    let mut values = set.values.clone();
    let mut grads = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + h;
        probe.set_param_values(&values)?;
        let up = bce_sample(label, probe.eval_unchecked(features));
        values[i] = orig - h;
        probe.set_param_values(&values)?;
        let down = bce_sample(label, probe.eval_unchecked(features));
        values[i] = orig;
        grads.push((up - down) / (2.0 * h));
    }
    Ok(ParamSet {
        addresses: set.addresses,
        values: grads,
    })
}
