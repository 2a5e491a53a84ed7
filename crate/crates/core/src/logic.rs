//! Truth values and the forward semantics of the weighted logical operators.
//!
//! The weighted conjunction over inputs `x_1..x_n` is
//! `clamp01(beta - sum_i w_i (1 - x_i))`; disjunction is its De Morgan dual and
//! negation is `1 - x`. Threshold predicates use `f * sigmoid(k (f - theta))`.
//!
//! A conjunction is *crisp at level alpha* when
//!
//! * `beta - (1 - alpha) * sum(w) >= alpha`
//! * `beta - alpha * w_i <= 1 - alpha` for every child `i`
//! * `w_i >= 0`
//!
//! These guarantee the output is `>= alpha` whenever every input is `>= alpha`
//! and `<= 1 - alpha` whenever any input is `<= 1 - alpha`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LnnError, Result};

/// Absolute tolerance for every feasibility check.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A fuzzy truth value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TruthValue(f64);

impl TruthValue {
    pub const FALSE: TruthValue = TruthValue(0.0);
    pub const TRUE: TruthValue = TruthValue(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(TruthValue(value))
        } else {
            Err(LnnError::TruthRange(value))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        TruthValue(clamp01(value))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TruthValue {
    type Error = LnnError;

    fn try_from(value: f64) -> Result<Self> {
        TruthValue::new(value)
    }
}

impl From<TruthValue> for f64 {
    fn from(t: TruthValue) -> f64 {
        t.0
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::TRUE
        } else {
            TruthValue::FALSE
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[inline]
pub(crate) fn clamp01(z: f64) -> f64 {
    if z > 0.0 {
        z.min(1.0)
    } else {
        0.0
    }
}

/// Subgradient of `clamp01` at `z`: 1 strictly inside `(0, 1)`, 0 elsewhere
/// (the boundary belongs to the zero branch).
#[inline]
pub(crate) fn clamp01_slope(z: f64) -> f64 {
    if z > 0.0 && z < 1.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Crispness level `alpha` in `[1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrispnessConfig {
    pub alpha: f64,
}

impl CrispnessConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.5..=1.0).contains(&alpha) {
            Ok(CrispnessConfig { alpha })
        } else {
            Err(LnnError::Config(format!(
                "alpha must lie in [0.5, 1], got {alpha}"
            )))
        }
    }

    /// Whether an `arity`-input conjunction has any feasible parameters at this level.
    ///
    /// For `alpha` in `(1/2, 1)` this needs `alpha > n / (n + 1)`; at exactly 1/2 the
    /// region collapses to the single point `w = 0, beta = 1/2`.
    pub fn admits_arity(&self, arity: usize) -> bool {
        feasible_beta_range(arity, self.alpha).is_some()
    }

    /// The level actually enforced on a node with `arity` children.
    ///
    /// The configured alpha acts as a floor; a node whose arity makes that level
    /// infeasible (or nearly so) is raised to `(2n + 1) / (2n + 2)`, halfway between
    /// the feasibility boundary `n / (n + 1)` and 1. At that level the minimal
    /// uniform weight is `2n / (n + 1)`, below 2 for any arity.
    pub fn for_arity(&self, arity: usize) -> CrispnessConfig {
        CrispnessConfig {
            alpha: self.alpha.max(arity_alpha_floor(arity)),
        }
    }
}

impl Default for CrispnessConfig {
    fn default() -> Self {
        CrispnessConfig { alpha: 0.7 }
    }
}

/// Smallest alpha a node of this arity is trained at.
pub fn arity_alpha_floor(arity: usize) -> f64 {
    let n = arity as f64;
    (2.0 * n + 1.0) / (2.0 * n + 2.0)
}

/// Bias and per-child weights of a weighted conjunction (or of the dual
/// conjunction behind a disjunction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndParams {
    pub beta: f64,
    pub weights: Vec<f64>,
}

impl AndParams {
    pub fn new(beta: f64, weights: Vec<f64>) -> Self {
        AndParams { beta, weights }
    }

    /// `beta = 1`, all weights 1.
    pub fn unit(arity: usize) -> Self {
        AndParams {
            beta: 1.0,
            weights: vec![1.0; arity],
        }
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    /// `beta - sum_i w_i (1 - x_i)` before clamping.
    pub(crate) fn preactivation(&self, inputs: impl IntoIterator<Item = f64>) -> f64 {
        let mut z = self.beta;
        for (w, x) in self.weights.iter().zip(inputs) {
            z -= w * (1.0 - x);
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateParams {
    /// Threshold in normalized feature units; stored unconstrained.
    pub theta: f64,
    /// Sigmoid steepness; a fixed hyperparameter.
    pub slope: f64,
}

impl PredicateParams {
    pub fn new(theta: f64, slope: f64) -> Result<Self> {
        if slope > 0.0 && slope.is_finite() {
            Ok(PredicateParams { theta, slope })
        } else {
            Err(LnnError::Config(format!("slope must be positive, got {slope}")))
        }
    }

    pub fn theta_clamped(&self) -> f64 {
        self.theta.clamp(0.0, 1.0)
    }
}

/// Product t-norm `x * y`.
pub fn eval_product_tnorm(x: TruthValue, y: TruthValue) -> TruthValue {
    TruthValue(x.0 * y.0)
}

fn check_arity(inputs: usize, params: &AndParams) -> Result<()> {
    if inputs == 0 {
        return Err(LnnError::structure("operator needs at least one input"));
    }
    if inputs != params.arity() {
        return Err(LnnError::structure(format!(
            "{} inputs but {} weights",
            inputs,
            params.arity()
        )));
    }
    Ok(())
}

/// Weighted conjunction `clamp01(beta - sum_i w_i (1 - x_i))`.
pub fn eval_and(inputs: &[TruthValue], params: &AndParams) -> Result<TruthValue> {
    check_arity(inputs.len(), params)?;
    Ok(TruthValue(clamp01(
        params.preactivation(inputs.iter().map(|x| x.0)),
    )))
}

/// Weighted disjunction, defined as `1 - and(1 - x)` with the same parameters.
pub fn eval_or(inputs: &[TruthValue], params: &AndParams) -> Result<TruthValue> {
    let negated: Vec<TruthValue> = inputs.iter().map(|&x| eval_not(x)).collect();
    Ok(eval_not(eval_and(&negated, params)?))
}

pub fn eval_not(x: TruthValue) -> TruthValue {
    TruthValue(1.0 - x.0)
}

/// Threshold predicate `f * sigmoid(slope * (f - theta))`.
pub fn eval_tl(f: TruthValue, params: &PredicateParams) -> TruthValue {
    TruthValue(tl_raw(f.0, params))
}

#[inline]
pub(crate) fn tl_raw(f: f64, params: &PredicateParams) -> f64 {
    f * sigmoid(params.slope * (f - params.theta))
}

/// Which crispness inequality a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `beta - (1 - alpha) * sum(w) >= alpha`
    AllTrue,
    /// `beta - alpha * w_i <= 1 - alpha`
    OneFalse(usize),
    /// `w_i >= 0`
    NonNegative(usize),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::AllTrue => write!(f, "beta - (1-alpha)*sum(w) >= alpha"),
            Constraint::OneFalse(i) => write!(f, "beta - alpha*w[{i}] <= 1-alpha"),
            Constraint::NonNegative(i) => write!(f, "w[{i}] >= 0"),
        }
    }
}

/// A violated inequality. `slack` is signed: negative by the amount the
/// inequality fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub slack: f64,
}

pub fn check_constraints(params: &AndParams, cfg: CrispnessConfig) -> Vec<Violation> {
    let alpha = cfg.alpha;
    let mut out = Vec::new();
    let sum: f64 = params.weights.iter().sum();
    let slack = params.beta - (1.0 - alpha) * sum - alpha;
    if slack < -FEASIBILITY_TOL {
        out.push(Violation {
            constraint: Constraint::AllTrue,
            slack,
        });
    }
    for (i, &w) in params.weights.iter().enumerate() {
        let slack = (1.0 - alpha) - (params.beta - alpha * w);
        if slack < -FEASIBILITY_TOL {
            out.push(Violation {
                constraint: Constraint::OneFalse(i),
                slack,
            });
        }
    }
    for (i, &w) in params.weights.iter().enumerate() {
        if w < -FEASIBILITY_TOL {
            out.push(Violation {
                constraint: Constraint::NonNegative(i),
                slack: w,
            });
        }
    }
    out
}

pub fn is_feasible(params: &AndParams, cfg: CrispnessConfig) -> bool {
    check_constraints(params, cfg).is_empty()
}

/// The interval of `beta` values that are feasible for fixed nonnegative weights:
/// `[alpha + (1 - alpha) sum(w), 1 - alpha + alpha min(w)]`. May be empty (lo > hi).
pub fn beta_interval(weights: &[f64], cfg: CrispnessConfig) -> (f64, f64) {
    let alpha = cfg.alpha;
    let sum: f64 = weights.iter().sum();
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    (alpha + (1.0 - alpha) * sum, 1.0 - alpha + alpha * min)
}

/// Maps parameters onto the crisp region at `cfg`.
///
/// Feasible input comes back unchanged. Otherwise negative weights are clipped to
/// zero and `beta` is moved to the nearest end of its feasible interval. When no
/// `beta` works for the clipped weights, the point is replaced by its Euclidean
/// projection onto the whole region.
pub fn project_params(params: &AndParams, cfg: CrispnessConfig) -> Result<AndParams> {
    let arity = params.arity();
    if arity == 0 {
        return Err(LnnError::structure("operator needs at least one weight"));
    }
    if !cfg.admits_arity(arity) {
        return Err(LnnError::Infeasible {
            arity,
            alpha: cfg.alpha,
        });
    }
    if is_feasible(params, cfg) {
        return Ok(params.clone());
    }
    let weights: Vec<f64> = params.weights.iter().map(|&w| w.max(0.0)).collect();
    let (lo, hi) = beta_interval(&weights, cfg);
    if lo <= hi {
        return Ok(AndParams {
            beta: params.beta.clamp(lo, hi),
            weights,
        });
    }
    Ok(euclidean_projection(params.beta, &weights, cfg.alpha))
}

/// Range of `beta` for which some weight vector is feasible.
/// `None` when the region is empty; the upper end is infinite when unbounded.
fn feasible_beta_range(arity: usize, alpha: f64) -> Option<(f64, f64)> {
    if arity == 0 || !(0.5..=1.0).contains(&alpha) {
        return None;
    }
    if alpha == 1.0 {
        return Some((1.0, f64::INFINITY));
    }
    let n = arity as f64;
    let a = alpha * (n + 1.0) - n;
    let c = alpha * alpha - n * (1.0 - alpha) * (1.0 - alpha);
    if a > 0.0 {
        Some(((c / a).max(alpha), f64::INFINITY))
    } else if alpha == 0.5 {
        // beta = 1/2 is the only solution; for a single child any w works.
        if arity == 1 {
            Some((0.5, f64::INFINITY))
        } else {
            Some((0.5, 0.5))
        }
    } else {
        None
    }
}

/// For fixed `beta` the feasible weights are `{w : w_i >= lower, sum(w) <= cap}`.
fn weight_bounds(beta: f64, alpha: f64) -> (f64, f64) {
    let lower = ((beta - 1.0 + alpha) / alpha).max(0.0);
    let cap = if alpha < 1.0 {
        (beta - alpha) / (1.0 - alpha)
    } else {
        f64::INFINITY
    };
    (lower, cap)
}

/// Projection of `w0` onto `{w_i >= lower, sum(w) <= cap}`: `w_i = max(lower, w0_i - lambda)`
/// with the smallest `lambda >= 0` meeting the cap.
fn project_weights(w0: &[f64], lower: f64, cap: f64) -> Vec<f64> {
    let lifted: Vec<f64> = w0.iter().map(|&w| w.max(lower)).collect();
    if lifted.iter().sum::<f64>() <= cap {
        return lifted;
    }
    let n = w0.len();
    let budget = cap - n as f64 * lower;
    if budget <= 0.0 {
        // only the corner w = lower remains (up to rounding)
        return vec![lower; n];
    }
    let mut excess: Vec<f64> = w0.iter().map(|&w| w - lower).collect();
    excess.sort_by(|a, b| b.total_cmp(a));
    let mut top = 0.0;
    let mut lambda = 0.0;
    for k in 1..=n {
        top += excess[k - 1];
        lambda = (top - budget) / k as f64;
        if k == n || excess[k] <= lambda {
            break;
        }
    }
    w0.iter().map(|&w| (w - lambda).max(lower)).collect()
}

fn euclidean_projection(beta0: f64, w0: &[f64], alpha: f64) -> AndParams {
    let (lo, hi) = feasible_beta_range(w0.len(), alpha).expect("region checked nonempty");
    let cost = |beta: f64| -> f64 {
        let (lower, cap) = weight_bounds(beta, alpha);
        let w = project_weights(w0, lower, cap);
        let d: f64 = w.iter().zip(w0).map(|(a, b)| (a - b) * (a - b)).sum();
        (beta - beta0) * (beta - beta0) + d
    };
    // The optimum lies within sqrt(cost(lo)) of beta0.
    let reach = cost(lo).sqrt();
    let mut a = lo;
    let mut b = hi.min(lo.max(beta0 + reach));
    if b > a {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = cost(c);
        let mut fd = cost(d);
        for _ in 0..200 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = cost(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = cost(d);
            }
            if b - a <= f64::EPSILON * b.abs().max(1.0) {
                break;
            }
        }
    }
    let beta = 0.5 * (a + b);
    let (lower, cap) = weight_bounds(beta, alpha);
    AndParams {
        beta,
        weights: project_weights(w0, lower, cap),
    }
}
