//! Model documents (JSON) and Graphviz diagrams of trained rule models.
//!
//! The JSON document is also the on-disk model format: loading it rebuilds the
//! expression from the rule text and assigns every parameter by address.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::NormalizationStats;
use crate::error::{LnnError, Result};
use crate::expr::{Expression, NodePath};
use crate::logic::CrispnessConfig;
use crate::metrics::EvalReport;
use crate::rules::{bind_params, parse_rule, InitStrategy};
use crate::schema::{Feature, NUM_FEATURES};
use crate::training::{TrainConfig, TrainedModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafExplain {
    pub node: String,
    pub feature: Feature,
    pub letter: char,
    /// Stored threshold, normalized units, unconstrained.
    pub theta: f64,
    /// Threshold clamped to `[0, 1]`.
    pub theta_reported: f64,
    /// `min + theta_reported * (max - min)` in the feature's own units.
    pub raw_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorExplain {
    pub node: String,
    pub kind: String,
    pub beta: f64,
    pub weights: Vec<f64>,
    /// Crispness level enforced on this node.
    pub alpha: f64,
}

/// Human-facing view of every learned parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRecord {
    pub legend: BTreeMap<char, String>,
    pub operators: Vec<OperatorExplain>,
    pub leaves: Vec<LeafExplain>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negations: Vec<String>,
}

impl ExplainRecord {
    pub fn param_count(&self) -> usize {
        self.leaves.len() + self.operators.iter().map(|o| 1 + o.weights.len()).sum::<usize>()
    }
}

pub fn legend() -> BTreeMap<char, String> {
    Feature::ALL
        .iter()
        .map(|f| (f.letter(), f.description().to_owned()))
        .collect()
}

pub fn explain(model: &TrainedModel) -> ExplainRecord {
    let cfg = CrispnessConfig {
        alpha: model.config.alpha,
    };
    let mut rec = ExplainRecord {
        legend: legend(),
        operators: Vec::new(),
        leaves: Vec::new(),
        negations: Vec::new(),
    };
    model.expression.walk(&mut |path, node| match node {
        Expression::Predicate { feature, params } => {
            let f = Feature::from_index(*feature).expect("validated feature index");
            let reported = params.theta_clamped();
            rec.leaves.push(LeafExplain {
                node: path.to_string(),
                feature: f,
                letter: f.letter(),
                theta: params.theta,
                theta_reported: reported,
                raw_threshold: model.stats.denormalize_value(f, reported),
            });
        }
        Expression::And { params, .. } | Expression::Or { params, .. } => {
            rec.operators.push(OperatorExplain {
                node: path.to_string(),
                kind: node.kind_name().to_owned(),
                beta: params.beta,
                weights: params.weights.clone(),
                alpha: cfg.for_arity(params.arity()).alpha,
            });
        }
        Expression::Not(_) => rec.negations.push(path.to_string()),
    });
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub rule: String,
    pub config: TrainConfig,
    pub normalization: NormalizationStats,
    pub parameters: BTreeMap<String, f64>,
    pub explain: ExplainRecord,
    pub history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalReport>,
}

impl ModelDocument {
    pub fn new(model: &TrainedModel, evaluation: Option<&EvalReport>) -> Self {
        ModelDocument {
            format_version: FORMAT_VERSION,
            rule: model.rule.to_string(),
            config: model.config.clone(),
            normalization: model.stats.clone(),
            parameters: model
                .expression
                .param_set()
                .iter()
                .map(|(a, v)| (a.to_string(), v))
                .collect(),
            explain: explain(model),
            history: model.history.clone(),
            evaluation: evaluation.cloned(),
        }
    }

    /// Rebuilds the trained model. Every parameter of the rule must be present
    /// exactly once and nothing else.
    pub fn to_model(&self) -> Result<TrainedModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(LnnError::Schema(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.config
            .validate()
            .map_err(|e| LnnError::Schema(format!("config: {e}")))?;
        self.normalization.validate()?;
        let rule = parse_rule(&self.rule).map_err(|e| LnnError::Schema(format!("rule: {e}")))?;
        let mut expression = bind_params(
            &rule,
            InitStrategy::PaperNeutral,
            self.config.crispness()?,
            self.config.slope,
        )?;
        let set = expression.param_set();
        if set.len() != self.parameters.len() {
            return Err(LnnError::Schema(format!(
                "rule has {} parameters, document lists {}",
                set.len(),
                self.parameters.len()
            )));
        }
        let values = set
            .addresses
            .iter()
            .map(|a| {
                let v = self
                    .parameters
                    .get(&a.to_string())
                    .copied()
                    .ok_or_else(|| LnnError::Schema(format!("missing parameter {a}")))?;
                if !v.is_finite() {
                    return Err(LnnError::Schema(format!("parameter {a} is not finite")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        expression.set_param_values(&values)?;
        expression.validate(NUM_FEATURES)?;
        Ok(TrainedModel {
            rule,
            expression,
            config: self.config.clone(),
            stats: self.normalization.clone(),
            history: self.history.clone(),
        })
    }
}

/// Pretty-printed model document with a trailing newline.
pub fn export_json(model: &TrainedModel, evaluation: Option<&EvalReport>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ModelDocument::new(model, evaluation))?;
    s.push('\n');
    Ok(s)
}

/// Parses a model document; any structural problem is a schema error.
pub fn load_model_json(text: &str) -> Result<(TrainedModel, Option<EvalReport>)> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| LnnError::Schema(e.to_string()))?;
    let model = doc.to_model()?;
    Ok((model, doc.evaluation))
}

fn operator_symbol(node: &Expression) -> &'static str {
    match node {
        Expression::And { .. } => "∧",
        Expression::Or { .. } => "∨",
        Expression::Not(_) => "¬",
        Expression::Predicate { .. } => "",
    }
}

/// Graphviz digraph of the model: operators as circles, leaves as boxes
/// labelled with the feature letter over the raw threshold, edges labelled
/// with operator weights. Numbers are printed to two decimals.
pub fn export_dot(model: &TrainedModel) -> String {
    let mut ids: BTreeMap<NodePath, usize> = BTreeMap::new();
    let mut order = Vec::new();
    model.expression.walk(&mut |path, node| {
        ids.insert(path.clone(), order.len());
        order.push((path.clone(), node));
    });

    let mut out = String::new();
    out.push_str("digraph model {\n");
    let legend: Vec<String> = legend().iter().map(|(l, d)| format!("{l}={d}")).collect();
    let _ = writeln!(out, "  // legend: {}", legend.join(", "));
    out.push_str("  // leaves: feature letter over the learned threshold in raw units\n");
    out.push_str("  // edge labels: raw operator weights w_i (not normalized per node)\n");
    out.push_str("  node [fontname=\"Helvetica\"];\n");
    for (path, node) in &order {
        let id = ids[path];
        match node {
            Expression::Predicate { feature, params } => {
                let f = Feature::from_index(*feature).expect("validated feature index");
                let raw = model.stats.denormalize_value(f, params.theta_clamped());
                let _ = writeln!(out, "  n{id} [label=\"{}\\n{raw:.2}\", shape=box];", f.letter());
            }
            _ => {
                let _ = writeln!(
                    out,
                    "  n{id} [label=\"{}\", shape=circle];",
                    operator_symbol(node)
                );
            }
        }
    }
    for (path, node) in &order {
        let id = ids[path];
        let weights = node.operator_params().map(|p| p.weights.as_slice());
        for i in 0..node.children().len() {
            let child = ids[&path.child(i)];
            match weights {
                Some(w) => {
                    let _ = writeln!(out, "  n{id} -> n{child} [label=\"{:.2}\"];", w[i]);
                }
                None => {
                    let _ = writeln!(out, "  n{id} -> n{child};");
                }
            }
        }
    }
    out.push_str("}\n");
    out
}
