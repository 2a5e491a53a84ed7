//! Logical neural network rule models for tabular diagnosis prediction.
//!
//! Rules such as `(dpf & age) | (gluc & insulin & bmi)` are parsed into
//! expression trees whose leaves are learned threshold predicates and whose
//! operators are weighted, clamped conjunctions and disjunctions. Parameters
//! are fitted by projected gradient descent that keeps every operator inside
//! its crispness region, and trained models export to JSON and Graphviz.

pub mod data;
pub mod error;
pub mod expr;
pub mod grad;
pub mod logic;
pub mod metrics;
pub mod report;
pub mod rules;
pub mod schema;
pub mod training;

pub use data::{Dataset, NormalizationStats, Provenance, RawRecord};
pub use error::{LnnError, Result};
pub use expr::{eval_expression, Expression, NodePath, ParamAddress, ParamKind, ParamSet};
pub use logic::{AndParams, CrispnessConfig, PredicateParams, TruthValue};
pub use metrics::EvalReport;
pub use rules::{InitStrategy, RuleSpec};
pub use schema::Feature;
pub use training::{TrainConfig, TrainedModel};
