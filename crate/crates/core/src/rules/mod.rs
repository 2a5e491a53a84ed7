//! Rule DSL: abstract syntax, parser, printer, the built-in diabetes models and
//! parameter binding.
//!
//! ```text
//! rule    := or ;
//! or      := and ("|" and)* ;
//! and     := unary ("&" unary)* ;
//! unary   := "!" unary | "(" or ")" | feature ;
//! feature := "preg" | "gluc" | "bp" | "skin" | "insulin" | "bmi" | "dpf" | "age" ;
//! ```
//!
//! Every feature mention is a learned threshold test `feature > theta`.

mod bind;
mod builtin;
mod parser;

use std::fmt;

pub use bind::{bind_params, InitStrategy};
pub use builtin::{builtin_model, BUILTIN_NAMES};
pub use parser::parse_rule;

use crate::schema::Feature;

/// Rule structure with parameters left unbound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleSpec {
    Feature(Feature),
    And(Vec<RuleSpec>),
    Or(Vec<RuleSpec>),
    Not(Box<RuleSpec>),
}

impl RuleSpec {
    pub fn leaf_count(&self) -> usize {
        match self {
            RuleSpec::Feature(_) => 1,
            RuleSpec::And(cs) | RuleSpec::Or(cs) => cs.iter().map(RuleSpec::leaf_count).sum(),
            RuleSpec::Not(c) => c.leaf_count(),
        }
    }

    /// Features in left-to-right order, with repeats.
    pub fn features(&self) -> Vec<Feature> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut Vec<Feature>) {
        match self {
            RuleSpec::Feature(f) => out.push(*f),
            RuleSpec::And(cs) | RuleSpec::Or(cs) => cs.iter().for_each(|c| c.collect_features(out)),
            RuleSpec::Not(c) => c.collect_features(out),
        }
    }

    /// Top-level disjuncts (the whole rule if the root is not a disjunction).
    pub fn disjuncts(&self) -> Vec<&RuleSpec> {
        match self {
            RuleSpec::Or(cs) => cs.iter().collect(),
            other => vec![other],
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            RuleSpec::Or(_) => 0,
            RuleSpec::And(_) => 1,
            RuleSpec::Not(_) | RuleSpec::Feature(_) => 2,
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // A child of an n-ary node is parenthesized unless it binds strictly
        // tighter; that keeps nested same-operator groups distinct from chains.
        let write_operand = |f: &mut fmt::Formatter<'_>, child: &RuleSpec, parent: u8| {
            if child.precedence() > parent {
                write!(f, "{child}")
            } else {
                write!(f, "({child})")
            }
        };
        match self {
            RuleSpec::Feature(feat) => f.write_str(feat.name()),
            RuleSpec::Not(child) => {
                f.write_str("!")?;
                write_operand(f, child, 1)
            }
            RuleSpec::And(cs) | RuleSpec::Or(cs) => {
                let sep = if matches!(self, RuleSpec::And(_)) {
                    " & "
                } else {
                    " | "
                };
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write_operand(f, c, self.precedence())?;
                }
                Ok(())
            }
        }
    }
}
