//! Expression trees over threshold predicates and weighted operators.

use std::fmt;
use std::str::FromStr;

use crate::error::{LnnError, Result};
use crate::logic::{
    check_constraints, clamp01, project_params, tl_raw, AndParams, CrispnessConfig, PredicateParams,
    TruthValue, Violation,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Predicate {
        feature: usize,
        params: PredicateParams,
    },
    And {
        children: Vec<Expression>,
        params: AndParams,
    },
    /// Disjunction; `params` belong to the dual conjunction.
    Or {
        children: Vec<Expression>,
        params: AndParams,
    },
    Not(Box<Expression>),
}

/// Location of a node: child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodePath(pub Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        NodePath(v)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("r")?;
        for i in &self.0 {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = LnnError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('.');
        if parts.next() != Some("r") {
            return Err(LnnError::Schema(format!("bad node path '{s}'")));
        }
        parts
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| LnnError::Schema(format!("bad node path '{s}'")))
            })
            .collect::<Result<Vec<_>>>()
            .map(NodePath)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKind {
    Beta,
    Weight(usize),
    Theta,
}

/// Address of one learnable scalar, rendered as `r.0.1/theta`, `r/beta`, `r.1/w3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamAddress {
    pub node: NodePath,
    pub kind: ParamKind,
}

impl fmt::Display for ParamAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ParamKind::Beta => write!(f, "{}/beta", self.node),
            ParamKind::Weight(i) => write!(f, "{}/w{i}", self.node),
            ParamKind::Theta => write!(f, "{}/theta", self.node),
        }
    }
}

impl FromStr for ParamAddress {
    type Err = LnnError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LnnError::Schema(format!("bad parameter address '{s}'"));
        let (node, name) = s.split_once('/').ok_or_else(bad)?;
        let kind = match name {
            "beta" => ParamKind::Beta,
            "theta" => ParamKind::Theta,
            w => ParamKind::Weight(w.strip_prefix('w').and_then(|i| i.parse().ok()).ok_or_else(bad)?),
        };
        Ok(ParamAddress {
            node: node.parse()?,
            kind,
        })
    }
}

/// Flat view of every learnable parameter, in preorder: for an operator node
/// `beta` then its weights, then the children; for a leaf its `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub addresses: Vec<ParamAddress>,
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, addr: &ParamAddress) -> Option<f64> {
        self.addresses
            .iter()
            .position(|a| a == addr)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamAddress, f64)> {
        self.addresses.iter().zip(self.values.iter().copied())
    }
}

impl Expression {
    pub fn predicate(feature: usize, params: PredicateParams) -> Self {
        Expression::Predicate { feature, params }
    }

    pub fn and(children: Vec<Expression>, params: AndParams) -> Result<Self> {
        check_operator("and", &children, &params)?;
        Ok(Expression::And { children, params })
    }

    pub fn or(children: Vec<Expression>, params: AndParams) -> Result<Self> {
        check_operator("or", &children, &params)?;
        Ok(Expression::Or { children, params })
    }

    pub fn not(child: Expression) -> Self {
        Expression::Not(Box::new(child))
    }

    /// Checks arity and weight counts throughout, and that every feature index
    /// is below `num_features`.
    pub fn validate(&self, num_features: usize) -> Result<()> {
        match self {
            Expression::Predicate { feature, .. } => {
                if *feature >= num_features {
                    return Err(LnnError::structure(format!(
                        "feature index {feature} out of range for {num_features} features"
                    )));
                }
                Ok(())
            }
            Expression::And { children, params } | Expression::Or { children, params } => {
                check_operator(self.kind_name(), children, params)?;
                children.iter().try_for_each(|c| c.validate(num_features))
            }
            Expression::Not(child) => child.validate(num_features),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Expression::Predicate { .. } => "predicate",
            Expression::And { .. } => "and",
            Expression::Or { .. } => "or",
            Expression::Not(_) => "not",
        }
    }

    /// Evaluates the tree on one record of normalized features.
    pub fn eval(&self, features: &[f64]) -> Result<TruthValue> {
        self.validate(features.len())?;
        Ok(TruthValue::saturating(self.eval_unchecked(features)))
    }

    /// Evaluation without structural checks; the caller has validated the tree
    /// against the feature width.
    pub(crate) fn eval_unchecked(&self, features: &[f64]) -> f64 {
        match self {
            Expression::Predicate { feature, params } => tl_raw(features[*feature], params),
            Expression::And { children, params } => {
                clamp01(params.preactivation(children.iter().map(|c| c.eval_unchecked(features))))
            }
            Expression::Or { children, params } => {
                1.0 - clamp01(params.preactivation(children.iter().map(|c| 1.0 - c.eval_unchecked(features))))
            }
            Expression::Not(child) => 1.0 - child.eval_unchecked(features),
        }
    }

    pub fn children(&self) -> &[Expression] {
        match self {
            Expression::Predicate { .. } => &[],
            Expression::And { children, .. } | Expression::Or { children, .. } => children,
            Expression::Not(child) => std::slice::from_ref(child),
        }
    }

    pub fn operator_params(&self) -> Option<&AndParams> {
        match self {
            Expression::And { params, .. } | Expression::Or { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Expression::node_count).sum::<usize>()
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Expression::Predicate { .. } => 1,
            _ => self.children().iter().map(Expression::leaf_count).sum(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Expression::Predicate { .. } => 1,
            Expression::And { children, params } | Expression::Or { children, params } => {
                1 + params.arity() + children.iter().map(Expression::param_count).sum::<usize>()
            }
            Expression::Not(child) => child.param_count(),
        }
    }

    /// Visits every node in preorder together with its path.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&NodePath, &'a Expression)) {
        fn go<'a>(e: &'a Expression, path: &NodePath, visit: &mut impl FnMut(&NodePath, &'a Expression)) {
            visit(path, e);
            for (i, c) in e.children().iter().enumerate() {
                go(c, &path.child(i), visit);
            }
        }
        go(self, &NodePath::root(), visit)
    }

    pub fn param_set(&self) -> ParamSet {
        let mut addresses = Vec::with_capacity(self.param_count());
        let mut values = Vec::with_capacity(self.param_count());
        self.walk(&mut |path, node| match node {
            Expression::Predicate { params, .. } => {
                addresses.push(ParamAddress {
                    node: path.clone(),
                    kind: ParamKind::Theta,
                });
                values.push(params.theta);
            }
            Expression::And { params, .. } | Expression::Or { params, .. } => {
                addresses.push(ParamAddress {
                    node: path.clone(),
                    kind: ParamKind::Beta,
                });
                values.push(params.beta);
                for (i, &w) in params.weights.iter().enumerate() {
                    addresses.push(ParamAddress {
                        node: path.clone(),
                        kind: ParamKind::Weight(i),
                    });
                    values.push(w);
                }
            }
            Expression::Not(_) => {}
        });
        ParamSet { addresses, values }
    }

    pub fn param_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.collect_values(&mut out);
        out
    }

    fn collect_values(&self, out: &mut Vec<f64>) {
        match self {
            Expression::Predicate { params, .. } => out.push(params.theta),
            Expression::And { children, params } | Expression::Or { children, params } => {
                out.push(params.beta);
                out.extend_from_slice(&params.weights);
                for c in children {
                    c.collect_values(out);
                }
            }
            Expression::Not(child) => child.collect_values(out),
        }
    }

    /// Overwrites every parameter from a flat preorder slice.
    pub fn set_param_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(LnnError::structure(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut cursor = 0;
        self.assign_values(values, &mut cursor);
        Ok(())
    }

    fn assign_values(&mut self, values: &[f64], cursor: &mut usize) {
        match self {
            Expression::Predicate { params, .. } => {
                params.theta = values[*cursor];
                *cursor += 1;
            }
            Expression::And { children, params } | Expression::Or { children, params } => {
                params.beta = values[*cursor];
                *cursor += 1;
                for w in params.weights.iter_mut() {
                    *w = values[*cursor];
                    *cursor += 1;
                }
                for c in children {
                    c.assign_values(values, cursor);
                }
            }
            Expression::Not(child) => child.assign_values(values, cursor),
        }
    }

    /// Projects every operator node onto its crisp region. Each node is held to
    /// `cfg.for_arity(arity)`.
    pub fn project_all(&mut self, cfg: CrispnessConfig) -> Result<()> {
        match self {
            Expression::Predicate { .. } => Ok(()),
            Expression::And { children, params } | Expression::Or { children, params } => {
                *params = project_params(params, cfg.for_arity(params.arity()))?;
                children.iter_mut().try_for_each(|c| c.project_all(cfg))
            }
            Expression::Not(child) => child.project_all(cfg),
        }
    }

    /// Constraint violations of every operator node at its effective level.
    pub fn violations(&self, cfg: CrispnessConfig) -> Vec<(NodePath, Violation)> {
        let mut out = Vec::new();
        self.walk(&mut |path, node| {
            if let Some(p) = node.operator_params() {
                for v in check_constraints(p, cfg.for_arity(p.arity())) {
                    out.push((path.clone(), v));
                }
            }
        });
        out
    }

    /// Sets the sigmoid slope on every leaf.
    pub fn set_slope(&mut self, slope: f64) {
        match self {
            Expression::Predicate { params, .. } => params.slope = slope,
            Expression::And { children, .. } | Expression::Or { children, .. } => {
                children.iter_mut().for_each(|c| c.set_slope(slope))
            }
            Expression::Not(child) => child.set_slope(slope),
        }
    }
}

fn check_operator(kind: &str, children: &[Expression], params: &AndParams) -> Result<()> {
    if children.len() < 2 {
        return Err(LnnError::structure(format!(
            "{kind} node needs at least 2 children, has {}",
            children.len()
        )));
    }
    if params.arity() != children.len() {
        return Err(LnnError::structure(format!(
            "{kind} node has {} children but {} weights",
            children.len(),
            params.arity()
        )));
    }
    Ok(())
}

/// Evaluates `expr` on one normalized record.
pub fn eval_expression(expr: &Expression, features: &[f64]) -> Result<TruthValue> {
    expr.eval(features)
}
