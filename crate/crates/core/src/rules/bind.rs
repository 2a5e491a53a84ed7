use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RuleSpec;
use crate::error::{LnnError, Result};
use crate::expr::Expression;
use crate::logic::{project_params, AndParams, CrispnessConfig, PredicateParams};

/// How initial parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Every weight and beta 1 (then projected), every threshold 0.5.
    PaperNeutral,
    /// Thresholds ~ U(0.2, 0.8), weights ~ U(0.5, 1.5), beta projected.
    Randomized { seed: u64 },
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitStrategy::PaperNeutral => f.write_str("paper-neutral"),
            InitStrategy::Randomized { seed } => write!(f, "randomized:{seed}"),
        }
    }
}

impl FromStr for InitStrategy {
    type Err = LnnError;

    /// `paper-neutral` or `randomized:<seed>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-neutral" => Ok(InitStrategy::PaperNeutral),
            _ => s
                .strip_prefix("randomized:")
                .and_then(|seed| seed.parse().ok())
                .map(|seed| InitStrategy::Randomized { seed })
                .ok_or_else(|| {
                    LnnError::Config(format!(
                        "unknown init '{s}' (expected paper-neutral or randomized:<seed>)"
                    ))
                }),
        }
    }
}

enum Source {
    Neutral,
    Random(ChaCha8Rng),
}

impl Source {
    fn theta(&mut self) -> f64 {
        match self {
            Source::Neutral => 0.5,
            Source::Random(rng) => rng.gen_range(0.2..0.8),
        }
    }

    fn weight(&mut self) -> f64 {
        match self {
            Source::Neutral => 1.0,
            Source::Random(rng) => rng.gen_range(0.5..1.5),
        }
    }
}

/// Attaches parameters to every node of `spec`. Operator parameters are
/// projected onto each node's crisp region (see [`CrispnessConfig::for_arity`]).
/// Parameters are drawn in preorder so a seed fixes the whole tree.
pub fn bind_params(
    spec: &RuleSpec,
    init: InitStrategy,
    cfg: CrispnessConfig,
    slope: f64,
) -> Result<Expression> {
    // validates slope once for all leaves
    PredicateParams::new(0.5, slope)?;
    let mut source = match init {
        InitStrategy::PaperNeutral => Source::Neutral,
        InitStrategy::Randomized { seed } => Source::Random(ChaCha8Rng::seed_from_u64(seed)),
    };
    bind(spec, &mut source, cfg, slope)
}

fn bind(spec: &RuleSpec, source: &mut Source, cfg: CrispnessConfig, slope: f64) -> Result<Expression> {
    match spec {
        RuleSpec::Feature(f) => Ok(Expression::predicate(
            f.index(),
            PredicateParams {
                theta: source.theta(),
                slope,
            },
        )),
        RuleSpec::Not(child) => Ok(Expression::not(bind(child, source, cfg, slope)?)),
        RuleSpec::And(cs) | RuleSpec::Or(cs) => {
            let weights: Vec<f64> = cs.iter().map(|_| source.weight()).collect();
            let params = project_params(&AndParams::new(1.0, weights), cfg.for_arity(cs.len()))?;
            let children = cs
                .iter()
                .map(|c| bind(c, source, cfg, slope))
                .collect::<Result<Vec<_>>>()?;
            if matches!(spec, RuleSpec::And(_)) {
                Expression::and(children, params)
            } else {
                Expression::or(children, params)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{builtin_model, BUILTIN_NAMES};

    #[test]
    fn neutral_thresholds_are_half() {
        let e = bind_params(
            &builtin_model("glucose-bmi").unwrap(),
            InitStrategy::PaperNeutral,
            CrispnessConfig::default(),
            10.0,
        )
        .unwrap();
        let thetas: Vec<f64> = e
            .children()
            .iter()
            .map(|c| match c {
                Expression::Predicate { params, .. } => params.theta,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(thetas, [0.5, 0.5]);
        assert!(e.violations(CrispnessConfig::default()).is_empty());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let spec = builtin_model("balanced").unwrap();
        let init = InitStrategy::Randomized { seed: 7 };
        let a = bind_params(&spec, init, CrispnessConfig::default(), 10.0).unwrap();
        let b = bind_params(&spec, init, CrispnessConfig::default(), 10.0).unwrap();
        assert_eq!(a, b);
        let c = bind_params(
            &spec,
            InitStrategy::Randomized { seed: 8 },
            CrispnessConfig::default(),
            10.0,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_init_is_feasible() {
        for name in BUILTIN_NAMES {
            let spec = builtin_model(name).unwrap();
            for alpha in [0.5, 0.7, 0.9, 1.0] {
                let cfg = CrispnessConfig::new(alpha).unwrap();
                for init in [InitStrategy::PaperNeutral, InitStrategy::Randomized { seed: 3 }] {
                    let e = bind_params(&spec, init, cfg, 10.0).unwrap();
                    assert!(e.violations(cfg).is_empty(), "{name} {alpha} {init}");
                }
            }
        }
    }

    #[test]
    fn init_strategy_text_round_trip() {
        for s in ["paper-neutral", "randomized:42"] {
            assert_eq!(s.parse::<InitStrategy>().unwrap().to_string(), s);
        }
        assert!("randomized".parse::<InitStrategy>().is_err());
    }

    #[test]
    fn rejects_bad_slope() {
        let spec = builtin_model("glucose-bmi").unwrap();
        assert!(bind_params(&spec, InitStrategy::PaperNeutral, CrispnessConfig::default(), 0.0).is_err());
    }
}
