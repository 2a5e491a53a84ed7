use super::{parse_rule, RuleSpec};
use crate::error::{LnnError, Result};

pub const BUILTIN_NAMES: [&str; 5] = [
    "glucose-bmi",
    "family-insulin",
    "balanced",
    "multi-pathway",
    "comprehensive",
];

fn builtin_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "glucose-bmi" => "gluc & bmi",
        "family-insulin" => "dpf & insulin & age",
        "balanced" => "(dpf & age) | (preg & gluc & bp) | (skin & insulin & bmi)",
        "multi-pathway" => "(dpf & age) | (gluc & insulin & bmi & skin & bp & preg)",
        "comprehensive" => "(gluc & insulin & bmi & preg) | (dpf & insulin)",
        _ => return None,
    })
}

/// One of the five diabetes rule models, by name.
pub fn builtin_model(name: &str) -> Result<RuleSpec> {
    let text = builtin_text(name).ok_or_else(|| LnnError::UnknownModel {
        name: name.to_owned(),
        valid: BUILTIN_NAMES.join(", "),
    })?;
    Ok(parse_rule(text).expect("built-in rule text parses"))
}
