use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LnnError;

pub const NUM_FEATURES: usize = 8;

/// The eight Pima diabetes features, in dataset column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Preg,
    Gluc,
    Bp,
    Skin,
    Insulin,
    Bmi,
    Dpf,
    Age,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::Preg,
        Feature::Gluc,
        Feature::Bp,
        Feature::Skin,
        Feature::Insulin,
        Feature::Bmi,
        Feature::Dpf,
        Feature::Age,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Feature::ALL.get(i).copied()
    }

    /// Name used in rule text.
    pub fn name(self) -> &'static str {
        match self {
            Feature::Preg => "preg",
            Feature::Gluc => "gluc",
            Feature::Bp => "bp",
            Feature::Skin => "skin",
            Feature::Insulin => "insulin",
            Feature::Bmi => "bmi",
            Feature::Dpf => "dpf",
            Feature::Age => "age",
        }
    }

    /// CSV header name.
    pub fn column(self) -> &'static str {
        match self {
            Feature::Preg => "Pregnancies",
            Feature::Gluc => "Glucose",
            Feature::Bp => "BloodPressure",
            Feature::Skin => "SkinThickness",
            Feature::Insulin => "Insulin",
            Feature::Bmi => "BMI",
            Feature::Dpf => "DiabetesPedigreeFunction",
            Feature::Age => "Age",
        }
    }

    /// Single-letter code used in diagrams. `P` (pregnancies) extends the
    /// usual G/I/B/S/T/D/A legend.
    pub fn letter(self) -> char {
        match self {
            Feature::Preg => 'P',
            Feature::Gluc => 'G',
            Feature::Bp => 'T',
            Feature::Skin => 'S',
            Feature::Insulin => 'I',
            Feature::Bmi => 'B',
            Feature::Dpf => 'D',
            Feature::Age => 'A',
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Feature::Preg => "pregnancies",
            Feature::Gluc => "glucose",
            Feature::Bp => "blood pressure",
            Feature::Skin => "skin thickness",
            Feature::Insulin => "insulin",
            Feature::Bmi => "BMI",
            Feature::Dpf => "diabetes pedigree function",
            Feature::Age => "age",
        }
    }

    /// Published full-dataset (min, max). Used for sanity warnings and for
    /// scaling synthetic records into realistic units.
    pub fn reference_range(self) -> (f64, f64) {
        match self {
            Feature::Preg => (0.0, 17.0),
            Feature::Gluc => (0.0, 199.0),
            Feature::Bp => (0.0, 122.0),
            Feature::Skin => (0.0, 99.0),
            Feature::Insulin => (0.0, 846.0),
            Feature::Bmi => (0.0, 67.1),
            Feature::Dpf => (0.078, 2.42),
            Feature::Age => (21.0, 81.0),
        }
    }

    /// Whether a recorded zero means "not measured".
    pub fn zero_is_missing(self) -> bool {
        matches!(
            self,
            Feature::Gluc | Feature::Bp | Feature::Skin | Feature::Insulin | Feature::Bmi
        )
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = LnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == lower)
            .ok_or_else(|| LnnError::structure(format!("unknown feature '{s}'")))
    }
}
