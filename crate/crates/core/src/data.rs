//! Pima CSV ingestion, seeded splitting, min-max normalization and synthetic
//! data generation.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LnnError, Result};
use crate::expr::Expression;
use crate::schema::{Feature, NUM_FEATURES};

pub const OUTCOME_COLUMN: &str = "Outcome";

/// One patient row in original units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub features: [f64; NUM_FEATURES],
    pub outcome: u8,
}

impl RawRecord {
    pub fn new(features: [f64; NUM_FEATURES], outcome: u8) -> Self {
        RawRecord { features, outcome }
    }

    pub fn get(&self, f: Feature) -> f64 {
        self.features[f.index()]
    }
}

/// Reads a Pima-format CSV. Column order and header case do not matter;
/// columns beyond the nine expected ones are ignored.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| LnnError::ingest(None, None, format!("cannot open {}: {e}", path.display())))?;
    read_csv(file)
}

pub fn read_csv(reader: impl Read) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| LnnError::ingest(Some(1), None, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(LnnError::ingest(None, None, "empty file (no header row)"));
    }
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if index.insert(h.to_ascii_lowercase(), i).is_some() {
            return Err(LnnError::ingest(Some(1), Some(h), "duplicate column"));
        }
    }
    let mut column_of = |name: &str| {
        index
            .remove(&name.to_ascii_lowercase())
            .ok_or_else(|| LnnError::ingest(Some(1), Some(name), "missing column"))
    };
    let mut feature_cols = [0usize; NUM_FEATURES];
    for f in Feature::ALL {
        feature_cols[f.index()] = column_of(f.column())?;
    }
    let outcome_col = column_of(OUTCOME_COLUMN)?;

    let mut out = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize);
            LnnError::ingest(row, None, e.to_string())
        })?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(out.len() + 2);
        let cell = |col: usize, name: &str| -> Result<f64> {
            let text = rec.get(col).unwrap_or("");
            let v: f64 = text
                .parse()
                .map_err(|_| LnnError::ingest(Some(row), Some(name), format!("not a number: '{text}'")))?;
            if !v.is_finite() {
                return Err(LnnError::ingest(
                    Some(row),
                    Some(name),
                    format!("not finite: '{text}'"),
                ));
            }
            Ok(v)
        };
        let mut features = [0.0; NUM_FEATURES];
        for f in Feature::ALL {
            let v = cell(feature_cols[f.index()], f.column())?;
            if v < 0.0 {
                return Err(LnnError::ingest(
                    Some(row),
                    Some(f.column()),
                    format!("negative value {v}"),
                ));
            }
            let (_, max) = f.reference_range();
            if v > 1.5 * max {
                warn!(
                    "row {row}: {} = {v} exceeds 1.5x the reference maximum {max}",
                    f.column()
                );
            }
            features[f.index()] = v;
        }
        let outcome = cell(outcome_col, OUTCOME_COLUMN)?;
        let outcome = match outcome {
            0.0 => 0,
            1.0 => 1,
            o => {
                return Err(LnnError::ingest(
                    Some(row),
                    Some(OUTCOME_COLUMN),
                    format!("outcome must be 0 or 1, got {o}"),
                ))
            }
        };
        out.push(RawRecord { features, outcome });
    }
    Ok(out)
}

/// Writes records with the canonical Pima header. Values use the shortest
/// representation that reads back to the same `f64`.
pub fn write_csv(writer: impl Write, records: &[RawRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Feature::ALL.iter().map(|f| f.column()).collect();
    header.push(OUTCOME_COLUMN);
    w.write_record(&header).map_err(csv_io)?;
    for r in records {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.outcome.to_string());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> LnnError {
    LnnError::Io(std::io::Error::other(e))
}

/// Indices of a seeded unstratified split: `(train, test)`, each in ascending order.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(LnnError::Config(format!("cannot split {n} records")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(LnnError::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let test_len = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..test_len].to_vec();
    let mut train = order[test_len..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Seeded shuffle-and-cut; `|test| = round(n * test_fraction)`.
pub fn split(
    records: &[RawRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<RawRecord>, Vec<RawRecord>)> {
    let (train, test) = split_indices(records.len(), test_fraction, seed)?;
    Ok((
        train.iter().map(|&i| records[i]).collect(),
        test.iter().map(|&i| records[i]).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub feature: Feature,
    pub min: f64,
    pub max: f64,
    /// Replacement for recorded zeros, when median imputation was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impute_median: Option<f64>,
}

/// Per-feature min/max fitted on the training partition only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub features: Vec<FeatureScale>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl NormalizationStats {
    pub fn fit(train: &[RawRecord], impute_median: bool) -> Result<Self> {
        if train.is_empty() {
            return Err(LnnError::Config(
                "cannot fit normalization on an empty partition".into(),
            ));
        }
        let mut features = Vec::with_capacity(NUM_FEATURES);
        let mut warnings = Vec::new();
        for f in Feature::ALL {
            let median = if impute_median && f.zero_is_missing() {
                let mut present: Vec<f64> = train.iter().map(|r| r.get(f)).filter(|&v| v != 0.0).collect();
                if present.is_empty() {
                    None
                } else {
                    present.sort_by(f64::total_cmp);
                    let m = present.len();
                    Some(if m % 2 == 1 {
                        present[m / 2]
                    } else {
                        0.5 * (present[m / 2 - 1] + present[m / 2])
                    })
                }
            } else {
                None
            };
            let value = |r: &RawRecord| match median {
                Some(med) if r.get(f) == 0.0 => med,
                _ => r.get(f),
            };
            let min = train.iter().map(value).fold(f64::INFINITY, f64::min);
            let max = train.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
            if max == min {
                let msg = format!(
                    "feature {} is constant ({min}) in training data; normalized to 0",
                    f.name()
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            features.push(FeatureScale {
                feature: f,
                min,
                max,
                impute_median: median,
            });
        }
        Ok(NormalizationStats { features, warnings })
    }

    /// Identity scaling, for data already in `[0, 1]`.
    pub fn unit() -> Self {
        NormalizationStats {
            features: Feature::ALL
                .iter()
                .map(|&feature| FeatureScale {
                    feature,
                    min: 0.0,
                    max: 1.0,
                    impute_median: None,
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    pub fn scale(&self, f: Feature) -> &FeatureScale {
        &self.features[f.index()]
    }

    /// `(x - min) / (max - min)` clipped to `[0, 1]`; 0 for a constant feature.
    pub fn normalize_value(&self, f: Feature, raw: f64) -> f64 {
        let s = self.scale(f);
        let raw = match s.impute_median {
            Some(m) if raw == 0.0 => m,
            _ => raw,
        };
        let span = s.max - s.min;
        if span <= 0.0 {
            return 0.0;
        }
        ((raw - s.min) / span).clamp(0.0, 1.0)
    }

    pub fn denormalize_value(&self, f: Feature, normalized: f64) -> f64 {
        let s = self.scale(f);
        s.min + normalized * (s.max - s.min)
    }

    pub fn transform(&self, r: &RawRecord) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for f in Feature::ALL {
            out[f.index()] = self.normalize_value(f, r.get(f));
        }
        out
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.features.len() != NUM_FEATURES
            || self
                .features
                .iter()
                .zip(Feature::ALL)
                .any(|(s, f)| s.feature != f)
        {
            return Err(LnnError::Schema(
                "normalization must list the eight features in order".into(),
            ));
        }
        if let Some(s) = self.features.iter().find(|s| !(s.max >= s.min)) {
            return Err(LnnError::Schema(format!("max < min for {}", s.feature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Train,
    Test,
    Synthetic,
}

/// Normalized feature matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<[f64; NUM_FEATURES]>,
    pub labels: Vec<u8>,
    pub provenance: Provenance,
    pub stats: NormalizationStats,
}

impl Dataset {
    pub fn from_records(records: &[RawRecord], stats: &NormalizationStats, provenance: Provenance) -> Self {
        Dataset {
            features: records.iter().map(|r| stats.transform(r)).collect(),
            labels: records.iter().map(|r| r.outcome).collect(),
            provenance,
            stats: stats.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

/// Fits statistics on `train` and applies them to both partitions.
pub fn normalize(train: &[RawRecord], other: &[RawRecord]) -> Result<(Dataset, Dataset, NormalizationStats)> {
    normalize_with(train, other, false)
}

/// As [`normalize`], optionally replacing recorded zeros in glucose, blood
/// pressure, skin, insulin and BMI by the training median of the nonzero values.
pub fn normalize_with(
    train: &[RawRecord],
    other: &[RawRecord],
    impute_median: bool,
) -> Result<(Dataset, Dataset, NormalizationStats)> {
    let stats = NormalizationStats::fit(train, impute_median)?;
    Ok((
        Dataset::from_records(train, &stats, Provenance::Train),
        Dataset::from_records(other, &stats, Provenance::Test),
        stats,
    ))
}

fn check_synth_args(n: usize, noise: f64) -> Result<()> {
    if n == 0 {
        return Err(LnnError::Config(
            "synthetic dataset needs at least one record".into(),
        ));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(LnnError::Config(format!(
            "noise must lie in [0, 0.5), got {noise}"
        )));
    }
    Ok(())
}

/// Draws `n` records with features uniform on `[0, 1]^8`, labelled 1 when `rule`
/// evaluates above 0.5, each label then flipped with probability `noise`.
pub fn synthesize(n: usize, seed: u64, rule: &Expression, noise: f64) -> Result<Dataset> {
    check_synth_args(n, noise)?;
    rule.validate(NUM_FEATURES)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = [0.0; NUM_FEATURES];
        for v in x.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let clean = u8::from(rule.eval_unchecked(&x) > 0.5);
        let flip = rng.gen::<f64>() < noise;
        features.push(x);
        labels.push(if flip { 1 - clean } else { clean });
    }
    Ok(Dataset {
        features,
        labels,
        provenance: Provenance::Synthetic,
        stats: NormalizationStats::unit(),
    })
}

/// [`synthesize`] mapped into raw units via each feature's reference range, for
/// writing out as a Pima-format CSV.
pub fn synthesize_records(n: usize, seed: u64, rule: &Expression, noise: f64) -> Result<Vec<RawRecord>> {
    let ds = synthesize(n, seed, rule, noise)?;
    Ok(ds
        .features
        .iter()
        .zip(&ds.labels)
        .map(|(x, &y)| {
            let mut raw = [0.0; NUM_FEATURES];
            for f in Feature::ALL {
                let (lo, hi) = f.reference_range();
                raw[f.index()] = lo + x[f.index()] * (hi - lo);
            }
            RawRecord::new(raw, y)
        })
        .collect())
}
