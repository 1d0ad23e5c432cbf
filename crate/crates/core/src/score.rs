//! Modified NetScore: accuracy against parameter count and CPU runtime, in dB.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Theta;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("{field} must be > 0, got {value}")]
    NonPositiveInput { field: &'static str, value: f64 },
    #[error("record {index} ({theta}): {source}")]
    InRecord {
        index: usize,
        theta: Theta,
        #[source]
        source: Box<ScoreError>,
    },
    #[error("weight {name} must be finite and >= 0, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error("accuracy must be in (0, 100] percent, got {0}")]
    AccuracyOutOfRange(f64),
}

/// Exponents on accuracy (kappa), parameters (beta) and runtime (gamma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetScoreWeights {
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for NetScoreWeights {
    fn default() -> Self {
        Self { kappa: 1.0, beta: 0.45, gamma: 0.2 }
    }
}

impl NetScoreWeights {
    pub fn new(kappa: f64, beta: f64, gamma: f64) -> Result<Self, ScoreError> {
        for (name, value) in [("kappa", kappa), ("beta", beta), ("gamma", gamma)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ScoreError::InvalidWeight { name, value });
            }
        }
        Ok(Self { kappa, beta, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    MeasuredFile,
    ExternalProcess,
    Surrogate,
}

impl RecordSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MeasuredFile => "measured_file",
            Self::ExternalProcess => "external_process",
            Self::Surrogate => "surrogate",
        }
    }
}

/// Measured or derived (accuracy, params, runtime) for one design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub theta: Theta,
    /// mAP in percent.
    pub accuracy: f64,
    /// Millions of trainable parameters.
    pub params_m: f64,
    /// CPU seconds per inference.
    pub runtime_s: f64,
    pub source: RecordSource,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl EvaluationRecord {
    /// Validating constructor; `metadata` starts empty.
    pub fn new(
        theta: Theta,
        accuracy: f64,
        params_m: f64,
        runtime_s: f64,
        source: RecordSource,
    ) -> Result<Self, ScoreError> {
        let record = Self { theta, accuracy, params_m, runtime_s, source, metadata: BTreeMap::new() };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        check_positive(self.accuracy, self.params_m, self.runtime_s)?;
        if self.accuracy > 100.0 {
            return Err(ScoreError::AccuracyOutOfRange(self.accuracy));
        }
        Ok(())
    }
}

fn check_positive(accuracy: f64, params_m: f64, runtime_s: f64) -> Result<(), ScoreError> {
    for (field, value) in [("accuracy", accuracy), ("params_m", params_m), ("runtime_s", runtime_s)] {
        // NaN fails this too
        if !(value > 0.0 && value.is_finite()) {
            return Err(ScoreError::NonPositiveInput { field, value });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record: EvaluationRecord,
    /// Decibels.
    pub score: f64,
}

/// `20 log10(a^kappa / (p^beta r^gamma))` on raw values.
pub fn netscore(accuracy: f64, params_m: f64, runtime_s: f64, weights: &NetScoreWeights) -> Result<f64, ScoreError> {
    check_positive(accuracy, params_m, runtime_s)?;
    // sum of logs rather than the ratio: no overflow for large exponents
    Ok(20.0
        * (weights.kappa * accuracy.log10() - weights.beta * params_m.log10() - weights.gamma * runtime_s.log10()))
}

pub fn modified_netscore(record: &EvaluationRecord, weights: &NetScoreWeights) -> Result<f64, ScoreError> {
    netscore(record.accuracy, record.params_m, record.runtime_s, weights)
}

pub fn score_record(record: EvaluationRecord, weights: &NetScoreWeights) -> Result<ScoredRecord, ScoreError> {
    let score = modified_netscore(&record, weights)?;
    Ok(ScoredRecord { record, score })
}

/// Order-preserving scoring; the first invalid record aborts with its index.
pub fn score_all(records: &[EvaluationRecord], weights: &NetScoreWeights) -> Result<Vec<ScoredRecord>, ScoreError> {
    records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            score_record(r.clone(), weights).map_err(|e| ScoreError::InRecord {
                index,
                theta: r.theta,
                source: Box::new(e),
            })
        })
        .collect()
}
