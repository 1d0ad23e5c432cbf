//! Design-space enumeration, the run ledger, exploration and argmax selection.

use std::cmp::Ordering;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Theta;
use crate::eval::EvalError;
use crate::score::ScoredRecord;

mod explore;
mod ledger;

pub use explore::{explore, explore_with, ExploreSummary};
pub use ledger::{FailureRecord, LedgerEntry, LedgerHeader, RunLedger, ThetaStatus, LEDGER_SCHEMA_VERSION};

pub const DEFAULT_ALPHAS: [f64; 6] = [0.35, 0.5, 0.75, 1.0, 1.15, 1.3];
pub const DEFAULT_RESOLUTIONS: [u32; 6] = [96, 128, 160, 192, 220, 224];

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unsupported ledger schema version {0}")]
    UnsupportedSchema(u32),
    #[error("ledger does not match this run: {0}")]
    Mismatch(String),
    #[error("ledger has no successful entries")]
    EmptyLedger,
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("ledger already exists: {0}")]
    Exists(PathBuf),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Grid axes. Both lists are non-empty and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SearchSpace {
    alphas: Vec<f64>,
    resolutions: Vec<u32>,
}

#[derive(Deserialize)]
struct RawSpace {
    alphas: Vec<f64>,
    resolutions: Vec<u32>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = SearchError;

    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        SearchSpace::new(raw.alphas, raw.resolutions)
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { alphas: DEFAULT_ALPHAS.to_vec(), resolutions: DEFAULT_RESOLUTIONS.to_vec() }
    }
}

impl SearchSpace {
    pub fn new(alphas: Vec<f64>, resolutions: Vec<u32>) -> Result<Self, SearchError> {
        if alphas.is_empty() || resolutions.is_empty() {
            return Err(SearchError::InvalidSpace("alphas and resolutions must be non-empty".into()));
        }
        if !alphas.windows(2).all(|w| w[0] < w[1]) {
            return Err(SearchError::InvalidSpace("alphas must be strictly increasing".into()));
        }
        if !resolutions.windows(2).all(|w| w[0] < w[1]) {
            return Err(SearchError::InvalidSpace("resolutions must be strictly increasing".into()));
        }
        // validates the smallest of each axis; the rest follow from ordering
        Theta::new(alphas[0], resolutions[0]).map_err(|e| SearchError::InvalidSpace(e.to_string()))?;
        if !alphas.iter().all(|a| a.is_finite()) {
            return Err(SearchError::InvalidSpace("alphas must be finite".into()));
        }
        Ok(Self { alphas, resolutions })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn resolutions(&self) -> &[u32] {
        &self.resolutions
    }

    pub fn len(&self) -> usize {
        self.alphas.len() * self.resolutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cartesian product, resolution-major: all alphas for the first resolution,
/// then all alphas for the second, and so on.
pub fn generate_grid(space: &SearchSpace) -> Vec<Theta> {
    space
        .resolutions
        .iter()
        .flat_map(|&r| space.alphas.iter().map(move |&a| Theta::new(a, r).expect("space is validated")))
        .collect()
}

/// Produces the candidates an exploration visits.
pub trait SearchStrategy {
    fn candidates(&self, space: &SearchSpace) -> Vec<Theta>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveGrid;

impl SearchStrategy for ExhaustiveGrid {
    fn candidates(&self, space: &SearchSpace) -> Vec<Theta> {
        generate_grid(space)
    }
}

/// Total preference order: higher score first, then fewer parameters,
/// shorter runtime, smaller alpha, smaller resolution.
pub fn preference(a: &ScoredRecord, b: &ScoredRecord) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.record.params_m.total_cmp(&b.record.params_m))
        .then(a.record.runtime_s.total_cmp(&b.record.runtime_s))
        .then(a.record.theta.alpha().total_cmp(&b.record.theta.alpha()))
        .then(a.record.theta.resolution().cmp(&b.record.theta.resolution()))
}

/// Best of a set of scored records under [`preference`].
pub fn best_of<'a>(records: impl IntoIterator<Item = &'a ScoredRecord>) -> Option<&'a ScoredRecord> {
    records.into_iter().min_by(|a, b| preference(a, b))
}

/// The argmax of the score over the ledger's deduplicated successes.
pub fn select_best(ledger: &RunLedger) -> Result<ScoredRecord, SearchError> {
    best_of(ledger.successes().into_values()).cloned().ok_or(SearchError::EmptyLedger)
}
