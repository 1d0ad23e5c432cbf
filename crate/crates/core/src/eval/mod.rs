//! Sources of evaluation records: results files, external evaluator
//! processes and the analytic surrogate.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{ArchConfig, ArchError, Theta};
use crate::score::{EvaluationRecord, ScoreError};

mod file;
mod process;
mod surrogate;

pub use file::{ingest_results_file, parse_results, ResultsTable, RESULTS_HEADER, RESULTS_HEADER_WITH_PARAMS};
pub use process::{
    evaluate_external, EvalRequest, EvalResponse, EvaluatorSession, ProcessEvaluator, EXIT_GRACE,
    PROTOCOL_VERSION, TIMEOUT_ENV_VAR,
};
pub use surrogate::{surrogate_evaluate, RuntimeModel, SurrogateEvaluator, SurrogateParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error("invalid record: {0}")]
    Record(#[from] ScoreError),
    #[error("row {row}: parse error: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: validation error: {message}")]
    Validation { row: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("evaluator did not respond within {0:?}")]
    Timeout(Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("evaluator process failed: {0}")]
    Process(String),
    #[error("evaluator reported error: {0}")]
    Remote(String),
    #[error("no result for {0}")]
    NotInResults(Theta),
    #[error("invalid evaluator configuration: {0}")]
    Config(String),
}

/// Coarse failure class recorded in the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    Protocol,
    Process,
    Remote,
    Missing,
    Invalid,
    Other,
}

impl EvalError {
    pub fn kind(&self) -> FailureKind {
        match self {
            Self::Timeout(_) => FailureKind::Timeout,
            Self::Protocol(_) => FailureKind::Protocol,
            Self::Process(_) => FailureKind::Process,
            Self::Remote(_) => FailureKind::Remote,
            Self::NotInResults(_) => FailureKind::Missing,
            Self::Arch(_) | Self::Record(_) | Self::Validation { .. } => FailureKind::Invalid,
            Self::Parse { .. } | Self::Io { .. } | Self::Config(_) => FailureKind::Other,
        }
    }
}

/// Anything that can turn a design point into a record.
pub trait Evaluator: Sync {
    fn evaluate(&self, theta: Theta) -> Result<EvaluationRecord, EvalError>;

    /// How many evaluations may run at once.
    fn concurrency(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorMode {
    File,
    Process,
    Surrogate,
}

/// Descriptive training-protocol fields forwarded to external evaluators.
pub fn default_training_metadata() -> BTreeMap<String, serde_json::Value> {
    BTreeMap::from([
        ("steps".to_string(), serde_json::json!(800_000)),
        ("initial_lr".to_string(), serde_json::json!(0.004)),
        ("lr_decay_factor".to_string(), serde_json::json!(0.95)),
        ("lr_decay_steps".to_string(), serde_json::json!(200_000)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorConfig {
    pub mode: EvaluatorMode,
    pub file_path: Option<PathBuf>,
    pub command: Option<Vec<String>>,
    pub timeout_s: f64,
    pub request_metadata: BTreeMap<String, serde_json::Value>,
    pub surrogate: SurrogateParams,
    pub arch: ArchConfig,
    /// Concurrent child processes in process mode.
    pub workers: usize,
}

impl EvaluatorConfig {
    fn with_mode(mode: EvaluatorMode) -> Self {
        Self {
            mode,
            file_path: None,
            command: None,
            timeout_s: 3600.0,
            request_metadata: default_training_metadata(),
            surrogate: SurrogateParams::default(),
            arch: ArchConfig::default(),
            workers: 1,
        }
    }

    pub fn surrogate(params: SurrogateParams) -> Self {
        Self { surrogate: params, ..Self::with_mode(EvaluatorMode::Surrogate) }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self { file_path: Some(path.into()), ..Self::with_mode(EvaluatorMode::File) }
    }

    pub fn process<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Self {
        Self {
            command: Some(command.into_iter().map(Into::into).collect()),
            ..Self::with_mode(EvaluatorMode::Process)
        }
    }

    pub fn with_timeout(mut self, timeout_s: f64) -> Self {
        self.timeout_s = timeout_s;
        self
    }

    pub fn with_arch(mut self, arch: ArchConfig) -> Self {
        self.arch = arch;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let has_file = self.file_path.is_some();
        let has_cmd = self.command.as_ref().is_some_and(|c| !c.is_empty());
        match self.mode {
            EvaluatorMode::File if !has_file => return Err(EvalError::Config("file mode needs a results path".into())),
            EvaluatorMode::Process if !has_cmd => return Err(EvalError::Config("process mode needs a command".into())),
            EvaluatorMode::File | EvaluatorMode::Surrogate if has_cmd => {
                return Err(EvalError::Config("command given outside process mode".into()))
            }
            EvaluatorMode::Process | EvaluatorMode::Surrogate if has_file => {
                return Err(EvalError::Config("results path given outside file mode".into()))
            }
            _ => {}
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(EvalError::Config(format!("timeout must be > 0, got {}", self.timeout_s)));
        }
        if self.workers == 0 {
            return Err(EvalError::Config("workers must be >= 1".into()));
        }
        self.surrogate.validate()?;
        Ok(())
    }

    /// Construct the evaluator this configuration describes.
    pub fn build(&self) -> Result<Box<dyn Evaluator>, EvalError> {
        self.validate()?;
        Ok(match self.mode {
            EvaluatorMode::Surrogate => Box::new(SurrogateEvaluator::new(self.surrogate.clone(), self.arch.clone())),
            EvaluatorMode::File => {
                let path = self.file_path.as_ref().expect("validated");
                Box::new(ResultsTable::from_records(ingest_results_file(path, &self.arch)?))
            }
            EvaluatorMode::Process => Box::new(ProcessEvaluator::from_config(self)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_presence_rules() {
        assert!(EvaluatorConfig::surrogate(SurrogateParams::default()).validate().is_ok());
        assert!(EvaluatorConfig::file("r.csv").validate().is_ok());
        assert!(EvaluatorConfig::process(["true"]).validate().is_ok());

        let mut cfg = EvaluatorConfig::file("r.csv");
        cfg.command = Some(vec!["x".into()]);
        assert!(matches!(cfg.validate(), Err(EvalError::Config(_))));

        let mut cfg = EvaluatorConfig::process(["x"]);
        cfg.mode = EvaluatorMode::File;
        assert!(cfg.validate().is_err());

        assert!(EvaluatorConfig::process(Vec::<String>::new()).validate().is_err());
        assert!(EvaluatorConfig::surrogate(SurrogateParams::default()).with_timeout(0.0).validate().is_err());
        assert!(EvaluatorConfig::surrogate(SurrogateParams::default()).with_workers(0).validate().is_err());
    }

    #[test]
    fn error_kinds() {
        assert_eq!(EvalError::Timeout(Duration::from_secs(1)).kind(), FailureKind::Timeout);
        assert_eq!(EvalError::Protocol("x".into()).kind(), FailureKind::Protocol);
        assert_eq!(EvalError::Process("x".into()).kind(), FailureKind::Process);
        let t = Theta::new(1.0, 224).unwrap();
        assert_eq!(EvalError::NotInResults(t).kind(), FailureKind::Missing);
    }
}
