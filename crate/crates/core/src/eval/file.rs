use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{EvalError, Evaluator};
use crate::arch::{ArchConfig, Theta};
use crate::score::{EvaluationRecord, RecordSource};

pub const RESULTS_HEADER: &str = "alpha,resolution,map,cpu_time_s";
pub const RESULTS_HEADER_WITH_PARAMS: &str = "alpha,resolution,map,cpu_time_s,params_m";

/// Read a results CSV. Missing `params_m` values are filled from the
/// analytic parameter count of the configured architecture.
pub fn ingest_results_file(path: impl AsRef<Path>, arch: &ArchConfig) -> Result<Vec<EvaluationRecord>, EvalError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
    parse_results(file, arch)
}

pub fn parse_results<R: Read>(reader: R, arch: &ArchConfig) -> Result<Vec<EvaluationRecord>, EvalError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::None).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| EvalError::Parse { row: 0, message: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    let with_params = match header.as_str() {
        RESULTS_HEADER => false,
        RESULTS_HEADER_WITH_PARAMS => true,
        other => {
            return Err(EvalError::Parse {
                row: 0,
                message: format!("header must be {RESULTS_HEADER_WITH_PARAMS:?} (params_m optional), got {other:?}"),
            })
        }
    };

    let mut records = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| EvalError::Parse { row: row_no, message: e.to_string() })?;
        let parse_err = |message: String| EvalError::Parse { row: row_no, message };
        let invalid = |message: String| EvalError::Validation { row: row_no, message };
        let num = |idx: usize, name: &str| -> Result<f64, EvalError> {
            row[idx].parse::<f64>().map_err(|e| parse_err(format!("{name} {:?}: {e}", &row[idx])))
        };

        let alpha = num(0, "alpha")?;
        let resolution = row[1]
            .parse::<u32>()
            .map_err(|e| parse_err(format!("resolution {:?}: {e}", &row[1])))?;
        let accuracy = num(2, "map")?;
        let runtime_s = num(3, "cpu_time_s")?;
        let params_m = match row.get(4) {
            Some(cell) if with_params && !cell.is_empty() => Some(num(4, "params_m")?),
            _ => None,
        };

        let theta = Theta::new(alpha, resolution).map_err(|e| invalid(e.to_string()))?;
        let params_m = match params_m {
            Some(p) => p,
            None => arch.params_m(theta).map_err(|e| invalid(e.to_string()))?,
        };
        let record = EvaluationRecord::new(theta, accuracy, params_m, runtime_s, RecordSource::MeasuredFile)
            .map_err(|e| invalid(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Pre-measured records served as an evaluator. Later rows override
/// earlier rows for the same design point.
#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    records: HashMap<Theta, EvaluationRecord>,
}

impl ResultsTable {
    pub fn from_records(records: impl IntoIterator<Item = EvaluationRecord>) -> Self {
        Self { records: records.into_iter().map(|r| (r.theta, r)).collect() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sorted distinct alphas and resolutions present in the table.
    pub fn axes(&self) -> (Vec<f64>, Vec<u32>) {
        let mut alphas: Vec<f64> = self.records.keys().map(Theta::alpha).collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let mut res: Vec<u32> = self.records.keys().map(Theta::resolution).collect();
        res.sort_unstable();
        res.dedup();
        (alphas, res)
    }
}

impl Evaluator for ResultsTable {
    fn evaluate(&self, theta: Theta) -> Result<EvaluationRecord, EvalError> {
        self.records.get(&theta).cloned().ok_or(EvalError::NotInResults(theta))
    }
}
