//! Plottable exports of a run ledger: metric surfaces over the
//! (alpha, resolution) plane and the ranking table.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Theta;
use crate::score::{RecordSource, ScoredRecord};
use crate::search::{preference, RunLedger, ThetaStatus};

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("surface csv line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown metric {0:?} (expected map, cpu_time_s, netscore or params_m)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Map,
    CpuTimeS,
    Netscore,
    ParamsM,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Map, Metric::CpuTimeS, Metric::Netscore, Metric::ParamsM];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Map => "map",
            Self::CpuTimeS => "cpu_time_s",
            Self::Netscore => "netscore",
            Self::ParamsM => "params_m",
        }
    }

    pub fn value(&self, scored: &ScoredRecord) -> f64 {
        match self {
            Self::Map => scored.record.accuracy,
            Self::CpuTimeS => scored.record.runtime_s,
            Self::Netscore => scored.score,
            Self::ParamsM => scored.record.params_m,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ReportError::UnknownMetric(s.to_string()))
    }
}

/// Metric values over the grid. `values[r][a]` belongs to
/// `resolutions[r]` and `alphas[a]`; `None` where no success exists.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub metric: Metric,
    pub alphas: Vec<f64>,
    pub resolutions: Vec<u32>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl SurfaceGrid {
    pub fn from_ledger(ledger: &RunLedger, metric: Metric) -> Self {
        let space = ledger.space();
        let successes = ledger.successes();
        let values = space
            .resolutions()
            .iter()
            .map(|&r| {
                space
                    .alphas()
                    .iter()
                    .map(|&a| {
                        let theta = Theta::new(a, r).ok()?;
                        successes.get(&theta).map(|s| metric.value(s))
                    })
                    .collect()
            })
            .collect();
        Self { metric, alphas: space.alphas().to_vec(), resolutions: space.resolutions().to_vec(), values }
    }

    pub fn get(&self, alpha: f64, resolution: u32) -> Option<f64> {
        let a = self.alphas.iter().position(|&x| x == alpha)?;
        let r = self.resolutions.iter().position(|&x| x == resolution)?;
        self.values[r][a]
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().flatten().all(Option::is_some)
    }

    /// One row per alpha, one column per resolution, header row of
    /// resolutions. Missing cells are empty. Values use the shortest
    /// representation that parses back to the same float.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha");
        for r in &self.resolutions {
            write!(out, ",{r}").unwrap();
        }
        out.push('\n');
        for (a, alpha) in self.alphas.iter().enumerate() {
            write!(out, "{alpha}").unwrap();
            for row in &self.values {
                out.push(',');
                if let Some(v) = row[a] {
                    write!(out, "{v}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, metric: Metric) -> Result<Self, ReportError> {
        let err = |line: usize, message: String| ReportError::Parse { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let mut cells = header.split(',');
        if cells.next() != Some("alpha") {
            return Err(err(1, "first header cell must be \"alpha\"".into()));
        }
        let resolutions = cells
            .map(|c| c.parse::<u32>().map_err(|e| err(1, format!("resolution {c:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;

        let mut alphas = Vec::new();
        let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != resolutions.len() + 1 {
                return Err(err(n, format!("expected {} cells, got {}", resolutions.len() + 1, cells.len())));
            }
            alphas.push(cells[0].parse::<f64>().map_err(|e| err(n, format!("alpha {:?}: {e}", cells[0])))?);
            let row = cells[1..]
                .iter()
                .map(|c| match *c {
                    "" => Ok(None),
                    c => c.parse::<f64>().map(Some).map_err(|e| err(n, format!("value {c:?}: {e}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            columns.push(row);
        }
        // transpose alpha-major rows back to resolution-major storage
        let values = (0..resolutions.len()).map(|r| columns.iter().map(|row| row[r]).collect()).collect();
        Ok(Self { metric, alphas, resolutions, values })
    }
}

pub const RANKING_HEADER: &str = "rank,alpha,resolution,status,map,params_m,cpu_time_s,netscore,source";

/// Successes best-first, then failed design points.
pub fn ranking_csv(ledger: &RunLedger) -> String {
    let mut ranked: Vec<&ScoredRecord> = ledger.successes().into_values().collect();
    ranked.sort_by(|a, b| preference(a, b));
    let mut failed: Vec<_> = ledger
        .status()
        .into_values()
        .filter_map(|s| match s {
            ThetaStatus::Failed(f) => Some(f),
            ThetaStatus::Success(_) => None,
        })
        .collect();
    failed.sort_by_key(|f| (f.theta.resolution(), f.theta));

    let mut out = String::from(RANKING_HEADER);
    out.push('\n');
    for (i, s) in ranked.iter().enumerate() {
        let r = &s.record;
        writeln!(
            out,
            "{},{},{},ok,{},{},{},{},{}",
            i + 1,
            r.theta.alpha(),
            r.theta.resolution(),
            r.accuracy,
            r.params_m,
            r.runtime_s,
            s.score,
            r.source.as_str()
        )
        .unwrap();
    }
    for f in failed {
        let kind = serde_json::to_value(f.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        writeln!(out, ",{},{},failed:{},,,,,", f.theta.alpha(), f.theta.resolution(), kind).unwrap();
    }
    out
}

/// Caveats that travel with any exported report.
pub fn report_notes(ledger: &RunLedger) -> String {
    let mut notes = vec![
        "params_m counts trainable parameters of the full detection network (backbone, SSD extra layers and prediction head); batch-norm running statistics excluded.".to_string(),
        "netscore = 20*log10(map^kappa / (params_m^beta * cpu_time_s^gamma)), map in percent.".to_string(),
    ];
    let w = ledger.weights();
    notes.push(format!("weights: kappa={} beta={} gamma={}", w.kappa, w.beta, w.gamma));
    if ledger.space() == &crate::search::SearchSpace::default() {
        notes.push("grid: default reconstruction alpha {0.35,0.5,0.75,1.0,1.15,1.3} x resolution {96,128,160,192,220,224}; only the endpoints and 1.15/220 are fixed, the intermediate values are assumed.".to_string());
    }
    let synthetic = ledger.successes().values().filter(|s| s.record.source == RecordSource::Surrogate).count();
    if synthetic > 0 {
        notes.push(format!("{synthetic} record(s) come from the analytic surrogate and are SYNTHETIC, not measurements."));
    }
    let mut out = String::new();
    for n in notes {
        writeln!(out, "- {n}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::FailureKind;
    use crate::score::{score_record, EvaluationRecord, NetScoreWeights};
    use crate::search::{FailureRecord, LedgerEntry, SearchSpace};

    fn ledger_2x2(fail: Option<(f64, u32)>) -> RunLedger {
        let space = SearchSpace::new(vec![0.75, 1.0], vec![192, 224]).unwrap();
        let w = NetScoreWeights::default();
        let mut ledger = RunLedger::new(w, space);
        for (a, r) in [(0.75, 192), (1.0, 192), (0.75, 224), (1.0, 224)] {
            let theta = Theta::new(a, r).unwrap();
            let entry = if fail == Some((a, r)) {
                LedgerEntry::Failure(FailureRecord { theta, kind: FailureKind::Timeout, message: "t".into() })
            } else {
                let rec = EvaluationRecord::new(theta, 20.0 * a, 3.0 * a, f64::from(r) / 1000.0, RecordSource::MeasuredFile)
                    .unwrap();
                LedgerEntry::Success(score_record(rec, &w).unwrap())
            };
            ledger.append(entry).unwrap();
        }
        ledger
    }

    #[test]
    fn complete_surface_has_no_blanks() {
        let s = SurfaceGrid::from_ledger(&ledger_2x2(None), Metric::Map);
        assert!(s.is_complete());
        assert_eq!(s.to_csv(), "alpha,192,224\n0.75,15,15\n1,20,20\n");
    }

    #[test]
    fn failure_leaves_one_empty_cell() {
        let s = SurfaceGrid::from_ledger(&ledger_2x2(Some((1.0, 224))), Metric::CpuTimeS);
        assert!(!s.is_complete());
        assert_eq!(s.to_csv(), "alpha,192,224\n0.75,0.192,0.224\n1,0.192,\n");
        assert_eq!(s.get(1.0, 224), None);
        assert_eq!(s.get(0.75, 224), Some(0.224));
    }

    #[test]
    fn csv_round_trip() {
        for fail in [None, Some((0.75, 192))] {
            let s = SurfaceGrid::from_ledger(&ledger_2x2(fail), Metric::Netscore);
            assert_eq!(SurfaceGrid::from_csv(&s.to_csv(), Metric::Netscore).unwrap(), s);
        }
    }

    #[test]
    fn csv_parse_errors() {
        assert!(SurfaceGrid::from_csv("", Metric::Map).is_err());
        assert!(SurfaceGrid::from_csv("res,1\n", Metric::Map).is_err());
        assert!(matches!(
            SurfaceGrid::from_csv("alpha,224\n1.0,2,3\n", Metric::Map),
            Err(ReportError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn metric_names() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("flops".parse::<Metric>().is_err());
    }

    #[test]
    fn ranking_lists_best_first_then_failures() {
        let csv = ranking_csv(&ledger_2x2(Some((0.75, 192))));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RANKING_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,"));
        assert_eq!(lines[4], ",0.75,192,failed:timeout,,,,,");
        let scores: Vec<f64> = lines[1..4].iter().map(|l| l.split(',').nth(7).unwrap().parse().unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn notes_flag_synthetic_data() {
        let mut ledger = RunLedger::new(NetScoreWeights::default(), SearchSpace::default());
        assert!(!report_notes(&ledger).contains("SYNTHETIC"));
        let theta = Theta::new(1.0, 224).unwrap();
        let rec = EvaluationRecord::new(theta, 20.0, 3.0, 0.3, RecordSource::Surrogate).unwrap();
        ledger.append(LedgerEntry::Success(score_record(rec, ledger.weights()).unwrap())).unwrap();
        let notes = report_notes(&ledger);
        assert!(notes.contains("SYNTHETIC"));
        assert!(notes.contains("default reconstruction"));
    }
}
