//! Fixtures shared by the criterion benches.

use dse_core::score::score_record;
use dse_core::search::LedgerEntry;
use dse_core::{EvaluationRecord, NetScoreWeights, RecordSource, RunLedger, SearchSpace, Theta};

/// In-memory ledger with `n` synthetic successes spread over a wide grid.
pub fn synthetic_ledger(n: usize) -> RunLedger {
    let alphas: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64 * 2.0).collect();
    let space = SearchSpace::new(alphas.clone(), vec![224]).expect("increasing alphas");
    let weights = NetScoreWeights::default();
    let mut ledger = RunLedger::new(weights, space);
    for (i, &alpha) in alphas.iter().enumerate() {
        let theta = Theta::new(alpha, 224).expect("positive alpha");
        let accuracy = 1.0 + (i * 7919 % 97) as f64;
        let record = EvaluationRecord::new(theta, accuracy, 1.0 + alpha, 0.1 + alpha / 10.0, RecordSource::Surrogate)
            .expect("positive fields");
        ledger
            .append(LedgerEntry::Success(score_record(record, &weights).expect("valid record")))
            .expect("in-memory append");
    }
    ledger
}
