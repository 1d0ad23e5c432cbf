use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use super::{ExhaustiveGrid, FailureRecord, LedgerEntry, RunLedger, SearchError, SearchSpace, SearchStrategy};
use crate::arch::Theta;
use crate::eval::{EvalError, Evaluator, EvaluatorConfig};
use crate::score::{score_record, EvaluationRecord, NetScoreWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExploreSummary {
    /// Candidates produced by the strategy.
    pub candidates: usize,
    /// Candidates already successful in the ledger.
    pub skipped: usize,
    pub evaluated: usize,
    pub succeeded: usize,
    pub failed: usize,
}

/// Build the configured evaluator and explore the full grid.
pub fn explore(
    space: &SearchSpace,
    config: &EvaluatorConfig,
    weights: &NetScoreWeights,
    ledger: &mut RunLedger,
) -> Result<ExploreSummary, SearchError> {
    let evaluator = config.build()?;
    explore_with(space, evaluator.as_ref(), &ExhaustiveGrid, weights, ledger)
}

/// Evaluate every candidate without a successful ledger entry and append
/// the outcome. Evaluator failures are logged and recorded; only ledger I/O
/// aborts the run.
pub fn explore_with(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    strategy: &dyn SearchStrategy,
    weights: &NetScoreWeights,
    ledger: &mut RunLedger,
) -> Result<ExploreSummary, SearchError> {
    ledger.rebind(*weights, space.clone())?;

    let done: HashSet<Theta> = ledger.successes().into_keys().collect();
    let candidates = strategy.candidates(space);
    let pending: Vec<Theta> = candidates.iter().copied().filter(|t| !done.contains(t)).collect();
    let mut summary = ExploreSummary {
        candidates: candidates.len(),
        skipped: candidates.len() - pending.len(),
        ..ExploreSummary::default()
    };

    let mut record = |theta: Theta, outcome: Result<EvaluationRecord, EvalError>| -> Result<(), SearchError> {
        summary.evaluated += 1;
        let entry = match outcome.and_then(|r| Ok(score_record(r, weights)?)) {
            Ok(scored) => {
                summary.succeeded += 1;
                log::info!("{theta}: score {:.4}", scored.score);
                LedgerEntry::Success(scored)
            }
            Err(e) => {
                summary.failed += 1;
                log::warn!("{theta}: evaluation failed, skipping: {e}");
                LedgerEntry::Failure(FailureRecord { theta, kind: e.kind(), message: e.to_string() })
            }
        };
        ledger.append(entry)
    };

    let workers = evaluator.concurrency().max(1).min(pending.len().max(1));
    if workers == 1 {
        for &theta in &pending {
            record(theta, evaluator.evaluate(theta))?;
        }
        return Ok(summary);
    }

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    let result = thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, abort, pending) = (&next, &abort, &pending);
            scope.spawn(move || {
                while !abort.load(Ordering::Relaxed) {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&theta) = pending.get(i) else { break };
                    let outcome = evaluator.evaluate(theta);
                    if tx.send((theta, outcome)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        // single writer: all appends happen on this thread
        for (theta, outcome) in rx {
            if let Err(e) = record(theta, outcome) {
                abort.store(true, Ordering::Relaxed);
                return Err(e);
            }
        }
        Ok(())
    });
    result.map(|()| summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{FailureKind, SurrogateParams};
    use crate::score::RecordSource;
    use std::sync::Mutex;

    struct Flaky {
        calls: Mutex<Vec<Theta>>,
        fail_alpha: f64,
        workers: usize,
    }

    impl Evaluator for Flaky {
        fn evaluate(&self, theta: Theta) -> Result<EvaluationRecord, EvalError> {
            self.calls.lock().unwrap().push(theta);
            if theta.alpha() == self.fail_alpha {
                return Err(EvalError::Protocol("garbled".into()));
            }
            Ok(EvaluationRecord::new(theta, 10.0 * theta.alpha(), 1.0, 0.1, RecordSource::Surrogate)?)
        }

        fn concurrency(&self) -> usize {
            self.workers
        }
    }

    fn flaky(workers: usize) -> Flaky {
        Flaky { calls: Mutex::new(Vec::new()), fail_alpha: 0.5, workers }
    }

    #[test]
    fn singleton_surrogate_run() {
        let space = SearchSpace::new(vec![1.0], vec![224]).unwrap();
        let w = NetScoreWeights::default();
        let mut ledger = RunLedger::new(w, space.clone());
        let cfg = EvaluatorConfig::surrogate(SurrogateParams::default());
        let summary = explore(&space, &cfg, &w, &mut ledger).unwrap();
        assert_eq!(summary.succeeded, 1);
        assert_eq!(ledger.entries().len(), 1);

        let again = explore(&space, &cfg, &w, &mut ledger).unwrap();
        assert_eq!(again.evaluated, 0);
        assert_eq!(again.skipped, 1);
    }

    #[test]
    fn failures_are_recorded_and_retried() {
        let space = SearchSpace::new(vec![0.5, 1.0], vec![96, 224]).unwrap();
        let w = NetScoreWeights::default();
        let mut ledger = RunLedger::new(w, space.clone());
        let ev = flaky(1);
        let s = explore_with(&space, &ev, &ExhaustiveGrid, &w, &mut ledger).unwrap();
        assert_eq!((s.evaluated, s.succeeded, s.failed), (4, 2, 2));
        let kinds: Vec<FailureKind> = ledger.failures().map(|f| f.kind).collect();
        assert_eq!(kinds, vec![FailureKind::Protocol, FailureKind::Protocol]);

        // failed points are attempted again, successful ones are not
        let s = explore_with(&space, &ev, &ExhaustiveGrid, &w, &mut ledger).unwrap();
        assert_eq!((s.evaluated, s.skipped), (2, 2));
    }

    #[test]
    fn concurrent_workers_cover_grid_once() {
        let space = SearchSpace::default();
        let w = NetScoreWeights::default();
        let mut ledger = RunLedger::new(w, space.clone());
        let ev = flaky(4);
        let s = explore_with(&space, &ev, &ExhaustiveGrid, &w, &mut ledger).unwrap();
        assert_eq!(s.evaluated, 36);
        let mut calls = ev.calls.into_inner().unwrap();
        calls.sort();
        calls.dedup();
        assert_eq!(calls.len(), 36);
        assert_eq!(ledger.successes().len() + ledger.failures().count(), 36);
    }

    #[test]
    fn mismatched_ledger_rejected() {
        let space = SearchSpace::new(vec![1.0], vec![224]).unwrap();
        let w = NetScoreWeights::default();
        let mut ledger = RunLedger::new(w, space.clone());
        explore_with(&space, &flaky(1), &ExhaustiveGrid, &w, &mut ledger).unwrap();
        let other = SearchSpace::new(vec![1.0], vec![192, 224]).unwrap();
        assert!(matches!(
            explore_with(&other, &flaky(1), &ExhaustiveGrid, &w, &mut ledger),
            Err(SearchError::Mismatch(_))
        ));
    }

    #[test]
    fn empty_in_memory_ledger_adopts_arguments() {
        let space = SearchSpace::new(vec![1.0], vec![224]).unwrap();
        let w = NetScoreWeights::new(1.0, 0.5, 0.5).unwrap();
        let mut ledger = RunLedger::new(NetScoreWeights::default(), SearchSpace::default());
        explore_with(&space, &flaky(1), &ExhaustiveGrid, &w, &mut ledger).unwrap();
        assert_eq!(ledger.weights(), &w);
        assert_eq!(ledger.space(), &space);
    }
}
