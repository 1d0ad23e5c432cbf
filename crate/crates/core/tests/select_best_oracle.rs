//! select_best against a brute-force linear scan on random ledgers.

use dse_core::score::{EvaluationRecord, NetScoreWeights, RecordSource, ScoredRecord};
use dse_core::search::{select_best, LedgerEntry, RunLedger, SearchSpace};
use dse_core::Theta;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight scan: keep the current best, replace it only when the
/// candidate wins on the first differing key.
fn brute_force(records: &[ScoredRecord]) -> &ScoredRecord {
    let mut best = &records[0];
    for r in &records[1..] {
        let key = |s: &ScoredRecord| {
            (-s.score, s.record.params_m, s.record.runtime_s, s.record.theta.alpha(), s.record.theta.resolution() as f64)
        };
        let (a, b) = (key(r), key(best));
        let better = [a.0 - b.0, a.1 - b.1, a.2 - b.2, a.3 - b.3, a.4 - b.4]
            .into_iter()
            .find(|d| *d != 0.0)
            .is_some_and(|d| d < 0.0);
        if better {
            best = r;
        }
    }
    best
}

fn random_records(rng: &mut ChaCha8Rng) -> Vec<ScoredRecord> {
    let n = rng.gen_range(1..40);
    let mut thetas: Vec<Theta> = (0..n)
        .map(|_| Theta::new(rng.gen_range(1..=40) as f64 * 0.05, 32 * rng.gen_range(1..=12)).unwrap())
        .collect();
    thetas.sort();
    thetas.dedup();
    // small value pools so exact ties on score, params and runtime are common
    let scores = [20.0, 24.5, 35.94, 35.94, 40.0];
    let params = [1.0, 2.5, 3.3];
    let runtimes = [0.1, 0.2];
    thetas
        .into_iter()
        .map(|theta| ScoredRecord {
            record: EvaluationRecord::new(
                theta,
                25.0,
                *params.choose(rng).unwrap(),
                *runtimes.choose(rng).unwrap(),
                RecordSource::Surrogate,
            )
            .unwrap(),
            score: *scores.choose(rng).unwrap(),
        })
        .collect()
}

fn ledger_of(records: &[ScoredRecord]) -> RunLedger {
    let mut ledger = RunLedger::new(NetScoreWeights::default(), SearchSpace::default());
    for r in records {
        ledger.append(LedgerEntry::Success(r.clone())).unwrap();
    }
    ledger
}

#[test]
fn agrees_with_linear_scan_and_ignores_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ties = 0;
    for _ in 0..1000 {
        let mut records = random_records(&mut rng);
        let expected = brute_force(&records).clone();
        if records.iter().filter(|r| r.score == expected.score).count() > 1 {
            ties += 1;
        }
        assert_eq!(select_best(&ledger_of(&records)).unwrap(), expected);
        records.shuffle(&mut rng);
        assert_eq!(select_best(&ledger_of(&records)).unwrap(), expected);
    }
    assert!(ties > 100, "only {ties} ledgers exercised ties");
}

#[test]
fn reported_optimum_is_selected() {
    let theta = |a, r| Theta::new(a, r).unwrap();
    let rec = |t: Theta, s: f64| ScoredRecord {
        record: EvaluationRecord::new(t, 25.0, 3.0, 0.2, RecordSource::MeasuredFile).unwrap(),
        score: s,
    };
    let records = vec![rec(theta(1.0, 224), 60.1), rec(theta(1.3, 224), 68.7), rec(theta(1.15, 220), 66.0)];
    let best = select_best(&ledger_of(&records)).unwrap();
    assert_eq!(best.record.theta, theta(1.3, 224));
}
