//! File ingestion and a replaying evaluator process give the same scores.
#![cfg(unix)]

use std::fmt::Write as _;

use dse_core::eval::{parse_results, EvalRequest, EvaluatorConfig};
use dse_core::score::{score_all, NetScoreWeights};
use dse_core::search::{explore, RunLedger, SearchSpace};
use dse_core::{ArchConfig, Theta};

const TABLE: &str = "alpha,resolution,map,cpu_time_s,params_m
0.75,192,21.3,0.118,
1.0,192,23.9,0.151,
0.75,224,22.8,0.134,2.61
1.0,224,25.0,0.2,
";

/// A shell script that answers each request by matching its theta.
fn replay_script(table: &str) -> String {
    let records = parse_results(table.as_bytes(), &ArchConfig::default()).unwrap();
    let mut script = String::from("while IFS= read -r req; do case \"$req\" in\n");
    for (line, r) in table.lines().skip(1).zip(&records) {
        let req = serde_json::to_string(&EvalRequest::new(r.theta, 21, Default::default())).unwrap();
        let key = &req[..req.find(",\"num_classes\"").unwrap()];
        let key = key.trim_start_matches("{\"v\":1,");
        let params = line.split(',').nth(4).filter(|s| !s.is_empty());
        let mut resp = format!("{{\"map\":{},\"cpu_time_s\":{}", r.accuracy, r.runtime_s);
        if let Some(p) = params {
            write!(resp, ",\"params_m\":{p}").unwrap();
        }
        resp.push('}');
        writeln!(script, "  *'{key}'*) echo '{resp}' ;;").unwrap();
    }
    script.push_str("  *) echo '{\"error\":\"unknown_theta\"}' ;;\nesac; done\n");
    script
}

#[test]
fn process_replay_matches_file_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("results.csv");
    std::fs::write(&csv, TABLE).unwrap();

    let space = SearchSpace::new(vec![0.75, 1.0], vec![192, 224]).unwrap();
    let w = NetScoreWeights::default();

    let mut from_file = RunLedger::new(w, space.clone());
    explore(&space, &EvaluatorConfig::file(&csv), &w, &mut from_file).unwrap();

    let cfg = EvaluatorConfig::process(["sh".to_string(), "-c".to_string(), replay_script(TABLE)])
        .with_timeout(5.0)
        .with_workers(2);
    let mut from_proc = RunLedger::new(w, space.clone());
    let summary = explore(&space, &cfg, &w, &mut from_proc).unwrap();
    assert_eq!(summary.succeeded, 4, "{:?}", from_proc.failures().collect::<Vec<_>>());

    let file_scores = from_file.successes();
    let proc_scores = from_proc.successes();
    assert_eq!(file_scores.len(), 4);
    for (theta, f) in &file_scores {
        let p = proc_scores[theta];
        assert_eq!(f.record.accuracy, p.record.accuracy);
        assert_eq!(f.record.runtime_s, p.record.runtime_s);
        assert_eq!(f.record.params_m, p.record.params_m);
        assert_eq!(f.score, p.score);
    }

    // and both agree with scoring the parsed table directly
    let direct = score_all(&parse_results(TABLE.as_bytes(), &ArchConfig::default()).unwrap(), &w).unwrap();
    for s in direct {
        assert_eq!(file_scores[&s.record.theta].score, s.score);
    }
    assert!(proc_scores.contains_key(&Theta::new(0.75, 224).unwrap()));
}
