use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use dse_core::arch::ArchConfig;
use dse_core::eval::{ResultsTable, RuntimeModel};
use dse_core::report::{ranking_csv, report_notes};
use dse_core::score::netscore;
use dse_core::{
    build_graph, count_macs, count_params, explore as run_explore, ingest_results_file, select_best, EvaluatorConfig,
    Metric, RecordSource, RunLedger, SearchSpace, SurfaceGrid, Theta,
};

use crate::{BestArgs, CountArgs, ExploreArgs, Mode, ReportArgs, RuntimeModelArg, ScoreArgs};

pub fn score(args: &ScoreArgs) -> anyhow::Result<()> {
    let s = netscore(args.accuracy, args.params, args.runtime, &args.weights.weights()?)?;
    println!("{s:.4}");
    Ok(())
}

pub fn count(args: &CountArgs) -> anyhow::Result<()> {
    let theta = Theta::new(args.alpha, args.resolution)?;
    let graph = build_graph(theta, args.arch.classes, args.arch.head_style)?;
    let params = count_params(&graph);
    let mut out = format!("params: {params}\nparams_m: {:.6}\n", params as f64 / 1e6);
    if args.macs {
        out.push_str(&format!("macs: {}\n", count_macs(&graph)));
    }
    if let Some(path) = &args.dump_graph {
        let json = serde_json::to_string_pretty(&graph.to_json())? + "\n";
        if path.as_os_str() == "-" {
            print!("{json}");
            return Ok(());
        }
        fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{out}");
    Ok(())
}

fn parse_metadata(pairs: &[String]) -> anyhow::Result<BTreeMap<String, serde_json::Value>> {
    let mut out = dse_core::eval::default_training_metadata();
    for pair in pairs {
        let Some((k, v)) = pair.split_once('=') else { bail!("metadata {pair:?} is not KEY=VALUE") };
        let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.to_string()));
        out.insert(k.to_string(), value);
    }
    Ok(out)
}

fn read_space(path: &Path) -> anyhow::Result<SearchSpace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing space file {}", path.display()))
}

pub fn explore(args: &ExploreArgs) -> anyhow::Result<()> {
    let arch = ArchConfig::new(args.arch.classes, args.arch.head_style);
    let mut config = match args.mode {
        Mode::Surrogate => EvaluatorConfig::surrogate(Default::default()),
        Mode::File => {
            let Some(path) = &args.results else { bail!("file mode needs --results") };
            EvaluatorConfig::file(path)
        }
        Mode::Process => {
            if args.command.is_empty() {
                bail!("process mode needs an evaluator command after --");
            }
            EvaluatorConfig::process(args.command.clone())
        }
    };
    if !matches!(args.mode, Mode::Process) && !args.command.is_empty() {
        bail!("an evaluator command is only used in process mode");
    }
    config = config.with_arch(arch.clone()).with_timeout(args.timeout).with_workers(args.workers);
    config.request_metadata = parse_metadata(&args.metadata)?;
    if let RuntimeModelArg::Mac = args.runtime_model {
        config.surrogate.runtime_model = RuntimeModel::MacProportional;
    }

    let space = match (&args.space, args.mode, &args.results) {
        (Some(path), _, _) => read_space(path)?,
        (None, Mode::File, Some(results)) => {
            let (alphas, resolutions) = ResultsTable::from_records(ingest_results_file(results, &arch)?).axes();
            if alphas.is_empty() {
                bail!("{} has no rows", results.display());
            }
            SearchSpace::new(alphas, resolutions)?
        }
        _ => SearchSpace::default(),
    };

    let weights = args.weights.weights()?;
    let mut ledger = RunLedger::open_or_create(&args.ledger, weights, space.clone())?;
    let summary = run_explore(&space, &config, &weights, &mut ledger)?;
    let mut line = format!(
        "{} new evaluations ({} succeeded, {} failed, {} already done)",
        summary.evaluated, summary.succeeded, summary.failed, summary.skipped
    );
    if let Ok(best) = select_best(&ledger) {
        let t = best.record.theta;
        line.push_str(&format!(
            "; best: alpha={} resolution={} score={:.4}",
            t.alpha(),
            t.resolution(),
            best.score
        ));
    }
    println!("{line}");
    Ok(())
}

pub fn report(args: &ReportArgs) -> anyhow::Result<()> {
    let ledger = RunLedger::load(&args.ledger)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut files = Vec::new();
        for metric in Metric::ALL {
            files.push((format!("{metric}.csv"), SurfaceGrid::from_ledger(&ledger, metric).to_csv()));
        }
        files.push(("ranking.csv".into(), ranking_csv(&ledger)));
        files.push(("notes.txt".into(), report_notes(&ledger)));
        let mut stdout = std::io::stdout().lock();
        for (name, content) in files {
            let path = dir.join(name);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
            writeln!(stdout, "{}", path.display())?;
        }
        return Ok(());
    }
    let out = if args.ranking {
        ranking_csv(&ledger)
    } else if args.notes {
        report_notes(&ledger)
    } else {
        SurfaceGrid::from_ledger(&ledger, args.metric).to_csv()
    };
    print!("{out}");
    Ok(())
}

pub fn best(args: &BestArgs) -> anyhow::Result<()> {
    let ledger = RunLedger::load(&args.ledger)?;
    let best = select_best(&ledger)?;
    let r = &best.record;
    let source = match r.source {
        RecordSource::Surrogate => "surrogate (synthetic)",
        other => other.as_str(),
    };
    println!("alpha: {}", r.theta.alpha());
    println!("resolution: {}", r.theta.resolution());
    println!("score: {:.4}", best.score);
    println!("map: {}", r.accuracy);
    println!("params_m: {}", r.params_m);
    println!("cpu_time_s: {}", r.runtime_s);
    println!("source: {source}");
    println!("record: {}", serde_json::to_string(&best)?);
    Ok(())
}
