//! Scriptable stand-in for an external evaluator.
//!
//! Replays a results CSV over the line-delimited JSON protocol and can be
//! told to misbehave for selected design points:
//!
//! ```text
//! dse-mock-eval --table results.csv --fault 0.5:128=malformed --fault 1.0:96=sleep
//! ```
//!
//! Fault kinds: `malformed` (non-JSON line), `sleep` (never answers),
//! `exit` (exit 3 without answering), `unknown` (error response).
//! Without `--table` every request gets `{"error":"unknown_theta"}`.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Fault {
    Malformed,
    Sleep,
    Exit,
    Unknown,
}

type Key = (u64, u32);

fn key(alpha: f64, resolution: u32) -> Key {
    (alpha.to_bits(), resolution)
}

/// Response line bodies keyed by theta, copied verbatim from the table text.
fn load_table(path: &str) -> anyhow::Result<HashMap<Key, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("alpha,resolution,map,cpu_time_s") {
        bail!("unexpected header {header:?}");
    }
    let mut table = HashMap::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 4 {
            bail!("row {}: too few cells", i + 1);
        }
        let alpha: f64 = cells[0].parse()?;
        let resolution: u32 = cells[1].parse()?;
        let mut body = format!("{{\"map\":{},\"cpu_time_s\":{}", cells[2], cells[3]);
        if let Some(p) = cells.get(4).filter(|p| !p.is_empty()) {
            body.push_str(&format!(",\"params_m\":{p}"));
        }
        body.push('}');
        table.insert(key(alpha, resolution), body);
    }
    Ok(table)
}

fn parse_fault(spec: &str) -> anyhow::Result<(Key, Fault)> {
    let (theta, kind) = spec.split_once('=').context("fault must be ALPHA:RES=KIND")?;
    let (alpha, res) = theta.split_once(':').context("fault must be ALPHA:RES=KIND")?;
    let fault = match kind {
        "malformed" => Fault::Malformed,
        "sleep" => Fault::Sleep,
        "exit" => Fault::Exit,
        "unknown" => Fault::Unknown,
        other => bail!("unknown fault kind {other:?}"),
    };
    Ok((key(alpha.parse()?, res.parse()?), fault))
}

fn run() -> anyhow::Result<ExitCode> {
    let mut table = HashMap::new();
    let mut faults = HashMap::new();
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--table" => table = load_table(&args.next().context("--table needs a path")?)?,
            "--fault" => {
                let (k, f) = parse_fault(&args.next().context("--fault needs a value")?)?;
                faults.insert(k, f);
            }
            other => bail!("unexpected argument {other:?}"),
        }
    }

    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        let req: serde_json::Value = serde_json::from_str(&line).context("request is not JSON")?;
        let alpha = req["alpha"].as_f64().context("request without alpha")?;
        let resolution = req["resolution"].as_u64().context("request without resolution")? as u32;
        let k = key(alpha, resolution);
        match faults.get(&k) {
            Some(Fault::Malformed) => writeln!(stdout, "this is not json")?,
            Some(Fault::Sleep) => {
                stdout.flush()?;
                std::thread::sleep(Duration::from_secs(600));
            }
            Some(Fault::Exit) => return Ok(ExitCode::from(3)),
            Some(Fault::Unknown) | None => match table.get(&k) {
                Some(body) if !faults.contains_key(&k) => writeln!(stdout, "{body}")?,
                _ => writeln!(stdout, "{{\"error\":\"unknown_theta\"}}")?,
            },
        }
        stdout.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dse-mock-eval: {e:#}");
            ExitCode::from(2)
        }
    }
}
