//! Line-delimited JSON client for external evaluator processes.
//!
//! One request line goes to the child's stdin, one response line comes back
//! on stdout. Requests carry `"v": 1`. A response is either
//! `{"map": .., "cpu_time_s": .., "params_m": ..?}` or `{"error": ".."}`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EvalError, Evaluator, EvaluatorConfig};
use crate::arch::{ArchConfig, Theta};
use crate::score::{EvaluationRecord, RecordSource};

pub const PROTOCOL_VERSION: u32 = 1;

/// Environment variable carrying the request timeout (seconds) to the child.
pub const TIMEOUT_ENV_VAR: &str = "DSE_REQUEST_TIMEOUT_S";

/// How long a child may take to exit once its stdin is closed.
pub const EXIT_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub v: u32,
    pub alpha: f64,
    pub resolution: u32,
    pub num_classes: u32,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl EvalRequest {
    pub fn new(theta: Theta, num_classes: u32, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        Self { v: PROTOCOL_VERSION, alpha: theta.alpha(), resolution: theta.resolution(), num_classes, metadata }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub map: f64,
    pub cpu_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_m: Option<f64>,
}

impl EvalResponse {
    /// Parse one response line; `{"error": ..}` maps to `Remote`.
    pub fn parse(line: &str) -> Result<Self, EvalError> {
        let value: serde_json::Value = serde_json::from_str(line.trim_end_matches(['\r', '\n']))
            .map_err(|e| EvalError::Protocol(format!("response is not JSON ({e}): {:?}", truncate(line))))?;
        let obj = value
            .as_object()
            .ok_or_else(|| EvalError::Protocol(format!("response is not a JSON object: {:?}", truncate(line))))?;
        if let Some(err) = obj.get("error") {
            let msg = err.as_str().map(str::to_string).unwrap_or_else(|| err.to_string());
            return Err(EvalError::Remote(msg));
        }
        serde_json::from_value(value).map_err(|e| EvalError::Protocol(format!("bad response fields: {e}")))
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(120) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// A running evaluator child. Several requests may be exchanged before
/// [`EvaluatorSession::finish`] closes stdin and collects the exit status.
pub struct EvaluatorSession {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl EvaluatorSession {
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, EvalError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| EvalError::Config("empty evaluator command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .env(TIMEOUT_ENV_VAR, timeout.as_secs_f64().to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Process(format!("failed to launch {program:?}: {e}")))?;

        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        // Detached: a killed child's grandchildren may hold the pipe open.
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });

        Ok(Self { child, stdin, lines: rx, timeout })
    }

    /// Send one request and wait up to the timeout for its response line.
    pub fn exchange(&mut self, request: &EvalRequest) -> Result<EvalResponse, EvalError> {
        let line = self.exchange_raw(request)?;
        EvalResponse::parse(&line)
    }

    fn exchange_raw(&mut self, request: &EvalRequest) -> Result<String, EvalError> {
        let mut payload = serde_json::to_string(request).map_err(|e| EvalError::Protocol(e.to_string()))?;
        payload.push('\n');
        if let Some(stdin) = self.stdin.as_mut() {
            let written = stdin.write_all(payload.as_bytes()).and_then(|()| stdin.flush());
            match written {
                // the child is gone; its exit status explains why below
                Err(e) if e.kind() == ErrorKind::BrokenPipe => {}
                Err(e) => return Err(EvalError::Process(format!("writing request: {e}"))),
                Ok(()) => {}
            }
        }

        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) if line.ends_with('\n') => Ok(line),
            Ok(Ok(partial)) => self.closed_early(Some(partial)),
            Ok(Err(e)) => Err(EvalError::Protocol(format!("reading response: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(EvalError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => self.closed_early(None),
        }
    }

    /// Stdout ended before a complete line arrived.
    fn closed_early(&mut self, partial: Option<String>) -> Result<String, EvalError> {
        self.stdin.take();
        match self.wait_with_grace() {
            Some(status) if !status.success() => Err(EvalError::Process(format!("evaluator exited with {status}"))),
            Some(_) => match partial {
                Some(p) => Err(EvalError::Protocol(format!("unterminated response line {:?}", truncate(&p)))),
                None => Err(EvalError::Protocol("evaluator closed stdout without responding".into())),
            },
            None => {
                self.kill();
                Err(EvalError::Process("evaluator closed stdout but did not exit".into()))
            }
        }
    }

    fn wait_with_grace(&mut self) -> Option<ExitStatus> {
        let deadline = Instant::now() + EXIT_GRACE;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return Some(status),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => return None,
            }
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Close stdin and require a zero exit within the grace period.
    pub fn finish(mut self) -> Result<(), EvalError> {
        self.stdin.take();
        match self.wait_with_grace() {
            Some(status) if status.success() => Ok(()),
            Some(status) => Err(EvalError::Process(format!("evaluator exited with {status}"))),
            None => {
                self.kill();
                Err(EvalError::Process(format!("evaluator still running {EXIT_GRACE:?} after end of input")))
            }
        }
    }
}

impl Drop for EvaluatorSession {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            self.kill();
        }
    }
}

/// Evaluates each design point in a fresh child process.
#[derive(Debug, Clone)]
pub struct ProcessEvaluator {
    pub command: Vec<String>,
    pub timeout: Duration,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub arch: ArchConfig,
    pub workers: usize,
}

impl ProcessEvaluator {
    pub fn from_config(config: &EvaluatorConfig) -> Self {
        Self {
            command: config.command.clone().unwrap_or_default(),
            timeout: config.timeout(),
            metadata: config.request_metadata.clone(),
            arch: config.arch.clone(),
            workers: config.workers,
        }
    }

    /// Turn a protocol response into a validated record.
    pub fn record_from_response(&self, theta: Theta, response: EvalResponse) -> Result<EvaluationRecord, EvalError> {
        let params_m = match response.params_m {
            Some(p) => p,
            None => self.arch.params_m(theta)?,
        };
        let mut record =
            EvaluationRecord::new(theta, response.map, params_m, response.cpu_time_s, RecordSource::ExternalProcess)?;
        record.metadata = self.metadata.clone();
        Ok(record)
    }
}

impl Evaluator for ProcessEvaluator {
    fn evaluate(&self, theta: Theta) -> Result<EvaluationRecord, EvalError> {
        let mut session = EvaluatorSession::spawn(&self.command, self.timeout)?;
        let request = EvalRequest::new(theta, self.arch.num_classes, self.metadata.clone());
        let response = session.exchange(&request)?;
        session.finish()?;
        self.record_from_response(theta, response)
    }

    fn concurrency(&self) -> usize {
        self.workers
    }
}

pub fn evaluate_external(theta: Theta, config: &EvaluatorConfig) -> Result<EvaluationRecord, EvalError> {
    if config.mode != super::EvaluatorMode::Process {
        return Err(EvalError::Config("evaluate_external needs process mode".into()));
    }
    config.validate()?;
    ProcessEvaluator::from_config(config).evaluate(theta)
}
