//! Append-only JSON-lines run ledger.
//!
//! Line 1 is a [`LedgerHeader`]; every following line is one
//! [`LedgerEntry`]. Lines are only ever appended. A trailing line without a
//! newline is a torn write from an interrupted run and is dropped on open.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SearchError, SearchSpace};
use crate::arch::Theta;
use crate::eval::FailureKind;
use crate::score::{NetScoreWeights, ScoredRecord};

pub const LEDGER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub schema_version: u32,
    pub weights: NetScoreWeights,
    pub space: SearchSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub theta: Theta,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LedgerEntry {
    Success(ScoredRecord),
    Failure(FailureRecord),
}

impl LedgerEntry {
    pub fn theta(&self) -> Theta {
        match self {
            Self::Success(s) => s.record.theta,
            Self::Failure(f) => f.theta,
        }
    }
}

/// Current state of one design point after deduplication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaStatus<'a> {
    Success(&'a ScoredRecord),
    Failed(&'a FailureRecord),
}

#[derive(Debug)]
struct LedgerWriter {
    path: PathBuf,
    file: File,
}

impl LedgerWriter {
    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<(), SearchError> {
        let mut line = serde_json::to_string(value).expect("ledger values serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.flush())
            .map_err(|source| SearchError::Io { path: self.path.clone(), source })
    }
}

#[derive(Debug)]
pub struct RunLedger {
    header: LedgerHeader,
    entries: Vec<LedgerEntry>,
    writer: Option<LedgerWriter>,
}

impl RunLedger {
    /// In-memory ledger with no backing file.
    pub fn new(weights: NetScoreWeights, space: SearchSpace) -> Self {
        Self {
            header: LedgerHeader { schema_version: LEDGER_SCHEMA_VERSION, weights, space },
            entries: Vec::new(),
            writer: None,
        }
    }

    /// Create a new ledger file; fails if `path` exists.
    pub fn create(path: impl AsRef<Path>, weights: NetScoreWeights, space: SearchSpace) -> Result<Self, SearchError> {
        let path = path.as_ref();
        let file = OpenOptions::new().write(true).create_new(true).open(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::AlreadyExists {
                SearchError::Exists(path.to_path_buf())
            } else {
                SearchError::Io { path: path.to_path_buf(), source }
            }
        })?;
        let mut ledger = Self::new(weights, space);
        let mut writer = LedgerWriter { path: path.to_path_buf(), file };
        writer.write_line(&ledger.header)?;
        ledger.writer = Some(writer);
        Ok(ledger)
    }

    /// Read a ledger file without attaching a writer.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SearchError> {
        let (ledger, _) = Self::read(path.as_ref())?;
        Ok(ledger)
    }

    /// Open an existing ledger for appending, dropping any torn final line.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SearchError> {
        let path = path.as_ref();
        let (mut ledger, valid_len) = Self::read(path)?;
        let io_err = |source| SearchError::Io { path: path.to_path_buf(), source };
        let file = OpenOptions::new().append(true).open(path).map_err(io_err)?;
        let len = file.metadata().map_err(io_err)?.len();
        if len > valid_len {
            log::warn!("{}: dropping {} bytes of torn final line", path.display(), len - valid_len);
            file.set_len(valid_len).map_err(io_err)?;
        }
        ledger.writer = Some(LedgerWriter { path: path.to_path_buf(), file });
        Ok(ledger)
    }

    /// Open `path` if it exists (its header must match), otherwise create it.
    pub fn open_or_create(
        path: impl AsRef<Path>,
        weights: NetScoreWeights,
        space: SearchSpace,
    ) -> Result<Self, SearchError> {
        let path = path.as_ref();
        if path.exists() {
            let ledger = Self::open(path)?;
            ledger.check_matches(&weights, &space)?;
            Ok(ledger)
        } else {
            Self::create(path, weights, space)
        }
    }

    /// Parse the file; returns the ledger and the byte length of its complete lines.
    fn read(path: &Path) -> Result<(Self, u64), SearchError> {
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| SearchError::Io { path: path.to_path_buf(), source })?;

        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        let mut lines = complete.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or(SearchError::Corrupt { line: 1, message: "missing header".into() })?;
        let header: LedgerHeader = serde_json::from_str(first)
            .map_err(|e| SearchError::Corrupt { line: 1, message: format!("bad header: {e}") })?;
        if header.schema_version != LEDGER_SCHEMA_VERSION {
            return Err(SearchError::UnsupportedSchema(header.schema_version));
        }
        let entries = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| SearchError::Corrupt { line: i + 1, message: e.to_string() }))
            .collect::<Result<Vec<LedgerEntry>, _>>()?;

        Ok((Self { header, entries, writer: None }, complete.len() as u64))
    }

    pub fn header(&self) -> &LedgerHeader {
        &self.header
    }

    pub fn weights(&self) -> &NetScoreWeights {
        &self.header.weights
    }

    pub fn space(&self) -> &SearchSpace {
        &self.header.space
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_persistent(&self) -> bool {
        self.writer.is_some()
    }

    pub fn check_matches(&self, weights: &NetScoreWeights, space: &SearchSpace) -> Result<(), SearchError> {
        if &self.header.weights != weights {
            return Err(SearchError::Mismatch(format!(
                "ledger weights {:?} differ from requested {:?}",
                self.header.weights, weights
            )));
        }
        if &self.header.space != space {
            return Err(SearchError::Mismatch("ledger search space differs from requested space".into()));
        }
        Ok(())
    }

    /// Rebind an empty in-memory ledger to new weights and space.
    pub(crate) fn rebind(&mut self, weights: NetScoreWeights, space: SearchSpace) -> Result<(), SearchError> {
        if !self.entries.is_empty() || self.writer.is_some() {
            return self.check_matches(&weights, &space);
        }
        self.header.weights = weights;
        self.header.space = space;
        Ok(())
    }

    /// Persist (if file-backed) then record one entry.
    pub fn append(&mut self, entry: LedgerEntry) -> Result<(), SearchError> {
        if let Some(writer) = self.writer.as_mut() {
            writer.write_line(&entry)?;
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Latest success per design point.
    pub fn successes(&self) -> BTreeMap<Theta, &ScoredRecord> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                LedgerEntry::Success(s) => Some((s.record.theta, s)),
                LedgerEntry::Failure(_) => None,
            })
            .collect()
    }

    /// Per design point: its latest success, or its latest failure if it never succeeded.
    pub fn status(&self) -> HashMap<Theta, ThetaStatus<'_>> {
        let mut out = HashMap::new();
        for entry in &self.entries {
            match entry {
                LedgerEntry::Success(s) => {
                    out.insert(s.record.theta, ThetaStatus::Success(s));
                }
                LedgerEntry::Failure(f) => {
                    if !matches!(out.get(&f.theta), Some(ThetaStatus::Success(_))) {
                        out.insert(f.theta, ThetaStatus::Failed(f));
                    }
                }
            }
        }
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = &FailureRecord> {
        self.entries.iter().filter_map(|e| match e {
            LedgerEntry::Failure(f) => Some(f),
            LedgerEntry::Success(_) => None,
        })
    }
}
