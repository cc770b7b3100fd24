//! Game records and their JSON Lines form: one `header` line, one `event`
//! line per log entry, and a closing `outcome` line.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::EventLogEntry;
use crate::game::{GameConfig, GameOutcome};
use crate::info::RoleAssignment;

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_DERIVATION: &str = "splitmix64";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("line {line}: expected a {expected} line")]
    Structure { line: usize, expected: &'static str },
    #[error("record ends after line {line} without an outcome line")]
    Truncated { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub base_seed: u64,
    pub game_index: u64,
    pub game_seed: u64,
    pub derivation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema_version: u32,
    pub game_id: String,
    pub config: GameConfig,
    pub config_hash: String,
    pub seeds: SeedInfo,
    pub roles: RoleAssignment,
    /// Agent kind per seat, seat 1 first.
    pub agents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub header: RecordHeader,
    pub events: Vec<EventLogEntry>,
    pub outcome: Option<GameOutcome>,
    /// Why the game stopped early, if it did.
    pub aborted: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(RecordHeader),
    Event(EventLogEntry),
    Outcome {
        outcome: Option<GameOutcome>,
        aborted: Option<String>,
    },
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a RecordHeader),
    Event(&'a EventLogEntry),
    Outcome {
        outcome: &'a Option<GameOutcome>,
        aborted: &'a Option<String>,
    },
}

impl GameRecord {
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut line = |l: LineRef<'_>| -> io::Result<()> {
            serde_json::to_writer(&mut w, &l)?;
            w.write_all(b"\n")
        };
        line(LineRef::Header(&self.header))?;
        for e in &self.events {
            line(LineRef::Event(e))?;
        }
        line(LineRef::Outcome {
            outcome: &self.outcome,
            aborted: &self.aborted,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self, RecordError> {
        let mut header = None;
        let mut events = Vec::new();
        let mut last = 0;
        for (i, text) in r.lines().enumerate() {
            let line = i + 1;
            let text = text.map_err(|e| RecordError::Parse {
                line,
                message: e.to_string(),
            })?;
            if text.trim().is_empty() {
                continue;
            }
            last = line;
            if header.is_none() {
                let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| RecordError::Parse {
                    line,
                    message: e.to_string(),
                })?;
                if v.get("type").and_then(|t| t.as_str()) != Some("header") {
                    return Err(RecordError::Structure { line, expected: "header" });
                }
                let found = v.get("schema_version").and_then(|s| s.as_u64()).unwrap_or(0) as u32;
                if found != SCHEMA_VERSION {
                    return Err(RecordError::SchemaMismatch {
                        found,
                        expected: SCHEMA_VERSION,
                    });
                }
            }
            let parsed: Line = serde_json::from_str(&text).map_err(|e| RecordError::Parse {
                line,
                message: e.to_string(),
            })?;
            match (parsed, header.is_some()) {
                (Line::Header(h), false) => header = Some(h),
                (Line::Event(e), true) => events.push(e),
                (Line::Outcome { outcome, aborted }, true) => {
                    return Ok(GameRecord {
                        header: header.expect("checked"),
                        events,
                        outcome,
                        aborted,
                    })
                }
                (_, true) => return Err(RecordError::Structure { line, expected: "event or outcome" }),
                (_, false) => return Err(RecordError::Structure { line, expected: "header" }),
            }
        }
        Err(RecordError::Truncated { line: last })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, RecordError> {
        Self::load(text.as_bytes())
    }

    pub fn write_file(&self, path: &Path) -> Result<(), RecordError> {
        let io_err = |source| RecordError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
        self.write(&mut f).map_err(io_err)?;
        f.flush().map_err(io_err)
    }

    pub fn read_file(path: &Path) -> Result<Self, RecordError> {
        let f = fs::File::open(path).map_err(|source| RecordError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::load(BufReader::new(f))
    }
}

/// Every `*.jsonl` record in a directory, in file-name order.
pub fn read_dir(dir: &Path) -> Result<Vec<GameRecord>, RecordError> {
    let io_err = |source| RecordError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| GameRecord::read_file(p)).collect()
}
