//! Line-delimited session log files.
//!
//! Line 1 is a header carrying the schema version, config and roster; it is
//! followed by one line per period, one per transcript exchange, and a
//! closing status line. Every line is a JSON object tagged by `record`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::GameConfig;
use crate::error::{Error, ReadError, Result};
use crate::game::{PeriodRecord, RosterEntry, SessionLog, SessionStatus, TranscriptRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    session: u32,
    config: GameConfig,
    roster: Vec<RosterEntry>,
}

fn push_line<T: Serialize>(out: &mut String, record: &'static str, body: &T) {
    let line =
        serde_json::to_string(&Tagged { record, body }).expect("log records always serialize");
    out.push_str(&line);
    out.push('\n');
}

/// Serializes a log to its on-disk text.
pub fn encode_session_log(log: &SessionLog) -> String {
    let mut out = String::new();
    let header = Header {
        schema_version: SCHEMA_VERSION,
        session: log.session,
        config: log.config.clone(),
        roster: log.roster.clone(),
    };
    push_line(&mut out, "header", &header);
    for p in &log.periods {
        push_line(&mut out, "period", p);
    }
    for t in &log.transcripts {
        push_line(&mut out, "transcript", t);
    }
    push_line(&mut out, "status", &log.status);
    out
}

fn malformed(line: usize, message: impl Into<String>) -> ReadError {
    ReadError::Malformed {
        line,
        message: message.into(),
    }
}

fn body<T: serde::de::DeserializeOwned>(line: usize, mut obj: Value) -> Result<T, ReadError> {
    if let Some(map) = obj.as_object_mut() {
        map.remove("record");
    }
    serde_json::from_value(obj).map_err(|e| malformed(line, e.to_string()))
}

/// Parses log text produced by [`encode_session_log`].
pub fn decode_session_log(text: &str) -> Result<SessionLog, ReadError> {
    let mut header: Option<Header> = None;
    let mut periods = Vec::new();
    let mut transcripts = Vec::new();
    let mut status: Option<SessionStatus> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let obj: Value = serde_json::from_str(raw).map_err(|e| malformed(line, e.to_string()))?;
        let kind = obj
            .get("record")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(line, "missing `record` tag"))?
            .to_string();
        if header.is_none() && kind != "header" {
            return Err(malformed(line, "first record must be the header"));
        }
        if status.is_some() {
            return Err(malformed(line, "record after the status line"));
        }
        match kind.as_str() {
            "header" => {
                if header.is_some() {
                    return Err(malformed(line, "duplicate header"));
                }
                let found = obj
                    .get("schema_version")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| malformed(line, "header without schema_version"))?;
                if found != u64::from(SCHEMA_VERSION) {
                    return Err(ReadError::Version {
                        found: u32::try_from(found).unwrap_or(u32::MAX),
                        expected: SCHEMA_VERSION,
                    });
                }
                header = Some(body(line, obj)?);
            }
            "period" => {
                let rec: PeriodRecord = body(line, obj)?;
                let expected = periods.len() as u32 + 1;
                if rec.period != expected {
                    return Err(malformed(
                        line,
                        format!("period {} out of order (expected {expected})", rec.period),
                    ));
                }
                periods.push(rec);
            }
            "transcript" => transcripts.push(body::<TranscriptRecord>(line, obj)?),
            "status" => status = Some(body(line, obj)?),
            other => return Err(malformed(line, format!("unknown record type `{other}`"))),
        }
    }

    let header = header.ok_or(ReadError::Empty)?;
    let last = text.lines().count();
    let status = status.ok_or_else(|| malformed(last, "missing status record"))?;
    Ok(SessionLog {
        session: header.session,
        config: header.config,
        roster: header.roster,
        periods,
        transcripts,
        status,
    })
}

/// Writes a log atomically (temp file + rename).
pub fn write_session_log(log: &SessionLog, path: &Path) -> Result<()> {
    let text = encode_session_log(log);
    let tmp = path.with_extension("log.tmp");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_session_log(path: &Path) -> Result<SessionLog, ReadError> {
    let text =
        fs::read_to_string(path).map_err(|e| ReadError::Io(format!("{}: {e}", path.display())))?;
    decode_session_log(&text)
}

/// Reads every `*.log` file in `dir`, sorted by file name.
pub fn read_log_dir(dir: &Path) -> Result<Vec<SessionLog>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "log") && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|p| {
            read_session_log(p).map_err(|e| {
                Error::Read(match e {
                    ReadError::Malformed { line, message } => ReadError::Malformed {
                        line,
                        message: format!("{}: {message}", p.display()),
                    },
                    other => other,
                })
            })
        })
        .collect()
}
