//! Multi-session runs with per-session seeding and on-disk persistence.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::export::export_csv;
use super::persist::{read_session_log, write_session_log};
use super::registry::{Mode, Treatment};
use crate::agents::{build_seats, LlmSettings, SeatContext};
use crate::analysis::{session_summary, SummaryOptions};
use crate::error::{Error, Result};
use crate::game::{run_session, Execution, SessionLog, SessionStatus};
use crate::gateway::Gateway;
use crate::seed::session_seed;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    /// Root under which `<treatment>/<timestamp>/` is created.
    pub out_dir: PathBuf,
    /// Sessions run in parallel.
    pub jobs: usize,
    /// Required in live mode.
    pub gateway: Option<Arc<Gateway>>,
    pub llm: LlmSettings,
    /// How agents within one period are called.
    pub execution: Execution,
    /// Run only the first `n` sessions of the treatment.
    pub max_sessions: Option<u32>,
}

impl RunOptions {
    pub fn scripted(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            mode: Mode::Scripted,
            out_dir: out_dir.into(),
            jobs: 1,
            gateway: None,
            llm: LlmSettings::default(),
            execution: Execution::Sequential,
            max_sessions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionState {
    Pending,
    Complete,
    /// An agent failed; the log keeps the periods played before it.
    Incomplete {
        period: u32,
        agent: u32,
        reason: String,
    },
    /// The session could not be run or persisted.
    Error {
        message: String,
    },
}

impl SessionState {
    pub fn is_complete(&self) -> bool {
        matches!(self, SessionState::Complete)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub index: u32,
    pub seed: u64,
    pub upper_bound: f64,
    pub log_path: Option<PathBuf>,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    pub status: SessionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub treatment: String,
    pub master_seed: u64,
    pub mode: Mode,
    pub run_dir: PathBuf,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub sessions: Vec<SessionEntry>,
}

impl RunManifest {
    pub fn completed(&self) -> usize {
        self.sessions
            .iter()
            .filter(|s| s.status.is_complete())
            .count()
    }

    pub fn failed(&self) -> usize {
        self.sessions.len() - self.completed()
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.run_dir.join(MANIFEST_FILE)
    }

    pub fn log_paths(&self) -> Vec<PathBuf> {
        self.sessions
            .iter()
            .filter_map(|s| s.log_path.clone())
            .collect()
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    fn write(&self) -> Result<()> {
        let path = self.manifest_path();
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&tmp, text + "\n")
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| Error::io(&path, e))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_DIR: &str = "csv";

pub fn session_log_name(index: u32) -> String {
    format!("session-{index:04}.log")
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Creates a fresh `<root>/<treatment>/<timestamp>` directory.
fn create_run_dir(root: &Path, treatment: &str) -> Result<PathBuf> {
    let parent = root.join(treatment);
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let stamp = Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    for n in 0u32.. {
        let name = if n == 0 {
            stamp.clone()
        } else {
            format!("{stamp}-{n}")
        };
        let dir = parent.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!("run directory suffixes exhausted")
}

/// Plays session `index` of `treatment` without touching the disk.
/// The result depends only on the treatment, master seed, index and mode
/// (plus provider behavior in live mode).
pub fn run_single_session(
    treatment: &Treatment,
    master_seed: u64,
    index: u32,
    mode: Mode,
    ctx: &SeatContext,
    execution: Execution,
) -> Result<SessionLog> {
    let seed = session_seed(master_seed, index);
    let config = treatment.session_config(seed);
    let roster = treatment.roster_for(mode)?;
    let mut seats = build_seats(&roster, &config, ctx)?;
    run_session(index, &mut seats, &config, execution)
}

fn preflight(treatment: &Treatment, opts: &RunOptions) -> Result<SeatContext> {
    treatment.validate()?;
    if opts.jobs == 0 {
        return Err(Error::InvalidConfig("jobs must be at least 1".into()));
    }
    match opts.mode {
        Mode::Scripted => Ok(SeatContext {
            gateway: None,
            llm: opts.llm.clone(),
        }),
        Mode::Live => {
            let gateway = opts
                .gateway
                .clone()
                .ok_or_else(|| Error::InvalidConfig("live mode needs a provider gateway".into()))?;
            for provider in treatment.providers() {
                gateway.check_credentials(&provider)?;
            }
            Ok(SeatContext {
                gateway: Some(gateway),
                llm: opts.llm.clone(),
            })
        }
    }
}

/// Runs every session of `treatment`, persisting logs as they finish.
///
/// Configuration and credential problems fail before anything is written.
/// Once sessions start, a failing session is recorded in the manifest and
/// the others carry on.
pub fn run_experiment(
    treatment: &Treatment,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<RunManifest> {
    let ctx = preflight(treatment, opts)?;
    let run_dir = create_run_dir(&opts.out_dir, &treatment.name)?;
    let total = opts
        .max_sessions
        .map_or(treatment.sessions, |m| m.min(treatment.sessions));

    let sessions = (0..total)
        .map(|index| {
            let seed = session_seed(master_seed, index);
            SessionEntry {
                index,
                seed,
                upper_bound: treatment.session_config(seed).upper_bound,
                log_path: None,
                started_at: None,
                finished_at: None,
                status: SessionState::Pending,
            }
        })
        .collect();
    let manifest = RunManifest {
        treatment: treatment.name.clone(),
        master_seed,
        mode: opts.mode,
        run_dir: run_dir.clone(),
        started_at: now(),
        finished_at: None,
        sessions,
    };
    manifest.write()?;
    let manifest = Mutex::new(manifest);
    let next = AtomicUsize::new(0);

    let work = || loop {
        let index = next.fetch_add(1, Ordering::SeqCst);
        if index >= total as usize {
            break;
        }
        {
            let mut m = manifest.lock().expect("manifest lock");
            m.sessions[index].started_at = Some(now());
        }
        let path = run_dir.join(session_log_name(index as u32));
        let outcome = run_single_session(
            treatment,
            master_seed,
            index as u32,
            opts.mode,
            &ctx,
            opts.execution,
        )
        .and_then(|log| write_session_log(&log, &path).map(|_| log));
        let mut m = manifest.lock().expect("manifest lock");
        let entry = &mut m.sessions[index];
        entry.finished_at = Some(now());
        entry.status = match outcome {
            Ok(log) => {
                entry.log_path = Some(path);
                match log.status {
                    SessionStatus::Complete => SessionState::Complete,
                    SessionStatus::Incomplete {
                        period,
                        agent,
                        reason,
                    } => {
                        log::warn!(
                            "session {index}: agent {agent} failed in period {period}: {reason}"
                        );
                        SessionState::Incomplete {
                            period,
                            agent: agent.0,
                            reason,
                        }
                    }
                }
            }
            Err(e) => {
                log::warn!("session {index}: {e}");
                SessionState::Error {
                    message: e.to_string(),
                }
            }
        };
        if let Err(e) = m.write() {
            log::error!("could not update manifest: {e}");
        }
    };

    let workers = opts.jobs.min(total.max(1) as usize);
    if workers <= 1 {
        work();
    } else {
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(&work);
            }
        });
    }

    let mut manifest = manifest.into_inner().expect("manifest lock");
    manifest.finished_at = Some(now());
    manifest.write()?;
    export_run_csv(&manifest)?;
    Ok(manifest)
}

/// Default-option summary of the run's logs into `<run_dir>/csv`.
fn export_run_csv(manifest: &RunManifest) -> Result<()> {
    let logs = manifest
        .log_paths()
        .iter()
        .map(|p| read_session_log(p).map_err(Error::from))
        .collect::<Result<Vec<_>>>()?;
    if logs.is_empty() {
        return Ok(());
    }
    let table = session_summary(&logs, &SummaryOptions::default())?;
    export_csv(&table, &manifest.run_dir.join(CSV_DIR))?;
    Ok(())
}
