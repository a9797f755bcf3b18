//! Treatment registry, multi-session runs, log persistence, replay and CSV export.

mod export;
mod persist;
mod registry;
mod replay;
mod runner;

pub use export::{export_csv, CSV_FILES};
pub use persist::{
    decode_session_log, encode_session_log, read_log_dir, read_session_log, write_session_log,
    SCHEMA_VERSION,
};
pub use registry::{
    builtin_treatments, ConfigTemplate, Mode, PromptKind, Registry, Treatment, UpperBound,
};
pub use replay::{
    check_consistency, replay_session, Divergence, ReplayMode, ReplayReport, CONSISTENCY_TOLERANCE,
};
pub use runner::{
    run_experiment, run_single_session, session_log_name, RunManifest, RunOptions, SessionEntry,
    SessionState, CSV_DIR, MANIFEST_FILE,
};
