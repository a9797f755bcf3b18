use std::collections::BTreeMap;
use std::fs;

use bcg_core::agents::{AgentSpec, ReferencePolicy, SeatContext};
use bcg_core::analysis::{session_summary, SummaryOptions};
use bcg_core::config::GameConfig;
use bcg_core::experiments::{
    builtin_treatments, decode_session_log, encode_session_log, export_csv, read_session_log,
    run_experiment, run_single_session, Mode, RunOptions, CSV_FILES,
};
use bcg_core::game::{AgentId, Execution, PeriodRecord, RosterEntry, SessionLog, SessionStatus};

fn csv_rows(path: &std::path::Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn every_builtin_treatment_round_trips_in_scripted_mode() {
    let reg = builtin_treatments();
    for t in reg.iter() {
        let log = run_single_session(
            t,
            5,
            0,
            Mode::Scripted,
            &SeatContext::default(),
            Execution::Sequential,
        )
        .unwrap_or_else(|e| panic!("{}: {e}", t.name));
        assert!(log.is_complete(), "{}", t.name);
        assert_eq!(log.periods.len() as u32, t.config.num_periods);
        let text = encode_session_log(&log);
        let back = decode_session_log(&text).unwrap();
        assert_eq!(back, log, "{}", t.name);
        assert_eq!(encode_session_log(&back), text);
    }
}

#[test]
fn standalone_session_matches_run_and_reruns_are_byte_identical() {
    let reg = builtin_treatments();
    let t = reg.lookup("repeated_multi").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        max_sessions: Some(4),
        jobs: 2,
        ..RunOptions::scripted(dir.path())
    };
    let first = run_experiment(t, 77, &opts).unwrap();
    let second = run_experiment(t, 77, &opts).unwrap();
    assert_ne!(first.run_dir, second.run_dir);
    assert_eq!(first.completed() + first.failed(), first.sessions.len());

    for (i, (a, b)) in first.log_paths().iter().zip(second.log_paths()).enumerate() {
        let bytes = fs::read(a).unwrap();
        assert_eq!(bytes, fs::read(b).unwrap());
        let alone = run_single_session(
            t,
            77,
            i as u32,
            Mode::Scripted,
            &SeatContext::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(encode_session_log(&alone).into_bytes(), bytes);
        assert_eq!(first.sessions[i].upper_bound, alone.config.upper_bound);
    }

    // random upper bounds are drawn per session
    let bounds: Vec<f64> = first.sessions.iter().map(|s| s.upper_bound).collect();
    assert!(bounds.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn csv_row_counts_follow_logs() {
    let reg = builtin_treatments();
    let t = reg.lookup("repeated_multi").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        max_sessions: Some(3),
        ..RunOptions::scripted(dir.path())
    };
    let m = run_experiment(t, 3, &opts).unwrap();
    let logs: Vec<SessionLog> = m
        .log_paths()
        .iter()
        .map(|p| read_session_log(p).unwrap())
        .collect();
    let table = session_summary(&logs, &SummaryOptions::default()).unwrap();
    let out = dir.path().join("csv");
    let files = export_csv(&table, &out).unwrap();
    assert_eq!(files.len(), CSV_FILES.len());
    for f in &files {
        assert!(f.is_file());
    }

    let expected: usize = logs.iter().map(|l| l.periods.len() * l.roster.len()).sum();
    assert_eq!(csv_rows(&out.join("choices.csv")).len(), expected + 1);
    assert_eq!(
        csv_rows(&out.join("choices.csv"))[0],
        "session,period,agent,label,choice,normalized"
    );

    // histogram rows of each label sum to its observation count
    let mut per_label: BTreeMap<String, usize> = BTreeMap::new();
    for row in csv_rows(&out.join("histogram.csv")).iter().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        *per_label.entry(cols[0].to_string()).or_default() += cols[3].parse::<usize>().unwrap();
    }
    for (label, g) in &table.groups {
        assert_eq!(per_label[label], g.observations, "{label}");
    }

    // the run directory carries the same tables
    for name in CSV_FILES {
        assert_eq!(
            fs::read(m.run_dir.join("csv").join(name)).unwrap(),
            fs::read(out.join(name)).unwrap()
        );
    }
}

#[test]
fn empty_groups_give_header_only_files() {
    let config = GameConfig::new(2, 100.0, 1);
    let log = SessionLog {
        session: 0,
        config,
        roster: vec![
            RosterEntry {
                id: AgentId(0),
                spec: AgentSpec::fixed(0.0),
            },
            RosterEntry {
                id: AgentId(1),
                spec: AgentSpec::fixed(0.0),
            },
        ],
        periods: vec![],
        transcripts: vec![],
        status: SessionStatus::Incomplete {
            period: 1,
            agent: AgentId(0),
            reason: "no output".into(),
        },
    };
    let table = session_summary(&[log], &SummaryOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_csv(&table, dir.path()).unwrap();
    for name in [
        "choices.csv",
        "levels.csv",
        "payoffs.csv",
        "convergence.csv",
    ] {
        assert_eq!(csv_rows(&dir.path().join(name)).len(), 1, "{name}");
    }
}

/// Two hand-built sessions with different upper bounds.
///
/// Session 0 (upper 100): A=10, A=30, B=90. mean 130/3, target 260/9 = 28.89;
/// agent 1 (A, distance 1.11) wins.
/// Session 1 (upper 200): A=100, B=40, B=20 -> normalized 50, 20, 10.
/// mean 160/3, target 320/9 = 35.56; agent 1 (B, distance 4.44) wins.
fn fixture() -> Vec<SessionLog> {
    let session = |index: u32, upper: f64, labels: [&str; 3], choices: [f64; 3]| {
        let config = GameConfig::new(3, upper, 1).with_seed(u64::from(index));
        let roster = labels
            .iter()
            .enumerate()
            .map(|(i, l)| RosterEntry {
                id: AgentId(i as u32),
                spec: AgentSpec::new(*l, bcg_core::agents::AgentKind::Fixed { value: choices[i] }),
            })
            .collect();
        let picks = choices
            .iter()
            .enumerate()
            .map(|(i, c)| (AgentId(i as u32), *c))
            .collect();
        let rec = PeriodRecord::from_choices(1, picks, &config).unwrap();
        SessionLog {
            session: index,
            config,
            roster,
            periods: vec![rec],
            transcripts: vec![],
            status: SessionStatus::Complete,
        }
    };
    vec![
        session(0, 100.0, ["A", "A", "B"], [10.0, 30.0, 90.0]),
        session(1, 200.0, ["A", "B", "B"], [100.0, 40.0, 20.0]),
    ]
}

#[test]
fn two_session_fixture_matches_hand_arithmetic() {
    let logs = fixture();
    let table = session_summary(&logs, &SummaryOptions::default()).unwrap();
    let a = &table.groups["A"];
    let b = &table.groups["B"];

    // A normalized: 10, 30, 50
    assert_eq!(a.observations, 3);
    assert_eq!(a.mean_choice, Some(30.0));
    assert_eq!(a.median_choice, Some(30.0));
    // B normalized: 90, 20, 10
    assert_eq!(b.mean_choice, Some(40.0));
    assert_eq!(b.median_choice, Some(20.0));
    // one win of 100 in three observations each
    assert_eq!(a.mean_payoff, Some(100.0 / 3.0));
    assert_eq!(b.mean_payoff, Some(100.0 / 3.0));

    // levels: per-session mean, then mean over sessions (reference c/2)
    let n = |c: f64, r: f64| (c / r).ln() / (2.0f64 / 3.0).ln();
    let level_a = ((n(10.0, 50.0) + n(30.0, 50.0)) / 2.0 + n(100.0, 100.0)) / 2.0;
    let level_b = (n(90.0, 50.0) + (n(40.0, 100.0) + n(20.0, 100.0)) / 2.0) / 2.0;
    assert!((a.levels[0].value - level_a).abs() < 1e-12);
    assert!((b.levels[0].value - level_b).abs() < 1e-12);

    // histogram (width 10) counts: A in bins 10, 30, 50; B in 10, 20, 90
    let counts = |g: &bcg_core::analysis::GroupSummary| -> Vec<usize> {
        g.histogram.iter().map(|b| b.count).collect()
    };
    assert_eq!(counts(a), vec![0, 1, 0, 1, 0, 1, 0, 0, 0, 0]);
    assert_eq!(counts(b), vec![0, 1, 1, 0, 0, 0, 0, 0, 0, 1]);
    assert!(a.convergence.is_empty());

    // full reference shifts period-1 levels by ln 2 / ln 1.5
    let full = session_summary(
        &logs,
        &SummaryOptions {
            reference: ReferencePolicy::FullRange,
            bin_width: 10.0,
        },
    )
    .unwrap();
    let shift = 2f64.ln() / 1.5f64.ln();
    assert!((full.groups["A"].levels[0].value - (level_a + shift)).abs() < 1e-12);
}

#[test]
fn summary_ignores_session_order() {
    let logs = fixture();
    let reversed: Vec<SessionLog> = logs.iter().rev().cloned().collect();
    let opts = SummaryOptions::default();
    assert_eq!(
        session_summary(&logs, &opts).unwrap(),
        session_summary(&reversed, &opts).unwrap()
    );
}
