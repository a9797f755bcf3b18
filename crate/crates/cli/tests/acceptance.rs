//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::process::Command;
use std::time::Instant;

use bcg_core::agents::{build_seats, AgentKind, AgentSpec, ReferencePolicy, Role, SeatContext};
use bcg_core::analysis::{
    choice_histogram, convergence_rate, estimate_level, per_type_ratio_mixed, predicted_next_mixed,
    predicted_ratio_fixed, session_summary, LevelFlag, SummaryOptions,
};
use bcg_core::config::GameConfig;
use bcg_core::experiments::{
    builtin_treatments, encode_session_log, read_session_log, run_experiment, run_single_session,
    write_session_log, Mode, RunOptions,
};
use bcg_core::game::{
    run_session, AgentId, Execution, PeriodRecord, RosterEntry, SessionLog, SessionStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

const P: f64 = 2.0 / 3.0;
const TOL: f64 = 1e-9;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bcg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bcg"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Mean choice per period over agents with `label`.
fn label_series(log: &SessionLog, label: &str) -> Vec<f64> {
    log.periods
        .iter()
        .map(|rec| {
            let v: Vec<f64> = rec
                .choices
                .iter()
                .filter(|(id, _)| log.label_of(**id) == Some(label))
                .map(|(_, c)| *c)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

fn fixed_opponent_ratios() -> Check {
    let started = Instant::now();
    let reg = builtin_treatments();
    for (name, reported) in [
        ("static_low", 0.066667),
        ("static_mixed", 0.333333),
        ("static_high", 0.600000),
    ] {
        let t = reg.lookup(name).map_err(|e| e.to_string())?;
        let log = run_single_session(
            t,
            42,
            0,
            Mode::Scripted,
            &SeatContext::default(),
            Execution::Sequential,
        )
        .map_err(|e| e.to_string())?;
        let (nf, nl) = t.fixed_split();
        let predicted = predicted_ratio_fixed(nf, nl, P).map_err(|e| e.to_string())?;
        ensure((predicted - P * f64::from(nl) / 10.0).abs() < 1e-15, || {
            format!("{name}: formula")
        })?;
        ensure((predicted - reported).abs() < 5e-7, || {
            format!("{name}: {predicted} vs {reported}")
        })?;
        let a = label_series(&log, "GPT3.5");
        ensure(a.len() == 5, || format!("{name}: {} periods", a.len()))?;
        for t in 1..5 {
            let measured = a[t] / a[t - 1];
            ensure((measured - predicted).abs() < TOL, || {
                format!(
                    "{name} period {}: measured {measured} predicted {predicted}",
                    t + 1
                )
            })?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}"))
}

fn pure_environment() -> Check {
    let reg = builtin_treatments();
    // ten H agents; scripted stand-ins are level 1
    let t = reg.lookup("dynamic_1").map_err(|e| e.to_string())?;
    let log = run_single_session(
        t,
        1,
        0,
        Mode::Scripted,
        &SeatContext::default(),
        Execution::Sequential,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        log.roster
            .iter()
            .all(|e| e.spec.kind == AgentKind::level_k(1.0)),
        || "roster not level 1".into(),
    )?;
    for w in log.periods.windows(2) {
        let (a, b) = (w[0].mean, w[1].mean);
        ensure((b / a - P).abs() < TOL, || {
            format!("period {} ratio {}", w[1].period, b / a)
        })?;
        let c = convergence_rate(a, b).value().ok_or("undefined rate")?;
        ensure((c - 1.0 / 3.0).abs() < TOL, || {
            format!("period {} rate {c}", w[0].period)
        })?;
    }
    Ok(())
}

fn belief_responders() -> Check {
    for (nh, nl) in [(10u32, 0u32), (9, 1), (5, 5), (1, 9), (0, 10)] {
        let agent = |role: Role, label: &str| {
            AgentSpec::new(
                label,
                AgentKind::BeliefBr {
                    believed_high: nh,
                    believed_low: nl,
                    own_role: role,
                    high_focal: ReferencePolicy::HalfRange,
                },
            )
            .with_role(role)
        };
        let mut roster = vec![agent(Role::High, "H"); nh as usize];
        roster.extend(vec![agent(Role::Low, "L"); nl as usize]);
        let config = GameConfig::new(10, 100.0, 5);
        let mut seats =
            build_seats(&roster, &config, &SeatContext::default()).map_err(|e| e.to_string())?;
        let log = run_session(0, &mut seats, &config, Execution::Sequential)
            .map_err(|e| e.to_string())?;
        let (ah, al) = (label_series(&log, "H"), label_series(&log, "L"));
        for t in 0..4 {
            let predicted =
                predicted_next_mixed(nh, nl, ah[t], al[t], P, 10).map_err(|e| e.to_string())?;
            for c in log.periods[t + 1].choices.values() {
                ensure((c - predicted).abs() < TOL, || {
                    format!("({nh},{nl}) period {}: {c} vs {predicted}", t + 2)
                })?;
            }
            if nh > 0 && nl > 0 {
                let (rh, rl) =
                    per_type_ratio_mixed(nh, nl, ah[t], al[t], P).map_err(|e| e.to_string())?;
                ensure((ah[t + 1] / ah[t] - rh).abs() < TOL, || {
                    format!("({nh},{nl}) H ratio")
                })?;
                ensure((al[t + 1] / al[t] - rl).abs() < TOL, || {
                    format!("({nh},{nl}) L ratio")
                })?;
            }
        }
    }
    Ok(())
}

fn level_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        let r: f64 = rng.gen_range(1.0..1000.0);
        let n: f64 = rng.gen_range(-2.0..10.0);
        let p: f64 = rng.gen_range(0.1..0.9);
        let est = estimate_level(r * p.powf(n), r, p).map_err(|e| e.to_string())?;
        ensure((est.n - n).abs() < TOL, || {
            format!("case {i}: r={r} n={n} p={p} got {}", est.n)
        })?;
    }
    for r in [1.0, 50.0, 1000.0] {
        let est = estimate_level(0.0, r, P).map_err(|e| e.to_string())?;
        ensure(est.has(LevelFlag::NeChoice), || {
            format!("zero choice at r={r} lacks NE_CHOICE")
        })?;
    }
    Ok(())
}

fn winner_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let n = rng.gen_range(1..=6usize);
        let prize: f64 = rng.gen_range(1.0..500.0);
        // integer choices make exact ties common
        let choices: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    f64::from(rng.gen_range(0..=20u32))
                } else {
                    rng.gen_range(0.0..100.0)
                }
            })
            .collect();
        let mut config = GameConfig::new(n as u32, 100.0, 1);
        config.prize = prize;
        let map: BTreeMap<AgentId, f64> = choices
            .iter()
            .enumerate()
            .map(|(k, c)| (AgentId(k as u32), *c))
            .collect();
        let rec = PeriodRecord::from_choices(1, map, &config).map_err(|e| e.to_string())?;

        let target = P * (choices.iter().sum::<f64>() / n as f64);
        let dist: Vec<f64> = choices.iter().map(|c| (c - target).abs()).collect();
        let best = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        let oracle: BTreeSet<AgentId> = (0..n)
            .filter(|&k| dist[k] - best <= 1e-9)
            .map(|k| AgentId(k as u32))
            .collect();
        ensure(rec.winners == oracle, || {
            format!("case {i}: {:?} vs {oracle:?}", rec.winners)
        })?;
        let total: f64 = rec.payoffs.values().sum();
        ensure((total - prize).abs() <= 1e-9, || {
            format!("case {i}: payoffs sum {total} vs {prize}")
        })?;
    }
    Ok(())
}

fn prompt_fidelity() -> Check {
    let dir = format!("{}/tests/fixtures/prompts", env!("CARGO_MANIFEST_DIR"));
    let history = format!("{dir}/repeated_history.json");
    let cases: [(&str, Vec<&str>); 3] = [
        (
            "one_shot_9p_100.txt",
            vec![
                "--treatment",
                "one_shot_multi",
                "--period",
                "1",
                "--upper-bound",
                "100",
            ],
        ),
        (
            "repeated_p4_w3_agent2.txt",
            vec![
                "--treatment",
                "repeated_multi",
                "--period",
                "4",
                "--agent",
                "2",
                "--upper-bound",
                "100",
                "--history",
                &history,
            ],
        ),
        (
            "static_low_disclosure.txt",
            vec!["--treatment", "static_low", "--period", "1"],
        ),
    ];
    for (golden, args) in cases {
        let expected = fs::read(format!("{dir}/{golden}")).map_err(|e| format!("{golden}: {e}"))?;
        let mut full = vec!["render-prompt"];
        full.extend(args);
        let out = bcg(&full);
        ensure(out.status.success(), || {
            format!("{golden}: exit {:?}", out.status.code())
        })?;
        ensure(out.stdout == expected, || {
            format!("{golden}: rendered prompt differs")
        })?;
        let text = String::from_utf8_lossy(&expected);
        ensure(
            text.contains("I want you to act as a clever game player"),
            || format!("{golden}: system text"),
        )?;
        if golden.starts_with("static") {
            ensure(
                text.contains("some of your opponents will be playing a fixed strategy of 0"),
                || format!("{golden}: disclosure text"),
            )?;
        }
        if golden.starts_with("repeated") {
            let blocks = text.lines().filter(|l| l.starts_with("Run ")).count();
            ensure(blocks == 3, || format!("{golden}: {blocks} history blocks"))?;
        }
    }
    Ok(())
}

fn determinism_and_persistence() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let reg = builtin_treatments();
    let mut sample = None;
    for t in reg.iter() {
        let opts = RunOptions {
            max_sessions: Some(3),
            ..RunOptions::scripted(tmp.path())
        };
        let a = run_experiment(t, 42, &opts).map_err(|e| e.to_string())?;
        let b = run_experiment(t, 42, &opts).map_err(|e| e.to_string())?;
        ensure(a.completed() == a.sessions.len(), || {
            format!("{}: incomplete sessions", t.name)
        })?;
        for (pa, pb) in a.log_paths().iter().zip(b.log_paths()) {
            let (ba, bb) = (
                fs::read(pa).map_err(|e| e.to_string())?,
                fs::read(&pb).map_err(|e| e.to_string())?,
            );
            ensure(ba == bb, || {
                format!("{}: logs differ between reruns", t.name)
            })?;
            let log = read_session_log(pa).map_err(|e| e.to_string())?;
            ensure(encode_session_log(&log).into_bytes() == ba, || {
                format!("{}: round trip", t.name)
            })?;
            sample.get_or_insert((pa.clone(), log));
        }
    }
    let (path, mut log) = sample.ok_or("no logs produced")?;
    let ok = bcg(&["replay", "--log", path.to_str().unwrap()]);
    ensure(ok.status.code() == Some(0), || {
        format!("untampered replay exit {:?}", ok.status.code())
    })?;

    let first = *log.periods[0].choices.keys().next().ok_or("empty period")?;
    *log.periods[0].choices.get_mut(&first).unwrap() += 0.25;
    let tampered = tmp.path().join("tampered.log");
    write_session_log(&log, &tampered).map_err(|e| e.to_string())?;
    let bad = bcg(&["replay", "--log", tampered.to_str().unwrap()]);
    ensure(bad.status.code() == Some(1), || {
        format!("tampered replay exit {:?}", bad.status.code())
    })?;
    ensure(
        String::from_utf8_lossy(&bad.stdout).contains("DIVERGED"),
        || "no DIVERGED line".into(),
    )
}

/// Two sessions: (upper 100) A=10, A=30, B=90 and (upper 200) A=100, B=40, B=20.
fn fixture_logs() -> Vec<SessionLog> {
    let build = |index: u32, upper: f64, labels: [&str; 3], choices: [f64; 3]| {
        let config = GameConfig::new(3, upper, 1).with_seed(u64::from(index));
        let roster = (0..3)
            .map(|i| RosterEntry {
                id: AgentId(i as u32),
                spec: AgentSpec::new(labels[i], AgentKind::Fixed { value: choices[i] }),
            })
            .collect();
        let map = (0..3).map(|i| (AgentId(i as u32), choices[i])).collect();
        SessionLog {
            session: index,
            config: config.clone(),
            roster,
            periods: vec![PeriodRecord::from_choices(1, map, &config).unwrap()],
            transcripts: vec![],
            status: SessionStatus::Complete,
        }
    };
    vec![
        build(0, 100.0, ["A", "A", "B"], [10.0, 30.0, 90.0]),
        build(1, 200.0, ["A", "B", "B"], [100.0, 40.0, 20.0]),
    ]
}

fn summary_fixtures() -> Check {
    let logs = fixture_logs();
    let table = session_summary(&logs, &SummaryOptions::default()).map_err(|e| e.to_string())?;
    // normalized A: 10, 30, 50; B: 90, 20, 10
    let want = [("A", 30.0, 30.0), ("B", 40.0, 20.0)];
    for (label, mean, median) in want {
        let g = &table.groups[label];
        ensure(g.mean_choice == Some(mean), || {
            format!("{label} mean {:?}", g.mean_choice)
        })?;
        ensure(g.median_choice == Some(median), || {
            format!("{label} median {:?}", g.median_choice)
        })?;
        let total: usize = g.histogram.iter().map(|b| b.count).sum();
        ensure(total == g.observations && total == 3, || {
            format!("{label} histogram total {total}")
        })?;
    }
    let normalized: Vec<f64> = table.choices.iter().map(|c| c.normalized).collect();
    let bins = choice_histogram(&normalized, 10.0).map_err(|e| e.to_string())?;
    ensure(bins.iter().map(|b| b.count).sum::<usize>() == 6, || {
        "pooled histogram total".into()
    })?;

    // the CLI prints the same numbers
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for log in &logs {
        write_session_log(
            log,
            &tmp.path().join(format!("session-{:04}.log", log.session)),
        )
        .map_err(|e| e.to_string())?;
    }
    let out_dir = tmp.path().join("csv");
    let out = bcg(&[
        "analyze",
        "--logs",
        tmp.path().to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    ensure(out.status.success(), || {
        format!("analyze exit {:?}", out.status.code())
    })?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let expected = "label\tA\tB\nn\t3\t3\nmean\t30.000\t40.000\nmedian\t30.000\t20.000\n";
    ensure(stdout == expected, || format!("analyze stdout:\n{stdout}"))?;
    let rows = fs::read_to_string(out_dir.join("choices.csv")).map_err(|e| e.to_string())?;
    ensure(rows.lines().count() == 7, || "choices.csv row count".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        (
            "fixed-opponent-oracle: static (9,1)/(5,5)/(1,9) ratios 0.066667/0.333333/0.600000, < 1 s",
            fixed_opponent_ratios,
        ),
        (
            "pure-environment: level-1 roster ratio 2/3, convergence rate 1/3",
            pure_environment,
        ),
        (
            "belief-responder-oracle: belief responders match mixed predictions, five compositions",
            belief_responders,
        ),
        (
            "level-round-trip: 1000 random (r, n, p) cases; zero choice flagged NE_CHOICE",
            level_round_trip,
        ),
        (
            "winner-brute-force: 1000 random rosters, payoffs sum to prize",
            winner_brute_force,
        ),
        (
            "prompt-fidelity: three golden prompts byte-for-byte",
            prompt_fidelity,
        ),
        (
            "determinism-persistence: reruns byte-identical, round trip, replay 0/1",
            determinism_and_persistence,
        ),
        (
            "summary-fixtures: two-session means/medians, histogram conservation",
            summary_fixtures,
        ),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(()) => println!("PASS  {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
