use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use bcg_core::agents::{
    messages_to_text, render_prompt, AgentSpec, PromptVariant, ReferencePolicy,
};
use bcg_core::analysis::{
    per_type_coefficients, per_type_ratio_mixed, predicted_next_mixed, predicted_ratio_fixed,
    session_summary, SummaryOptions, SummaryTable,
};
use bcg_core::experiments::{
    builtin_treatments, decode_session_log, export_csv, read_log_dir, read_session_log,
    replay_session, run_experiment, Mode, Registry, ReplayMode, RunOptions, SessionState,
};
use bcg_core::game::{AgentId, Execution, Observation, PeriodRecord, SeatInfo};
use bcg_core::gateway::{Gateway, ProviderConfig};
use bcg_core::seed::session_seed;
use bcg_core::Error;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success, 1 result-level failure, 2 usage or config error, 3 auth error.
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_AUTH: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "bcg",
    version,
    about = "p-beauty contest harness for scripted and LLM agents"
)]
struct Cli {
    /// JSON list of treatment overrides merged over the builtin registry.
    #[arg(long, global = true, value_name = "FILE")]
    treatments: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List registered treatments.
    List,
    /// Run every session of a treatment and persist the logs.
    Run(RunArgs),
    /// Summarize session logs and write the CSV tables.
    Analyze(AnalyzeArgs),
    /// Closed-form next-period predictions.
    Predict(PredictArgs),
    /// Print the messages an LLM agent would receive.
    RenderPrompt(RenderArgs),
    /// Re-simulate a session log and verify every period.
    Replay(ReplayArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Live,
    Scripted,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ReferenceArg {
    Half,
    Full,
}

#[derive(Args, Debug)]
struct RunArgs {
    treatment: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "scripted")]
    mode: ModeArg,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Sessions run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Run only the first N sessions.
    #[arg(long, value_name = "N")]
    sessions: Option<u32>,
    /// JSON list of provider configs (defaults to the builtin set).
    #[arg(long, value_name = "FILE")]
    providers: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Directory containing session-*.log files.
    #[arg(long)]
    logs: PathBuf,
    #[arg(long, value_enum, default_value = "half")]
    reference: ReferenceArg,
    #[arg(long, default_value_t = 10.0)]
    bin_width: f64,
    /// CSV output directory (defaults to <logs>/csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Derive counts from a registered treatment.
    #[arg(long)]
    treatment: Option<String>,
    /// Players locked at 0.
    #[arg(long = "Nf")]
    n_fixed: Option<u32>,
    /// Best-responding players.
    #[arg(long = "Nl")]
    n_responders: Option<u32>,
    /// Believed H count.
    #[arg(long = "BH")]
    believed_high: Option<u32>,
    /// Believed L count.
    #[arg(long = "BL")]
    believed_low: Option<u32>,
    /// Current H action.
    #[arg(long = "aH")]
    a_high: Option<f64>,
    /// Current L action.
    #[arg(long = "aL")]
    a_low: Option<f64>,
    /// Group size; defaults to the sum of the counts.
    #[arg(long = "n")]
    n: Option<u32>,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    p: f64,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    treatment: String,
    #[arg(long, default_value_t = 1)]
    period: u32,
    /// Session log, or JSON array of period records, supplying the history.
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    agent: u32,
    /// Overrides the treatment's upper bound.
    #[arg(long)]
    upper_bound: Option<f64>,
    /// Master seed used to draw a random upper bound (session 0).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
}

fn treatment_list(reg: &Registry) -> String {
    let mut s = String::from("Treatments:\n");
    for t in reg.iter() {
        s.push_str(&format!("  {:<16} {}\n", t.name, t.description));
    }
    s
}

fn load_registry(overrides: Option<&Path>) -> anyhow::Result<Registry> {
    let mut reg = builtin_treatments();
    if let Some(path) = overrides {
        reg.load_overrides(path)?;
    }
    Ok(reg)
}

fn cmd_list(reg: &Registry) -> anyhow::Result<u8> {
    println!("name\tplayers\tperiods\tsessions\tdescription");
    for t in reg.iter() {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            t.name, t.config.num_players, t.config.num_periods, t.sessions, t.description
        );
    }
    Ok(0)
}

fn cmd_run(reg: &Registry, args: &RunArgs) -> anyhow::Result<u8> {
    let treatment = reg.lookup(&args.treatment)?;
    let mode = match args.mode {
        ModeArg::Live => Mode::Live,
        ModeArg::Scripted => Mode::Scripted,
    };
    let mut opts = RunOptions::scripted(&args.out);
    opts.mode = mode;
    opts.jobs = args.jobs;
    opts.max_sessions = args.sessions;
    if mode == Mode::Live {
        let configs = match &args.providers {
            Some(path) => ProviderConfig::load_list(path).map_err(Error::from)?,
            None => ProviderConfig::defaults(),
        };
        opts.gateway = Some(Arc::new(
            Gateway::from_configs(&configs).map_err(Error::from)?,
        ));
        opts.execution = Execution::Concurrent;
    }
    let manifest = run_experiment(treatment, args.seed, &opts)?;

    println!("manifest\t{}", manifest.manifest_path().display());
    println!("session\tseed\tstatus\tlog");
    for s in &manifest.sessions {
        let status = match &s.status {
            SessionState::Pending => "pending".to_string(),
            SessionState::Complete => "complete".to_string(),
            SessionState::Incomplete {
                period,
                agent,
                reason,
            } => {
                format!("incomplete (period {period}, agent {agent}: {reason})")
            }
            SessionState::Error { message } => format!("error ({message})"),
        };
        let log = s
            .log_path
            .as_ref()
            .map_or(String::from("-"), |p| p.display().to_string());
        println!("{}\t{}\t{}\t{}", s.index, s.seed, status, log);
    }
    println!(
        "total\t{}\tcomplete\t{}\tfailed\t{}",
        manifest.sessions.len(),
        manifest.completed(),
        manifest.failed()
    );
    Ok(if manifest.failed() == 0 {
        0
    } else {
        EXIT_FAILURE
    })
}

/// Labels in first-seen roster order, then any without observations.
fn label_order(table: &SummaryTable) -> Vec<&str> {
    let mut order: Vec<&str> = Vec::new();
    for row in &table.choices {
        if !order.contains(&row.label.as_str()) {
            order.push(&row.label);
        }
    }
    for label in table.groups.keys() {
        if !order.contains(&label.as_str()) {
            order.push(label);
        }
    }
    order
}

fn fmt3(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.3}"))
}

/// Summary layout: one column per label, rows for count, mean and median.
fn render_table(table: &SummaryTable) -> String {
    let labels = label_order(table);
    let row = |name: &str, f: &dyn Fn(&str) -> String| {
        let cells: Vec<String> = labels.iter().map(|l| f(l)).collect();
        format!("{name}\t{}\n", cells.join("\t"))
    };
    [
        row("label", &|l| l.to_string()),
        row("n", &|l| table.groups[l].observations.to_string()),
        row("mean", &|l| fmt3(table.groups[l].mean_choice)),
        row("median", &|l| fmt3(table.groups[l].median_choice)),
    ]
    .concat()
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn cmd_analyze(args: &AnalyzeArgs) -> anyhow::Result<u8> {
    let logs = read_log_dir(&args.logs)?;
    if logs.is_empty() {
        bail!("no session logs found in {}", args.logs.display());
    }
    let opts = SummaryOptions {
        reference: match args.reference {
            ReferenceArg::Half => ReferencePolicy::HalfRange,
            ReferenceArg::Full => ReferencePolicy::FullRange,
        },
        bin_width: args.bin_width,
    };
    let table = session_summary(&logs, &opts)?;
    let out = args.out.clone().unwrap_or_else(|| args.logs.join("csv"));
    export_csv(&table, &out)?;
    emit(&render_table(&table));
    log::info!("wrote CSV tables to {}", out.display());
    Ok(0)
}

fn check_n(n: Option<u32>, sum: u32) -> anyhow::Result<u32> {
    match n {
        Some(n) if n != sum => bail!("counts sum to {sum} but the group size is {n}"),
        _ => Ok(sum),
    }
}

fn print_value(name: &str, v: f64) {
    println!("{name}\t{v:.4}\t{v}");
}

fn cmd_predict(reg: &Registry, args: &PredictArgs) -> anyhow::Result<u8> {
    let p = args.p;
    if let Some(name) = &args.treatment {
        let t = reg.lookup(name)?;
        let p = t.config.p;
        let (n_fixed, rest) = t.fixed_split();
        let (n_high, n_low) = t.role_split();
        println!("treatment\t{}", t.name);
        if n_fixed > 0 {
            print_value("ratio_fixed", predicted_ratio_fixed(n_fixed, rest, p)?);
        } else if n_high + n_low == t.config.num_players {
            let c = per_type_coefficients(n_high, n_low, p)?;
            print_value("high_cross", c.cross_high);
            print_value("high_own", c.own_high);
            print_value("low_cross", c.cross_low);
            print_value("low_own", c.own_low);
            print_value("ratio_equal_actions", p);
        } else {
            bail!(
                "treatment {} has neither fixed agents nor a full H/L roster",
                t.name
            );
        }
        return Ok(0);
    }
    match (args.n_fixed, args.n_responders) {
        (Some(nf), Some(nl)) => {
            check_n(args.n, nf + nl)?;
            print_value("ratio_fixed", predicted_ratio_fixed(nf, nl, p)?);
            return Ok(0);
        }
        (None, None) => {}
        _ => bail!("--Nf and --Nl must be given together"),
    }
    match (
        args.believed_high,
        args.believed_low,
        args.a_high,
        args.a_low,
    ) {
        (Some(bh), Some(bl), Some(ah), Some(al)) => {
            let n = check_n(args.n, bh + bl)?;
            print_value("next_action", predicted_next_mixed(bh, bl, ah, al, p, n)?);
            if ah > 0.0 && al > 0.0 {
                let (rh, rl) = per_type_ratio_mixed(bh, bl, ah, al, p)?;
                print_value("ratio_high", rh);
                print_value("ratio_low", rl);
            }
            Ok(0)
        }
        (None, None, None, None) => {
            bail!("give --treatment, --Nf/--Nl, or --BH/--BL/--aH/--aL")
        }
        _ => bail!("--BH, --BL, --aH and --aL must be given together"),
    }
}

fn load_history(path: &Path) -> anyhow::Result<Vec<PeriodRecord>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(log) = decode_session_log(&text) {
        return Ok(log.periods);
    }
    serde_json::from_str::<Vec<PeriodRecord>>(&text)
        .map_err(|e| anyhow!("{}: not a session log or period list: {e}", path.display()))
}

fn cmd_render(reg: &Registry, args: &RenderArgs) -> anyhow::Result<u8> {
    let t = reg.lookup(&args.treatment)?;
    let mut config = t.session_config(session_seed(args.seed, 0));
    if let Some(ub) = args.upper_bound {
        config.upper_bound = ub;
    }
    config.validate()?;
    if args.period == 0 || args.period > config.num_periods {
        bail!("period must lie in 1..={}", config.num_periods);
    }
    if args.agent >= config.num_players {
        bail!("agent id must be below {}", config.num_players);
    }
    let prior = match &args.history {
        Some(path) => load_history(path)?,
        None => Vec::new(),
    };
    let have = prior.iter().filter(|r| r.period < args.period).count() as u32;
    if have != args.period - 1 {
        bail!(
            "period {} needs {} prior periods of history, got {have}",
            args.period,
            args.period - 1
        );
    }
    let roster: Vec<SeatInfo> = t
        .roster
        .iter()
        .enumerate()
        .map(|(i, s): (usize, &AgentSpec)| SeatInfo {
            id: AgentId(i as u32),
            label: s.label.clone(),
            role: s.role,
        })
        .collect();
    let obs = Observation::new(&config, roster, AgentId(args.agent), args.period, &prior);
    let variant = PromptVariant::for_disclosure(config.disclose_fixed_strategy);
    emit(&messages_to_text(&render_prompt(&obs, variant)));
    Ok(0)
}

fn cmd_replay(args: &ReplayArgs) -> anyhow::Result<u8> {
    let log = read_session_log(&args.log).map_err(Error::from)?;
    let report = replay_session(&log)?;
    let mode = match report.mode {
        ReplayMode::Resimulated => "resimulated",
        ReplayMode::ConsistencyOnly => "consistency-only",
    };
    match &report.divergence {
        None => {
            println!("OK\t{mode}\t{} periods", report.periods_checked);
            Ok(0)
        }
        Some(d) => {
            println!("DIVERGED\t{mode}\t{d}");
            Ok(EXIT_FAILURE)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Gateway(g)) if g.is_auth() => EXIT_AUTH,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let help = treatment_list(&builtin_treatments());
    let matches = Cli::command()
        .after_help(help.clone())
        .mut_subcommand("run", |c| c.after_help(help.clone()))
        .mut_subcommand("render-prompt", |c| c.after_help(help.clone()))
        .get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());

    let result = load_registry(cli.treatments.as_deref()).and_then(|reg| match &cli.command {
        Command::List => cmd_list(&reg),
        Command::Run(a) => cmd_run(&reg, a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Predict(a) => cmd_predict(&reg, a),
        Command::RenderPrompt(a) => cmd_render(&reg, a),
        Command::Replay(a) => cmd_replay(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
