//! Beauty-contest rules and the period/session loop.
//!
//! Everything here is deterministic: given a config and a roster of
//! scripted agents, the produced [`SessionLog`] depends only on the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentSpec, Role};
use crate::config::{GameConfig, HistoryWindow};
use crate::error::{Error, Result};
use crate::gateway::Exchange;

/// Identifier of an agent within a session roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of one period of play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u32,
    pub choices: BTreeMap<AgentId, f64>,
    pub mean: f64,
    pub target: f64,
    pub winners: BTreeSet<AgentId>,
    pub payoffs: BTreeMap<AgentId, f64>,
}

impl PeriodRecord {
    /// Assemble a record from raw choices, computing mean, target, winners and payoffs.
    pub fn from_choices(
        period: u32,
        choices: BTreeMap<AgentId, f64>,
        config: &GameConfig,
    ) -> Result<Self> {
        let values: Vec<f64> = choices.values().copied().collect();
        let (mean, target) = compute_target(&values, config.p)?;
        let winners = determine_winners(&choices, target, config.tie_epsilon)?;
        let prizes = allocate_prize(&winners, config.prize)?;
        let payoffs = choices
            .keys()
            .map(|id| (*id, prizes.get(id).copied().unwrap_or(0.0)))
            .collect();
        Ok(PeriodRecord {
            period,
            choices,
            mean,
            target,
            winners,
            payoffs,
        })
    }
}

/// Returns `(mean, p * mean)`.
pub fn compute_target(choices: &[f64], p: f64) -> Result<(f64, f64)> {
    if choices.is_empty() {
        return Err(Error::invalid("cannot compute a target from zero choices"));
    }
    if let Some(bad) = choices.iter().find(|c| !c.is_finite()) {
        return Err(Error::invalid(format!("non-finite choice {bad}")));
    }
    let mean = choices.iter().sum::<f64>() / choices.len() as f64;
    Ok((mean, p * mean))
}

/// All agents whose distance to `target` is within `tie_epsilon` of the closest one.
pub fn determine_winners(
    choices: &BTreeMap<AgentId, f64>,
    target: f64,
    tie_epsilon: f64,
) -> Result<BTreeSet<AgentId>> {
    if choices.is_empty() {
        return Err(Error::invalid("no choices to rank"));
    }
    if !(tie_epsilon >= 0.0) {
        return Err(Error::invalid("tie_epsilon must be non-negative"));
    }
    let best = choices
        .values()
        .map(|c| (c - target).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(choices
        .iter()
        .filter(|(_, c)| (*c - target).abs() - best <= tie_epsilon)
        .map(|(id, _)| *id)
        .collect())
}

/// Splits `prize` evenly among `winners`.
pub fn allocate_prize(winners: &BTreeSet<AgentId>, prize: f64) -> Result<BTreeMap<AgentId, f64>> {
    if winners.is_empty() {
        return Err(Error::invalid("prize needs at least one winner"));
    }
    if !(prize > 0.0) {
        return Err(Error::invalid(format!(
            "prize must be positive, got {prize}"
        )));
    }
    let share = prize / winners.len() as f64;
    Ok(winners.iter().map(|id| (*id, share)).collect())
}

/// The most recent `window` periods before period `t`, oldest first.
pub fn visible_history(all: &[PeriodRecord], window: HistoryWindow, t: u32) -> Vec<PeriodRecord> {
    let past: Vec<&PeriodRecord> = all.iter().filter(|r| r.period < t).collect();
    let keep = window.visible_len(t).min(past.len());
    past[past.len() - keep..]
        .iter()
        .map(|r| (*r).clone())
        .collect()
}

/// The rule parameters an agent is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct GameView {
    pub num_players: u32,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub p: f64,
    pub prize: f64,
    pub disclose_fixed_strategy: bool,
}

impl From<&GameConfig> for GameView {
    fn from(c: &GameConfig) -> Self {
        GameView {
            num_players: c.num_players,
            lower_bound: c.lower_bound,
            upper_bound: c.upper_bound,
            p: c.p,
            prize: c.prize,
            disclose_fixed_strategy: c.disclose_fixed_strategy,
        }
    }
}

/// Public roster information: who is seated and under which label/role.
#[derive(Debug, Clone, PartialEq)]
pub struct SeatInfo {
    pub id: AgentId,
    pub label: String,
    pub role: Option<Role>,
}

/// What an agent sees before choosing in a period.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub agent_id: AgentId,
    pub game: GameView,
    pub period: u32,
    pub history: Vec<PeriodRecord>,
    pub roster: Vec<SeatInfo>,
}

impl Observation {
    /// What `agent_id` sees before choosing in `period`, given every
    /// earlier record; the history window is applied here.
    pub fn new(
        config: &GameConfig,
        roster: Vec<SeatInfo>,
        agent_id: AgentId,
        period: u32,
        prior: &[PeriodRecord],
    ) -> Self {
        Observation {
            agent_id,
            game: GameView::from(config),
            period,
            history: visible_history(prior, config.history_window, period),
            roster,
        }
    }

    /// Most recent visible period, if any.
    pub fn last_period(&self) -> Option<&PeriodRecord> {
        self.history.last()
    }

    pub fn role_of(&self, id: AgentId) -> Option<Role> {
        self.roster.iter().find(|s| s.id == id).and_then(|s| s.role)
    }
}

/// A chosen number plus any provider exchanges made while choosing it.
#[derive(Debug, Clone, Default)]
pub struct Decision {
    pub choice: f64,
    pub exchanges: Vec<Exchange>,
}

impl Decision {
    pub fn scripted(choice: f64) -> Self {
        Decision {
            choice,
            exchanges: Vec::new(),
        }
    }
}

/// Why an agent could not produce a usable choice.
#[derive(Debug, Clone)]
pub struct DecideError {
    pub reason: String,
    pub exchanges: Vec<Exchange>,
}

impl DecideError {
    pub fn new(reason: impl Into<String>) -> Self {
        DecideError {
            reason: reason.into(),
            exchanges: Vec::new(),
        }
    }
}

/// A decision policy. Implementations must not share mutable state with
/// other agents: the engine may call several of them concurrently.
pub trait Agent: Send {
    fn decide(&mut self, obs: &Observation) -> std::result::Result<Decision, DecideError>;
}

/// One roster slot: identity, its declared spec, and the live policy.
pub struct Seat {
    pub id: AgentId,
    pub spec: AgentSpec,
    pub agent: Box<dyn Agent>,
}

impl fmt::Debug for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Seat")
            .field("id", &self.id)
            .field("spec", &self.spec)
            .finish_non_exhaustive()
    }
}

/// Provider exchange attributed to an agent and period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub period: u32,
    pub agent: AgentId,
    pub exchange: Exchange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: AgentId,
    pub spec: AgentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionStatus {
    Complete,
    Incomplete {
        period: u32,
        agent: AgentId,
        reason: String,
    },
}

/// A full session: config, roster, the periods played, and transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session: u32,
    pub config: GameConfig,
    pub roster: Vec<RosterEntry>,
    pub periods: Vec<PeriodRecord>,
    pub transcripts: Vec<TranscriptRecord>,
    pub status: SessionStatus,
}

impl SessionLog {
    pub fn is_complete(&self) -> bool {
        matches!(self.status, SessionStatus::Complete)
    }

    pub fn label_of(&self, id: AgentId) -> Option<&str> {
        self.roster
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.spec.label.as_str())
    }

    /// Whether every roster entry is a scripted (non-LLM) policy.
    pub fn is_scripted(&self) -> bool {
        self.roster.iter().all(|e| e.spec.is_scripted())
    }
}

/// Result of playing one period.
#[derive(Debug)]
pub struct PeriodOutcome {
    pub record: PeriodRecord,
    pub transcripts: Vec<TranscriptRecord>,
}

/// A period that aborted because an agent failed.
#[derive(Debug)]
pub struct PeriodFailure {
    pub error: Error,
    pub transcripts: Vec<TranscriptRecord>,
}

/// Whether agent callbacks within a period run on separate threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Concurrent,
}

fn roster_info(seats: &[Seat]) -> Vec<SeatInfo> {
    seats
        .iter()
        .map(|s| SeatInfo {
            id: s.id,
            label: s.spec.label.clone(),
            role: s.spec.role,
        })
        .collect()
}

/// Plays a single period: builds observations, collects one choice per
/// agent (roster order), and scores the period.
pub fn play_period(
    seats: &mut [Seat],
    config: &GameConfig,
    prior: &[PeriodRecord],
    execution: Execution,
) -> std::result::Result<PeriodOutcome, PeriodFailure> {
    let fail = |error: Error| PeriodFailure {
        error,
        transcripts: Vec::new(),
    };
    if seats.len() != config.num_players as usize {
        return Err(fail(Error::InvalidConfig(format!(
            "roster has {} agents but config expects {}",
            seats.len(),
            config.num_players
        ))));
    }
    let period = prior.last().map_or(1, |r| r.period + 1);
    let roster = roster_info(seats);
    let observations: Vec<Observation> = seats
        .iter()
        .map(|s| Observation::new(config, roster.clone(), s.id, period, prior))
        .collect();

    let results: Vec<std::result::Result<Decision, DecideError>> = match execution {
        Execution::Sequential => seats
            .iter_mut()
            .zip(&observations)
            .map(|(seat, obs)| seat.agent.decide(obs))
            .collect(),
        Execution::Concurrent => thread::scope(|scope| {
            let handles: Vec<_> = seats
                .iter_mut()
                .zip(&observations)
                .map(|(seat, obs)| scope.spawn(move || seat.agent.decide(obs)))
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(DecideError::new("agent thread panicked")))
                })
                .collect()
        }),
    };

    let mut transcripts = Vec::new();
    let mut choices = BTreeMap::new();
    let mut first_failure = None;
    for (seat, result) in seats.iter().zip(results) {
        let (exchanges, outcome) = match result {
            Ok(d) => (d.exchanges, Ok(d.choice)),
            Err(e) => (e.exchanges, Err(e.reason)),
        };
        transcripts.extend(exchanges.into_iter().map(|exchange| TranscriptRecord {
            period,
            agent: seat.id,
            exchange,
        }));
        let reason = match outcome {
            Ok(c) if config.contains(c) => {
                choices.insert(seat.id, c);
                continue;
            }
            Ok(c) => format!(
                "choice {c} outside [{}, {}]",
                config.lower_bound, config.upper_bound
            ),
            Err(reason) => reason,
        };
        if first_failure.is_none() {
            first_failure = Some(Error::AgentFailure {
                agent: seat.id,
                period,
                reason,
            });
        }
    }
    if let Some(error) = first_failure {
        return Err(PeriodFailure { error, transcripts });
    }

    match PeriodRecord::from_choices(period, choices, config) {
        Ok(record) => Ok(PeriodOutcome {
            record,
            transcripts,
        }),
        Err(error) => Err(PeriodFailure { error, transcripts }),
    }
}

/// Plays `config.num_periods` periods, threading history between them.
///
/// An agent failure stops the session; the log keeps every completed
/// period and is marked incomplete.
pub fn run_session(
    session: u32,
    seats: &mut [Seat],
    config: &GameConfig,
    execution: Execution,
) -> Result<SessionLog> {
    config.validate()?;
    let mut log = SessionLog {
        session,
        config: config.clone(),
        roster: seats
            .iter()
            .map(|s| RosterEntry {
                id: s.id,
                spec: s.spec.clone(),
            })
            .collect(),
        periods: Vec::with_capacity(config.num_periods as usize),
        transcripts: Vec::new(),
        status: SessionStatus::Complete,
    };
    for _ in 0..config.num_periods {
        match play_period(seats, config, &log.periods, execution) {
            Ok(outcome) => {
                log.periods.push(outcome.record);
                log.transcripts.extend(outcome.transcripts);
            }
            Err(failure) => {
                log.transcripts.extend(failure.transcripts);
                log.status = match failure.error {
                    Error::AgentFailure {
                        agent,
                        period,
                        reason,
                    } => SessionStatus::Incomplete {
                        period,
                        agent,
                        reason,
                    },
                    other => return Err(other),
                };
                break;
            }
        }
    }
    Ok(log)
}
