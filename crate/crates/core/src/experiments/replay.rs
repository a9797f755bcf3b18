//! Verification of persisted session logs.
//!
//! Fully scripted logs are re-simulated from their recorded seed and
//! compared record by record. Logs with LLM agents cannot be re-simulated,
//! so only the arithmetic of each period is recomputed from its choices.

use std::fmt;

use serde::Serialize;

use crate::agents::{build_seats, AgentSpec, SeatContext};
use crate::error::Result;
use crate::game::{run_session, AgentId, Execution, PeriodRecord, SessionLog};

/// Tolerance for recomputed scalar fields in consistency-only mode.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    Resimulated,
    ConsistencyOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub period: u32,
    pub agent: Option<AgentId>,
    pub field: String,
    pub logged: String,
    pub expected: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "period {}", self.period)?;
        if let Some(a) = self.agent {
            write!(f, " agent {a}")?;
        }
        write!(
            f,
            ": {} logged {} expected {}",
            self.field, self.logged, self.expected
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub mode: ReplayMode,
    pub periods_checked: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.divergence.is_none()
    }
}

fn diverged(
    period: u32,
    agent: Option<AgentId>,
    field: &str,
    logged: impl fmt::Debug,
    expected: impl fmt::Debug,
) -> Divergence {
    Divergence {
        period,
        agent,
        field: field.to_string(),
        logged: format!("{logged:?}"),
        expected: format!("{expected:?}"),
    }
}

/// Compares a logged period with a reference one. `tol` applies to the
/// derived scalars; choices must match exactly.
fn compare(logged: &PeriodRecord, expected: &PeriodRecord, tol: f64) -> Option<Divergence> {
    let period = logged.period;
    let close = |a: f64, b: f64| a == b || (a - b).abs() <= tol;
    if logged.period != expected.period {
        return Some(diverged(
            period,
            None,
            "period",
            logged.period,
            expected.period,
        ));
    }
    for (id, want) in &expected.choices {
        match logged.choices.get(id) {
            Some(got) if got == want => {}
            got => return Some(diverged(period, Some(*id), "choice", got, want)),
        }
    }
    if let Some(extra) = logged
        .choices
        .keys()
        .find(|id| !expected.choices.contains_key(id))
    {
        return Some(diverged(
            period,
            Some(*extra),
            "choice",
            logged.choices[extra],
            "absent",
        ));
    }
    if !close(logged.mean, expected.mean) {
        return Some(diverged(period, None, "mean", logged.mean, expected.mean));
    }
    if !close(logged.target, expected.target) {
        return Some(diverged(
            period,
            None,
            "target",
            logged.target,
            expected.target,
        ));
    }
    if logged.winners != expected.winners {
        return Some(diverged(
            period,
            None,
            "winners",
            &logged.winners,
            &expected.winners,
        ));
    }
    for (id, want) in &expected.payoffs {
        let got = logged.payoffs.get(id).copied();
        if !got.is_some_and(|g| close(g, *want)) {
            return Some(diverged(period, Some(*id), "payoff", got, want));
        }
    }
    if logged.payoffs.len() != expected.payoffs.len() {
        return Some(diverged(
            period,
            None,
            "payoffs",
            logged.payoffs.len(),
            expected.payoffs.len(),
        ));
    }
    None
}

/// Recomputes mean, target, winners and payoffs from the logged choices.
pub fn check_consistency(log: &SessionLog) -> Result<ReplayReport> {
    log.config.validate()?;
    for (i, rec) in log.periods.iter().enumerate() {
        let expected_period = i as u32 + 1;
        if rec.period != expected_period {
            return Ok(ReplayReport {
                mode: ReplayMode::ConsistencyOnly,
                periods_checked: i,
                divergence: Some(diverged(
                    rec.period,
                    None,
                    "period",
                    rec.period,
                    expected_period,
                )),
            });
        }
        if let Some((id, c)) = rec.choices.iter().find(|(_, c)| !log.config.contains(**c)) {
            return Ok(ReplayReport {
                mode: ReplayMode::ConsistencyOnly,
                periods_checked: i,
                divergence: Some(diverged(
                    rec.period,
                    Some(*id),
                    "choice",
                    c,
                    "value within bounds",
                )),
            });
        }
        let expected = PeriodRecord::from_choices(rec.period, rec.choices.clone(), &log.config)?;
        if let Some(d) = compare(rec, &expected, CONSISTENCY_TOLERANCE) {
            return Ok(ReplayReport {
                mode: ReplayMode::ConsistencyOnly,
                periods_checked: i,
                divergence: Some(d),
            });
        }
    }
    Ok(ReplayReport {
        mode: ReplayMode::ConsistencyOnly,
        periods_checked: log.periods.len(),
        divergence: None,
    })
}

/// Re-simulates a scripted log, or falls back to [`check_consistency`]
/// when the roster contains LLM agents.
pub fn replay_session(log: &SessionLog) -> Result<ReplayReport> {
    if !log.is_scripted() {
        return check_consistency(log);
    }
    let roster: Vec<AgentSpec> = log.roster.iter().map(|e| e.spec.clone()).collect();
    let mut seats = build_seats(&roster, &log.config, &SeatContext::default())?;
    let fresh = run_session(log.session, &mut seats, &log.config, Execution::Sequential)?;

    for (i, (logged, expected)) in log.periods.iter().zip(&fresh.periods).enumerate() {
        // scripted agents are exact; any difference is a divergence
        if let Some(d) = compare(logged, expected, 0.0) {
            return Ok(ReplayReport {
                mode: ReplayMode::Resimulated,
                periods_checked: i,
                divergence: Some(d),
            });
        }
    }
    let checked = log.periods.len().min(fresh.periods.len());
    let divergence = if log.periods.len() != fresh.periods.len() {
        Some(diverged(
            checked as u32 + 1,
            None,
            "period count",
            log.periods.len(),
            fresh.periods.len(),
        ))
    } else if log.status != fresh.status {
        Some(diverged(
            checked as u32,
            None,
            "status",
            &log.status,
            &fresh.status,
        ))
    } else {
        None
    };
    Ok(ReplayReport {
        mode: ReplayMode::Resimulated,
        periods_checked: checked,
        divergence,
    })
}
