//! Per-label aggregates over a set of session logs.
//!
//! Per-period series are two-stage averages: first over the label's
//! agents within a session, then over sessions. Logs are reduced in
//! `(session, seed)` order so the result does not depend on input order.

use std::collections::BTreeMap;

use serde::Serialize;

use super::convergence::convergence_rate;
use super::histogram::{choice_histogram, Bin};
use super::levels::{estimate_level, normalize_choice};
use crate::agents::ReferencePolicy;
use crate::error::{Error, Result};
use crate::game::{AgentId, SessionLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    /// Period-1 reference used for level estimates.
    pub reference: ReferencePolicy,
    pub bin_width: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            reference: ReferencePolicy::HalfRange,
            bin_width: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodValue {
    pub period: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub observations: usize,
    /// Mean of normalized choices; `None` when the group has no observations.
    pub mean_choice: Option<f64>,
    pub median_choice: Option<f64>,
    pub mean_payoff: Option<f64>,
    pub levels: Vec<PeriodValue>,
    pub payoffs: Vec<PeriodValue>,
    /// Rate from period `t` to `t + 1`, keyed by `t`; undefined steps omitted.
    pub convergence: Vec<PeriodValue>,
    /// `a_{t+1} / a_t` on the same steps as `convergence`.
    pub ratios: Vec<PeriodValue>,
    pub histogram: Vec<Bin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoiceRow {
    pub session: u32,
    pub period: u32,
    pub agent: AgentId,
    pub label: String,
    pub choice: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub groups: BTreeMap<String, GroupSummary>,
    pub choices: Vec<ChoiceRow>,
    pub bin_width: f64,
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Median; the midpoint of the two central values for even sizes.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Per-session, per-period values for one label: `period -> [session means]`.
#[derive(Default)]
struct Series(BTreeMap<u32, Vec<f64>>);

impl Series {
    fn push_session_mean(&mut self, period: u32, values: &[f64]) {
        if let Some(m) = mean(values) {
            self.0.entry(period).or_default().push(m);
        }
    }

    fn averaged(&self) -> Vec<PeriodValue> {
        self.0
            .iter()
            .filter_map(|(p, v)| mean(v).map(|value| PeriodValue { period: *p, value }))
            .collect()
    }
}

#[derive(Default)]
struct GroupAcc {
    normalized: Vec<f64>,
    payoffs: Vec<f64>,
    levels: Series,
    period_payoffs: Series,
    rates: Series,
    ratios: Series,
}

pub fn session_summary(logs: &[SessionLog], opts: &SummaryOptions) -> Result<SummaryTable> {
    if logs.is_empty() {
        return Err(Error::invalid("no session logs to summarize"));
    }
    let mut ordered: Vec<&SessionLog> = logs.iter().collect();
    ordered.sort_by_key(|l| (l.session, l.config.seed));

    let mut groups: BTreeMap<String, GroupAcc> = BTreeMap::new();
    let mut choices = Vec::new();

    for log in ordered {
        let cfg = &log.config;
        let labels: BTreeMap<AgentId, &str> = log
            .roster
            .iter()
            .map(|e| (e.id, e.spec.label.as_str()))
            .collect();
        for label in labels.values() {
            groups.entry((*label).to_string()).or_default();
        }

        // label -> per-period mean choice in this session
        let mut label_actions: BTreeMap<&str, Vec<(u32, f64)>> = BTreeMap::new();

        for (idx, rec) in log.periods.iter().enumerate() {
            let reference = match idx {
                0 => opts.reference.reference(cfg.lower_bound, cfg.upper_bound),
                _ => log.periods[idx - 1].mean,
            };
            let mut per_label: BTreeMap<&str, (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for (id, &choice) in &rec.choices {
                let label = labels.get(id).copied().ok_or_else(|| {
                    Error::invalid(format!(
                        "session {}: agent {id} is not in the roster",
                        log.session
                    ))
                })?;
                let normalized = normalize_choice(choice, cfg.upper_bound)?;
                let payoff = rec.payoffs.get(id).copied().unwrap_or(0.0);
                choices.push(ChoiceRow {
                    session: log.session,
                    period: rec.period,
                    agent: *id,
                    label: label.to_string(),
                    choice,
                    normalized,
                });
                let acc = groups.get_mut(label).expect("label registered above");
                acc.normalized.push(normalized);
                acc.payoffs.push(payoff);

                let entry = per_label.entry(label).or_default();
                entry.0.push(choice);
                entry.2.push(payoff);
                // a zero reference (all-zero previous period) has no level
                if let Ok(est) = estimate_level(choice, reference, cfg.p) {
                    entry.1.push(est.n);
                }
            }
            for (label, (cs, ns, ps)) in per_label {
                let acc = groups.get_mut(label).expect("label registered above");
                acc.levels.push_session_mean(rec.period, &ns);
                acc.period_payoffs.push_session_mean(rec.period, &ps);
                if let Some(m) = mean(&cs) {
                    label_actions
                        .entry(label)
                        .or_default()
                        .push((rec.period, m));
                }
            }
        }

        for (label, series) in label_actions {
            let acc = groups.get_mut(label).expect("label registered above");
            for w in series.windows(2) {
                let ((t, a_t), (_, a_next)) = (w[0], w[1]);
                if let Some(c) = convergence_rate(a_t, a_next).value() {
                    acc.rates.push_session_mean(t, &[c]);
                    acc.ratios.push_session_mean(t, &[a_next / a_t]);
                }
            }
        }
    }

    choices.sort_by(|a, b| (a.session, a.period, a.agent).cmp(&(b.session, b.period, b.agent)));

    let groups = groups
        .into_iter()
        .map(|(label, acc)| {
            let histogram = choice_histogram(&acc.normalized, opts.bin_width)?;
            Ok((
                label.clone(),
                GroupSummary {
                    label,
                    observations: acc.normalized.len(),
                    mean_choice: mean(&acc.normalized),
                    median_choice: median(&acc.normalized),
                    mean_payoff: mean(&acc.payoffs),
                    levels: acc.levels.averaged(),
                    payoffs: acc.period_payoffs.averaged(),
                    convergence: acc.rates.averaged(),
                    ratios: acc.ratios.averaged(),
                    histogram,
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(SummaryTable {
        groups,
        choices,
        bin_width: opts.bin_width,
    })
}
