//! Named treatments and the builtin registry.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{AgentKind, AgentSpec, PromptVariant, Role};
use crate::config::{GameConfig, HistoryWindow, DEFAULT_TIE_EPSILON};
use crate::error::{Error, Result};
use crate::seed::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Real providers.
    Live,
    /// LLM slots replaced by their scripted stand-ins; fully offline.
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UpperBound {
    Fixed {
        value: f64,
    },
    /// Uniform real in `(0, max]`, rounded to 2 decimals, drawn per session.
    UniformRandom {
        max: f64,
    },
}

impl UpperBound {
    pub fn resolve(self, session_seed: u64) -> f64 {
        match self {
            UpperBound::Fixed { value } => value,
            UpperBound::UniformRandom { max } => {
                let u: f64 = stream_rng(session_seed, 0).gen();
                // (1 - u) lies in (0, 1]
                let drawn = ((1.0 - u) * max * 100.0).round() / 100.0;
                drawn.max(0.01)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Baseline,
    FixedDisclosure,
}

impl From<PromptKind> for PromptVariant {
    fn from(k: PromptKind) -> Self {
        match k {
            PromptKind::Baseline => PromptVariant::Baseline,
            PromptKind::FixedDisclosure => PromptVariant::FixedDisclosure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigTemplate {
    pub num_players: u32,
    #[serde(default)]
    pub lower_bound: f64,
    pub upper_bound: UpperBound,
    pub p: f64,
    pub num_periods: u32,
    pub history_window: HistoryWindow,
    pub prize: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Treatment {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub config: ConfigTemplate,
    pub roster: Vec<AgentSpec>,
    pub sessions: u32,
    pub prompt: PromptKind,
}

impl Treatment {
    pub fn validate(&self) -> Result<()> {
        if self.roster.len() != self.config.num_players as usize {
            return Err(Error::InvalidConfig(format!(
                "treatment {}: roster has {} agents, config expects {}",
                self.name,
                self.roster.len(),
                self.config.num_players
            )));
        }
        if self.sessions == 0 {
            return Err(Error::InvalidConfig(format!(
                "treatment {}: sessions must be positive",
                self.name
            )));
        }
        self.session_config(1).validate()
    }

    /// Concrete config for the session with seed `session_seed`.
    pub fn session_config(&self, session_seed: u64) -> GameConfig {
        let t = &self.config;
        GameConfig {
            num_players: t.num_players,
            lower_bound: t.lower_bound,
            upper_bound: t.upper_bound.resolve(session_seed),
            p: t.p,
            num_periods: t.num_periods,
            history_window: t.history_window,
            prize: t.prize,
            disclose_fixed_strategy: self.prompt == PromptKind::FixedDisclosure,
            seed: session_seed,
            tie_epsilon: DEFAULT_TIE_EPSILON,
        }
    }

    /// Roster to seat in `mode`; scripted mode swaps LLMs for stand-ins.
    pub fn roster_for(&self, mode: Mode) -> Result<Vec<AgentSpec>> {
        match mode {
            Mode::Live => Ok(self.roster.clone()),
            Mode::Scripted => self.roster.iter().map(AgentSpec::stand_in).collect(),
        }
    }

    /// Distinct providers referenced by LLM slots.
    pub fn providers(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .roster
            .iter()
            .filter_map(|s| match &s.kind {
                AgentKind::Llm { provider, .. } => Some(provider.clone()),
                _ => None,
            })
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// `(fixed-strategy count, everyone else)` in the roster.
    pub fn fixed_split(&self) -> (u32, u32) {
        let fixed = self
            .roster
            .iter()
            .filter(|s| matches!(s.kind, AgentKind::Fixed { .. }))
            .count() as u32;
        (fixed, self.roster.len() as u32 - fixed)
    }

    /// `(H count, L count)` in the roster.
    pub fn role_split(&self) -> (u32, u32) {
        let count = |r| self.roster.iter().filter(|s| s.role == Some(r)).count() as u32;
        (count(Role::High), count(Role::Low))
    }
}

fn llm(label: &str, provider: &str, model: &str, role: Role) -> AgentSpec {
    AgentSpec::new(
        label,
        AgentKind::Llm {
            provider: provider.into(),
            model: model.into(),
            temperature: None,
            stand_in: None,
        },
    )
    .with_role(role)
}

fn gpt35() -> AgentSpec {
    llm("GPT3.5", "openai", "gpt-3.5-turbo", Role::High)
}

fn palm() -> AgentSpec {
    llm("PaLM", "google", "chat-bison-001", Role::Low)
}

/// The nine models of the multi-LLM games, with offline stand-ins.
fn multi_llm_roster() -> Vec<AgentSpec> {
    let mut llama = llm("Llama2", "local", "llama-2-70b-chat", Role::Low);
    if let AgentKind::Llm { stand_in, .. } = &mut llama.kind {
        *stand_in = Some(Box::new(AgentKind::UniformRandom));
    }
    vec![
        llm("ChatGLM3", "local", "chatglm3-6b", Role::Low),
        llm("ChatGLM2", "local", "chatglm2-6b", Role::Low),
        llama,
        llm("Baichuan2", "local", "baichuan2-13b-chat", Role::Low),
        llm("Claude2", "anthropic", "claude-2.1", Role::High),
        llm("Claude1", "anthropic", "claude-instant-1.2", Role::Low),
        palm(),
        gpt35(),
        llm("GPT4", "openai", "gpt-4", Role::High),
    ]
}

fn small_group(periods: u32) -> ConfigTemplate {
    ConfigTemplate {
        num_players: 10,
        lower_bound: 0.0,
        upper_bound: UpperBound::Fixed { value: 100.0 },
        p: 2.0 / 3.0,
        num_periods: periods,
        history_window: HistoryWindow::Full,
        prize: 100.0,
    }
}

fn random_bound(periods: u32, window: HistoryWindow) -> ConfigTemplate {
    ConfigTemplate {
        num_players: 9,
        lower_bound: 0.0,
        upper_bound: UpperBound::UniformRandom { max: 1000.0 },
        p: 2.0 / 3.0,
        num_periods: periods,
        history_window: window,
        prize: 100.0,
    }
}

fn static_treatment(name: &str, what: &str, llm_agent: AgentSpec, n_llm: usize) -> Treatment {
    let mut roster = vec![llm_agent; n_llm];
    roster.extend(std::iter::repeat(AgentSpec::fixed(0.0)).take(10 - n_llm));
    Treatment {
        name: name.into(),
        description: format!("{n_llm} {what} + {} fixed-at-0 agents", 10 - n_llm),
        config: small_group(5),
        roster,
        sessions: 1,
        prompt: PromptKind::FixedDisclosure,
    }
}

fn dynamic_treatment(index: u32, n_high: usize) -> Treatment {
    let n_low = 10 - n_high;
    let mut roster = vec![gpt35(); n_high];
    roster.extend(std::iter::repeat(palm()).take(n_low));
    Treatment {
        name: format!("dynamic_{index}"),
        description: format!("{n_high} H + {n_low} L agents"),
        config: small_group(5),
        roster,
        sessions: 1,
        prompt: PromptKind::Baseline,
    }
}

/// Ordered collection of treatments with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    treatments: Vec<Treatment>,
}

/// The builtin treatment set.
pub fn builtin_treatments() -> Registry {
    let mut t = vec![
        Treatment {
            name: "one_shot_multi".into(),
            description: "one-shot game among nine different models, random upper bound".into(),
            config: random_bound(1, HistoryWindow::Full),
            roster: multi_llm_roster(),
            sessions: 150,
            prompt: PromptKind::Baseline,
        },
        Treatment {
            name: "repeated_multi".into(),
            description: "six-period game among nine models, three-period history".into(),
            config: random_bound(6, HistoryWindow::Periods(3)),
            roster: multi_llm_roster(),
            sessions: 30,
            prompt: PromptKind::Baseline,
        },
    ];
    for (suffix, n) in [("low", 1), ("mixed", 5), ("high", 9)] {
        t.push(static_treatment(
            &format!("static_{suffix}"),
            "H (GPT3.5)",
            gpt35(),
            n,
        ));
    }
    for (suffix, n) in [("low", 1), ("mixed", 5), ("high", 9)] {
        t.push(static_treatment(
            &format!("static_{suffix}_l"),
            "L (PaLM)",
            palm(),
            n,
        ));
    }
    for (i, n_high) in [10, 9, 5, 1, 0].into_iter().enumerate() {
        t.push(dynamic_treatment(i as u32 + 1, n_high));
    }
    Registry { treatments: t }
}

/// RFC 7386 merge patch.
fn merge_patch(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p.clone(),
    }
}

impl Registry {
    pub fn get(&self, name: &str) -> Option<&Treatment> {
        self.treatments.iter().find(|t| t.name == name)
    }

    pub fn lookup(&self, name: &str) -> Result<&Treatment> {
        self.get(name)
            .ok_or_else(|| Error::UnknownTreatment(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.treatments.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Treatment> {
        self.treatments.iter()
    }

    /// Applies a JSON list of overrides. Entries naming an existing
    /// treatment are merge-patched onto it; new names must be complete.
    pub fn apply_overrides(&mut self, overrides: &Value) -> Result<()> {
        let items = overrides.as_array().ok_or_else(|| {
            Error::InvalidConfig("treatment overrides must be a JSON array".into())
        })?;
        for item in items {
            let name = item
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::InvalidConfig("override entry without a name".into()))?
                .to_string();
            let bad = |e: serde_json::Error| Error::InvalidConfig(format!("treatment {name}: {e}"));
            let merged = match self.treatments.iter().position(|t| t.name == name) {
                Some(i) => {
                    let mut base = serde_json::to_value(&self.treatments[i]).map_err(bad)?;
                    merge_patch(&mut base, item);
                    let t: Treatment = serde_json::from_value(base).map_err(bad)?;
                    t.validate()?;
                    self.treatments[i] = t;
                    continue;
                }
                None => serde_json::from_value::<Treatment>(item.clone()).map_err(bad)?,
            };
            merged.validate()?;
            self.treatments.push(merged);
        }
        Ok(())
    }

    pub fn load_overrides(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        self.apply_overrides(&value)
    }
}
