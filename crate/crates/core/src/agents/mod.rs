//! Decision policies: scripted agents and the LLM-backed agent.

mod answer;
mod llm;
mod prompt;
mod scripted;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use answer::{parse_llm_answer, AnswerParsing, LlmAnswer, ParseFailure};
pub use llm::{llm_decide, LlmAgent, LlmSettings};
pub use prompt::{
    format_number, messages_to_text, render_prompt, PromptVariant, SYSTEM_INSTRUCTION,
};
pub use scripted::{
    belief_br_decide, fixed_decide, levelk_decide, random_decide, role_means, BeliefAgent,
    FixedAgent, LevelKAgent, RandomAgent,
};

use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::{AgentId, Seat};
use crate::gateway::Gateway;
use crate::seed::stream_rng;

/// High- or low-intelligence role in group-composition treatments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "H")]
    High,
    #[serde(rename = "L")]
    Low,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::High => "H",
            Role::Low => "L",
        })
    }
}

/// Period-1 reference point of a level-k reasoner. From period 2 on the
/// reference is always the previous period's mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePolicy {
    /// Midpoint of the choice range (c̄/2 when the lower bound is 0).
    #[default]
    HalfRange,
    /// The upper bound itself.
    FullRange,
}

impl ReferencePolicy {
    pub fn reference(self, lower: f64, upper: f64) -> f64 {
        match self {
            ReferencePolicy::HalfRange => (lower + upper) / 2.0,
            ReferencePolicy::FullRange => upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentKind {
    Fixed {
        value: f64,
    },
    LevelK {
        k: f64,
        #[serde(default)]
        reference: ReferencePolicy,
    },
    UniformRandom,
    BeliefBr {
        believed_high: u32,
        believed_low: u32,
        own_role: Role,
        /// Period-1 focal point used when playing the H role.
        #[serde(default)]
        high_focal: ReferencePolicy,
    },
    Llm {
        provider: String,
        model: String,
        /// `None` keeps the provider's default temperature.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
        /// Scripted policy used for offline runs; defaults follow the role.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stand_in: Option<Box<AgentKind>>,
    },
}

impl AgentKind {
    pub fn level_k(k: f64) -> Self {
        AgentKind::LevelK {
            k,
            reference: ReferencePolicy::HalfRange,
        }
    }

    pub fn is_llm(&self) -> bool {
        matches!(self, AgentKind::Llm { .. })
    }
}

/// Declarative description of a roster slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    pub kind: AgentKind,
}

impl AgentSpec {
    pub fn new(label: impl Into<String>, kind: AgentKind) -> Self {
        AgentSpec {
            label: label.into(),
            role: None,
            kind,
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    pub fn fixed(value: f64) -> Self {
        AgentSpec::new(
            format!("Fixed{}", format_number(value)),
            AgentKind::Fixed { value },
        )
    }

    pub fn level_k(k: f64) -> Self {
        AgentSpec::new(format!("L{}", format_number(k)), AgentKind::level_k(k))
    }

    pub fn is_scripted(&self) -> bool {
        !self.kind.is_llm()
    }

    /// The scripted policy substituted for an LLM in offline runs.
    ///
    /// An explicit stand-in wins; otherwise H plays level-1 and L plays
    /// level-0, both with the half-range reference.
    pub fn stand_in(&self) -> Result<AgentSpec> {
        let AgentKind::Llm { stand_in, .. } = &self.kind else {
            return Ok(self.clone());
        };
        let kind = match (stand_in, self.role) {
            (Some(kind), _) => (**kind).clone(),
            (None, Some(Role::High)) => AgentKind::level_k(1.0),
            (None, Some(Role::Low)) => AgentKind::level_k(0.0),
            (None, None) => {
                return Err(Error::InvalidConfig(format!(
                    "LLM agent `{}` has neither a role nor a stand-in",
                    self.label
                )))
            }
        };
        if kind.is_llm() {
            return Err(Error::InvalidConfig(format!(
                "stand-in for `{}` must be scripted",
                self.label
            )));
        }
        Ok(AgentSpec {
            label: self.label.clone(),
            role: self.role,
            kind,
        })
    }

    /// Checks the spec against the game it is about to play.
    pub fn validate(&self, config: &GameConfig) -> Result<()> {
        match &self.kind {
            AgentKind::Fixed { value } if !config.contains(*value) => Err(Error::InvalidConfig(
                format!("fixed value {value} outside the game bounds"),
            )),
            AgentKind::LevelK { k, .. } if !(k.is_finite() && *k >= 0.0) => Err(
                Error::InvalidConfig(format!("level k must be finite and >= 0, got {k}")),
            ),
            AgentKind::BeliefBr {
                believed_high,
                believed_low,
                ..
            } if believed_high + believed_low != config.num_players => {
                Err(Error::InvalidConfig(format!(
                    "believed counts {believed_high}+{believed_low} must sum to {}",
                    config.num_players
                )))
            }
            AgentKind::Llm {
                temperature: Some(t),
                ..
            } if !(t.is_finite() && *t >= 0.0) => Err(Error::InvalidConfig(format!(
                "temperature must be a non-negative number, got {t}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Shared resources needed to instantiate live agents.
#[derive(Debug, Clone, Default)]
pub struct SeatContext {
    pub gateway: Option<Arc<Gateway>>,
    pub llm: LlmSettings,
}

/// Instantiates one seat per spec. Ids follow roster order from 0.
pub fn build_seats(
    roster: &[AgentSpec],
    config: &GameConfig,
    ctx: &SeatContext,
) -> Result<Vec<Seat>> {
    roster
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            spec.validate(config)?;
            let agent: Box<dyn crate::game::Agent> = match &spec.kind {
                AgentKind::Fixed { value } => Box::new(FixedAgent::new(*value)),
                AgentKind::LevelK { k, reference } => Box::new(LevelKAgent::new(*k, *reference)),
                AgentKind::UniformRandom => {
                    Box::new(RandomAgent::new(stream_rng(config.seed, i as u64 + 1)))
                }
                AgentKind::BeliefBr {
                    believed_high,
                    believed_low,
                    own_role,
                    high_focal,
                } => Box::new(BeliefAgent {
                    believed_high: *believed_high,
                    believed_low: *believed_low,
                    own_role: *own_role,
                    high_focal: *high_focal,
                }),
                AgentKind::Llm {
                    provider,
                    model,
                    temperature,
                    ..
                } => {
                    let gateway = ctx.gateway.clone().ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "agent `{}` needs a gateway (live mode)",
                            spec.label
                        ))
                    })?;
                    Box::new(LlmAgent {
                        provider: provider.clone(),
                        model: model.clone(),
                        temperature: *temperature,
                        gateway,
                        settings: ctx.llm.clone(),
                    })
                }
            };
            Ok(Seat {
                id: AgentId(i as u32),
                spec: spec.clone(),
                agent,
            })
        })
        .collect()
}
