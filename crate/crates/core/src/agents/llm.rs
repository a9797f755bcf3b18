use std::sync::Arc;
use std::time::Duration;

use super::answer::{parse_llm_answer, AnswerParsing};
use super::prompt::{format_number, render_prompt, PromptVariant};
use crate::game::{Agent, DecideError, Decision, Observation};
use crate::gateway::{ChatMessage, ChatRequest, Gateway, TranscriptSink};

/// Knobs shared by every LLM agent in a run.
#[derive(Debug, Clone)]
pub struct LlmSettings {
    /// Total asks per decision: the first question plus re-asks after an
    /// unusable answer.
    pub ask_budget: u32,
    pub parsing: AnswerParsing,
    pub timeout: Duration,
    pub max_tokens: Option<u32>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            ask_budget: 2,
            parsing: AnswerParsing::Lenient,
            timeout: Duration::from_secs(120),
            max_tokens: None,
        }
    }
}

/// An agent whose choices come from a chat model.
#[derive(Debug, Clone)]
pub struct LlmAgent {
    pub provider: String,
    pub model: String,
    pub temperature: Option<f64>,
    pub gateway: Arc<Gateway>,
    pub settings: LlmSettings,
}

impl Agent for LlmAgent {
    fn decide(&mut self, obs: &Observation) -> Result<Decision, DecideError> {
        llm_decide(self, obs)
    }
}

fn reask(reason: &str, lower: f64, upper: f64) -> String {
    format!(
        "Your previous output could not be used ({reason}). Please just strictly output a JSON string with the keys understanding, popular answer, answer and reason, where answer is a real number between {} and {} inclusive.",
        format_number(lower),
        format_number(upper)
    )
}

/// Renders the prompt, queries the model, and returns its `answer`.
///
/// Unparseable or out-of-range answers are re-asked until the ask budget
/// runs out. Every provider call ends up in the returned exchanges.
pub fn llm_decide(agent: &LlmAgent, obs: &Observation) -> Result<Decision, DecideError> {
    let sink = TranscriptSink::new();
    let (lower, upper) = (obs.game.lower_bound, obs.game.upper_bound);
    let mut messages = render_prompt(
        obs,
        PromptVariant::for_disclosure(obs.game.disclose_fixed_strategy),
    );
    let budget = agent.settings.ask_budget.max(1);
    let mut last_problem = String::new();

    for ask in 1..=budget {
        let req = ChatRequest {
            provider: agent.provider.clone(),
            model: agent.model.clone(),
            messages: messages.clone(),
            temperature: agent.temperature,
            max_tokens: agent.settings.max_tokens,
            timeout: agent.settings.timeout,
        };
        let resp = match agent.gateway.complete(&req, &sink) {
            Ok(resp) => resp,
            Err(e) => {
                return Err(DecideError {
                    reason: e.to_string(),
                    exchanges: sink.take(),
                })
            }
        };
        let problem = match parse_llm_answer(&resp.content, agent.settings.parsing) {
            Ok(a) if a.answer >= lower && a.answer <= upper => {
                return Ok(Decision {
                    choice: a.answer,
                    exchanges: sink.take(),
                })
            }
            Ok(a) => format!(
                "answer {} is outside [{}, {}]",
                format_number(a.answer),
                format_number(lower),
                format_number(upper)
            ),
            Err(e) => e.to_string(),
        };
        log::debug!("{} ask {ask}/{budget} unusable: {problem}", agent.model);
        messages.push(ChatMessage::assistant(resp.content));
        messages.push(ChatMessage::user(reask(&problem, lower, upper)));
        last_problem = problem;
    }

    Err(DecideError {
        reason: format!("no usable answer after {budget} ask(s): {last_problem}"),
        exchanges: sink.take(),
    })
}
