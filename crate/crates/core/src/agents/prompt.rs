//! Prompt templates shown to LLM-backed agents.
//!
//! Placeholders filled from the observation: number of players, bounds,
//! the agent's id, the number of runs held so far, and one block per
//! visible past period (choices of all agents, average, p times the
//! average, winner ids).

use std::fmt::Write as _;

use crate::game::{Observation, PeriodRecord};
use crate::gateway::ChatMessage;

pub const SYSTEM_INSTRUCTION: &str =
    "I want you to act as a clever game player and perform as rationally as possible.";

const DISCLOSURE: &str = "- some of your opponents will be playing a fixed strategy of 0 and all others are behaving as rationally as possible.\n";

const ANSWER_FORMAT: &str = "\
Please just strictly output a JSON string, which has following keys:
- understanding: str, your brief understanding of the game
- popular answer: float, the number which you think other players are most likely to choose
- answer: float, the number which you would like to choose
- reason: str, the brief reason why you give the popular answer and the answer that way
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptVariant {
    Baseline,
    FixedDisclosure,
}

impl PromptVariant {
    pub fn for_disclosure(disclose: bool) -> Self {
        if disclose {
            PromptVariant::FixedDisclosure
        } else {
            PromptVariant::Baseline
        }
    }
}

/// Shortest decimal form that round-trips (`100`, `33.333333333333336`).
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0"
        return "0".into();
    }
    format!("{x}")
}

fn is_two_thirds(p: f64) -> bool {
    (p - 2.0 / 3.0).abs() < 1e-12
}

fn p_in_words(p: f64) -> String {
    if is_two_thirds(p) {
        "two thirds".into()
    } else {
        format!("{} times", format_number(p))
    }
}

fn p_fraction(p: f64) -> String {
    if is_two_thirds(p) {
        "2/3".into()
    } else {
        format_number(p)
    }
}

fn rules(obs: &Observation, variant: PromptVariant) -> String {
    let g = &obs.game;
    let (lo, hi) = (format_number(g.lower_bound), format_number(g.upper_bound));
    let mut s = String::new();
    s.push_str("You are playing a game and the rules are as follows:\n");
    let _ = writeln!(
        s,
        "- it consists of {} players, including you.",
        g.num_players
    );
    s.push_str("- this is a one-round game.\n");
    let _ = writeln!(
        s,
        "- you need to choose a real number between {lo} and {hi}, {lo} and {hi} inclusive."
    );
    s.push_str("- everyone does not know how others would make choices beforehand.\n");
    let _ = writeln!(
        s,
        "- the winner is the person whose number is the closest to the {} of the average of all chosen numbers.",
        p_in_words(g.p)
    );
    s.push_str("- the winner gets a fixed prize, in case of a tie the prize is split amongst those who tie.\n");
    s.push_str("- your goal is primarily to maximize the possibility of getting the prize and secondly to maximize the your prize.\n");
    if variant == PromptVariant::FixedDisclosure {
        s.push_str(DISCLOSURE);
    }
    s
}

fn period_block(record: &PeriodRecord, p: f64) -> String {
    let choices = record
        .choices
        .iter()
        .map(|(id, c)| format!("{id}: {}", format_number(*c)))
        .collect::<Vec<_>>()
        .join(", ");
    let winners = record
        .winners
        .iter()
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "Run {}:\n  choices: {choices}\n  average: {}\n  {} of the average: {}\n  winner id: {winners}\n",
        record.period,
        format_number(record.mean),
        p_fraction(p),
        format_number(record.target),
    )
}

fn history(obs: &Observation) -> Option<String> {
    if obs.history.is_empty() {
        return None;
    }
    let runs = obs.period - 1;
    let mut s = format!(
        "- The game of the same config has been hold for {runs} run(s), and the historical choices of everyone are shown below (your id is {}:\n",
        obs.agent_id
    );
    for record in &obs.history {
        s.push_str(&period_block(record, obs.game.p));
    }
    s.push_str("- Everyone can optimize his/her answer with the history to play in a new run in order to achieve goals.\n");
    Some(s)
}

/// Messages sent to an LLM agent before it chooses in `obs.period`:
/// system instruction, rules, visible history (if any), answer format.
pub fn render_prompt(obs: &Observation, variant: PromptVariant) -> Vec<ChatMessage> {
    let mut messages = vec![
        ChatMessage::system(SYSTEM_INSTRUCTION),
        ChatMessage::user(rules(obs, variant)),
    ];
    if let Some(h) = history(obs) {
        messages.push(ChatMessage::user(h));
    }
    messages.push(ChatMessage::user(ANSWER_FORMAT));
    messages
}

/// Plain-text rendering used for golden files and `render-prompt` output.
pub fn messages_to_text(messages: &[ChatMessage]) -> String {
    let mut out = messages
        .iter()
        .map(|m| format!("[{}]\n{}", m.role.as_str(), m.content.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n");
    out.push('\n');
    out
}
