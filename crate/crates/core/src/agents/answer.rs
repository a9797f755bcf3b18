//! Structured answers returned by LLM agents.

use serde_json::{Map, Value};
use thiserror::Error;

const POPULAR_KEYS: [&str; 2] = ["popular answer", "popular_answer"];

/// The four-key JSON object agents are asked to emit.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmAnswer {
    pub understanding: String,
    pub popular_answer: Option<f64>,
    pub answer: f64,
    pub reason: String,
}

impl LlmAnswer {
    pub fn to_json(&self) -> String {
        let mut m = Map::new();
        m.insert(
            "understanding".into(),
            Value::from(self.understanding.clone()),
        );
        m.insert(
            "popular answer".into(),
            self.popular_answer.map_or(Value::Null, Value::from),
        );
        m.insert("answer".into(), Value::from(self.answer));
        m.insert("reason".into(), Value::from(self.reason.clone()));
        Value::Object(m).to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnswerParsing {
    /// Take the first JSON object anywhere in the text; only `answer` is required.
    #[default]
    Lenient,
    /// The text (minus code fences) must be one object with all four keys.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseFailure {
    #[error("no JSON object found in the response")]
    NoJson,
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("`{key}` is not a number: {value}")]
    NonNumeric { key: &'static str, value: String },
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn first_object(text: &str) -> Option<Map<String, Value>> {
    text.char_indices()
        .filter(|(_, c)| *c == '{')
        .find_map(|(i, _)| {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            match stream.next() {
                Some(Ok(Value::Object(m))) => Some(m),
                _ => None,
            }
        })
}

fn number(key: &'static str, v: &Value) -> Result<f64, ParseFailure> {
    let parsed = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    parsed
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseFailure::NonNumeric {
            key,
            value: v.to_string(),
        })
}

fn text_field(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Extracts an [`LlmAnswer`] from raw model output.
pub fn parse_llm_answer(text: &str, mode: AnswerParsing) -> Result<LlmAnswer, ParseFailure> {
    let obj = match mode {
        AnswerParsing::Lenient => first_object(text).ok_or(ParseFailure::NoJson)?,
        AnswerParsing::Strict => match serde_json::from_str::<Value>(strip_fences(text)) {
            Ok(Value::Object(m)) => m,
            _ => return Err(ParseFailure::NoJson),
        },
    };

    let answer = obj
        .get("answer")
        .ok_or(ParseFailure::MissingKey("answer"))?;
    let answer = number("answer", answer)?;

    let popular = POPULAR_KEYS.iter().find_map(|k| obj.get(*k));
    let popular_answer = match popular {
        None if mode == AnswerParsing::Strict => {
            return Err(ParseFailure::MissingKey("popular answer"))
        }
        None | Some(Value::Null) => None,
        Some(v) => match number("popular answer", v) {
            Ok(x) => Some(x),
            Err(e) if mode == AnswerParsing::Strict => return Err(e),
            Err(_) => None,
        },
    };

    if mode == AnswerParsing::Strict {
        for key in ["understanding", "reason"] {
            if !obj.contains_key(key) {
                return Err(ParseFailure::MissingKey(key));
            }
        }
    }

    Ok(LlmAnswer {
        understanding: text_field(obj.get("understanding")),
        popular_answer,
        answer,
        reason: text_field(obj.get("reason")),
    })
}
