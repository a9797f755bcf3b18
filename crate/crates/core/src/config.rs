//! Rule parameters for a single beauty contest.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tie tolerance used when comparing distances to the target.
pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

/// How many past periods an agent gets to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryWindow {
    Periods(u32),
    Full,
}

impl HistoryWindow {
    /// Number of visible periods when deciding in `period` (1-based).
    pub fn visible_len(self, period: u32) -> usize {
        let past = period.saturating_sub(1) as usize;
        match self {
            HistoryWindow::Periods(w) => past.min(w as usize),
            HistoryWindow::Full => past,
        }
    }
}

impl fmt::Display for HistoryWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryWindow::Periods(w) => write!(f, "{w}"),
            HistoryWindow::Full => f.write_str("full"),
        }
    }
}

// Serialized as either an integer or the string "full".
impl Serialize for HistoryWindow {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HistoryWindow::Periods(w) => s.serialize_u32(*w),
            HistoryWindow::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for HistoryWindow {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct WindowVisitor;

        impl Visitor<'_> for WindowVisitor {
            type Value = HistoryWindow;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"full\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<HistoryWindow, E> {
                u32::try_from(v)
                    .map(HistoryWindow::Periods)
                    .map_err(|_| E::custom("history window too large"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<HistoryWindow, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom("history window must be non-negative"))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<HistoryWindow, E> {
                if v.eq_ignore_ascii_case("full") {
                    Ok(HistoryWindow::Full)
                } else {
                    v.parse::<u32>()
                        .map(HistoryWindow::Periods)
                        .map_err(|_| E::custom(format!("invalid history window `{v}`")))
                }
            }
        }

        d.deserialize_any(WindowVisitor)
    }
}

/// All rule parameters of one contest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub num_players: u32,
    #[serde(default)]
    pub lower_bound: f64,
    pub upper_bound: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub num_periods: u32,
    pub history_window: HistoryWindow,
    pub prize: f64,
    #[serde(default)]
    pub disclose_fixed_strategy: bool,
    pub seed: u64,
    #[serde(default = "default_tie_epsilon")]
    pub tie_epsilon: f64,
}

fn default_p() -> f64 {
    2.0 / 3.0
}

fn default_tie_epsilon() -> f64 {
    DEFAULT_TIE_EPSILON
}

impl GameConfig {
    /// A config with the usual defaults: bounds [0, upper], p = 2/3, prize 100.
    pub fn new(num_players: u32, upper_bound: f64, num_periods: u32) -> Self {
        GameConfig {
            num_players,
            lower_bound: 0.0,
            upper_bound,
            p: default_p(),
            num_periods,
            history_window: HistoryWindow::Full,
            prize: 100.0,
            disclose_fixed_strategy: false,
            seed: 0,
            tie_epsilon: DEFAULT_TIE_EPSILON,
        }
    }

    pub fn with_window(mut self, window: HistoryWindow) -> Self {
        self.history_window = window;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_players < 2 {
            return bad(format!(
                "num_players must be >= 2, got {}",
                self.num_players
            ));
        }
        if !(self.lower_bound.is_finite() && self.upper_bound.is_finite()) {
            return bad("bounds must be finite".into());
        }
        if self.lower_bound >= self.upper_bound {
            return bad(format!(
                "lower bound {} must be below upper bound {}",
                self.lower_bound, self.upper_bound
            ));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p must lie in (0, 1), got {}", self.p));
        }
        if self.num_periods == 0 {
            return bad("num_periods must be positive".into());
        }
        if !(self.prize > 0.0 && self.prize.is_finite()) {
            return bad(format!("prize must be positive, got {}", self.prize));
        }
        if !(self.tie_epsilon >= 0.0) {
            return bad("tie_epsilon must be non-negative".into());
        }
        Ok(())
    }

    pub fn contains(&self, choice: f64) -> bool {
        choice.is_finite() && choice >= self.lower_bound && choice <= self.upper_bound
    }
}
