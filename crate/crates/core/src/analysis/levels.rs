use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::PeriodRecord;

/// Level assigned to exact-zero choices, where the logarithm diverges.
pub const N_MAX: f64 = 10.0;

/// Half-width around an integer within which a level counts as that integer.
pub const LEVEL_CLASS_HALF_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LevelFlag {
    /// The choice is the equilibrium action 0.
    NeChoice,
    /// The choice exceeds the reference point, so n < 0.
    AboveReference,
    /// n was clamped to [`N_MAX`].
    Capped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub n: f64,
    pub reference_used: f64,
    pub choice: f64,
    pub flags: BTreeSet<LevelFlag>,
}

impl LevelEstimate {
    pub fn has(&self, flag: LevelFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Rescales a choice on `[0, upper]` to `[0, 100]`.
pub fn normalize_choice(choice: f64, upper: f64) -> Result<f64> {
    if !(upper > 0.0) {
        return Err(Error::invalid(format!(
            "upper bound must be positive, got {upper}"
        )));
    }
    if !(choice.is_finite() && choice >= 0.0 && choice <= upper) {
        return Err(Error::invalid(format!(
            "choice {choice} outside [0, {upper}]"
        )));
    }
    Ok(100.0 * choice / upper)
}

/// Solves `choice = r * p^n` for `n`.
pub fn estimate_level(choice: f64, r: f64, p: f64) -> Result<LevelEstimate> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!(
            "reference point must be positive, got {r}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1), got {p}")));
    }
    if !(choice >= 0.0 && choice.is_finite()) {
        return Err(Error::invalid(format!(
            "choice must be a non-negative number, got {choice}"
        )));
    }
    let mut flags = BTreeSet::new();
    let n = if choice == 0.0 {
        flags.insert(LevelFlag::NeChoice);
        flags.insert(LevelFlag::Capped);
        N_MAX
    } else {
        let n = (choice / r).ln() / p.ln();
        if choice > r {
            flags.insert(LevelFlag::AboveReference);
        }
        if n > N_MAX {
            flags.insert(LevelFlag::Capped);
            N_MAX
        } else {
            n
        }
    };
    Ok(LevelEstimate {
        n,
        reference_used: r,
        choice,
        flags,
    })
}

/// Reference point for period `t + 1`: the mean of period `t`.
pub fn recalibrated_reference(previous: &PeriodRecord) -> f64 {
    previous.mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelClass {
    Integer(i64),
    /// Farther than [`LEVEL_CLASS_HALF_WIDTH`] from every integer.
    Interior,
}

pub fn classify_level(n: f64) -> LevelClass {
    let nearest = n.round();
    if (n - nearest).abs() <= LEVEL_CLASS_HALF_WIDTH {
        LevelClass::Integer(nearest as i64)
    } else {
        LevelClass::Interior
    }
}
