use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    /// `a_t` is zero, so the relative change has no denominator.
    ZeroBase,
    /// `a_{t+1} > a_t`; rates are only defined for non-increasing steps.
    Increased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceRate {
    Defined(f64),
    Undefined(Undefined),
}

impl ConvergenceRate {
    pub fn value(self) -> Option<f64> {
        match self {
            ConvergenceRate::Defined(c) => Some(c),
            ConvergenceRate::Undefined(_) => None,
        }
    }
}

/// `c_t = -(a_{t+1} - a_t) / a_t` for non-increasing steps from a positive `a_t`.
pub fn convergence_rate(a_t: f64, a_next: f64) -> ConvergenceRate {
    if !(a_t > 0.0) {
        return ConvergenceRate::Undefined(Undefined::ZeroBase);
    }
    if a_next > a_t {
        return ConvergenceRate::Undefined(Undefined::Increased);
    }
    ConvergenceRate::Defined(-(a_next - a_t) / a_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub t: u32,
    pub a_t: f64,
    pub a_next: f64,
    pub rate: ConvergenceRate,
}

/// Rates between consecutive entries of a per-period action series (period 1 first).
pub fn convergence_series(actions: &[f64]) -> Vec<ConvergencePoint> {
    actions
        .windows(2)
        .enumerate()
        .map(|(i, w)| ConvergencePoint {
            t: i as u32 + 1,
            a_t: w[0],
            a_next: w[1],
            rate: convergence_rate(w[0], w[1]),
        })
        .collect()
}
