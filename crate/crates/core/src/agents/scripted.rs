use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ReferencePolicy, Role};
use crate::error::{Error, Result};
use crate::game::{Agent, DecideError, Decision, Observation, PeriodRecord};

/// Constant policy.
pub fn fixed_decide(value: f64, _obs: &Observation) -> f64 {
    value
}

/// Level-k: `r * p^k`, where `r` is the period-1 reference or, later, the
/// mean of the most recent visible period.
pub fn levelk_decide(k: f64, reference: ReferencePolicy, obs: &Observation) -> f64 {
    let game = &obs.game;
    let r = match obs.last_period() {
        Some(prev) if obs.period > 1 => prev.mean,
        _ => reference.reference(game.lower_bound, game.upper_bound),
    };
    r * game.p.powf(k)
}

/// Uniform draw over the closed choice range.
pub fn random_decide(obs: &Observation, rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(obs.game.lower_bound..=obs.game.upper_bound)
}

/// Mean choice of the H and L groups in `record`; `None` for an absent group.
pub fn role_means(record: &PeriodRecord, obs: &Observation) -> Result<(Option<f64>, Option<f64>)> {
    let mut high = (0.0, 0usize);
    let mut low = (0.0, 0usize);
    for (id, choice) in &record.choices {
        let acc = match obs.role_of(*id) {
            Some(Role::High) => &mut high,
            Some(Role::Low) => &mut low,
            None => {
                return Err(Error::invalid(format!(
                    "agent {id} in period {} has no role label",
                    record.period
                )))
            }
        };
        acc.0 += choice;
        acc.1 += 1;
    }
    let mean = |(sum, n): (f64, usize)| (n > 0).then(|| sum / n as f64);
    Ok((mean(high), mean(low)))
}

/// Best response to believed group shares:
/// `p * (B_H/n * a_H + B_L/n * a_L)` using last period's per-role means.
///
/// Period 1 plays the role's focal action: H plays `p * r` with `r` from
/// `high_focal`, L plays the range midpoint.
pub fn belief_br_decide(
    believed_high: u32,
    believed_low: u32,
    own_role: Role,
    high_focal: ReferencePolicy,
    obs: &Observation,
) -> Result<f64> {
    let game = &obs.game;
    let prev = match obs.last_period() {
        Some(prev) if obs.period > 1 => prev,
        _ => {
            return Ok(match own_role {
                Role::High => game.p * high_focal.reference(game.lower_bound, game.upper_bound),
                Role::Low => {
                    ReferencePolicy::HalfRange.reference(game.lower_bound, game.upper_bound)
                }
            })
        }
    };
    let (a_high, a_low) = role_means(prev, obs)?;
    let n = f64::from(game.num_players);
    let term = |believed: u32, action: Option<f64>, role: Role| -> Result<f64> {
        if believed == 0 {
            return Ok(0.0);
        }
        action
            .map(|a| f64::from(believed) / n * a)
            .ok_or_else(|| Error::invalid(format!("no {role} agents in period {}", prev.period)))
    };
    Ok(game.p * (term(believed_high, a_high, Role::High)? + term(believed_low, a_low, Role::Low)?))
}

#[derive(Debug, Clone)]
pub struct FixedAgent {
    value: f64,
}

impl FixedAgent {
    pub fn new(value: f64) -> Self {
        FixedAgent { value }
    }
}

impl Agent for FixedAgent {
    fn decide(&mut self, obs: &Observation) -> std::result::Result<Decision, DecideError> {
        Ok(Decision::scripted(fixed_decide(self.value, obs)))
    }
}

#[derive(Debug, Clone)]
pub struct LevelKAgent {
    k: f64,
    reference: ReferencePolicy,
}

impl LevelKAgent {
    pub fn new(k: f64, reference: ReferencePolicy) -> Self {
        LevelKAgent { k, reference }
    }
}

impl Agent for LevelKAgent {
    fn decide(&mut self, obs: &Observation) -> std::result::Result<Decision, DecideError> {
        Ok(Decision::scripted(levelk_decide(
            self.k,
            self.reference,
            obs,
        )))
    }
}

#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(rng: ChaCha8Rng) -> Self {
        RandomAgent { rng }
    }
}

impl Agent for RandomAgent {
    fn decide(&mut self, obs: &Observation) -> std::result::Result<Decision, DecideError> {
        Ok(Decision::scripted(random_decide(obs, &mut self.rng)))
    }
}

#[derive(Debug, Clone)]
pub struct BeliefAgent {
    pub believed_high: u32,
    pub believed_low: u32,
    pub own_role: Role,
    pub high_focal: ReferencePolicy,
}

impl Agent for BeliefAgent {
    fn decide(&mut self, obs: &Observation) -> std::result::Result<Decision, DecideError> {
        belief_br_decide(
            self.believed_high,
            self.believed_low,
            self.own_role,
            self.high_focal,
            obs,
        )
        .map(Decision::scripted)
        .map_err(|e| DecideError::new(e.to_string()))
    }
}
