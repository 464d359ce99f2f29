//! EXP3 exponential-weights bandit.
//!
//! [`Exp3State`] enforces a strict draw/update alternation. The generic
//! algorithm updates after every pull; the paired protocol used by the
//! strategies draws on odd iterations and updates on the following even one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing rate `sqrt(4 ln 2 / ((e - 1) T))`, clamped to at most 1.
pub fn exp3_gamma(horizon: usize) -> Result<f64> {
    if horizon < 1 {
        return Err(Error::InvalidInput("EXP3 horizon must be at least 1".into()));
    }
    let raw = (4.0 * std::f64::consts::LN_2 / ((std::f64::consts::E - 1.0) * horizon as f64)).sqrt();
    Ok(raw.min(1.0))
}

/// Min-max scaling of a raw reward against the initial design's values,
/// clipped to `[0, 1]`; `0.5` when the initial values are all equal.
pub fn scale_reward(raw: f64, d0_values: &[f64]) -> Result<f64> {
    if d0_values.is_empty() {
        return Err(Error::InvalidInput("reward scaling needs initial-design values".into()));
    }
    let lo = d0_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d0_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Ok(0.5);
    }
    Ok(((raw - lo) / (hi - lo)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub raw_reward: f64,
    pub scaled_reward: f64,
    pub arm: usize,
}

impl RewardRecord {
    pub fn new(raw_reward: f64, scaled_reward: f64, arm: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&scaled_reward) {
            return Err(Error::InvalidInput(format!("scaled reward {scaled_reward} outside [0, 1]")));
        }
        Ok(Self { raw_reward, scaled_reward, arm })
    }

    pub fn scaled(raw_reward: f64, d0_values: &[f64], arm: usize) -> Result<Self> {
        Self::new(raw_reward, scale_reward(raw_reward, d0_values)?, arm)
    }
}

/// Whether the next call must be a draw (odd round) or an update (even round).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Debug, Clone)]
pub struct Exp3State {
    log_weights: Vec<f64>,
    gamma: f64,
    last_probs: Vec<f64>,
    last_arm: Option<usize>,
    parity: Parity,
}

impl Exp3State {
    pub fn new(arms: usize, gamma: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::InvalidInput("EXP3 needs at least one arm".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self {
            log_weights: vec![0.0; arms],
            gamma,
            last_probs: vec![1.0 / arms as f64; arms],
            last_arm: None,
            parity: Parity::Odd,
        })
    }

    pub fn arms(&self) -> usize {
        self.log_weights.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn last_arm(&self) -> Option<usize> {
        self.last_arm
    }

    pub fn last_probs(&self) -> &[f64] {
        &self.last_probs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Arm weights `ω^m` (may overflow to infinity for very long runs; the
    /// state itself is kept in log-space).
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// `p^m = (1 - γ) ω^m / Σ ω + γ / M` for the current weights.
    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.arms() as f64;
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = rel.iter().sum();
        let mut p: Vec<f64> = rel.iter().map(|w| (1.0 - self.gamma) * w / total + self.gamma / m).collect();
        // absorb round-off so the vector sums to one
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        p
    }

    /// Samples an arm; only valid on an odd round.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        if self.parity != Parity::Odd {
            return Err(Error::Protocol("draw called while a reward is pending".into()));
        }
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut arm = p.len() - 1;
        for (i, &pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                arm = i;
                break;
            }
        }
        self.last_probs = p;
        self.last_arm = Some(arm);
        self.parity = Parity::Even;
        Ok(arm)
    }

    /// Importance-weighted update of the arm drawn last:
    /// `ω ← ω · exp(γ r / (M p))`; other weights unchanged.
    pub fn update(&mut self, reward: &RewardRecord) -> Result<()> {
        if self.parity != Parity::Even {
            return Err(Error::Protocol("update called without a preceding draw".into()));
        }
        let arm = self.last_arm.expect("even parity implies a drawn arm");
        if reward.arm != arm {
            return Err(Error::Protocol(format!("reward for arm {} but arm {} was drawn", reward.arm, arm)));
        }
        if !(0.0..=1.0).contains(&reward.scaled_reward) {
            return Err(Error::InvalidInput(format!("scaled reward {} outside [0, 1]", reward.scaled_reward)));
        }
        let estimate = reward.scaled_reward / self.last_probs[arm];
        self.log_weights[arm] += self.gamma * estimate / self.arms() as f64;
        self.parity = Parity::Odd;
        Ok(())
    }
}

/// Per-round record of a generic EXP3 run.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3Trace {
    pub arms: Vec<usize>,
    pub rewards: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Standard unpaired EXP3 for `horizon` rounds; `reward(t, arm)` must lie in `[0, 1]`.
pub fn exp3_generic<R, F>(arms: usize, gamma: f64, horizon: usize, mut reward: F, rng: &mut R) -> Result<Exp3Trace>
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize) -> f64,
{
    let mut state = Exp3State::new(arms, gamma)?;
    let mut trace = Exp3Trace { arms: Vec::new(), rewards: Vec::new(), cumulative: Vec::new() };
    let mut total = 0.0;
    for t in 0..horizon {
        let arm = state.draw(rng)?;
        let r = reward(t, arm);
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidInput(format!("reward {r} at round {t} outside [0, 1]")));
        }
        state.update(&RewardRecord::new(r, r, arm)?)?;
        total += r;
        trace.arms.push(arm);
        trace.rewards.push(r);
        trace.cumulative.push(total);
    }
    Ok(trace)
}
