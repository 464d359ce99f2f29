//! Per-iteration records of a single optimization run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gp::Hyperparams;

/// Arm of the random-vs-acquisition bandit. Displayed as `1` (random point)
/// and `2` (acquisition maximizer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Random,
    Acquisition,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::Random => 0,
            Arm::Acquisition => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Arm::Random),
            1 => Some(Arm::Acquisition),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: u8) -> Option<Self> {
        label.checked_sub(1).and_then(|i| Self::from_index(i as usize))
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u8>()
            .ok()
            .and_then(Arm::from_label)
            .ok_or_else(|| Error::InvalidInput(format!("invalid arm label '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iteration index, starting at 1.
    pub t: usize,
    pub x: Vec<f64>,
    /// Observed (possibly noisy) value.
    pub y: f64,
    pub best_so_far: f64,
    pub arm: Option<Arm>,
    pub scaled_reward: Option<f64>,
    /// Hyperparameters (in the objective's units) used to pick `x`, if a GP was involved.
    pub theta_hat: Option<Hyperparams>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub strategy: String,
    pub objective: String,
    pub seed: u64,
    pub budget: usize,
    pub config_hash: String,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(strategy: impl Into<String>, objective: impl Into<String>, budget: usize) -> Self {
        Self {
            strategy: strategy.into(),
            objective: objective.into(),
            seed: 0,
            budget,
            config_hash: String::new(),
            records: Vec::with_capacity(budget),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record, assigning `t` and `best_so_far`.
    pub fn push(
        &mut self,
        x: Vec<f64>,
        y: f64,
        arm: Option<Arm>,
        scaled_reward: Option<f64>,
        theta_hat: Option<Hyperparams>,
        wall_ms: Option<f64>,
    ) {
        let best_so_far = self.records.last().map_or(y, |r| r.best_so_far.max(y));
        self.records.push(TraceRecord {
            t: self.records.len() + 1,
            x,
            y,
            best_so_far,
            arm,
            scaled_reward,
            theta_hat,
            wall_ms,
        });
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    /// Checks `t = 1..T` contiguity and the running-max invariant.
    pub fn check_invariants(&self) -> Result<(), Error> {
        let mut best = f64::NEG_INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if r.t != i + 1 {
                return Err(Error::InvalidState(format!("record {i} has t = {}", r.t)));
            }
            best = best.max(r.y);
            if r.best_so_far != best {
                return Err(Error::InvalidState(format!("best_so_far mismatch at t = {}", r.t)));
            }
        }
        Ok(())
    }
}
