//! Box-shaped search domains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};

/// Per-dimension closed intervals `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds(Vec<(f64, f64)>);

impl Bounds {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidInput("bounds need at least one dimension".into()));
        }
        for (h, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidInput(format!(
                    "dimension {h}: invalid interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self(intervals))
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self(vec![(0.0, 1.0); dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn lower(&self, h: usize) -> f64 {
        self.0[h].0
    }

    pub fn upper(&self, h: usize) -> f64 {
        self.0[h].1
    }

    pub fn width(&self, h: usize) -> f64 {
        self.0[h].1 - self.0[h].0
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.0).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(dim_mismatch(self.dim(), x.len()));
        }
        if !self.contains(x) {
            return Err(Error::InvalidInput(format!("point {x:?} lies outside the bounds")));
        }
        Ok(())
    }

    /// Projects `x` onto the box in place.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.0
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.iter().all(|&(lo, hi)| lo == hi)
    }
}
