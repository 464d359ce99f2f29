//! GP-UCB acquisition `μ(x) + c·σ(x)` and its maximizer over a box.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::space::Bounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// Multiplier `c` on the predictive standard deviation.
    pub ucb_multiplier: f64,
    /// Uniform candidates scored before local refinement.
    pub candidates: usize,
    /// Coordinate-ascent sweeps started from the best candidate.
    pub refine_steps: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { ucb_multiplier: 1.96, candidates: 2000, refine_steps: 50 }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ucb_multiplier >= 0.0 && self.ucb_multiplier.is_finite()) {
            return Err(Error::InvalidInput(format!("ucb multiplier must be >= 0, got {}", self.ucb_multiplier)));
        }
        if self.candidates == 0 {
            return Err(Error::InvalidInput("need at least one acquisition candidate".into()));
        }
        Ok(())
    }
}

pub fn ucb_value(gp: &GpPosterior, x: &[f64], cfg: &AcquisitionConfig) -> Result<f64> {
    let (mean, var) = gp.predict(x)?;
    Ok(mean + cfg.ucb_multiplier * var.sqrt())
}

fn ucb_many(gp: &GpPosterior, xs: &[Vec<f64>], cfg: &AcquisitionConfig) -> Result<Vec<f64>> {
    Ok(gp.predict_many(xs)?.into_iter().map(|(m, v)| m + cfg.ucb_multiplier * v.sqrt()).collect())
}

/// Best of `cfg.candidates` uniform samples, then coordinate-wise ascent with
/// a halving step size, every move projected onto `bounds`.
pub fn maximize<R: Rng + ?Sized>(
    gp: &GpPosterior,
    bounds: &Bounds,
    cfg: &AcquisitionConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    if bounds.is_degenerate() {
        let x: Vec<f64> = bounds.intervals().iter().map(|&(lo, _)| lo).collect();
        let v = ucb_value(gp, &x, cfg)?;
        return Ok((x, v));
    }
    let candidates: Vec<Vec<f64>> = (0..cfg.candidates).map(|_| bounds.sample(rng)).collect();
    let scores = ucb_many(gp, &candidates, cfg)?;
    let (best_idx, &best_val) = scores
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
    let mut x = candidates[best_idx].clone();
    let mut value = best_val;

    let d = bounds.dim();
    let mut step: Vec<f64> = (0..d).map(|h| 0.05 * bounds.width(h)).collect();
    for _ in 0..cfg.refine_steps {
        let mut improved = false;
        for h in 0..d {
            if step[h] <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[h] += dir * step[h];
                bounds.clamp(&mut trial);
                if trial[h] == x[h] {
                    continue;
                }
                let v = ucb_value(gp, &trial, cfg)?;
                if v > value {
                    x = trial;
                    value = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Ok((x, value))
}
