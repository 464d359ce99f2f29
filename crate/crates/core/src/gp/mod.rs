//! Gaussian-process regression with a Matérn 5/2 ARD kernel and zero prior mean.

mod kernel;
mod likelihood;
mod posterior;

pub use kernel::{covariance_matrix, matern52_ard};
pub use likelihood::{
    log_marginal_likelihood, log_objective_with_gradient, log_posterior, log_prior,
    loss_gradient, GammaPrior, GammaPriors, LossKind,
};
pub use posterior::{fit_posterior, GpPosterior, JITTER_LADDER};

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::space::Bounds;

/// Kernel lengthscales, signal variance and observation-noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Hyperparams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let theta = Self { lengthscales, signal_variance, noise_variance };
        theta.validate()?;
        Ok(theta)
    }

    /// Same lengthscale in every dimension.
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidInput("at least one lengthscale is required".into()));
        }
        if !self.lengthscales.iter().all(|&l| positive(l)) {
            return Err(Error::InvalidInput(format!(
                "lengthscales must be positive, got {:?}",
                self.lengthscales
            )));
        }
        if !positive(self.signal_variance) || !positive(self.noise_variance) {
            return Err(Error::InvalidInput(format!(
                "variances must be positive, got signal {} noise {}",
                self.signal_variance, self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Number of free parameters: `dim + 2`.
    pub fn n_params(&self) -> usize {
        self.lengthscales.len() + 2
    }

    /// `[ln l_1, .., ln l_d, ln signal_variance, ln noise_variance]`.
    pub fn to_log_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log_vec(v: &[f64]) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::InvalidInput(format!("log-parameter vector too short: {}", v.len())));
        }
        let d = v.len() - 2;
        Self::new(v[..d].iter().map(|u| u.exp()).collect(), v[d].exp(), v[d + 1].exp())
    }
}

/// Ordered observations inside a box domain; the list index is the iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    bounds: Bounds,
}

impl Dataset {
    pub fn new(bounds: Bounds) -> Self {
        Self { points: Vec::new(), values: Vec::new(), bounds }
    }

    pub fn from_parts(bounds: Bounds, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let mut data = Self::new(bounds);
        for (x, y) in points.into_iter().zip(values) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        self.bounds.check(&x)?;
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("observation must be finite, got {y}")));
        }
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }
}

pub(crate) fn check_training_set(points: &[Vec<f64>], values: &[f64], dim: usize) -> Result<()> {
    if points.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    for x in points {
        if x.len() != dim {
            return Err(dim_mismatch(dim, x.len()));
        }
    }
    Ok(())
}

/// Anything that produces a predictive mean and variance.
pub trait Predictor {
    fn dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<(f64, f64)>;

    fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

impl Predictor for GpPosterior {
    fn dim(&self) -> usize {
        self.theta().dim()
    }

    fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        GpPosterior::predict(self, x)
    }

    fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        GpPosterior::predict_many(self, xs)
    }
}
