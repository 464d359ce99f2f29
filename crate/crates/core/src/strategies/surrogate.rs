use crate::error::Result;
use crate::gp::{GpPosterior, Hyperparams, Predictor};

/// Affine map putting observations on a zero-mean, unit-variance scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub offset: f64,
    pub scale: f64,
}

impl Standardizer {
    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { offset: 0.0, scale: 1.0 };
        }
        let n = values.len() as f64;
        let offset = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / n;
        let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { offset, scale }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn forward_all(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.forward(y)).collect()
    }

    /// Converts hyperparameters fitted on standardized targets back to the objective's units.
    pub fn theta_to_original(&self, theta: &Hyperparams) -> Hyperparams {
        let s2 = self.scale * self.scale;
        Hyperparams {
            lengthscales: theta.lengthscales.clone(),
            signal_variance: theta.signal_variance * s2,
            noise_variance: theta.noise_variance * s2,
        }
    }
}

/// A GP fitted on standardized targets, predicting in the original units.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub gp: GpPosterior,
    pub standardizer: Standardizer,
}

impl Surrogate {
    pub fn fit(points: &[Vec<f64>], values: &[f64], theta_std: &Hyperparams) -> Result<Self> {
        let standardizer = Standardizer::fit(values);
        let gp = GpPosterior::fit(points, &standardizer.forward_all(values), theta_std)?;
        Ok(Self { gp, standardizer })
    }

    pub fn theta_original(&self) -> Hyperparams {
        self.standardizer.theta_to_original(self.gp.theta())
    }
}

impl Predictor for Surrogate {
    fn dim(&self) -> usize {
        self.gp.theta().dim()
    }

    fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (m, v) = self.gp.predict(x)?;
        let s = self.standardizer;
        Ok((s.offset + s.scale * m, s.scale * s.scale * v))
    }

    fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let s = self.standardizer;
        Ok(self
            .gp
            .predict_many(xs)?
            .into_iter()
            .map(|(m, v)| (s.offset + s.scale * m, s.scale * s.scale * v))
            .collect())
    }
}
