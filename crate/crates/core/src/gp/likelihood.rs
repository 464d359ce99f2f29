//! Log marginal likelihood, Gamma-prior log posterior, and their analytic
//! gradients with respect to log-parametrized hyperparameters.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::kernel::{matern52_from_r, matern52_lengthscale_factor};
use super::posterior::factorize;
use super::{check_training_set, Hyperparams};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Which hyperparameter objective to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Log marginal likelihood only.
    Mll,
    /// Log marginal likelihood plus Gamma log prior.
    #[default]
    Map,
}

/// Gamma density in shape–scale form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "Gamma prior needs positive shape and scale, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        (self.shape - 1.0) * x.ln() - x / self.scale - ln_gamma(self.shape) - self.shape * self.scale.ln()
    }

    /// `d log_pdf(x) / d ln x`.
    fn dlog_pdf_dlog(&self, x: f64) -> f64 {
        (self.shape - 1.0) - x / self.scale
    }
}

/// One Gamma prior per hyperparameter group; every lengthscale shares one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPriors {
    pub lengthscale: GammaPrior,
    pub signal_variance: GammaPrior,
    pub noise_variance: GammaPrior,
}

impl Default for GammaPriors {
    /// Gamma(shape = 1e-3, scale = 10) on every hyperparameter.
    fn default() -> Self {
        let g = GammaPrior { shape: 1e-3, scale: 10.0 };
        Self { lengthscale: g, signal_variance: g, noise_variance: g }
    }
}

/// `Σ log Gamma-pdf` over all hyperparameters.
pub fn log_prior(theta: &Hyperparams, priors: &GammaPriors) -> f64 {
    theta.lengthscales.iter().map(|&l| priors.lengthscale.log_pdf(l)).sum::<f64>()
        + priors.signal_variance.log_pdf(theta.signal_variance)
        + priors.noise_variance.log_pdf(theta.noise_variance)
}

fn log_prior_gradient(theta: &Hyperparams, priors: &GammaPriors) -> Vec<f64> {
    let mut g: Vec<f64> = theta.lengthscales.iter().map(|&l| priors.lengthscale.dlog_pdf_dlog(l)).collect();
    g.push(priors.signal_variance.dlog_pdf_dlog(theta.signal_variance));
    g.push(priors.noise_variance.dlog_pdf_dlog(theta.noise_variance));
    g
}

fn mll_value(points: &[Vec<f64>], values: &[f64], theta: &Hyperparams) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Ok(0.0);
    }
    let f = factorize(points, theta)?;
    let y = DVector::from_column_slice(values);
    let alpha = f.chol.solve(&y);
    let log_det = 2.0 * f.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI)
}

/// `-½ yᵀ(K+σ²I)⁻¹y - ½ log|K+σ²I| - (N/2) log 2π`; zero for an empty set.
pub fn log_marginal_likelihood(points: &[Vec<f64>], values: &[f64], theta: &Hyperparams) -> Result<f64> {
    theta.validate()?;
    check_training_set(points, values, theta.dim())?;
    mll_value(points, values, theta)
}

/// Log marginal likelihood plus `Σ log Gamma-pdf`.
pub fn log_posterior(
    points: &[Vec<f64>],
    values: &[f64],
    theta: &Hyperparams,
    priors: &GammaPriors,
) -> Result<f64> {
    Ok(log_marginal_likelihood(points, values, theta)? + log_prior(theta, priors))
}

/// Gradient of the log marginal likelihood (or log posterior, when `priors`
/// is given) with respect to [`Hyperparams::to_log_vec`].
pub fn loss_gradient(
    points: &[Vec<f64>],
    values: &[f64],
    theta: &Hyperparams,
    priors: Option<&GammaPriors>,
) -> Result<Vec<f64>> {
    log_objective_with_gradient(points, values, theta, priors).map(|(_, g)| g)
}

/// Value and log-space gradient sharing one factorization.
pub fn log_objective_with_gradient(
    points: &[Vec<f64>],
    values: &[f64],
    theta: &Hyperparams,
    priors: Option<&GammaPriors>,
) -> Result<(f64, Vec<f64>)> {
    theta.validate()?;
    check_training_set(points, values, theta.dim())?;
    let d = theta.dim();
    let n = points.len();
    let (mut value, mut grad) = if n == 0 {
        (0.0, vec![0.0; d + 2])
    } else {
        let f = factorize(points, theta)?;
        let y = DVector::from_column_slice(values);
        let alpha = f.chol.solve(&y);
        let log_det = 2.0 * f.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let value = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;

        // W = ααᵀ - (K+σ²I)⁻¹;  ∂L/∂θ_j = ½ tr(W ∂K/∂θ_j)
        let mut w = f.inverse();
        w.ger(1.0, &alpha, &alpha, -1.0);

        let s = theta.signal_variance;
        let ls = &theta.lengthscales;
        let mut grad = vec![0.0; d + 2];
        let mut sq = vec![0.0; d];
        for i in 0..n {
            for j in 0..i {
                let wij = w[(j, i)];
                let mut r2 = 0.0;
                for h in 0..d {
                    let z = (points[i][h] - points[j][h]) / ls[h];
                    sq[h] = z * z;
                    r2 += sq[h];
                }
                let r = r2.sqrt();
                let lf = matern52_lengthscale_factor(r, s);
                for h in 0..d {
                    grad[h] += wij * lf * sq[h];
                }
                grad[d] += wij * matern52_from_r(r, s);
            }
        }
        let trace_w: f64 = (0..n).map(|i| w[(i, i)]).sum();
        grad[d] += 0.5 * s * trace_w;
        grad[d + 1] = 0.5 * theta.noise_variance * trace_w;
        (value, grad)
    };
    if let Some(p) = priors {
        value += log_prior(theta, p);
        for (g, pg) in grad.iter_mut().zip(log_prior_gradient(theta, p)) {
            *g += pg;
        }
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite hyperparameter objective".into()));
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn theta_unit() -> Hyperparams {
        Hyperparams::new(vec![1.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn mll_zero_target() {
        let theta = Hyperparams::new(vec![0.4], 1.5, 0.2).unwrap();
        let v = log_marginal_likelihood(&[vec![0.3]], &[0.0], &theta).unwrap();
        assert_relative_eq!(v, -0.5 * (1.7f64).ln() - 0.5 * LN_2PI, max_relative = 1e-14);
    }

    #[test]
    fn mll_scalar_value() {
        // -1 - ½ ln 2 - ½ ln 2π (mpmath, 30 digits)
        let v = log_marginal_likelihood(&[vec![0.0]], &[2.0], &theta_unit()).unwrap();
        assert_relative_eq!(v, -2.265_512_123_484_645_4, max_relative = 1e-13);
    }

    #[test]
    fn log_posterior_scalar_value() {
        // MLL + 3 · log Gamma(1; shape 1e-3, scale 10), mpmath oracle.
        let v = log_posterior(&[vec![0.0]], &[2.0], &theta_unit(), &GammaPriors::default()).unwrap();
        assert_relative_eq!(v, -23.293_956_534_915_19, max_relative = 1e-12);
        assert_relative_eq!(
            GammaPriors::default().lengthscale.log_pdf(0.5),
            -6.267_027_437_097_462,
            max_relative = 1e-12
        );
    }

    #[test]
    fn flat_prior_reduces_to_mll() {
        let theta = Hyperparams::new(vec![0.5], 1.0, 0.1).unwrap();
        let pts = vec![vec![0.1], vec![0.7]];
        let ys = [0.3, -0.2];
        let (v, _) = log_objective_with_gradient(&pts, &ys, &theta, None).unwrap();
        assert_eq!(v, log_marginal_likelihood(&pts, &ys, &theta).unwrap());
    }

    #[test]
    fn denser_prior_increases_posterior() {
        let theta = theta_unit();
        let pts = [vec![0.0]];
        let weak = GammaPriors::default();
        let mut strong = weak;
        // Gamma(2, 1) has density e^{-1} at 1, far above Gamma(1e-3, 10).
        strong.noise_variance = GammaPrior::new(2.0, 1.0).unwrap();
        assert!(
            log_posterior(&pts, &[2.0], &theta, &strong).unwrap()
                > log_posterior(&pts, &[2.0], &theta, &weak).unwrap()
        );
    }

    #[test]
    fn empty_data_gradient_is_prior_only() {
        let theta = Hyperparams::new(vec![0.5, 2.0], 3.0, 0.1).unwrap();
        let priors = GammaPriors::default();
        let g = loss_gradient(&[], &[], &theta, Some(&priors)).unwrap();
        assert_eq!(g, log_prior_gradient(&theta, &priors));
        assert_eq!(loss_gradient(&[], &[], &theta, None).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = pts.iter().map(|p| (4.0 * p[0]).cos() - p[1]).collect();
        let theta = Hyperparams::new(vec![0.3, 0.8], 1.2, 0.05).unwrap();
        let priors = GammaPriors::default();
        let g = loss_gradient(&pts, &ys, &theta, Some(&priors)).unwrap();
        let u = theta.to_log_vec();
        let h = 1e-5;
        for k in 0..u.len() {
            let eval = |delta: f64| {
                let mut v = u.clone();
                v[k] += delta;
                log_posterior(&pts, &ys, &Hyperparams::from_log_vec(&v).unwrap(), &priors).unwrap()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert_relative_eq!(g[k], fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }
}
