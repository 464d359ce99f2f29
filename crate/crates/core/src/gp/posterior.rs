use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{covariance_matrix, matern52_from_r, scaled_distance};
use super::{check_training_set, Dataset, Hyperparams};
use crate::error::{dim_mismatch, Error, Result};

/// Diagonal jitter tried in order when factorizing `K + σ²I`.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

/// Negative predictive variances down to `-NEG_VARIANCE_TOL · σ_f²` are
/// treated as round-off and clamped to zero.
const NEG_VARIANCE_TOL: f64 = 1e-8;

/// Cholesky factorization of `K + σ²I` with the jitter ladder applied.
pub(crate) struct Factorization {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

pub(crate) fn factorize(points: &[Vec<f64>], theta: &Hyperparams) -> Result<Factorization> {
    let mut base = covariance_matrix(points, theta);
    for i in 0..points.len() {
        base[(i, i)] += theta.noise_variance;
    }
    let mut last = 0.0;
    for &jitter in &JITTER_LADDER {
        last = jitter;
        let mut m = base.clone();
        if jitter > 0.0 {
            for i in 0..points.len() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(Factorization { chol, jitter });
        }
    }
    Err(Error::Factorization { jitter: last })
}

impl Factorization {
    /// `(K + σ²I)⁻¹` as `L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut linv = DMatrix::<f64>::zeros(n, n);
        let ls = l.as_slice();
        for (j, col) in linv.as_mut_slice().chunks_exact_mut(n).enumerate() {
            col[j] = 1.0;
            for k in j..n {
                let lk = &ls[k * n..(k + 1) * n];
                let xk = col[k] / lk[k];
                col[k] = xk;
                for (c, lik) in col[k + 1..].iter_mut().zip(&lk[k + 1..]) {
                    *c -= xk * lik;
                }
            }
        }
        linv.transpose() * &linv
    }
}

/// A GP conditioned on observations under fixed hyperparameters.
///
/// Immutable once built; the factorization and `α = (K + σ²I)⁻¹ y` are cached.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    theta: Hyperparams,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Conditions the GP on `data` under `theta`.
pub fn fit_posterior(data: &Dataset, theta: &Hyperparams) -> Result<GpPosterior> {
    GpPosterior::fit(data.points(), data.values(), theta)
}

impl GpPosterior {
    /// Fits on arbitrary training pairs; an empty set yields the prior.
    pub fn fit(points: &[Vec<f64>], values: &[f64], theta: &Hyperparams) -> Result<Self> {
        theta.validate()?;
        check_training_set(points, values, theta.dim())?;
        let n = points.len();
        if n == 0 {
            return Ok(Self {
                points: Vec::new(),
                values: Vec::new(),
                theta: theta.clone(),
                chol: DMatrix::zeros(0, 0),
                alpha: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let f = factorize(points, theta)?;
        let alpha = f.chol.solve(&DVector::from_column_slice(values));
        Ok(Self {
            points: points.to_vec(),
            values: values.to_vec(),
            theta: theta.clone(),
            chol: f.chol.l(),
            alpha,
            jitter: f.jitter,
        })
    }

    /// The prior GP (no observations).
    pub fn prior(theta: &Hyperparams) -> Result<Self> {
        Self::fit(&[], &[], theta)
    }

    pub fn theta(&self) -> &Hyperparams {
        &self.theta
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lower-triangular factor `L` with `L Lᵀ = K + σ²I + jitter·I`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Diagonal jitter that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn cross_covariance(&self, x: &[f64]) -> DVector<f64> {
        let s = self.theta.signal_variance;
        DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| matern52_from_r(scaled_distance(p, x, &self.theta.lengthscales), s)),
        )
    }

    fn clamp_variance(&self, var: f64) -> Result<f64> {
        let s = self.theta.signal_variance;
        if var < -NEG_VARIANCE_TOL * s {
            return Err(Error::Numerical(format!("predictive variance {var:e} is negative")));
        }
        Ok(var.clamp(0.0, s))
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.theta.dim() {
            return Err(dim_mismatch(self.theta.dim(), x.len()));
        }
        if self.points.is_empty() {
            return Ok((0.0, self.theta.signal_variance));
        }
        let k = self.cross_covariance(x);
        let mean = k.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let var = self.clamp_variance(self.theta.signal_variance - v.norm_squared())?;
        Ok((mean, var))
    }

    /// Batched [`predict`](Self::predict); one triangular solve for all inputs.
    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let d = self.theta.dim();
        if let Some(x) = xs.iter().find(|x| x.len() != d) {
            return Err(dim_mismatch(d, x.len()));
        }
        let s = self.theta.signal_variance;
        if self.points.is_empty() {
            return Ok(vec![(0.0, s); xs.len()]);
        }
        let n = self.points.len();
        let mut cross = DMatrix::zeros(n, xs.len());
        for (j, x) in xs.iter().enumerate() {
            for (i, p) in self.points.iter().enumerate() {
                cross[(i, j)] = matern52_from_r(scaled_distance(p, x, &self.theta.lengthscales), s);
            }
        }
        let means = cross.tr_mul(&self.alpha);
        if !self.chol.solve_lower_triangular_mut(&mut cross) {
            return Err(Error::Numerical("singular Cholesky factor".into()));
        }
        cross
            .column_iter()
            .zip(means.iter())
            .map(|(v, &m)| Ok((m, self.clamp_variance(s - v.norm_squared())?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Bounds;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn theta1(noise: f64) -> Hyperparams {
        Hyperparams::new(vec![1.0], 1.0, noise).unwrap()
    }

    #[test]
    fn single_point_alpha_and_prediction() {
        let gp = GpPosterior::fit(&[vec![0.0]], &[1.0], &theta1(0.1)).unwrap();
        // (k + σ²)⁻¹ y = 1 / 1.1
        assert_relative_eq!(gp.alpha()[0], 1.0 / 1.1, max_relative = 1e-14);
        let (m, v) = gp.predict(&[0.0]).unwrap();
        assert_relative_eq!(m, 1.0 / 1.1, max_relative = 1e-14);
        assert_relative_eq!(v, 1.0 - 1.0 / 1.1, max_relative = 1e-12);
    }

    #[test]
    fn prior_prediction() {
        let theta = Hyperparams::new(vec![0.5, 0.5], 2.0, 0.1).unwrap();
        let gp = GpPosterior::prior(&theta).unwrap();
        assert_eq!(gp.predict(&[0.3, 0.1]).unwrap(), (0.0, 2.0));
        let data = Dataset::new(Bounds::unit(2));
        assert!(fit_posterior(&data, &theta).unwrap().is_empty());
    }

    #[test]
    fn duplicate_rows_factorize() {
        let pts = vec![vec![0.5], vec![0.5], vec![0.5]];
        let gp = GpPosterior::fit(&pts, &[1.0, 1.1, 0.9], &theta1(0.01)).unwrap();
        assert_eq!(gp.jitter(), 0.0);
        let (m, _) = gp.predict(&[0.5]).unwrap();
        assert!((m - 1.0).abs() < 0.01);
    }

    #[test]
    fn near_singular_uses_jitter_ladder() {
        // Noise far below round-off on a duplicated row: K + σ²I is numerically singular.
        let theta = Hyperparams::new(vec![1.0], 1.0, 1e-300).unwrap();
        let pts = vec![vec![0.2], vec![0.2]];
        let gp = GpPosterior::fit(&pts, &[1.0, 1.0], &theta).unwrap();
        assert!(gp.jitter() > 0.0);
    }

    #[test]
    fn reconstructs_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = Hyperparams::new(vec![0.3, 0.6], 1.4, 1e-3).unwrap();
        let pts: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = (0..25).map(|_| rng.random()).collect();
        let gp = GpPosterior::fit(&pts, &ys, &theta).unwrap();
        let mut target = covariance_matrix(&pts, &theta);
        for i in 0..25 {
            target[(i, i)] += theta.noise_variance + gp.jitter();
        }
        let l = gp.chol();
        let rel = (l * l.transpose() - &target).norm() / target.norm();
        assert!(rel < 1e-8, "relative reconstruction error {rel}");
    }

    #[test]
    fn batch_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = Hyperparams::new(vec![0.2, 0.4], 0.8, 1e-2).unwrap();
        let pts: Vec<Vec<f64>> = (0..15).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = pts.iter().map(|p| (5.0 * p[0]).sin() + p[1]).collect();
        let gp = GpPosterior::fit(&pts, &ys, &theta).unwrap();
        let qs: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random()]).collect();
        let batch = gp.predict_many(&qs).unwrap();
        for (q, (m, v)) in qs.iter().zip(batch) {
            let (m1, v1) = gp.predict(q).unwrap();
            assert_relative_eq!(m, m1, epsilon = 1e-12);
            assert_relative_eq!(v, v1, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        let gp = GpPosterior::fit(&[vec![0.0]], &[1.0], &theta1(0.1)).unwrap();
        assert!(gp.predict(&[0.0, 1.0]).is_err());
        assert!(GpPosterior::fit(&[vec![0.0, 1.0]], &[1.0], &theta1(0.1)).is_err());
    }
}
