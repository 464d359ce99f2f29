//! Hyperparameter estimation: the standard (observed-data) loss and the
//! consistent pseudo-label loss built from uniformly drawn points whose
//! targets are copied from their nearest observed neighbours.

mod lbfgs;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{check_training_set, log_objective_with_gradient, Dataset, GammaPriors, Hyperparams, LossKind};
use crate::space::Bounds;

use lbfgs::LbfgsOptions;

/// Uniform points `x'_j`, the index of each one's nearest observation, and the
/// copied observation values.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDataset {
    pub random_points: Vec<Vec<f64>>,
    pub matched_indices: Vec<usize>,
    pub pseudo_values: Vec<f64>,
}

impl PseudoDataset {
    pub fn len(&self) -> usize {
        self.random_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.random_points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// `M_t = ceil(mt_factor · |D_{t-1}|)`.
    pub mt_factor: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub loss_kind: LossKind,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { mt_factor: 2.0, restarts: 5, max_iters: 200, loss_kind: LossKind::Map }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mt_factor >= 1.0 && self.mt_factor.is_finite()) {
            return Err(Error::InvalidInput(format!("mt_factor must be >= 1, got {}", self.mt_factor)));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidInput("restarts must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of pseudo points drawn for a dataset of `n` observations.
    pub fn pseudo_size(&self, n: usize) -> usize {
        (self.mt_factor * n as f64).ceil() as usize
    }
}

/// Result of a hyperparameter fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta: Hyperparams,
    /// Maximized log objective (log marginal likelihood or log posterior).
    pub log_objective: f64,
}

/// Index of the observation nearest to `x` in Euclidean distance; ties go to
/// the lowest index.
fn nearest_index(points: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Pairs every random point with its L2-nearest observed point.
pub fn match_nearest(data: &Dataset, random_points: Vec<Vec<f64>>) -> Result<PseudoDataset> {
    if data.is_empty() {
        return Err(Error::InvalidState("cannot match against an empty dataset".into()));
    }
    for x in &random_points {
        data.bounds().check(x)?;
    }
    let matched_indices: Vec<usize> = random_points.iter().map(|x| nearest_index(data.points(), x)).collect();
    let pseudo_values = matched_indices.iter().map(|&i| data.values()[i]).collect();
    Ok(PseudoDataset { random_points, matched_indices, pseudo_values })
}

/// Draws `M_t` uniform points and builds the pseudo-labelled training set.
pub fn sample_pseudo_dataset<R: Rng + ?Sized>(
    data: &Dataset,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<PseudoDataset> {
    config.validate()?;
    let m = config.pseudo_size(data.len());
    let points = (0..m).map(|_| data.bounds().sample(rng)).collect();
    match_nearest(data, points)
}

/// Log-space search box derived from the domain widths and target scale.
struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    default_start: Vec<f64>,
}

impl SearchBox {
    fn new(bounds: &Bounds, values: &[f64]) -> Self {
        // zero-mean prior: the signal scale is the second moment of the targets
        let second_moment = if values.is_empty() {
            1.0
        } else {
            values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64
        };
        let scale = if second_moment > 1e-12 { second_moment } else { 1.0 };
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut start = Vec::new();
        for h in 0..bounds.dim() {
            let w = bounds.width(h).max(1e-9);
            lower.push((1e-2 * w).ln());
            upper.push((10.0 * w).ln());
            start.push((0.25 * w).ln());
        }
        lower.push((1e-2 * scale).ln());
        upper.push((1e2 * scale).ln());
        start.push(scale.ln());
        lower.push((1e-6 * scale).ln());
        upper.push(scale.ln());
        start.push((1e-2 * scale).ln());
        Self { lower, upper, default_start: start }
    }

    fn clamp(&self, mut u: Vec<f64>) -> Vec<f64> {
        for ((v, &l), &h) in u.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, h);
        }
        u
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(&l, &h)| rng.random_range(l..=h)).collect()
    }
}

/// Multi-start maximizer of the configured log objective over training pairs.
///
/// The first start is `warm_start` when given (projected into the search box),
/// otherwise a data-scaled default; every further restart is drawn
/// log-uniformly from the box. The best restart wins.
pub fn estimate_map<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    values: &[f64],
    bounds: &Bounds,
    config: &EstimatorConfig,
    priors: &GammaPriors,
    warm_start: Option<&Hyperparams>,
    rng: &mut R,
) -> Result<Estimate> {
    config.validate()?;
    check_training_set(points, values, bounds.dim())?;
    if points.is_empty() {
        return Err(Error::InvalidInput("hyperparameter estimation needs training pairs".into()));
    }
    let search = SearchBox::new(bounds, values);
    let prior = match config.loss_kind {
        LossKind::Map => Some(priors),
        LossKind::Mll => None,
    };
    let objective = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let theta = Hyperparams::from_log_vec(u).ok()?;
        let (v, g) = log_objective_with_gradient(points, values, &theta, prior).ok()?;
        Some((-v, g.into_iter().map(|x| -x).collect()))
    };
    let opts = LbfgsOptions { max_iters: config.max_iters, ..LbfgsOptions::default() };

    let first = match warm_start {
        Some(t) if t.dim() == bounds.dim() => search.clamp(t.to_log_vec()),
        _ => search.default_start.clone(),
    };
    let mut best: Option<lbfgs::Minimum> = None;
    for restart in 0..config.restarts {
        let start = if restart == 0 { first.clone() } else { search.sample(rng) };
        if let Some(m) = lbfgs::minimize(objective, &start, &search.lower, &search.upper, opts) {
            if best.as_ref().is_none_or(|b| m.value < b.value) {
                best = Some(m);
            }
        }
    }
    let best = best.ok_or(Error::Factorization { jitter: crate::gp::JITTER_LADDER[3] })?;
    Ok(Estimate { theta: Hyperparams::from_log_vec(&best.x)?, log_objective: -best.value })
}

/// Consistent estimate: fit on `(x'_j, y(x̂'_j))` pairs. The returned
/// hyperparameters are meant to be used with the original observations.
pub fn estimate_consistent<R: Rng + ?Sized>(
    data: &Dataset,
    config: &EstimatorConfig,
    priors: &GammaPriors,
    warm_start: Option<&Hyperparams>,
    rng: &mut R,
) -> Result<(Estimate, PseudoDataset)> {
    let pseudo = sample_pseudo_dataset(data, config, rng)?;
    let estimate = estimate_map(
        &pseudo.random_points,
        &pseudo.pseudo_values,
        data.bounds(),
        config,
        priors,
        warm_start,
        rng,
    )?;
    Ok((estimate, pseudo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{log_marginal_likelihood, loss_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_data(xs: &[f64]) -> Dataset {
        Dataset::from_parts(Bounds::unit(1), xs.iter().map(|&x| vec![x]).collect(), xs.to_vec()).unwrap()
    }

    #[test]
    fn exact_match_has_zero_distance() {
        let data = line_data(&[0.1, 0.7, 0.3]);
        let p = match_nearest(&data, vec![vec![0.7], vec![0.3]]).unwrap();
        assert_eq!(p.matched_indices, vec![1, 2]);
        assert_eq!(p.pseudo_values, vec![0.7, 0.3]);
    }

    #[test]
    fn nearest_and_tie_break() {
        let data = line_data(&[0.0, 1.0]);
        let p = match_nearest(&data, vec![vec![0.4], vec![0.5], vec![0.6]]).unwrap();
        assert_eq!(p.matched_indices, vec![0, 0, 1]);
    }

    #[test]
    fn empty_dataset_is_invalid_state() {
        let data = Dataset::new(Bounds::unit(1));
        assert!(matches!(match_nearest(&data, vec![vec![0.5]]), Err(Error::InvalidState(_))));
    }

    #[test]
    fn out_of_bounds_random_point_rejected() {
        let data = line_data(&[0.0]);
        assert!(match_nearest(&data, vec![vec![1.5]]).is_err());
    }

    #[test]
    fn pseudo_size_rule() {
        let cfg = EstimatorConfig::default();
        assert_eq!(cfg.pseudo_size(7), 14);
        let cfg = EstimatorConfig { mt_factor: 1.5, ..cfg };
        assert_eq!(cfg.pseudo_size(7), 11);
        assert!(EstimatorConfig { mt_factor: 0.5, ..cfg }.validate().is_err());
    }

    #[test]
    fn pseudo_dataset_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = line_data(&[0.05, 0.5, 0.9, 0.2]);
        let cfg = EstimatorConfig::default();
        let p = sample_pseudo_dataset(&data, &cfg, &mut rng).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p.matched_indices.len(), 8);
        assert_eq!(p.pseudo_values.len(), 8);
        for (x, &j) in p.random_points.iter().zip(&p.matched_indices) {
            let dj = (x[0] - data.points()[j][0]).abs();
            assert!(data.points().iter().all(|q| (x[0] - q[0]).abs() >= dj));
        }
    }

    fn wavy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let ys = pts.iter().map(|p| (6.0 * p[0]).sin() * (3.0 * p[1]).cos()).collect();
        (pts, ys)
    }

    #[test]
    fn optimum_is_stationary() {
        let (pts, ys) = wavy(30, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = EstimatorConfig { loss_kind: LossKind::Mll, ..Default::default() };
        let est = estimate_map(&pts, &ys, &Bounds::unit(2), &cfg, &GammaPriors::default(), None, &mut rng).unwrap();
        let g = loss_gradient(&pts, &ys, &est.theta, None).unwrap();
        let d = est.theta.dim();
        // noise may sit on its lower bound for smooth noise-free data; check free coordinates
        let free: Vec<f64> = g[..=d].to_vec();
        let norm = free.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-5, "gradient {g:?}");
        let mll = log_marginal_likelihood(&pts, &ys, &est.theta).unwrap();
        assert!((mll - est.log_objective).abs() < 1e-9);
    }

    #[test]
    fn more_restarts_never_worse() {
        let (pts, ys) = wavy(25, 8);
        let bounds = Bounds::unit(2);
        let priors = GammaPriors::default();
        let one = EstimatorConfig { restarts: 1, ..Default::default() };
        let five = EstimatorConfig { restarts: 5, ..Default::default() };
        let a = estimate_map(&pts, &ys, &bounds, &one, &priors, None, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = estimate_map(&pts, &ys, &bounds, &five, &priors, None, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(b.log_objective >= a.log_objective);
    }

    #[test]
    fn deterministic_under_seed() {
        let (pts, ys) = wavy(20, 2);
        let run = || {
            estimate_map(
                &pts,
                &ys,
                &Bounds::unit(2),
                &EstimatorConfig::default(),
                &GammaPriors::default(),
                None,
                &mut ChaCha8Rng::seed_from_u64(77),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn coincident_pseudo_points_reduce_to_standard_loss() {
        let data = line_data(&[0.1, 0.4, 0.8]);
        let p = match_nearest(&data, data.points().to_vec()).unwrap();
        let theta = Hyperparams::new(vec![0.3], 1.0, 0.01).unwrap();
        assert_eq!(
            log_marginal_likelihood(&p.random_points, &p.pseudo_values, &theta).unwrap(),
            log_marginal_likelihood(data.points(), data.values(), &theta).unwrap()
        );
    }
}
