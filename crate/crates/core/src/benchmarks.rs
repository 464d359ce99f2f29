//! Synthetic objectives in the maximization convention, plus a pluggable
//! [`Objective`] wrapper for arbitrary black boxes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::space::Bounds;

/// Noise-free evaluation; `Err` carries a human-readable failure message.
pub type EvalFn = dyn Fn(&[f64]) -> std::result::Result<f64, String> + Send + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// A black-box function to maximize over a box.
#[derive(Clone)]
pub struct Objective {
    name: String,
    bounds: Bounds,
    eval: Arc<EvalFn>,
    noise_std: f64,
    known_optimum: Option<KnownOptimum>,
    value_range: Option<f64>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("noise_std", &self.noise_std)
            .field("known_optimum", &self.known_optimum)
            .finish_non_exhaustive()
    }
}

impl Objective {
    /// Wraps an infallible function.
    pub fn new<F>(name: impl Into<String>, bounds: Bounds, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::fallible(name, bounds, move |x| Ok(f(x)))
    }

    pub fn fallible<F>(name: impl Into<String>, bounds: Bounds, f: F) -> Self
    where
        F: Fn(&[f64]) -> std::result::Result<f64, String> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            bounds,
            eval: Arc::new(f),
            noise_std: 0.0,
            known_optimum: None,
            value_range: None,
        }
    }

    pub fn with_known_optimum(mut self, x: Vec<f64>, value: f64) -> Self {
        self.known_optimum = Some(KnownOptimum { x, value });
        self
    }

    /// Approximate `max f - min f` over the domain, used for the default noise level.
    pub fn with_value_range(mut self, range: f64) -> Self {
        self.value_range = Some(range);
        self
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!("noise std must be >= 0, got {noise_std}")));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    /// One percent of the value range, or zero when the range is unknown.
    pub fn default_noise_std(&self) -> f64 {
        self.value_range.map_or(0.0, |r| 0.01 * r)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known_optimum.as_ref()
    }

    pub fn value_range(&self) -> Option<f64> {
        self.value_range
    }

    /// Noise-free `f(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.bounds.check(x)?;
        let v = (self.eval)(x).map_err(|message| Error::Objective { iteration: 0, message })?;
        if !v.is_finite() {
            return Err(Error::Objective { iteration: 0, message: format!("non-finite value {v} at {x:?}") });
        }
        Ok(v)
    }

    /// `f(x) + ε`, `ε ~ N(0, noise_std²)`; no draw is consumed when noise is zero.
    pub fn observe<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let v = self.value(x)?;
        if self.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(v + normal.sample(rng))
        } else {
            Ok(v)
        }
    }
}

/// Names accepted by [`by_name`].
pub const OBJECTIVE_NAMES: [&str; 4] = ["branin", "hartmann3", "deceptive", "h1"];

/// Registry lookup; `dim` only applies to `deceptive` (default 2).
pub fn by_name(name: &str, dim: Option<usize>) -> Result<Objective> {
    match name {
        "branin" => Ok(branin()),
        "hartmann3" => Ok(hartmann3()),
        "deceptive" => deceptive(dim.unwrap_or(2)),
        "h1" => Ok(h1()),
        other => Err(Error::Config(format!(
            "unknown objective '{other}' (expected one of {})",
            OBJECTIVE_NAMES.join(", ")
        ))),
    }
}

/// Branin in its usual minimization form.
pub fn branin_raw(x1: f64, x2: f64) -> f64 {
    let a = 1.0;
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let r = 6.0;
    let s = 10.0;
    let t = 1.0 / (8.0 * PI);
    a * (x2 - b * x1 * x1 + c * x1 - r).powi(2) + s * (1.0 - t) * x1.cos() + s
}

/// Negated Branin on `[-5, 10] × [0, 15]`.
pub fn branin() -> Objective {
    let bounds = Bounds::new(vec![(-5.0, 10.0), (0.0, 15.0)]).expect("static bounds");
    let x_star = vec![PI, 2.275];
    let f_star = -branin_raw(PI, 2.275);
    Objective::new("branin", bounds, |x| -branin_raw(x[0], x[1]))
        .with_known_optimum(x_star, f_star)
        .with_value_range(307.7)
}

const HARTMANN3_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

/// `-Σ_i α_i exp(-Σ_j A_ij (x_j - P_ij)²)`, non-positive everywhere.
pub fn hartmann3_raw(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..3).map(|j| HARTMANN3_A[i][j] * (x[j] - HARTMANN3_P[i][j]).powi(2)).sum();
            HARTMANN3_ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

/// Negated Hartmann3 on `[0, 1]³`; maximum ≈ 3.86278.
pub fn hartmann3() -> Objective {
    let x_star = vec![0.114614, 0.555649, 0.852547];
    let f_star = -hartmann3_raw(&x_star);
    Objective::new("hartmann3", Bounds::unit(3), |x| -hartmann3_raw(x))
        .with_known_optimum(x_star, f_star)
        .with_value_range(3.86)
}

/// Piecewise-linear component with its unique maximum `g(α) = 1` and
/// deceptive local maxima `4/5` at both ends of `[0, 1]`.
pub fn deceptive_component(x: f64, alpha: f64) -> f64 {
    if x <= 0.8 * alpha {
        -x / alpha + 0.8
    } else if x <= alpha {
        5.0 * x / alpha - 4.0
    } else if x <= (1.0 + 4.0 * alpha) / 5.0 {
        5.0 * (x - alpha) / (alpha - 1.0) + 1.0
    } else {
        (x - 1.0) / (1.0 - alpha) + 0.8
    }
}

/// `-((1/n) Σ g_i(x_i))^2` with `α_i = i / (n + 1)`.
pub fn deceptive_raw(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| deceptive_component(xi, (i + 1) as f64 / (n + 1.0)))
        .sum::<f64>()
        / n;
    -mean.powi(2)
}

/// Negated Deceptive function on `[0, 1]^n`; maximum 1 at `x_i = α_i`.
pub fn deceptive(n: usize) -> Result<Objective> {
    if n == 0 {
        return Err(Error::InvalidInput("deceptive needs at least one dimension".into()));
    }
    let x_star: Vec<f64> = (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect();
    let f_star = -deceptive_raw(&x_star);
    Ok(Objective::new("deceptive", Bounds::unit(n), |x| -deceptive_raw(x))
        .with_known_optimum(x_star, f_star)
        .with_value_range(1.0))
}

pub fn h1_raw(x1: f64, x2: f64) -> f64 {
    let num = (x1 - x2 / 8.0).sin().powi(2) + (x2 + x1 / 8.0).sin().powi(2);
    let den = ((x1 - 8.6998).powi(2) + (x2 - 6.7665).powi(2) + 1.0).sqrt();
    num / den
}

/// h1 on `[-25, 25]²`, maximized directly; maximum ≈ 2 at `(8.6998, 6.7665)`.
pub fn h1() -> Objective {
    let bounds = Bounds::new(vec![(-25.0, 25.0), (-25.0, 25.0)]).expect("static bounds");
    let x_star = vec![8.6998, 6.7665];
    let f_star = h1_raw(8.6998, 6.7665);
    Objective::new("h1", bounds, |x| h1_raw(x[0], x[1]))
        .with_known_optimum(x_star, f_star)
        .with_value_range(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branin_optima() {
        // mpmath: 0.397887357729738...
        assert_relative_eq!(branin_raw(PI, 2.275), 0.397_887_357_729_738_3, max_relative = 1e-13);
        assert!((branin_raw(-PI, 12.275) - branin_raw(PI, 2.275)).abs() < 1e-6);
        let obj = branin();
        assert_relative_eq!(obj.value(&[PI, 2.275]).unwrap(), -0.397_887_357_729_738_3, max_relative = 1e-13);
    }

    #[test]
    fn branin_cosine_term_vanishes() {
        // at x1 = π/2 the cosine term is zero; with the quadratic zeroed the value is s
        let x1 = PI / 2.0;
        let b = 5.1 / (4.0 * PI * PI);
        let x2 = b * x1 * x1 - 5.0 / PI * x1 + 6.0;
        assert_relative_eq!(branin_raw(x1, x2), 10.0, max_relative = 1e-14);
    }

    #[test]
    fn hartmann3_values() {
        let x_star = [0.114614, 0.555649, 0.852547];
        assert_relative_eq!(hartmann3_raw(&x_star), -3.862_779_786_949_336_7, max_relative = 1e-12);
        assert_relative_eq!(hartmann3().value(&x_star).unwrap(), 3.862_779_786_949_336_7, max_relative = 1e-12);
        let at_zero = hartmann3_raw(&[0.0, 0.0, 0.0]);
        assert!(at_zero.is_finite() && at_zero <= 0.0);
        assert_relative_eq!(at_zero, -0.067_974_116_590_134_67, max_relative = 1e-12);
    }

    #[test]
    fn deceptive_values() {
        let obj = deceptive(2).unwrap();
        assert_eq!(obj.value(&[1.0 / 3.0, 2.0 / 3.0]).unwrap(), 1.0);
        assert_relative_eq!(deceptive_raw(&[0.0, 0.0]), -0.64, max_relative = 1e-15);
        for alpha in [0.25, 1.0 / 3.0, 0.5, 0.8] {
            assert_eq!(deceptive_component(alpha, alpha), 1.0);
            assert_relative_eq!(deceptive_component(0.0, alpha), 0.8);
            assert_relative_eq!(deceptive_component(1.0, alpha), 0.8);
        }
    }

    #[test]
    fn deceptive_is_continuous() {
        for alpha in [0.2, 1.0 / 3.0, 2.0 / 3.0, 0.75] {
            for b in [0.8 * alpha, alpha, (1.0 + 4.0 * alpha) / 5.0] {
                let jump = (deceptive_component(b - 1e-12, alpha) - deceptive_component(b + 1e-12, alpha)).abs();
                assert!(jump < 1e-9, "jump {jump} at {b} for alpha {alpha}");
            }
        }
    }

    #[test]
    fn h1_values() {
        assert_relative_eq!(h1_raw(8.6998, 6.7665), 2.0, max_relative = 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obj = h1();
        for _ in 0..1000 {
            let x = obj.bounds().sample(&mut rng);
            assert!(obj.value(&x).unwrap() >= 0.0);
        }
        let far: Vec<f64> = [1e2, 1e4, 1e6].iter().map(|&r| h1_raw(8.6998 + r, 6.7665 + r)).collect();
        assert!(far[2] < far[1] && far[1] < 1e-3 && far[2] < 1e-5);
    }

    #[test]
    fn noise_free_is_deterministic() {
        let obj = branin();
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        let x = [1.0, 3.0];
        assert_eq!(obj.observe(&x, &mut a).unwrap().to_bits(), obj.observe(&x, &mut b).unwrap().to_bits());
    }

    #[test]
    fn noisy_observation_differs_but_value_does_not() {
        let obj = h1().with_noise_std(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = [0.0, 0.0];
        assert_ne!(obj.observe(&x, &mut rng).unwrap(), obj.value(&x).unwrap());
        assert_relative_eq!(obj.default_noise_std(), 0.02);
    }

    #[test]
    fn registry() {
        for name in OBJECTIVE_NAMES {
            assert_eq!(by_name(name, None).unwrap().name(), name);
        }
        assert_eq!(by_name("deceptive", Some(4)).unwrap().dim(), 4);
        assert!(matches!(by_name("rosenbrock", None), Err(Error::Config(_))));
    }

    #[test]
    fn out_of_bounds_and_failures() {
        assert!(branin().value(&[20.0, 0.0]).is_err());
        let broken = Objective::fallible("broken", Bounds::unit(1), |_| Err("boom".to_string()));
        assert!(matches!(broken.value(&[0.5]), Err(Error::Objective { .. })));
        let nan = Objective::new("nan", Bounds::unit(1), |_| f64::NAN);
        assert!(nan.value(&[0.5]).is_err());
    }
}
