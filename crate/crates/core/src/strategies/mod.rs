//! BO strategies behind one interface: given an objective, a budget, an
//! initial design and an rng, produce a [`RunTrace`].
//!
//! All GP-based strategies standardize the observations before estimating
//! hyperparameters and fitting the GP; recorded hyperparameters are converted
//! back to the objective's units.

mod surrogate;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use surrogate::{Standardizer, Surrogate};

use crate::acquisition::{maximize, AcquisitionConfig};
use crate::bandit::{exp3_gamma, Exp3State, RewardRecord};
use crate::benchmarks::Objective;
use crate::error::{Error, Result};
use crate::estimation::{estimate_map, sample_pseudo_dataset, EstimatorConfig};
use crate::gp::{Dataset, GammaPriors, Hyperparams};
use crate::trace::{Arm, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    /// EXP3-scheduled random sampling with the consistent pseudo-label loss.
    #[serde(rename = "uhe")]
    Uhe,
    /// Standard BO with MAP hyperparameters on the observed data.
    #[serde(rename = "map")]
    MapBo,
    #[serde(rename = "random")]
    Random,
    /// EXP3 choosing between random sampling and GP-UCB every iteration.
    #[serde(rename = "portfolio")]
    Portfolio,
    /// MAP hyperparameters with lengthscales shrunk as `(t0 / t)^(p / d)`.
    #[serde(rename = "a-gp-ucb")]
    AGpUcb,
    /// MAP hyperparameters, lengthscales rescaled until the proposal's σ reaches κ.
    #[serde(rename = "wang-de-freitas")]
    WangDeFreitas,
    /// Strict alternation of random and acquisition points, consistent loss.
    #[serde(rename = "rdexp3")]
    Rdexp3,
    /// The EXP3 schedule with the standard MAP loss.
    #[serde(rename = "random+exp3")]
    RandomPlusExp3,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Uhe,
        StrategyKind::MapBo,
        StrategyKind::Random,
        StrategyKind::Portfolio,
        StrategyKind::AGpUcb,
        StrategyKind::WangDeFreitas,
        StrategyKind::Rdexp3,
        StrategyKind::RandomPlusExp3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Uhe => "uhe",
            StrategyKind::MapBo => "map",
            StrategyKind::Random => "random",
            StrategyKind::Portfolio => "portfolio",
            StrategyKind::AGpUcb => "a-gp-ucb",
            StrategyKind::WangDeFreitas => "wang-de-freitas",
            StrategyKind::Rdexp3 => "rdexp3",
            StrategyKind::RandomPlusExp3 => "random+exp3",
        }
    }

    /// Whether this strategy fits hyperparameters with the pseudo-label loss.
    pub fn uses_consistent_loss(self) -> bool {
        matches!(self, StrategyKind::Uhe | StrategyKind::Rdexp3)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        let alias = match key.as_str() {
            "map-bo" | "mapbo" => "map",
            "agpucb" => "a-gp-ucb",
            "wang" | "wangdefreitas" => "wang-de-freitas",
            "random-plus-exp3" | "randomplusexp3" => "random+exp3",
            other => other,
        };
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub estimator: EstimatorConfig,
    pub acquisition: AcquisitionConfig,
    pub priors: GammaPriors,
    /// Minimum predictive standard deviation (standardized units) enforced by
    /// the rescaling baseline.
    pub kappa: f64,
    /// Exponent of the sub-linear reference `t^p` for lengthscale shrinkage.
    pub shrink_exponent: f64,
    pub record_wall_time: bool,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            acquisition: AcquisitionConfig::default(),
            priors: GammaPriors::default(),
            kappa: 0.1,
            shrink_exponent: 0.9,
            record_wall_time: false,
        }
    }
}

/// Bookkeeping that does not belong in the trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub evaluations: usize,
    pub estimations: usize,
    pub pseudo_datasets: usize,
    pub bandit_updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loss {
    Observed,
    Consistent,
}

/// Lengthscale multiplier `(t0 / t)^(p / d)` for `t > t0`, else 1.
pub fn shrink_factor(t: usize, t0: usize, exponent: f64, dim: usize) -> f64 {
    if t <= t0 || t0 == 0 {
        1.0
    } else {
        (t0 as f64 / t as f64).powf(exponent / dim as f64)
    }
}

/// Rescaling grid `1, 1/2, ..., 2^-10` tried by the rescaling baseline.
pub const RESCALE_GRID: [f64; 11] = [
    1.0,
    0.5,
    0.25,
    0.125,
    0.0625,
    0.03125,
    0.015625,
    0.0078125,
    0.00390625,
    0.001953125,
    0.0009765625,
];

/// Largest grid factor whose rescaled GP has `σ(x) >= kappa`; the smallest
/// factor when none qualifies.
pub fn rescale_for_kappa(
    points: &[Vec<f64>],
    values_std: &[f64],
    theta: &Hyperparams,
    x: &[f64],
    kappa: f64,
) -> Result<f64> {
    for &s in &RESCALE_GRID {
        let scaled = scale_lengthscales(theta, s);
        let gp = crate::gp::GpPosterior::fit(points, values_std, &scaled)?;
        if gp.predict(x)?.1.sqrt() >= kappa {
            return Ok(s);
        }
    }
    Ok(RESCALE_GRID[RESCALE_GRID.len() - 1])
}

fn scale_lengthscales(theta: &Hyperparams, factor: f64) -> Hyperparams {
    Hyperparams {
        lengthscales: theta.lengthscales.iter().map(|l| l * factor).collect(),
        ..theta.clone()
    }
}

struct Run<'a, R: Rng + ?Sized> {
    objective: &'a Objective,
    cfg: &'a BoConfig,
    data: Dataset,
    d0_values: Vec<f64>,
    trace: RunTrace,
    stats: RunStats,
    warm: Option<Hyperparams>,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> Run<'a, R> {
    fn new(
        kind: StrategyKind,
        objective: &'a Objective,
        budget: usize,
        init: &Dataset,
        cfg: &'a BoConfig,
        rng: &'a mut R,
    ) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidInput("budget must be at least 1".into()));
        }
        if init.is_empty() {
            return Err(Error::InvalidInput("initial design must be non-empty".into()));
        }
        if init.bounds() != objective.bounds() {
            return Err(Error::InvalidInput("initial design bounds differ from the objective's".into()));
        }
        cfg.estimator.validate()?;
        cfg.acquisition.validate()?;
        Ok(Self {
            objective,
            cfg,
            data: init.clone(),
            d0_values: init.values().to_vec(),
            trace: RunTrace::new(kind.name(), objective.name(), budget),
            stats: RunStats::default(),
            warm: None,
            rng,
        })
    }

    /// Hyperparameters on the standardized scale of the current data.
    fn estimate(&mut self, loss: Loss) -> Result<Hyperparams> {
        let standardizer = Standardizer::fit(self.data.values());
        let est = match loss {
            Loss::Observed => estimate_map(
                self.data.points(),
                &standardizer.forward_all(self.data.values()),
                self.data.bounds(),
                &self.cfg.estimator,
                &self.cfg.priors,
                self.warm.as_ref(),
                self.rng,
            )?,
            Loss::Consistent => {
                let pseudo = sample_pseudo_dataset(&self.data, &self.cfg.estimator, self.rng)?;
                self.stats.pseudo_datasets += 1;
                estimate_map(
                    &pseudo.random_points,
                    &standardizer.forward_all(&pseudo.pseudo_values),
                    self.data.bounds(),
                    &self.cfg.estimator,
                    &self.cfg.priors,
                    self.warm.as_ref(),
                    self.rng,
                )?
            }
        };
        self.stats.estimations += 1;
        self.warm = Some(est.theta.clone());
        Ok(est.theta)
    }

    fn surrogate(&self, theta: &Hyperparams) -> Result<Surrogate> {
        Surrogate::fit(self.data.points(), self.data.values(), theta)
    }

    fn propose(&mut self, surrogate: &Surrogate) -> Result<Vec<f64>> {
        let (x, _) = maximize(&surrogate.gp, self.data.bounds(), &self.cfg.acquisition, self.rng)?;
        Ok(x)
    }

    fn random_point(&mut self) -> Vec<f64> {
        self.data.bounds().sample(self.rng)
    }

    fn evaluate(&mut self, t: usize, x: &[f64]) -> Result<f64> {
        self.stats.evaluations += 1;
        self.objective.observe(x, self.rng).map_err(|e| match e {
            Error::Objective { message, .. } => Error::Objective { iteration: t, message },
            other => other,
        })
    }

    fn commit(
        &mut self,
        x: Vec<f64>,
        y: f64,
        arm: Option<Arm>,
        reward: Option<f64>,
        theta_std: Option<&Hyperparams>,
        started: Instant,
    ) -> Result<()> {
        let theta = theta_std.map(|t| Standardizer::fit(self.data.values()).theta_to_original(t));
        self.data.push(x.clone(), y)?;
        let wall = self.cfg.record_wall_time.then(|| started.elapsed().as_secs_f64() * 1e3);
        self.trace.push(x, y, arm, reward, theta, wall);
        Ok(())
    }

    /// GP-UCB step with hyperparameters from `loss`; returns the point and θ.
    fn acquisition_step(&mut self, loss: Loss) -> Result<(Vec<f64>, Hyperparams)> {
        let theta = self.estimate(loss)?;
        let surrogate = self.surrogate(&theta)?;
        let x = self.propose(&surrogate)?;
        Ok((x, theta))
    }
}

/// Runs `kind` for `budget` evaluations after the initial design `init`.
pub fn run_strategy<R: Rng + ?Sized>(
    kind: StrategyKind,
    objective: &Objective,
    budget: usize,
    init: &Dataset,
    cfg: &BoConfig,
    rng: &mut R,
) -> Result<RunTrace> {
    run_strategy_with_stats(kind, objective, budget, init, cfg, rng).map(|(trace, _)| trace)
}

pub fn run_strategy_with_stats<R: Rng + ?Sized>(
    kind: StrategyKind,
    objective: &Objective,
    budget: usize,
    init: &Dataset,
    cfg: &BoConfig,
    rng: &mut R,
) -> Result<(RunTrace, RunStats)> {
    let mut run = Run::new(kind, objective, budget, init, cfg, rng)?;
    match kind {
        StrategyKind::Uhe => run_bandit_schedule(&mut run, budget, Loss::Consistent)?,
        StrategyKind::RandomPlusExp3 => run_bandit_schedule(&mut run, budget, Loss::Observed)?,
        StrategyKind::MapBo => run_map_bo(&mut run, budget)?,
        StrategyKind::Random => run_random(&mut run, budget)?,
        StrategyKind::Portfolio => run_portfolio(&mut run, budget)?,
        StrategyKind::AGpUcb => run_a_gp_ucb(&mut run, budget)?,
        StrategyKind::WangDeFreitas => run_wang_de_freitas(&mut run, budget)?,
        StrategyKind::Rdexp3 => run_rdexp3(&mut run, budget)?,
    }
    Ok((run.trace, run.stats))
}

/// Paired EXP3 schedule: an arm drawn on each odd iteration governs that
/// iteration and the next; the random arm samples uniformly only on the odd
/// iteration. Each even iteration rewards the arm with `max(y_t, y_{t-1})`
/// scaled by the initial design's range.
fn run_bandit_schedule<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize, loss: Loss) -> Result<()> {
    if budget < 2 {
        return Err(Error::InvalidInput("the paired bandit schedule needs a budget of at least 2".into()));
    }
    let mut bandit = Exp3State::new(2, exp3_gamma(budget)?)?;
    let mut arm = Arm::Acquisition;
    for t in 1..=budget {
        let started = Instant::now();
        let odd = t % 2 == 1;
        if odd {
            arm = Arm::from_index(bandit.draw(run.rng)?).expect("two arms");
        }
        let (x, theta) = if arm == Arm::Random && odd {
            (run.random_point(), None)
        } else {
            let (x, theta) = run.acquisition_step(loss)?;
            (x, Some(theta))
        };
        let y = run.evaluate(t, &x)?;
        let reward = if odd {
            None
        } else {
            let previous = run.data.values()[run.data.len() - 1];
            let record = RewardRecord::scaled(y.max(previous), &run.d0_values, arm.index())?;
            bandit.update(&record)?;
            run.stats.bandit_updates += 1;
            Some(record.scaled_reward)
        };
        run.commit(x, y, Some(arm), reward, theta.as_ref(), started)?;
    }
    Ok(())
}

fn run_map_bo<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize) -> Result<()> {
    for t in 1..=budget {
        let started = Instant::now();
        let (x, theta) = run.acquisition_step(Loss::Observed)?;
        let y = run.evaluate(t, &x)?;
        run.commit(x, y, None, None, Some(&theta), started)?;
    }
    Ok(())
}

fn run_random<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize) -> Result<()> {
    for t in 1..=budget {
        let started = Instant::now();
        let x = run.random_point();
        let y = run.evaluate(t, &x)?;
        run.commit(x, y, None, None, None, started)?;
    }
    Ok(())
}

fn run_portfolio<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize) -> Result<()> {
    let mut bandit = Exp3State::new(2, exp3_gamma(budget)?)?;
    for t in 1..=budget {
        let started = Instant::now();
        let arm = Arm::from_index(bandit.draw(run.rng)?).expect("two arms");
        let (x, theta) = match arm {
            Arm::Random => (run.random_point(), None),
            Arm::Acquisition => {
                let (x, theta) = run.acquisition_step(Loss::Observed)?;
                (x, Some(theta))
            }
        };
        let y = run.evaluate(t, &x)?;
        let record = RewardRecord::scaled(y, &run.d0_values, arm.index())?;
        bandit.update(&record)?;
        run.stats.bandit_updates += 1;
        run.commit(x, y, Some(arm), Some(record.scaled_reward), theta.as_ref(), started)?;
    }
    Ok(())
}

fn run_a_gp_ucb<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize) -> Result<()> {
    let t0 = run.d0_values.len();
    let dim = run.data.dim();
    let mut current: Option<Vec<f64>> = None;
    for t in 1..=budget {
        let started = Instant::now();
        let mut theta = run.estimate(Loss::Observed)?;
        let factor = shrink_factor(t, t0, run.cfg.shrink_exponent, dim);
        let shrunk: Vec<f64> = match &current {
            Some(prev) => theta.lengthscales.iter().zip(prev).map(|(l, p)| (l * factor).min(*p)).collect(),
            None => theta.lengthscales.iter().map(|l| l * factor).collect(),
        };
        theta.lengthscales = shrunk.clone();
        current = Some(shrunk);
        let surrogate = run.surrogate(&theta)?;
        let x = run.propose(&surrogate)?;
        let y = run.evaluate(t, &x)?;
        run.commit(x, y, None, None, Some(&theta), started)?;
    }
    Ok(())
}

fn run_wang_de_freitas<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize) -> Result<()> {
    for t in 1..=budget {
        let started = Instant::now();
        let mut theta = run.estimate(Loss::Observed)?;
        let surrogate = run.surrogate(&theta)?;
        let mut x = run.propose(&surrogate)?;
        let sigma = surrogate.gp.predict(&x)?.1.sqrt();
        if sigma < run.cfg.kappa {
            let z = surrogate.standardizer.forward_all(run.data.values());
            let s = rescale_for_kappa(run.data.points(), &z, &theta, &x, run.cfg.kappa)?;
            theta = scale_lengthscales(&theta, s);
            let rescaled = run.surrogate(&theta)?;
            x = run.propose(&rescaled)?;
        }
        let y = run.evaluate(t, &x)?;
        run.commit(x, y, None, None, Some(&theta), started)?;
    }
    Ok(())
}

fn run_rdexp3<R: Rng + ?Sized>(run: &mut Run<'_, R>, budget: usize) -> Result<()> {
    for t in 1..=budget {
        let started = Instant::now();
        let (x, theta) = if t % 2 == 1 {
            (run.random_point(), None)
        } else {
            let (x, theta) = run.acquisition_step(Loss::Consistent)?;
            (x, Some(theta))
        };
        let y = run.evaluate(t, &x)?;
        run.commit(x, y, None, None, theta.as_ref(), started)?;
    }
    Ok(())
}

/// Fits the surrogate a strategy would use on `data`: consistent-loss
/// hyperparameters for the pseudo-label strategies, MAP otherwise.
pub fn final_surrogate<R: Rng + ?Sized>(
    kind: StrategyKind,
    data: &Dataset,
    cfg: &BoConfig,
    rng: &mut R,
) -> Result<Surrogate> {
    let standardizer = Standardizer::fit(data.values());
    let theta = if kind.uses_consistent_loss() {
        let pseudo = sample_pseudo_dataset(data, &cfg.estimator, rng)?;
        estimate_map(
            &pseudo.random_points,
            &standardizer.forward_all(&pseudo.pseudo_values),
            data.bounds(),
            &cfg.estimator,
            &cfg.priors,
            None,
            rng,
        )?
        .theta
    } else {
        estimate_map(
            data.points(),
            &standardizer.forward_all(data.values()),
            data.bounds(),
            &cfg.estimator,
            &cfg.priors,
            None,
            rng,
        )?
        .theta
    };
    Surrogate::fit(data.points(), data.values(), &theta)
}

/// Initial design of `n` uniform points, observed through `objective`.
pub fn initial_design<R: Rng + ?Sized>(objective: &Objective, n: usize, rng: &mut R) -> Result<Dataset> {
    let mut data = Dataset::new(objective.bounds().clone());
    for _ in 0..n {
        let x = objective.bounds().sample(rng);
        let y = objective.observe(&x, rng)?;
        data.push(x, y)?;
    }
    Ok(data)
}

/// Concatenates the initial design and every traced observation.
pub fn dataset_after(init: &Dataset, trace: &RunTrace) -> Result<Dataset> {
    let mut data = init.clone();
    for r in &trace.records {
        data.push(r.x.clone(), r.y)?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("MAP_BO".parse::<StrategyKind>().unwrap(), StrategyKind::MapBo);
        assert!("mcmc".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn shrink_rule() {
        assert_eq!(shrink_factor(6, 6, 0.9, 2), 1.0);
        assert_eq!(shrink_factor(3, 6, 0.9, 2), 1.0);
        // 2^-0.45, mpmath
        assert_relative_eq!(shrink_factor(12, 6, 0.9, 2), 0.732_042_847_972_812_7, max_relative = 1e-14);
        let mut prev = 1.0;
        for t in 1..50 {
            let f = shrink_factor(t, 6, 0.9, 3);
            assert!(f <= prev);
            prev = f;
        }
    }

    #[test]
    fn standardizer_round_trip() {
        let s = Standardizer::fit(&[1.0, 3.0, 5.0]);
        assert_relative_eq!(s.forward(3.0), 0.0);
        let theta = Hyperparams::new(vec![0.5], 2.0, 0.1).unwrap();
        let orig = s.theta_to_original(&theta);
        assert_relative_eq!(orig.signal_variance, 2.0 * 8.0 / 3.0, max_relative = 1e-14);
        assert_eq!(Standardizer::fit(&[4.0, 4.0]).scale, 1.0);
    }
}
