//! Experiment driver: repeated runs of several strategies on one objective,
//! per-iteration CSV traces, regret and surrogate-error summaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::{by_name, Objective};
use crate::error::{Error, Result};
use crate::estimation::EstimatorConfig;
use crate::gp::{Hyperparams, LossKind, Predictor};
use crate::strategies::{dataset_after, final_surrogate, initial_design, run_strategy, BoConfig, StrategyKind};
use crate::trace::{Arm, RunTrace, TraceRecord};

pub const TRACE_FILE: &str = "traces.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// rng streams derived from one run seed.
const STREAM_INIT: u64 = 0;
const STREAM_STRATEGY: u64 = 1;
const STREAM_SURROGATE: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `f* - max_t f(x_t)` with the noise-free objective at the queried points.
pub fn simple_regret(trace: &RunTrace, objective: &Objective) -> Result<f64> {
    regret_curve(trace, objective)?
        .last()
        .copied()
        .ok_or_else(|| Error::InvalidInput("empty trace has no regret".into()))
}

/// Simple regret after each iteration.
pub fn regret_curve(trace: &RunTrace, objective: &Objective) -> Result<Vec<f64>> {
    let optimum = objective
        .known_optimum()
        .ok_or_else(|| Error::Config(format!("objective '{}' has no known optimum", objective.name())))?
        .value;
    let mut best = f64::NEG_INFINITY;
    trace
        .records
        .iter()
        .map(|r| {
            best = best.max(objective.value(&r.x)?);
            Ok(optimum - best)
        })
        .collect()
}

/// Points at which surrogate error is measured: a full grid for `d <= 2`,
/// otherwise a Latin hypercube from a fixed seed.
pub fn evaluation_points(objective: &Objective, grid_size: usize) -> Result<Vec<Vec<f64>>> {
    if grid_size < 100 {
        return Err(Error::InvalidInput(format!("evaluation grid needs at least 100 points, got {grid_size}")));
    }
    let bounds = objective.bounds();
    let d = bounds.dim();
    if d <= 2 {
        let per_axis = (grid_size as f64).powf(1.0 / d as f64).ceil() as usize;
        let axis = |h: usize| -> Vec<f64> {
            (0..per_axis)
                .map(|i| bounds.lower(h) + bounds.width(h) * i as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let axes: Vec<Vec<f64>> = (0..d).map(axis).collect();
        let mut out = vec![Vec::new()];
        for a in &axes {
            out = out.iter().flat_map(|p| a.iter().map(move |&v| [p.as_slice(), &[v]].concat())).collect();
        }
        Ok(out)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let n = grid_size;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
        for h in 0..d {
            let mut strata: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                strata.swap(i, rng.random_range(0..=i));
            }
            cols.push(
                strata
                    .into_iter()
                    .map(|s| bounds.lower(h) + bounds.width(h) * (s as f64 + rng.random::<f64>()) / n as f64)
                    .collect(),
            );
        }
        Ok((0..n).map(|i| (0..d).map(|h| cols[h][i]).collect()).collect())
    }
}

/// Mean squared error between a predictor's mean and the noise-free objective.
pub fn surrogate_mse(predictor: &impl Predictor, objective: &Objective, grid_size: usize) -> Result<f64> {
    let points = evaluation_points(objective, grid_size)?;
    let preds = predictor.predict_many(&points)?;
    let mut total = 0.0;
    for (x, (mean, _)) in points.iter().zip(preds) {
        total += (mean - objective.value(x)?).powi(2);
    }
    Ok(total / points.len() as f64)
}

/// Mean and standard error (sample std over `sqrt(n)`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn default_strategies() -> Vec<String> {
    StrategyKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: String,
    /// Only used by objectives with a configurable dimension.
    pub dimension: Option<usize>,
    pub strategies: Vec<String>,
    pub budget: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Size of the initial uniform design; `3 d` when unset.
    pub init_points: Option<usize>,
    pub mt_factor: f64,
    pub ucb_mult: f64,
    /// Observation noise std; 1% of the objective's range when unset.
    pub noise_std: Option<f64>,
    pub mse_grid: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub candidates: usize,
    pub refine_steps: usize,
    pub loss: LossKind,
    pub kappa: f64,
    pub shrink_exponent: f64,
    pub record_wall_time: bool,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let bo = BoConfig::default();
        Self {
            objective: "branin".into(),
            dimension: None,
            strategies: default_strategies(),
            budget: 50,
            repeats: 10,
            seed: 0,
            init_points: None,
            mt_factor: bo.estimator.mt_factor,
            ucb_mult: bo.acquisition.ucb_multiplier,
            noise_std: None,
            mse_grid: 1024,
            restarts: bo.estimator.restarts,
            max_iters: bo.estimator.max_iters,
            candidates: bo.acquisition.candidates,
            refine_steps: bo.acquisition.refine_steps,
            loss: bo.estimator.loss_kind,
            kappa: bo.kappa,
            shrink_exponent: bo.shrink_exponent,
            record_wall_time: false,
            out_dir: PathBuf::from("results"),
            threads: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn strategy_kinds(&self) -> Result<Vec<StrategyKind>> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        let kinds = self.strategies.iter().map(|s| s.parse()).collect::<Result<Vec<StrategyKind>>>()?;
        for (i, k) in kinds.iter().enumerate() {
            if kinds[..i].contains(k) {
                return Err(Error::Config(format!("strategy '{k}' listed twice")));
            }
        }
        Ok(kinds)
    }

    pub fn objective(&self) -> Result<Objective> {
        let base = by_name(&self.objective, self.dimension)?;
        let noise = self.noise_std.unwrap_or_else(|| base.default_noise_std());
        base.with_noise_std(noise).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bo_config(&self) -> BoConfig {
        let mut bo = BoConfig::default();
        bo.estimator = EstimatorConfig {
            mt_factor: self.mt_factor,
            restarts: self.restarts,
            max_iters: self.max_iters,
            loss_kind: self.loss,
        };
        bo.acquisition.ucb_multiplier = self.ucb_mult;
        bo.acquisition.candidates = self.candidates;
        bo.acquisition.refine_steps = self.refine_steps;
        bo.kappa = self.kappa;
        bo.shrink_exponent = self.shrink_exponent;
        bo.record_wall_time = self.record_wall_time;
        bo
    }

    pub fn init_size(&self, dim: usize) -> usize {
        self.init_points.unwrap_or(3 * dim)
    }

    /// Checks every setting before any run starts.
    pub fn validate(&self) -> Result<()> {
        self.strategy_kinds()?;
        let objective = self.objective()?;
        if self.budget == 0 || self.repeats == 0 {
            return Err(Error::Config("budget and repeats must be positive".into()));
        }
        if self.init_size(objective.dim()) == 0 {
            return Err(Error::Config("init_points must be positive".into()));
        }
        if self.mse_grid < 100 {
            return Err(Error::Config(format!("mse_grid must be at least 100, got {}", self.mse_grid)));
        }
        let bo = self.bo_config();
        bo.estimator.validate().map_err(|e| Error::Config(e.to_string()))?;
        bo.acquisition.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the settings that influence results (output directory and
    /// thread count excluded).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.threads = 0;
        canonical.record_wall_time = false;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// One (strategy, repeat) cell.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub strategy: StrategyKind,
    pub run_id: usize,
    pub trace: RunTrace,
    pub regret_curve: Vec<f64>,
    pub final_regret: f64,
    pub surrogate_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub strategy: String,
    pub run_id: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    pub final_regret_mean: f64,
    pub final_regret_se: f64,
    pub mse_mean: f64,
    pub mse_se: f64,
    pub regret_curve_mean: Vec<f64>,
    pub regret_curve_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub strategies: Vec<StrategySummary>,
    pub failures: Vec<CellFailure>,
}

impl ExperimentSummary {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs one cell. Seeds are shared across strategies so every strategy sees
/// the same initial design for a given repeat.
pub fn run_cell(
    config: &ExperimentConfig,
    objective: &Objective,
    kind: StrategyKind,
    run_id: usize,
) -> Result<RunResult> {
    let seed = config.seed.wrapping_add(run_id as u64);
    let bo = config.bo_config();
    let init = initial_design(objective, config.init_size(objective.dim()), &mut stream_rng(seed, STREAM_INIT))?;
    let mut trace = run_strategy(kind, objective, config.budget, &init, &bo, &mut stream_rng(seed, STREAM_STRATEGY))?;
    trace.seed = seed;
    trace.config_hash = config.hash();
    let regret_curve = regret_curve(&trace, objective)?;
    let final_regret = *regret_curve.last().expect("budget is positive");
    let data = dataset_after(&init, &trace)?;
    let surrogate = final_surrogate(kind, &data, &bo, &mut stream_rng(seed, STREAM_SURROGATE))?;
    let surrogate_mse = surrogate_mse(&surrogate, objective, config.mse_grid)?;
    Ok(RunResult { strategy: kind, run_id, trace, regret_curve, final_regret, surrogate_mse })
}

fn summarize(kind: StrategyKind, runs: &[&RunResult]) -> StrategySummary {
    let regrets: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
    let mses: Vec<f64> = runs.iter().map(|r| r.surrogate_mse).collect();
    let (final_regret_mean, final_regret_se) = mean_se(&regrets);
    let (mse_mean, mse_se) = mean_se(&mses);
    let len = runs.iter().map(|r| r.regret_curve.len()).min().unwrap_or(0);
    let (regret_curve_mean, regret_curve_se) = (0..len)
        .map(|t| mean_se(&runs.iter().map(|r| r.regret_curve[t]).collect::<Vec<_>>()))
        .unzip();
    StrategySummary {
        strategy: kind.name().to_string(),
        runs: runs.len(),
        final_regret_mean,
        final_regret_se,
        mse_mean,
        mse_se,
        regret_curve_mean,
        regret_curve_se,
    }
}

/// Refuses to overwrite results produced by a different configuration.
fn check_out_dir(config: &ExperimentConfig, hash: &str) -> Result<()> {
    let summary_path = config.out_dir.join(SUMMARY_FILE);
    if summary_path.exists() {
        let existing: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary_path)?)?;
        let old = existing.get("config_hash").and_then(|v| v.as_str()).unwrap_or("");
        if old != hash {
            return Err(Error::Config(format!(
                "{} holds results for config {old}, refusing to overwrite with {hash}",
                config.out_dir.display()
            )));
        }
    }
    Ok(())
}

/// Runs every cell, writes the trace CSV and summary JSON into `out_dir`.
/// Failed cells are reported in the summary; the rest still complete.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentSummary, Vec<RunResult>)> {
    config.validate()?;
    let kinds = config.strategy_kinds()?;
    let objective = config.objective()?;
    let hash = config.hash();
    check_out_dir(config, &hash)?;

    let cells: Vec<(StrategyKind, usize)> =
        kinds.iter().flat_map(|&k| (0..config.repeats).map(move |r| (k, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RunResult>> =
        pool.install(|| cells.par_iter().map(|&(k, r)| run_cell(config, &objective, k, r)).collect());

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for ((kind, run_id), outcome) in cells.into_iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => failures.push(CellFailure {
                strategy: kind.name().to_string(),
                run_id,
                seed: config.seed.wrapping_add(run_id as u64),
                error: e.to_string(),
            }),
        }
    }
    let strategies = kinds
        .iter()
        .map(|&k| {
            let runs: Vec<&RunResult> = results.iter().filter(|r| r.strategy == k).collect();
            summarize(k, &runs)
        })
        .collect();
    let summary = ExperimentSummary { config_hash: hash.clone(), config: config.clone(), strategies, failures };

    fs::create_dir_all(&config.out_dir)?;
    let traces: Vec<(usize, &RunTrace)> = results.iter().map(|r| (r.run_id, &r.trace)).collect();
    write_traces(&config.out_dir.join(TRACE_FILE), &hash, objective.dim(), &traces)?;
    fs::write(config.out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok((summary, results))
}

fn trace_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["run_id", "strategy", "objective", "seed", "t"].iter().map(|s| s.to_string()).collect();
    h.extend((0..dim).map(|i| format!("x{i}")));
    h.extend(["y", "best_so_far", "arm", "scaled_reward"].iter().map(|s| s.to_string()));
    h.extend((0..dim).map(|i| format!("ls{i}")));
    h.extend(["sigf2", "noise2", "wall_ms"].iter().map(|s| s.to_string()));
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes traces as CSV, preceded by a `# config_hash:` comment line.
pub fn write_traces(path: &Path, config_hash: &str, dim: usize, traces: &[(usize, &RunTrace)]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# config_hash: {config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(trace_header(dim))?;
    for (run_id, trace) in traces {
        for r in &trace.records {
            let mut row = vec![
                run_id.to_string(),
                trace.strategy.clone(),
                trace.objective.clone(),
                trace.seed.to_string(),
                r.t.to_string(),
            ];
            row.extend(r.x.iter().map(|v| v.to_string()));
            row.extend([r.y.to_string(), r.best_so_far.to_string(), opt(r.arm), opt(r.scaled_reward)]);
            match &r.theta_hat {
                Some(th) => {
                    row.extend(th.lengthscales.iter().map(|v| v.to_string()));
                    row.extend([th.signal_variance.to_string(), th.noise_variance.to_string()]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), dim + 2)),
            }
            row.push(opt(r.wall_ms));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::InvalidInput(format!("cannot parse {what} from '{s}'")))
}

fn parse_opt<T: std::str::FromStr>(s: &str, what: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(s, what).map(Some)
    }
}

/// Traces read back from a CSV written by [`write_traces`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub config_hash: String,
    /// `(run_id, trace)` in file order.
    pub traces: Vec<(usize, RunTrace)>,
}

pub fn read_traces(path: &Path) -> Result<TraceFile> {
    let text = fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let config_hash = first
        .strip_prefix("# config_hash: ")
        .ok_or_else(|| Error::InvalidInput("trace file lacks a config_hash line".into()))?
        .trim()
        .to_string();
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader.headers()?.clone();
    let dim = header.iter().filter(|h| h.starts_with('x')).count();
    if header.len() != trace_header(dim).len() {
        return Err(Error::InvalidInput("unexpected trace header".into()));
    }
    let mut traces: Vec<(usize, RunTrace)> = Vec::new();
    let mut index: BTreeMap<(String, usize), usize> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let run_id: usize = parse_field(&row[0], "run_id")?;
        let key = (row[1].to_string(), run_id);
        let slot = *index.entry(key).or_insert_with(|| {
            let mut trace = RunTrace::new(&row[1], &row[2], 0);
            trace.config_hash = config_hash.clone();
            traces.push((run_id, trace));
            traces.len() - 1
        });
        let trace = &mut traces[slot].1;
        trace.seed = parse_field(&row[3], "seed")?;
        let mut c = 5;
        let x = (0..dim).map(|i| parse_field(&row[c + i], "x")).collect::<Result<Vec<f64>>>()?;
        c += dim;
        let y: f64 = parse_field(&row[c], "y")?;
        let best_so_far: f64 = parse_field(&row[c + 1], "best_so_far")?;
        let arm: Option<Arm> = parse_opt(&row[c + 2], "arm")?;
        let scaled_reward: Option<f64> = parse_opt(&row[c + 3], "scaled_reward")?;
        c += 4;
        let ls = (0..dim).map(|i| parse_opt::<f64>(&row[c + i], "lengthscale")).collect::<Result<Vec<_>>>()?;
        let sigf2: Option<f64> = parse_opt(&row[c + dim], "sigf2")?;
        let noise2: Option<f64> = parse_opt(&row[c + dim + 1], "noise2")?;
        let theta_hat = match (ls.iter().copied().collect::<Option<Vec<f64>>>(), sigf2, noise2) {
            (Some(l), Some(s), Some(n)) => Some(Hyperparams { lengthscales: l, signal_variance: s, noise_variance: n }),
            _ => None,
        };
        let wall_ms: Option<f64> = parse_opt(&row[c + dim + 2], "wall_ms")?;
        trace.records.push(TraceRecord {
            t: parse_field(&row[4], "t")?,
            x,
            y,
            best_so_far,
            arm,
            scaled_reward,
            theta_hat,
            wall_ms,
        });
        trace.budget = trace.records.len();
    }
    Ok(TraceFile { config_hash, traces })
}
