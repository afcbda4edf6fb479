//! Monte Carlo for the wealth equation `dX = alpha^T (b dt + sigma(rho) dW)`.
//!
//! Every path owns a ChaCha8 stream keyed by `(seed, path index)`, so results
//! do not depend on how rayon schedules the work. Reductions run in path
//! order.

mod counterexample;
mod principle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::ThetaProcessSchedule;
use crate::error::{Error, Result};
use crate::market::{covariance_from, dot, CovMatrix, MarketParams};
use crate::solver::WorstCaseSolution;
use crate::strategy::{robust_strategy, FeedbackStrategy};

pub use counterexample::{counterexample_f, counterexample_limit, remark_counterexample, CounterexampleRow, CounterexampleTable, LimitCheck};
pub use principle::{
    assess_weak_principle, default_probe_schedules, default_probes, default_probe_strategies, verify_weak_principle, PrincipleReport,
    ProbeRule, ProbeSchedule, ProbeStrategy, ScheduleCheck, StrategyCheck,
};

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    /// Keep every `record_every`-th time node (the final node is always kept).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            n_steps: 256,
            seed: 42,
            antithetic: false,
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        SimConfig {
            n_paths,
            n_steps,
            seed,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidInput("n_paths must be at least 2".into()));
        }
        if self.n_steps < 1 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidInput("record_every must be at least 1".into()));
        }
        if self.antithetic && (self.n_paths % 2 == 1 || self.n_paths < 4) {
            return Err(Error::InvalidInput("antithetic sampling needs an even n_paths >= 4".into()));
        }
        Ok(())
    }

    /// Indices of the recorded steps.
    fn recorded_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = (0..=self.n_steps).step_by(self.record_every).collect();
        if *steps.last().unwrap_or(&0) != self.n_steps {
            steps.push(self.n_steps);
        }
        steps
    }

    fn rng_for(&self, path: usize) -> (ChaCha8Rng, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (stream, sign) = if self.antithetic {
            (path / 2, if path % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path, 1.0)
        };
        rng.set_stream(stream as u64);
        (rng, sign)
    }
}

/// Wealth-dependent allocation `alpha(t, x)`.
pub trait AllocationRule: Sync {
    fn allocate(&self, t: f64, x: f64, out: &mut [f64]);
}

impl AllocationRule for FeedbackStrategy {
    fn allocate(&self, _t: f64, x: f64, out: &mut [f64]) {
        let s = self.scale_at(x);
        for (o, v) in out.iter_mut().zip(&self.allocation_direction) {
            *o = s * v;
        }
    }
}

/// `alpha(x) = (target - x) * direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFeedback {
    pub target: f64,
    pub direction: Vec<f64>,
}

impl AllocationRule for LinearFeedback {
    fn allocate(&self, _t: f64, x: f64, out: &mut [f64]) {
        let s = self.target - x;
        for (o, v) in out.iter_mut().zip(&self.direction) {
            *o = s * v;
        }
    }
}

impl From<&FeedbackStrategy> for LinearFeedback {
    fn from(s: &FeedbackStrategy) -> Self {
        LinearFeedback {
            target: s.target_wealth(),
            direction: s.allocation_direction.clone(),
        }
    }
}

/// Fixed amounts held in each asset regardless of wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantAllocation(pub Vec<f64>);

impl AllocationRule for ConstantAllocation {
    fn allocate(&self, _t: f64, _x: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Recorded wealth, one row per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthPaths {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub n_paths: usize,
    pub antithetic: bool,
}

impl WealthPaths {
    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn at(&self, path: usize, node: usize) -> f64 {
        self.values[path * self.n_nodes() + node]
    }

    pub fn node(&self, node: usize) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.at(i, node)).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.node(self.n_nodes() - 1)
    }

    /// Mean of `f(path)` with its standard error. Antithetic pairs are
    /// averaged first so the error accounts for their correlation.
    pub fn mean_and_se(&self, f: impl Fn(usize) -> f64) -> (f64, f64) {
        mean_and_se(self.n_paths, self.antithetic, f)
    }
}

pub(crate) fn mean_and_se(n_paths: usize, antithetic: bool, f: impl Fn(usize) -> f64) -> (f64, f64) {
    let units: Vec<f64> = if antithetic {
        (0..n_paths / 2).map(|k| 0.5 * (f(2 * k) + f(2 * k + 1))).collect()
    } else {
        (0..n_paths).map(f).collect()
    };
    let m = units.len() as f64;
    let mean = units.iter().sum::<f64>() / m;
    if units.len() < 2 {
        return (mean, 0.0);
    }
    let var = units.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    #[serde(rename = "mean_XT")]
    pub mean_xt: f64,
    #[serde(rename = "var_XT")]
    pub var_xt: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "std_error_J")]
    pub std_error_j: f64,
    pub n_paths: usize,
}

/// Sample moments of `X_T` and `J = E X_T - lambda Var X_T`. The standard
/// error is the delta method, i.e. the spread of the influence values
/// `x - lambda (x - mean)^2`.
pub fn estimate_objective(paths: &WealthPaths, lambda: f64) -> Result<ObjectiveEstimate> {
    let terminal = paths.terminal();
    estimate_terminal(&terminal, lambda, paths.antithetic)
}

pub fn estimate_terminal(terminal: &[f64], lambda: f64, antithetic: bool) -> Result<ObjectiveEstimate> {
    let n = terminal.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two paths".into()));
    }
    let mean = terminal.iter().sum::<f64>() / n as f64;
    let var = (terminal.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).max(0.0);
    let (_, se) = mean_and_se(n, antithetic && n % 2 == 0, |i| {
        terminal[i] - lambda * (terminal[i] - mean).powi(2)
    });
    Ok(ObjectiveEstimate {
        mean_xt: mean,
        var_xt: var,
        j: mean - lambda * var,
        std_error_j: se,
        n_paths: n,
    })
}

/// Row of the `t, mean, var, se` summary table; `se` is the standard error
/// of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMoments {
    pub t: f64,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
}

pub fn node_moments(paths: &WealthPaths) -> Vec<NodeMoments> {
    (0..paths.n_nodes())
        .map(|k| {
            let (mean, se) = paths.mean_and_se(|i| paths.at(i, k));
            let n = paths.n_paths as f64;
            let mean_all = (0..paths.n_paths).map(|i| paths.at(i, k)).sum::<f64>() / n;
            let var = (0..paths.n_paths).map(|i| (paths.at(i, k) - mean_all).powi(2)).sum::<f64>() / (n - 1.0);
            NodeMoments {
                t: paths.times[k],
                mean,
                var,
                se,
            }
        })
        .collect()
}

struct Piece {
    b: Vec<f64>,
    cov: CovMatrix,
}

fn pieces(schedule: &ThetaProcessSchedule, params: &MarketParams) -> Result<Vec<Piece>> {
    schedule.validate_shape(params)?;
    schedule
        .values
        .iter()
        .map(|v| {
            Ok(Piece {
                b: v.b.clone(),
                cov: covariance_from(&v.rho, params)?,
            })
        })
        .collect()
}

fn node_times(cfg: &SimConfig, params: &MarketParams, steps: &[usize]) -> Vec<f64> {
    let dt = params.horizon / cfg.n_steps as f64;
    steps
        .iter()
        .map(|&k| if k == cfg.n_steps { params.horizon } else { k as f64 * dt })
        .collect()
}

/// Euler-Maruyama paths of the wealth equation, allocation refreshed every
/// step from the current wealth.
pub fn simulate_wealth<R: AllocationRule + ?Sized>(
    rule: &R,
    schedule: &ThetaProcessSchedule,
    params: &MarketParams,
    cfg: &SimConfig,
) -> Result<WealthPaths> {
    params.validate()?;
    cfg.validate()?;
    let pieces = pieces(schedule, params)?;
    let d = params.dim();
    let dt = params.horizon / cfg.n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let step_piece: Vec<usize> = (0..cfg.n_steps).map(|k| schedule.piece_at(k as f64 * dt)).collect();
    let steps = cfg.recorded_steps();
    let times = node_times(cfg, params, &steps);
    let n_nodes = steps.len();
    let mut values = vec![0.0; cfg.n_paths * n_nodes];

    values.par_chunks_mut(n_nodes).enumerate().for_each(|(path, row)| {
        let (mut rng, sign) = cfg.rng_for(path);
        let mut alpha = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut x = params.x0;
        row[0] = x;
        let mut slot = 1;
        for k in 0..cfg.n_steps {
            let piece = &pieces[step_piece[k]];
            rule.allocate(k as f64 * dt, x, &mut alpha);
            for v in z.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = sign * g;
            }
            let mut incr = 0.0;
            for i in 0..d {
                let noise: f64 = (0..=i).map(|j| piece.cov.factor(i, j) * z[j]).sum();
                incr += alpha[i] * (piece.b[i] * dt + noise * sqrt_dt);
            }
            x += incr;
            if slot < n_nodes && steps[slot] == k + 1 {
                row[slot] = x;
                slot += 1;
            }
        }
    });

    Ok(WealthPaths {
        times,
        values,
        n_paths: cfg.n_paths,
        antithetic: cfg.antithetic,
    })
}

/// Paths of a linear feedback rule without time-discretization error.
///
/// With `Lambda = target - X` the rule gives `dLambda = -Lambda dir^T (b dt + sigma dW)`,
/// so `log Lambda` has Gaussian increments on each constant piece of the
/// schedule. Requires `target > x0`.
pub fn simulate_linear_exact(
    rule: &LinearFeedback,
    schedule: &ThetaProcessSchedule,
    params: &MarketParams,
    cfg: &SimConfig,
) -> Result<WealthPaths> {
    params.validate()?;
    cfg.validate()?;
    let lead = rule.target - params.x0;
    if !(lead > 0.0) {
        return Err(Error::InvalidInput("exact simulation needs target wealth above x0".into()));
    }
    let pieces = pieces(schedule, params)?;
    // per-piece drift and variance rate of log Lambda
    let rates: Vec<(f64, f64)> = pieces
        .iter()
        .map(|p| {
            let v = p.cov.matrix().mul_vec(&rule.direction);
            let var = dot(&rule.direction, &v);
            (-dot(&p.b, &rule.direction) - 0.5 * var, var)
        })
        .collect();
    let dt = params.horizon / cfg.n_steps as f64;
    let steps = cfg.recorded_steps();
    let times = node_times(cfg, params, &steps);

    // Gaussian moments of log Lambda over each simulated step, integrated
    // across schedule breakpoints.
    let moments: Vec<(f64, f64)> = (0..cfg.n_steps)
        .map(|k| {
            let t0 = k as f64 * dt;
            let t1 = if k + 1 == cfg.n_steps { params.horizon } else { (k + 1) as f64 * dt };
            let (mut mean, mut var) = (0.0, 0.0);
            let mut a = t0;
            let mut p = schedule.piece_at(t0);
            while a < t1 {
                let end = schedule.breakpoints.get(p + 1).copied().unwrap_or(f64::INFINITY).min(t1);
                mean += rates[p].0 * (end - a);
                var += rates[p].1 * (end - a);
                a = end;
                p += 1;
            }
            (mean, var.max(0.0).sqrt())
        })
        .collect();

    let n_nodes = steps.len();
    let mut values = vec![0.0; cfg.n_paths * n_nodes];
    values.par_chunks_mut(n_nodes).enumerate().for_each(|(path, row)| {
        let (mut rng, sign) = cfg.rng_for(path);
        let mut log_n = 0.0;
        row[0] = params.x0;
        let mut slot = 1;
        for (k, (mean, sd)) in moments.iter().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            log_n += mean + sd * sign * g;
            if slot < n_nodes && steps[slot] == k + 1 {
                row[slot] = rule.target - lead * log_n.exp();
                slot += 1;
            }
        }
    });

    Ok(WealthPaths {
        times,
        values,
        n_paths: cfg.n_paths,
        antithetic: cfg.antithetic,
    })
}

/// Optimal wealth `X* = x0 + e^{R* T} / (2 lambda) (1 - N*)` with `N*`
/// simulated exactly. A no-trade solution gives `X* = x0` on every path.
pub fn simulate_optimal_exact(
    solution: &WorstCaseSolution,
    schedule: &ThetaProcessSchedule,
    params: &MarketParams,
    cfg: &SimConfig,
) -> Result<WealthPaths> {
    let strategy = robust_strategy(solution, params)?;
    simulate_linear_exact(&LinearFeedback::from(&strategy), schedule, params, cfg)
}
