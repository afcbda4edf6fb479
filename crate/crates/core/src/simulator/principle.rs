//! Monte Carlo check of the weak optimality principle.
//!
//! With `V_t = K_t (X_t - E X_t)^2 + X_t + chi_t` built from the worst-case
//! coefficients:
//! (ii) under `theta*`, `t -> E V_t` does not increase for any strategy;
//! (iii) under any scenario, `E V_T >= V_0` for the optimal strategy.
//! The second statement is `J(alpha*, theta) >= V_0`. The run also checks
//! `J(alpha, theta*) <= V_0`.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{contains, project_rho, sample, AmbiguitySpec, DriftSet, ThetaProcessSchedule};
use crate::error::{Error, Result};
use crate::market::{covariance_from, MarketParams, RhoVector, ThetaPoint};
use crate::solver::WorstCaseSolution;
use crate::strategy::{robust_strategy, value_v0, FeedbackStrategy, ValueCoefficients};

use super::{
    estimate_objective, simulate_optimal_exact, simulate_wealth, AllocationRule, ConstantAllocation, LinearFeedback,
    SimConfig, WealthPaths,
};

/// Standard errors of slack allowed before a check counts as failed.
const SLACK: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeRule {
    Feedback(LinearFeedback),
    Constant { amounts: Vec<f64> },
}

impl AllocationRule for ProbeRule {
    fn allocate(&self, t: f64, x: f64, out: &mut [f64]) {
        match self {
            ProbeRule::Feedback(rule) => rule.allocate(t, x, out),
            ProbeRule::Constant { amounts } => out.copy_from_slice(amounts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStrategy {
    pub name: String,
    pub rule: ProbeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub name: String,
    pub schedule: ThetaProcessSchedule,
}

fn feedback(name: String, target: f64, direction: Vec<f64>) -> ProbeStrategy {
    ProbeStrategy {
        name,
        rule: ProbeRule::Feedback(LinearFeedback { target, direction }),
    }
}

/// Rotate `v` by `angle` in the plane of its two largest components.
fn rotate(v: &[f64], angle: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*b].abs().total_cmp(&v[*a].abs()));
    let (i, j) = (idx[0], idx[1]);
    let (s, c) = angle.sin_cos();
    let mut out = v.to_vec();
    out[i] = c * v[i] - s * v[j];
    out[j] = s * v[i] + c * v[j];
    out
}

/// Scaled and rotated copies of the optimal rule, the zero rule and the
/// constant allocation the optimal rule starts with.
pub fn default_probe_strategies(strategy: &FeedbackStrategy) -> Vec<ProbeStrategy> {
    let target = strategy.target_wealth();
    let dir = &strategy.allocation_direction;
    let scaled = |k: f64| dir.iter().map(|v| k * v).collect::<Vec<f64>>();
    let mut probes = vec![feedback("optimal".into(), target, dir.clone())];
    for k in [0.5, 1.5, 2.0] {
        probes.push(feedback(format!("scaled x{k}"), target, scaled(k)));
    }
    probes.push(ProbeStrategy {
        name: "zero".into(),
        rule: ProbeRule::Constant {
            amounts: vec![0.0; dir.len()],
        },
    });
    if dir.len() >= 2 {
        for (name, angle) in [("rotated +45deg", std::f64::consts::FRAC_PI_4), ("rotated -45deg", -std::f64::consts::FRAC_PI_4)] {
            probes.push(feedback(name.into(), target, rotate(dir, angle)));
        }
    } else {
        for k in [0.25, 3.0] {
            probes.push(feedback(format!("scaled x{k}"), target, scaled(k)));
        }
    }
    probes.push(ProbeStrategy {
        name: "constant".into(),
        rule: ProbeRule::Constant {
            amounts: strategy.evaluate_alpha(0.0, strategy.x0),
        },
    });
    probes
}

fn constant(name: &str, theta: ThetaPoint) -> ProbeSchedule {
    ProbeSchedule {
        name: name.into(),
        schedule: ThetaProcessSchedule::constant(theta),
    }
}

/// Extreme points of the set: drift on the boundary at the corners of the
/// correlation box that are positive definite.
fn extremes(spec: &AmbiguitySpec, params: &MarketParams) -> Vec<(String, ThetaPoint)> {
    let d = params.dim();
    let (lo, hi) = spec.gamma.bounds(d);
    let mut corners = vec![("lower", RhoVector(lo)), ("upper", RhoVector(hi))];
    corners.retain(|(_, r)| covariance_from(r, params).is_ok());
    let mut out = Vec::new();
    match &spec.drift {
        DriftSet::Ellipsoidal { b_hat, delta } => {
            for (name, rho) in corners {
                let Ok(cov) = covariance_from(&rho, params) else { continue };
                let mut e = vec![0.0; d];
                e[0] = *delta;
                let shift = cov.color(&e);
                for (sign, tag) in [(-1.0, "-"), (1.0, "+")] {
                    let b = b_hat.iter().zip(&shift).map(|(c, s)| c + sign * s).collect();
                    out.push((format!("corner rho={name} drift{tag}"), ThetaPoint::new(b, rho.clone())));
                }
            }
        }
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => {
            for (name, rho) in corners {
                out.push((format!("corner rho={name} drift=lower"), ThetaPoint::new(delta_lower.clone(), rho.clone())));
                out.push((format!("corner rho={name} drift=upper"), ThetaPoint::new(delta_upper.clone(), rho)));
            }
        }
    }
    out.retain(|(_, t)| contains(spec, t, params));
    let mut seen: Vec<ThetaPoint> = Vec::new();
    out.retain(|(_, t)| {
        let fresh = !seen.contains(t);
        seen.push(t.clone());
        fresh
    });
    out
}

fn center(spec: &AmbiguitySpec, params: &MarketParams) -> Result<ThetaPoint> {
    let d = params.dim();
    let rho = project_rho(spec, &spec.gamma.midpoint(d))?;
    let b = match &spec.drift {
        DriftSet::Ellipsoidal { b_hat, .. } => b_hat.clone(),
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => delta_lower.iter().zip(delta_upper).map(|(l, h)| 0.5 * (l + h)).collect(),
    };
    Ok(ThetaPoint::new(b, rho))
}

/// Eight scenarios: the center, `theta*`, extreme points of the set, and a
/// schedule switching from `theta*` to an extreme point halfway. Random
/// members of the set fill any shortfall.
pub fn default_probe_schedules(
    solution: &WorstCaseSolution,
    spec: &AmbiguitySpec,
    params: &MarketParams,
) -> Result<Vec<ProbeSchedule>> {
    const COUNT: usize = 8;
    let mut out = vec![constant("center", center(spec, params)?), constant("worst case", solution.theta_star.clone())];
    let ext = extremes(spec, params);
    if let Some((name, far)) = ext.last() {
        out.push(ProbeSchedule {
            name: format!("switch to {name}"),
            schedule: ThetaProcessSchedule {
                breakpoints: vec![0.0, 0.5 * params.horizon],
                values: vec![solution.theta_star.clone(), far.clone()],
            },
        });
    }
    for (name, theta) in ext {
        if out.len() == COUNT {
            break;
        }
        out.push(constant(&name, theta));
    }
    if out.len() < COUNT {
        for (k, theta) in sample(spec, params, COUNT - out.len(), 0x5eed)?.into_iter().enumerate() {
            out.push(constant(&format!("sample {k}"), theta));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCheck {
    pub name: String,
    /// Largest `E V_{t_{k+1}} - E V_{t_k} - 3 SE` over the grid; positive
    /// means an increase beyond noise.
    pub monotonicity_margin: f64,
    pub j: f64,
    pub std_error_j: f64,
    /// `V_0 + 3 SE - J`; negative means the probe beat the optimum.
    pub optimality_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheck {
    pub name: String,
    /// `E V_T - V_0`, which equals `J(alpha*, theta) - V_0`.
    pub value_gap: f64,
    pub std_error: f64,
    /// `value_gap + 3 SE`; negative means the scenario hurt the optimal
    /// strategy more than the worst case does.
    pub margin: f64,
    /// Whether `t -> E V_t` never drops beyond noise along the grid.
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleReport {
    pub v0: f64,
    pub strategies: Vec<StrategyCheck>,
    pub schedules: Vec<ScheduleCheck>,
    pub passed: bool,
}

impl PrincipleReport {
    /// First failing probe and its margin.
    pub fn first_violation(&self) -> Option<(String, f64)> {
        for s in &self.strategies {
            if s.monotonicity_margin > 0.0 {
                return Some((format!("strategy '{}' (monotonicity)", s.name), s.monotonicity_margin));
            }
            if s.optimality_margin < 0.0 {
                return Some((format!("strategy '{}' (objective)", s.name), s.optimality_margin));
            }
        }
        self.schedules
            .iter()
            .find(|s| s.margin < 0.0)
            .map(|s| (format!("schedule '{}'", s.name), s.margin))
    }
}

/// Per-path value process at node `k`, with the node's sample mean plugged
/// in for `E X_t`.
fn value_at(paths: &WealthPaths, coef: &ValueCoefficients, k: usize) -> Vec<f64> {
    let t = paths.times[k];
    let x = paths.node(k);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let (kt, yt, chi) = (coef.k(t), coef.y(t), coef.chi(t));
    x.iter().map(|v| kt * (v - mean).powi(2) + yt * v + chi).collect()
}

/// Run every probe and report the margins without failing.
pub fn assess_weak_principle(
    solution: &WorstCaseSolution,
    spec: &AmbiguitySpec,
    params: &MarketParams,
    cfg: &SimConfig,
    probe_strategies: &[ProbeStrategy],
    probe_schedules: &[ProbeSchedule],
) -> Result<PrincipleReport> {
    cfg.validate()?;
    let d = params.dim();
    let v0 = value_v0(solution, params);
    let coef = ValueCoefficients::new(solution.r_star, params);
    let worst = ThetaProcessSchedule::constant(solution.theta_star.clone());

    let mut strategies = Vec::with_capacity(probe_strategies.len());
    for probe in probe_strategies {
        let len = match &probe.rule {
            ProbeRule::Feedback(r) => r.direction.len(),
            ProbeRule::Constant { amounts } => amounts.len(),
        };
        if len != d {
            return Err(Error::Dimension(format!("probe '{}' has {len} components", probe.name)));
        }
        let paths = simulate_wealth(&probe.rule, &worst, params, cfg)?;
        let mut margin = f64::NEG_INFINITY;
        let mut prev = value_at(&paths, &coef, 0);
        for k in 1..paths.n_nodes() {
            let next = value_at(&paths, &coef, k);
            let (diff, se) = paths.mean_and_se(|i| next[i] - prev[i]);
            margin = margin.max(diff - SLACK * se);
            prev = next;
        }
        let est = estimate_objective(&paths, params.lambda)?;
        strategies.push(StrategyCheck {
            name: probe.name.clone(),
            monotonicity_margin: margin,
            j: est.j,
            std_error_j: est.std_error_j,
            optimality_margin: v0 + SLACK * est.std_error_j - est.j,
        });
    }

    let mut schedules = Vec::with_capacity(probe_schedules.len());
    for probe in probe_schedules {
        probe.schedule.validate(spec, params).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::InvalidInput(format!("schedule '{}': {msg}", probe.name)),
            other => other,
        })?;
        let paths = simulate_optimal_exact(solution, &probe.schedule, params, cfg)?;
        let est = estimate_objective(&paths, params.lambda)?;
        let mut nondecreasing = true;
        let mut prev = value_at(&paths, &coef, 0);
        for k in 1..paths.n_nodes() {
            let next = value_at(&paths, &coef, k);
            let (diff, se) = paths.mean_and_se(|i| next[i] - prev[i]);
            if diff + SLACK * se < 0.0 {
                nondecreasing = false;
            }
            prev = next;
        }
        let gap = est.j - v0;
        schedules.push(ScheduleCheck {
            name: probe.name.clone(),
            value_gap: gap,
            std_error: est.std_error_j,
            margin: gap + SLACK * est.std_error_j,
            nondecreasing,
        });
    }

    let mut report = PrincipleReport {
        v0,
        strategies,
        schedules,
        passed: true,
    };
    report.passed = report.first_violation().is_none();
    Ok(report)
}

/// As [`assess_weak_principle`], failing with the first violated probe.
pub fn verify_weak_principle(
    solution: &WorstCaseSolution,
    spec: &AmbiguitySpec,
    params: &MarketParams,
    cfg: &SimConfig,
    probe_strategies: &[ProbeStrategy],
    probe_schedules: &[ProbeSchedule],
) -> Result<PrincipleReport> {
    let report = assess_weak_principle(solution, spec, params, cfg, probe_strategies, probe_schedules)?;
    match report.first_violation() {
        Some((probe, margin)) => Err(Error::PrincipleViolated { probe, margin }),
        None => Ok(report),
    }
}

/// Default probes for a solved instance.
pub fn default_probes(
    solution: &WorstCaseSolution,
    spec: &AmbiguitySpec,
    params: &MarketParams,
) -> Result<(Vec<ProbeStrategy>, Vec<ProbeSchedule>)> {
    let strategy = robust_strategy(solution, params)?;
    Ok((default_probe_strategies(&strategy), default_probe_schedules(solution, spec, params)?))
}

impl From<ConstantAllocation> for ProbeRule {
    fn from(c: ConstantAllocation) -> Self {
        ProbeRule::Constant { amounts: c.0 }
    }
}
