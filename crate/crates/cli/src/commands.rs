//! Subcommand bodies. Each returns the finished document plus an optional
//! failure that decides the exit code after the document is written.

use robustmv_core::ambiguity::sample;
use robustmv_core::market::{is_positive_definite, min_pivot, risk_premium, risk_premium_gradients, RhoVector};
use robustmv_core::simulator::{
    assess_weak_principle, default_probe_schedules, default_probe_strategies, estimate_objective, node_moments,
    simulate_wealth, NodeMoments, PrincipleReport, ProbeSchedule,
};
use robustmv_core::solver::{grid_oracle, solve};
use robustmv_core::strategy::{classify, robust_strategy, strategy_report, value_v0, StrategyReport};
use robustmv_core::{
    AmbiguitySpec, DriftSet, MarketParams, ObjectiveEstimate, ThetaPoint, ThetaProcessSchedule, WorstCaseSolution,
};
use serde::Serialize;

use crate::config::{Format, LoadedConfig, ModelConfig};
use crate::output::{number, to_csv, to_json};
use crate::CliError;

pub struct Outcome {
    pub bytes: Vec<u8>,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(bytes: Vec<u8>) -> Self {
        Outcome { bytes, failure: None }
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|v| number(*v)).collect::<Vec<_>>().join(";")
}

/// Grid resolution per axis when none is given: fine for one axis, 51 for
/// up to three, coarser beyond so the lattice stays near a million nodes.
fn default_resolution(spec: &AmbiguitySpec, params: &MarketParams) -> usize {
    let d = params.dim();
    let (lo, hi) = spec.gamma.bounds(d);
    let mut axes = lo.iter().zip(&hi).filter(|(l, h)| l != h).count();
    if let DriftSet::Product {
        delta_lower,
        delta_upper,
    } = &spec.drift
    {
        axes += delta_lower.iter().zip(delta_upper).filter(|(l, h)| l != h).count();
    }
    match axes {
        0 | 1 => 2001,
        2 | 3 => 51,
        n => (1e6f64.powf(1.0 / n as f64).floor() as usize).max(2),
    }
}

/// Allowed `|r_closed - r_oracle|`.
fn oracle_bound(spec: &AmbiguitySpec, params: &MarketParams) -> f64 {
    if spec.gamma.bounds(params.dim()).0.len() <= 1 {
        1e-3
    } else {
        5e-3
    }
}

#[derive(Serialize)]
struct OracleCheck {
    resolution: usize,
    r_oracle: f64,
    gap: f64,
    bound: f64,
    passed: bool,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    #[serde(flatten)]
    solution: &'a WorstCaseSolution,
    strategy: &'a StrategyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_check: Option<OracleCheck>,
}

pub fn cmd_solve(loaded: &LoadedConfig, oracle_check: bool, resolution: Option<usize>) -> Result<Outcome, CliError> {
    if !loaded.config.sweep.is_empty() {
        return sweep_table(loaded);
    }
    let c = &loaded.config;
    let sol = solve(&c.ambiguity, &c.market)?;
    let report = strategy_report(&sol, &c.market)?;
    let check = if oracle_check {
        let res = resolution.unwrap_or_else(|| default_resolution(&c.ambiguity, &c.market));
        let oracle = grid_oracle(&c.ambiguity, &c.market, res)?;
        let bound = oracle_bound(&c.ambiguity, &c.market);
        let gap = (sol.r_star - oracle.r_star).abs();
        Some(OracleCheck {
            resolution: res,
            r_oracle: oracle.r_star,
            gap,
            bound,
            passed: gap <= bound,
        })
    } else {
        None
    };
    let failure = check
        .as_ref()
        .filter(|k| !k.passed)
        .map(|k| CliError::Verification(format!("closed form and grid oracle differ by {:e} (bound {:e})", k.gap, k.bound)));
    let bytes = match c.output.format {
        Format::Json => to_json(&SolveOutput {
            solution: &sol,
            strategy: &report,
            oracle_check: check,
        })?,
        Format::Csv => {
            let mut header = vec!["case_label", "r_star", "no_trade", "V0", "b_star", "rho_star", "direction"];
            let mut row = vec![
                sol.case_label.to_string(),
                number(sol.r_star),
                sol.no_trade.to_string(),
                number(report.v0),
                join(&sol.theta_star.b),
                join(sol.theta_star.rho.as_slice()),
                join(&report.direction),
            ];
            if let Some(k) = &check {
                header.extend(["r_oracle", "oracle_gap"]);
                row.extend([number(k.r_oracle), number(k.gap)]);
            }
            to_csv(&header, &[row])?
        }
    };
    Ok(Outcome { bytes, failure })
}

pub fn cmd_classify(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    if !loaded.config.sweep.is_empty() {
        return sweep_table(loaded);
    }
    let c = &loaded.config;
    let sol = solve(&c.ambiguity, &c.market)?;
    let report = classify(&sol, &c.market)?;
    eprintln!("{}", report.narrative);
    let bytes = match c.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => to_csv(
            &["summary", "case_label", "signs", "narrative"],
            &[vec![
                report.summary.clone(),
                report.case_label.to_string(),
                report.signs.clone(),
                report.narrative.clone(),
            ]],
        )?,
    };
    Ok(Outcome::ok(bytes))
}

pub fn cmd_oracle(loaded: &LoadedConfig, resolution: Option<usize>) -> Result<Outcome, CliError> {
    let c = &loaded.config;
    let res = resolution.unwrap_or_else(|| default_resolution(&c.ambiguity, &c.market));
    let sol = grid_oracle(&c.ambiguity, &c.market, res)?;
    let bytes = match c.output.format {
        Format::Json => to_json(&sol)?,
        Format::Csv => to_csv(
            &["resolution", "grid_points", "r_star", "b_star", "rho_star"],
            &[vec![
                res.to_string(),
                sol.diagnostics.grid_points.to_string(),
                number(sol.r_star),
                join(&sol.theta_star.b),
                join(sol.theta_star.rho.as_slice()),
            ]],
        )?,
    };
    Ok(Outcome::ok(bytes))
}

/// One CSV row per sweep entry. Failed runs keep their row with the error,
/// and the exit code is the most severe one seen.
fn sweep_table(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let header = ["run", "override", "status", "case_label", "r_star", "no_trade", "V0", "class"];
    let mut rows = Vec::new();
    let mut worst: Option<CliError> = None;
    for (k, (patch, cfg)) in loaded.config.sweep.iter().zip(loaded.sweep()?).enumerate() {
        let mut row = vec![k.to_string(), patch.to_string()];
        let run = solve(&cfg.ambiguity, &cfg.market).and_then(|sol| {
            let rep = classify(&sol, &cfg.market)?;
            Ok((sol, rep))
        });
        match run {
            Ok((sol, rep)) => row.extend([
                "ok".to_string(),
                sol.case_label.to_string(),
                number(sol.r_star),
                sol.no_trade.to_string(),
                number(value_v0(&sol, &cfg.market)),
                rep.summary,
            ]),
            Err(e) => {
                row.extend([e.to_string(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                let e = CliError::from(e);
                if worst.as_ref().map_or(true, |w| e.code() > w.code()) {
                    worst = Some(e);
                }
            }
        }
        rows.push(row);
    }
    Ok(Outcome {
        bytes: to_csv(&header, &rows)?,
        failure: worst,
    })
}

#[derive(Serialize)]
struct ValueCheck {
    /// `J - V0`
    gap: f64,
    std_error: f64,
    /// Two-sided under the worst case, one-sided (`J >= V0 - 3 SE`) otherwise.
    two_sided: bool,
    passed: bool,
}

#[derive(Serialize)]
struct SimulateOutput {
    #[serde(rename = "V0")]
    v0: f64,
    estimate: ObjectiveEstimate,
    value_check: ValueCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    principle: Option<PrincipleReport>,
    moments: Vec<NodeMoments>,
}

pub fn cmd_simulate(
    loaded: &LoadedConfig,
    paths: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
    probes: usize,
) -> Result<Outcome, CliError> {
    let c: &ModelConfig = &loaded.config;
    let section = c.simulate.clone().unwrap_or_default();
    let cfg = section.sim_config(paths, steps, seed);
    cfg.validate()?;
    let sol = solve(&c.ambiguity, &c.market)?;
    let strategy = robust_strategy(&sol, &c.market)?;
    let worst = ThetaProcessSchedule::constant(sol.theta_star.clone());
    let schedule = section.schedule.clone().unwrap_or_else(|| worst.clone());
    let two_sided = schedule == worst;

    let wealth = simulate_wealth(&strategy, &schedule, &c.market, &cfg)?;
    let estimate = estimate_objective(&wealth, c.market.lambda)?;
    let v0 = value_v0(&sol, &c.market);
    let gap = estimate.j - v0;
    let slack = 3.0 * estimate.std_error_j;
    let value_check = ValueCheck {
        gap,
        std_error: estimate.std_error_j,
        two_sided,
        passed: if two_sided { gap.abs() <= slack } else { gap >= -slack },
    };

    let principle = if probes > 0 {
        let mut strategies = default_probe_strategies(&strategy);
        strategies.truncate(probes);
        let mut schedules = default_probe_schedules(&sol, &c.ambiguity, &c.market)?;
        schedules.truncate(probes);
        if !two_sided {
            schedules.push(ProbeSchedule {
                name: "configured".into(),
                schedule: schedule.clone(),
            });
        }
        Some(assess_weak_principle(&sol, &c.ambiguity, &c.market, &cfg, &strategies, &schedules)?)
    } else {
        None
    };

    let mut failure = None;
    if !value_check.passed {
        failure = Some(CliError::Verification(format!(
            "J - V0 = {:e} is outside 3 standard errors ({:e})",
            gap, estimate.std_error_j
        )));
    }
    if let Some((probe, margin)) = principle.as_ref().and_then(|p| p.first_violation()) {
        failure = Some(CliError::Verification(format!("weak optimality principle violated by {probe}, margin {margin:e}")));
    }

    let moments = node_moments(&wealth);
    let bytes = match c.output.format {
        Format::Json => to_json(&SimulateOutput {
            v0,
            estimate,
            value_check,
            principle,
            moments,
        })?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = moments
                .iter()
                .map(|m| vec![number(m.t), number(m.mean), number(m.var), number(m.se)])
                .collect();
            to_csv(&["t", "mean", "var", "se"], &rows)?
        }
    };
    Ok(Outcome { bytes, failure })
}

pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
/// Points whose correlation matrix has a Cholesky pivot below this are
/// treated as touching the positive definite boundary: central differences
/// lose accuracy there as the inverse blows up.
pub const GRADCHECK_MIN_PIVOT: f64 = 1e-2;

#[derive(Serialize)]
struct GradPoint {
    theta: ThetaPoint,
    relative_error: f64,
}

#[derive(Serialize)]
struct GradcheckOutput {
    samples: usize,
    checked: usize,
    /// Points too close to a singular correlation matrix.
    skipped: usize,
    max_relative_error: f64,
    tolerance: f64,
    passed: bool,
    points: Vec<GradPoint>,
}

fn away_from_boundary(theta: &ThetaPoint, d: usize) -> bool {
    if min_pivot(&theta.rho, d).is_none_or(|p| p < GRADCHECK_MIN_PIVOT) {
        return false;
    }
    (0..theta.rho.len()).all(|k| {
        [-GRADCHECK_STEP, GRADCHECK_STEP].iter().all(|h| {
            let mut r = theta.rho.clone();
            r.0[k] += h;
            r.0[k].abs() < 1.0 && is_positive_definite(&r, d)
        })
    })
}

/// `|analytic - central difference|_2 / |analytic|_2`.
fn gradient_error(theta: &ThetaPoint, params: &MarketParams) -> Result<f64, CliError> {
    let g = risk_premium_gradients(theta, params)?;
    let h = GRADCHECK_STEP;
    let eval = |b: Vec<f64>, rho: RhoVector| risk_premium(&ThetaPoint::new(b, rho), params);
    let mut err = 0.0;
    for (i, a) in g.b.iter().enumerate() {
        let (mut up, mut dn) = (theta.b.clone(), theta.b.clone());
        up[i] += h;
        dn[i] -= h;
        let fd = (eval(up, theta.rho.clone())? - eval(dn, theta.rho.clone())?) / (2.0 * h);
        err += (a - fd).powi(2);
    }
    for (k, a) in g.rho.iter().enumerate() {
        let (mut up, mut dn) = (theta.rho.clone(), theta.rho.clone());
        up.0[k] += h;
        dn.0[k] -= h;
        let fd = (eval(theta.b.clone(), up)? - eval(theta.b.clone(), dn)?) / (2.0 * h);
        err += (a - fd).powi(2);
    }
    let scale = g.b.iter().chain(&g.rho).map(|a| a * a).sum::<f64>().sqrt();
    Ok(err.sqrt() / scale.max(1e-12))
}

pub fn cmd_gradcheck(loaded: &LoadedConfig, samples: usize, seed: u64) -> Result<Outcome, CliError> {
    let c = &loaded.config;
    let d = c.market.dim();
    let draws = sample(&c.ambiguity, &c.market, samples, seed)?;
    let mut points = Vec::new();
    let mut skipped = 0;
    for theta in draws {
        if !away_from_boundary(&theta, d) {
            skipped += 1;
            continue;
        }
        let relative_error = gradient_error(&theta, &c.market)?;
        points.push(GradPoint { theta, relative_error });
    }
    let max_err = points.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    let passed = max_err < GRADCHECK_TOLERANCE;
    if skipped > 0 {
        eprintln!("gradcheck: skipped {skipped} of {samples} points near the positive definite boundary");
    }
    let failure =
        (!passed).then(|| CliError::Verification(format!("relative gradient error {max_err:e} >= {GRADCHECK_TOLERANCE:e}")));
    let out = GradcheckOutput {
        samples,
        checked: points.len(),
        skipped,
        max_relative_error: max_err,
        tolerance: GRADCHECK_TOLERANCE,
        passed,
        points,
    };
    let bytes = match c.output.format {
        Format::Json => to_json(&out)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = out
                .points
                .iter()
                .map(|p| vec![join(&p.theta.b), join(p.theta.rho.as_slice()), number(p.relative_error)])
                .collect();
            to_csv(&["b", "rho", "relative_error"], &rows)?
        }
    };
    Ok(Outcome { bytes, failure })
}
