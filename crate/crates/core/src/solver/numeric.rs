//! Projected gradient descent for `min R` when no closed form applies.

use rayon::prelude::*;

use crate::ambiguity::{contains, project_b, project_rho, sample, AmbiguitySpec, DriftSet};
use crate::error::{Error, Result};
use crate::market::{covariance_from, risk_premium, risk_premium_gradients, MarketParams, RhoVector, ThetaPoint};

use super::{CaseLabel, Diagnostics, WorstCaseSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct NumericOptions {
    pub starts: usize,
    pub max_iters: usize,
    /// Target for the box variational-inequality residual.
    pub tol: f64,
    pub seed: u64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            starts: 8,
            max_iters: 5000,
            tol: 1e-8,
            seed: 0x5eed_0f_5eed,
        }
    }
}

const STEP_FLOOR: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// `max_{y in box} (x - y) . g`, the worst first-order decrease available
/// inside the box. Zero exactly at a KKT point.
pub(crate) fn vi_residual(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let total: f64 = x
        .iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((x, g), (l, h))| ((l - x) * g).min((h - x) * g))
        .sum();
    (-total).max(0.0)
}

struct Descent {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Spectral projected gradient with Armijo backtracking. `eval` returns `None`
/// for infeasible points, which the line search treats as a failed trial.
fn descend<F, P>(start: Vec<f64>, lo: &[f64], hi: &[f64], eval: F, project: P, opts: &NumericOptions) -> Option<Descent>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
    P: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = project(&start)?;
    let (mut f, mut g) = eval(&x)?;
    let mut step = 1.0;
    let mut residual = vi_residual(&x, &g, lo, hi);
    for it in 0..opts.max_iters {
        if residual < opts.tol {
            return Some(Descent {
                x,
                value: f,
                iterations: it,
                residual,
                converged: true,
            });
        }
        let mut eta = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x - eta * g).collect();
            if let Some(xt) = project(&trial) {
                let decrease: f64 = g.iter().zip(xt.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
                if let Some((ft, gt)) = eval(&xt) {
                    if ft <= f + ARMIJO * decrease {
                        accepted = Some((xt, ft, gt));
                        break;
                    }
                }
            }
            eta *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            return Some(Descent {
                x,
                value: f,
                iterations: it,
                residual,
                converged: false,
            });
        };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1.0 };
        x = xt;
        f = ft;
        g = gt;
        residual = vi_residual(&x, &g, lo, hi);
        if ss.sqrt() < STEP_FLOOR {
            return Some(Descent {
                x,
                value: f,
                iterations: it + 1,
                residual,
                converged: true,
            });
        }
    }
    Some(Descent {
        x,
        value: f,
        iterations: opts.max_iters,
        converged: residual < opts.tol,
        residual,
    })
}

fn best_of(runs: Vec<Option<Descent>>) -> Option<(usize, Descent)> {
    let mut best: Option<(usize, Descent)> = None;
    for (k, run) in runs.into_iter().enumerate() {
        let Some(run) = run else { continue };
        if best.as_ref().map_or(true, |(_, b)| run.value < b.value) {
            best = Some((k, run));
        }
    }
    best
}

/// Worst drift in the ellipsoid at fixed `rho`, by projected gradient in the
/// whitened coordinates, where `project_b` is the exact projection.
fn inner_drift(spec: &AmbiguitySpec, b_hat: &[f64], rho: &RhoVector, params: &MarketParams) -> Result<Vec<f64>> {
    // R(b, rho) = |L^{-1} b|^2 has Lipschitz constant 2 in the whitened
    // coordinates, so a step of 1/2 is exact for the unconstrained part
    const ETA: f64 = 0.5;
    let mut b = b_hat.to_vec();
    for _ in 0..100 {
        let target: Vec<f64> = b.iter().map(|v| v - 2.0 * ETA * v).collect();
        let next = project_b(spec, &target, rho, params)?;
        let change = next.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        b = next;
        if change == 0.0 {
            break;
        }
    }
    Ok(b)
}

fn starting_points(spec: &AmbiguitySpec, params: &MarketParams, opts: &NumericOptions) -> Result<Vec<ThetaPoint>> {
    let d = params.dim();
    let center_b = match &spec.drift {
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => delta_lower.iter().zip(delta_upper).map(|(l, h)| 0.5 * (l + h)).collect(),
        DriftSet::Ellipsoidal { b_hat, .. } => b_hat.clone(),
    };
    let center = ThetaPoint::new(center_b, project_rho(spec, &spec.gamma.midpoint(d))?);
    let mut starts = vec![center];
    if opts.starts > 1 {
        starts.extend(sample(spec, params, opts.starts - 1, opts.seed)?);
    }
    Ok(starts)
}

pub fn numeric_minimize(spec: &AmbiguitySpec, params: &MarketParams, opts: &NumericOptions) -> Result<WorstCaseSolution> {
    params.validate()?;
    spec.validate(params)?;
    if opts.starts == 0 {
        return Err(Error::InvalidInput("numeric solver needs at least one start".into()));
    }
    if let Some(theta) = spec.singleton_point() {
        let r_star = risk_premium(&theta, params)?;
        return Ok(WorstCaseSolution {
            no_trade: theta.b.iter().all(|b| *b == 0.0),
            theta_star: theta,
            r_star,
            case_label: CaseLabel::Numeric,
            diagnostics: Diagnostics {
                converged: true,
                starts: 1,
                optimality_residual: Some(0.0),
                ..Diagnostics::default()
            },
        });
    }
    let d = params.dim();
    let (rho_lo, rho_hi) = spec.gamma.bounds(d);
    let starts = starting_points(spec, params, opts)?;
    let project_corr = |r: &[f64]| project_rho(spec, &RhoVector(r.to_vec())).ok().map(|r| r.0);

    let (theta_star, best, n_starts) = match &spec.drift {
        DriftSet::Ellipsoidal { b_hat, .. } => {
            // (|.| - delta)_+^2 is nondecreasing, so rho* minimizes R(b_hat, rho)
            let eval = |r: &[f64]| {
                let t = ThetaPoint::new(b_hat.clone(), RhoVector(r.to_vec()));
                let value = risk_premium(&t, params).ok()?;
                let g = risk_premium_gradients(&t, params).ok()?;
                Some((value, g.rho))
            };
            let runs: Vec<Option<Descent>> = starts
                .par_iter()
                .map(|s| descend(s.rho.0.clone(), &rho_lo, &rho_hi, eval, project_corr, opts))
                .collect();
            let (_, best) = best_of(runs).ok_or(Error::NoFeasiblePoint)?;
            let rho = RhoVector(best.x.clone());
            let b = inner_drift(spec, b_hat, &rho, params)?;
            (ThetaPoint::new(b, rho), best, starts.len())
        }
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => {
            let lo: Vec<f64> = delta_lower.iter().chain(&rho_lo).copied().collect();
            let hi: Vec<f64> = delta_upper.iter().chain(&rho_hi).copied().collect();
            let split = |x: &[f64]| ThetaPoint::new(x[..d].to_vec(), RhoVector(x[d..].to_vec()));
            let eval = |x: &[f64]| {
                let t = split(x);
                let value = risk_premium(&t, params).ok()?;
                let g = risk_premium_gradients(&t, params).ok()?;
                Some((value, g.b.into_iter().chain(g.rho).collect()))
            };
            let project = |x: &[f64]| {
                let rho = project_corr(&x[d..])?;
                let b = x[..d]
                    .iter()
                    .zip(delta_lower.iter().zip(delta_upper))
                    .map(|(v, (l, h))| v.clamp(*l, *h));
                Some(b.chain(rho).collect::<Vec<f64>>())
            };
            let runs: Vec<Option<Descent>> = starts
                .par_iter()
                .map(|s| {
                    let x: Vec<f64> = s.b.iter().chain(&s.rho.0).copied().collect();
                    descend(x, &lo, &hi, eval, project, opts)
                })
                .collect();
            let (_, best) = best_of(runs).ok_or(Error::NoFeasiblePoint)?;
            (split(&best.x), best, starts.len())
        }
    };
    covariance_from(&theta_star.rho, params)?;
    debug_assert!(contains(spec, &theta_star, params));
    let r_star = risk_premium(&theta_star, params)?;
    Ok(WorstCaseSolution {
        no_trade: theta_star.b.iter().all(|b| *b == 0.0),
        theta_star,
        r_star,
        case_label: CaseLabel::Numeric,
        diagnostics: Diagnostics {
            iterations: best.iterations,
            starts: n_starts,
            optimality_residual: Some(best.residual),
            converged: best.converged,
            ..Diagnostics::default()
        },
    })
}

/// Product set: joint minimization over the drift box and correlation box.
pub fn solve_product(spec: &AmbiguitySpec, params: &MarketParams) -> Result<WorstCaseSolution> {
    if !matches!(spec.drift, DriftSet::Product { .. }) {
        return Err(Error::InvalidInput("expected a product ambiguity set".into()));
    }
    spec.validate(params)?;
    let d = params.dim();
    if !spec.gamma.full_ambiguity {
        if let Some(c) = spec.gamma.corners(d).into_iter().find(|c| !crate::market::is_positive_definite(c, d)) {
            return Err(Error::BoxNotPD { corner: c.0 });
        }
    }
    let sol = numeric_minimize(spec, params, &NumericOptions::default())?;
    if !sol.diagnostics.converged {
        return Err(Error::NonConvergence {
            residual: sol.diagnostics.optimality_residual.unwrap_or(f64::INFINITY),
        });
    }
    Ok(sol)
}
