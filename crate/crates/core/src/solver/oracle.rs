//! Exhaustive grid search, used as ground truth in tests.

use crate::ambiguity::{AmbiguitySpec, DriftSet};
use crate::error::{Error, Result};
use crate::market::{covariance_from, MarketParams, RhoVector, ThetaPoint};

use super::closed_form::solve_ellipsoidal_given_rho;
use super::{CaseLabel, Diagnostics, WorstCaseSolution};

pub const MAX_GRID_POINTS: f64 = 1e8;

fn axis(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    if lo == hi || resolution == 1 {
        return vec![lo];
    }
    let n = resolution - 1;
    (0..=n)
        .map(|k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 })
        .collect()
}

/// Visit every node of the lattice spanned by `axes`, last axis fastest.
fn for_each_node(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; axes.len()];
    let mut node: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&node);
        let mut k = axes.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                node[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            node[k] = axes[k][0];
        }
    }
}

/// Minimize `R` over a uniform lattice of the set. Nodes whose correlation
/// matrix is not positive definite are skipped. For ellipsoidal sets the
/// drift at each node is the exact worst drift for that correlation.
pub fn grid_oracle(spec: &AmbiguitySpec, params: &MarketParams, resolution: usize) -> Result<WorstCaseSolution> {
    params.validate()?;
    spec.validate(params)?;
    if resolution == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let d = params.dim();
    let (rho_lo, rho_hi) = spec.gamma.bounds(d);
    let rho_axes: Vec<Vec<f64>> = rho_lo.iter().zip(&rho_hi).map(|(l, h)| axis(*l, *h, resolution)).collect();
    let drift_axes: Vec<Vec<f64>> = match &spec.drift {
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => delta_lower.iter().zip(delta_upper).map(|(l, h)| axis(*l, *h, resolution)).collect(),
        DriftSet::Ellipsoidal { .. } => Vec::new(),
    };
    let points: f64 = rho_axes.iter().chain(&drift_axes).map(|a| a.len() as f64).product();
    if points > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge { points });
    }

    let mut best: Option<(f64, ThetaPoint)> = None;
    let mut evaluated = 0usize;
    let mut failure = None;
    for_each_node(&rho_axes, |rho| {
        if failure.is_some() {
            return;
        }
        let rho = RhoVector(rho.to_vec());
        let Ok(cov) = covariance_from(&rho, params) else {
            return;
        };
        match &spec.drift {
            DriftSet::Ellipsoidal { b_hat, delta } => {
                evaluated += 1;
                match solve_ellipsoidal_given_rho(&rho, b_hat, *delta, params) {
                    Ok(w) => {
                        if best.as_ref().map_or(true, |(v, _)| w.r_star < *v) {
                            best = Some((w.r_star, ThetaPoint::new(w.b_star, rho)));
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            }
            DriftSet::Product { .. } => {
                for_each_node(&drift_axes, |b| {
                    evaluated += 1;
                    let value = cov.whitened_norm_sq(b);
                    if best.as_ref().map_or(true, |(v, _)| value < *v) {
                        best = Some((value, ThetaPoint::new(b.to_vec(), rho.clone())));
                    }
                });
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (r_star, theta_star) = best.ok_or(Error::NoFeasiblePoint)?;
    Ok(WorstCaseSolution {
        no_trade: theta_star.b.iter().all(|b| *b == 0.0),
        theta_star,
        r_star,
        case_label: CaseLabel::Oracle,
        diagnostics: Diagnostics {
            grid_resolution: Some(resolution),
            grid_points: evaluated,
            converged: true,
            ..Diagnostics::default()
        },
    })
}
