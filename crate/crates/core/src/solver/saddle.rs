//! Sampling check of the saddle inequalities
//! `H(b*, rho) <= H(theta*) <= H(b, rho*)`.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{sample, AmbiguitySpec};
use crate::error::{Error, Result, SaddleSide};
use crate::market::{saddle_h, MarketParams, ThetaPoint};

use super::WorstCaseSolution;

pub const SADDLE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub samples: usize,
    pub h_star: f64,
    /// `|H(theta*) - r*|`
    pub r_star_gap: f64,
    /// `max H(b*, rho) - H(theta*)`, should be `<= 0`.
    pub worst_upper_margin: f64,
    /// `min H(b, rho*) - H(theta*)`, should be `>= 0`.
    pub worst_lower_margin: f64,
}

pub fn verify_saddle(
    solution: &WorstCaseSolution,
    spec: &AmbiguitySpec,
    params: &MarketParams,
    samples: usize,
    seed: u64,
) -> Result<SaddleReport> {
    let star = &solution.theta_star;
    let h_star = saddle_h(&star.b, &star.rho, star, params)?;
    let draws = sample(spec, params, samples, seed)?;
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    let mut upper_at: Option<&ThetaPoint> = None;
    let mut lower_at: Option<&ThetaPoint> = None;
    for theta in &draws {
        let u = saddle_h(&star.b, &theta.rho, star, params)? - h_star;
        let l = saddle_h(&theta.b, &star.rho, star, params)? - h_star;
        if u > upper {
            upper = u;
            upper_at = Some(theta);
        }
        if l < lower {
            lower = l;
            lower_at = Some(theta);
        }
    }
    if upper > SADDLE_TOLERANCE {
        return Err(Error::SaddleViolated {
            theta: upper_at.cloned().unwrap_or_else(|| star.clone()),
            side: SaddleSide::Upper,
            margin: upper,
        });
    }
    if lower < -SADDLE_TOLERANCE {
        return Err(Error::SaddleViolated {
            theta: lower_at.cloned().unwrap_or_else(|| star.clone()),
            side: SaddleSide::Lower,
            margin: lower,
        });
    }
    Ok(SaddleReport {
        samples: draws.len(),
        h_star,
        r_star_gap: (h_star - solution.r_star).abs(),
        worst_upper_margin: if draws.is_empty() { 0.0 } else { upper },
        worst_lower_margin: if draws.is_empty() { 0.0 } else { lower },
    })
}
