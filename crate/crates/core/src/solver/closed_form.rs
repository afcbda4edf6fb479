//! Closed-form worst cases for ellipsoidal sets.
//!
//! All branches work on assets ranked by descending `|b_i / sigma_i|` and map
//! the answer back to the caller's order at the end.

use crate::ambiguity::AmbiguitySpec;
use crate::error::{Error, Result};
use crate::market::{
    covariance_from, dot, is_positive_definite, sharpe_profile, variance_risk_ratio, MarketParams, RhoVector,
    SharpeProfile, ThetaPoint,
};

use super::numeric::{numeric_minimize, NumericOptions};
use super::{ellipsoid_parts, CaseLabel, Diagnostics, WorstCaseSolution};

/// Worst drift inside the ellipsoid for a fixed correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidalWorstDrift {
    pub b_star: Vec<f64>,
    pub r_star: f64,
    /// `||sigma(rho)^{-1} b_hat||_2`
    pub norm: f64,
}

/// Factor applied to the anchor, and the resulting premium.
fn shrink(norm: f64, premium: f64, delta: f64) -> (f64, f64) {
    if delta == 0.0 {
        (1.0, premium)
    } else if norm > delta {
        (1.0 - delta / norm, (norm - delta) * (norm - delta))
    } else {
        (0.0, 0.0)
    }
}

pub fn solve_ellipsoidal_given_rho(
    rho: &RhoVector,
    b_hat: &[f64],
    delta: f64,
    params: &MarketParams,
) -> Result<EllipsoidalWorstDrift> {
    if b_hat.len() != params.dim() {
        return Err(Error::Dimension("drift anchor length does not match market".into()));
    }
    let cov = covariance_from(rho, params)?;
    let premium = cov.whitened_norm_sq(b_hat);
    let norm = premium.sqrt();
    let (scale, r_star) = shrink(norm, premium, delta);
    Ok(EllipsoidalWorstDrift {
        b_star: b_hat.iter().map(|b| scale * b).collect(),
        r_star,
        norm,
    })
}

fn finish(theta_star: ThetaPoint, r_star: f64, case_label: CaseLabel, diagnostics: Diagnostics) -> WorstCaseSolution {
    WorstCaseSolution {
        no_trade: theta_star.b.iter().all(|b| *b == 0.0),
        theta_star,
        r_star,
        case_label,
        diagnostics: Diagnostics {
            converged: true,
            ..diagnostics
        },
    }
}

fn profile(b_hat: &[f64], params: &MarketParams) -> Result<SharpeProfile> {
    let sp = sharpe_profile(b_hat, params)?;
    if sp.zero_drift {
        return Err(Error::ZeroDrift);
    }
    Ok(sp)
}

fn check_corners(spec: &AmbiguitySpec, d: usize) -> Result<()> {
    match spec.gamma.corners(d).into_iter().find(|c| !is_positive_definite(c, d)) {
        Some(corner) => Err(Error::BoxNotPD { corner: corner.0 }),
        None => Ok(()),
    }
}

/// Ellipsoidal set whose correlation box is a single point.
pub(crate) fn solve_fixed_correlation(spec: &AmbiguitySpec, params: &MarketParams) -> Result<WorstCaseSolution> {
    let (b_hat, delta) = ellipsoid_parts(spec)?;
    let rho = spec.gamma.lower.clone();
    let w = solve_ellipsoidal_given_rho(&rho, b_hat, delta, params)?;
    Ok(finish(
        ThetaPoint::new(w.b_star, rho),
        w.r_star,
        CaseLabel::FixedCorrelation,
        Diagnostics::default(),
    ))
}

/// Correlations unrestricted: the worst case aligns every asset with the one
/// of largest Sharpe ratio.
pub fn solve_full_ambiguity(b_hat: &[f64], delta: f64, params: &MarketParams) -> Result<WorstCaseSolution> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidInput(format!("radius {delta} must be nonnegative")));
    }
    let sp = profile(b_hat, params)?;
    let d = params.dim();
    let lead = sp.ranked_beta(0).abs();
    if d >= 2 && lead <= sp.ranked_beta(1).abs() {
        return Err(Error::NoMinimum(
            "several assets share the largest absolute Sharpe ratio".into(),
        ));
    }
    let ranked = RhoVector(
        RhoVector::pairs(d)
            .map(|(i, j)| {
                if i == 0 {
                    sp.proximity(0, j)
                } else {
                    sp.proximity(0, i) * sp.proximity(0, j)
                }
            })
            .collect(),
    );
    let rho = ranked.unpermuted(d, &sp.order);
    covariance_from(&rho, params)?;
    let (scale, r_star) = shrink(lead, lead * lead, delta);
    Ok(finish(
        ThetaPoint::new(b_hat.iter().map(|b| scale * b).collect(), rho),
        r_star,
        CaseLabel::FullAmbiguity,
        Diagnostics::default(),
    ))
}

pub fn solve_two_asset(spec: &AmbiguitySpec, params: &MarketParams) -> Result<WorstCaseSolution> {
    let (b_hat, delta) = ellipsoid_parts(spec)?;
    if params.dim() != 2 {
        return Err(Error::Dimension("two-asset solver needs exactly two assets".into()));
    }
    if spec.gamma.full_ambiguity {
        return solve_full_ambiguity(b_hat, delta, params);
    }
    spec.validate(params)?;
    check_corners(spec, 2)?;
    let sp = profile(b_hat, params)?;
    let (lo, hi) = (spec.gamma.lower.0[0], spec.gamma.upper.0[0]);
    let prox = sp.proximity(0, 1);
    let (rho, label) = if prox > hi {
        (hi, CaseLabel::TwoAssetUpper)
    } else if prox < lo {
        (lo, CaseLabel::TwoAssetLower)
    } else {
        (prox, CaseLabel::TwoAssetInterior)
    };
    let rho = RhoVector(vec![rho]);
    let w = solve_ellipsoidal_given_rho(&rho, b_hat, delta, params)?;
    let diagnostics = Diagnostics {
        zeroed_asset: (label == CaseLabel::TwoAssetInterior).then_some(sp.order[1]),
        ..Diagnostics::default()
    };
    Ok(finish(ThetaPoint::new(w.b_star, rho), w.r_star, label, diagnostics))
}

const P12: usize = 0;
const P13: usize = 1;
const P23: usize = 2;

/// A case where one allocation component vanishes: the pair not involving
/// `zeroed` sits on a bound and the two pairs involving it solve a linear
/// equation.
struct ZeroCase {
    zeroed: usize,
    /// The other two assets, ranked.
    others: [usize; 2],
    fixed: usize,
    /// Pairs `(zeroed, others[0])` and `(zeroed, others[1])`.
    free: [usize; 2],
    upper_label: CaseLabel,
    lower_label: CaseLabel,
}

const ZERO_CASES: [ZeroCase; 3] = [
    ZeroCase {
        zeroed: 2,
        others: [0, 1],
        fixed: P12,
        free: [P13, P23],
        upper_label: CaseLabel::ThreeAssetCase2i,
        lower_label: CaseLabel::ThreeAssetCase2ii,
    },
    ZeroCase {
        zeroed: 1,
        others: [0, 2],
        fixed: P13,
        free: [P12, P23],
        upper_label: CaseLabel::ThreeAssetCase3i,
        lower_label: CaseLabel::ThreeAssetCase3ii,
    },
    ZeroCase {
        zeroed: 0,
        others: [1, 2],
        fixed: P23,
        free: [P12, P13],
        upper_label: CaseLabel::ThreeAssetCase4i,
        lower_label: CaseLabel::ThreeAssetCase4ii,
    },
];

/// Three-asset problem in the ranked frame.
struct Ranked {
    params: MarketParams,
    b: Vec<f64>,
    lo: [f64; 3],
    hi: [f64; 3],
    prox: [f64; 3],
}

impl Ranked {
    fn kappa(&self, rho: [f64; 3]) -> Result<Vec<f64>> {
        variance_risk_ratio(&ThetaPoint::new(self.b.clone(), RhoVector(rho.to_vec())), &self.params)
    }

    fn with(&self, case: &ZeroCase, fixed: f64, free: [f64; 2]) -> [f64; 3] {
        let mut rho = [0.0; 3];
        rho[case.fixed] = fixed;
        rho[case.free[0]] = free[0];
        rho[case.free[1]] = free[1];
        rho
    }

    /// Bound for the fixed pair if the sign test of `case` passes.
    fn zero_case_bound(&self, case: &ZeroCase) -> Result<Option<(f64, CaseLabel)>> {
        let (f, free) = (case.fixed, case.free);
        let z = case.zeroed;
        if self.hi[f] < self.prox[f] {
            let a = self.kappa(self.with(case, self.hi[f], [self.hi[free[0]], self.hi[free[1]]]))?;
            let b = self.kappa(self.with(case, self.hi[f], [self.lo[free[0]], self.lo[free[1]]]))?;
            if a[z] * b[z] <= 0.0 {
                return Ok(Some((self.hi[f], case.upper_label)));
            }
        }
        if self.lo[f] > self.prox[f] {
            let a = self.kappa(self.with(case, self.lo[f], [self.lo[free[0]], self.hi[free[1]]]))?;
            let b = self.kappa(self.with(case, self.lo[f], [self.hi[free[0]], self.lo[free[1]]]))?;
            if a[z] * b[z] <= 0.0 {
                return Ok(Some((self.lo[f], case.lower_label)));
            }
        }
        Ok(None)
    }

    /// Point of `{kappa_z = 0}` inside the free 2-D box, plus the reduced norm
    /// `||sigma_{-z}^{-1} b_{-z}||`.
    fn zero_case_root(&self, case: &ZeroCase, fixed: f64) -> Result<Option<([f64; 3], f64)>> {
        let [a, c] = case.others;
        let z = case.zeroed;
        let s = &self.params.sigmas;
        let reduced = MarketParams {
            sigmas: vec![s[a], s[c]],
            ..self.params.clone()
        };
        let sub = ThetaPoint::new(vec![self.b[a], self.b[c]], RhoVector(vec![fixed]));
        let k = variance_risk_ratio(&sub, &reduced)?;
        let premium = dot(&sub.b, &k);
        let coef = [s[z] * s[a] * k[0], s[z] * s[c] * k[1]];
        let bounds = [
            (self.lo[case.free[0]], self.hi[case.free[0]]),
            (self.lo[case.free[1]], self.hi[case.free[1]]),
        ];
        let Some((p0, p1)) = line_in_box(coef, self.b[z], bounds) else {
            return Ok(None);
        };
        let mut best: Option<(usize, [f64; 3])> = None;
        for step in 0..=100usize {
            let t = step as f64 / 100.0;
            let free = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
            let rho = self.with(case, fixed, free);
            if !is_positive_definite(&RhoVector(rho.to_vec()), 3) {
                continue;
            }
            let dist = step.abs_diff(50);
            if best.map_or(true, |(d, _)| dist < d) {
                best = Some((dist, rho));
            }
        }
        Ok(best.map(|(_, rho)| (rho, premium.max(0.0))))
    }
}

/// Segment of `{coef . (x, y) = rhs}` inside `bounds`, or `None` when empty.
fn line_in_box(coef: [f64; 2], rhs: f64, bounds: [(f64, f64); 2]) -> Option<([f64; 2], [f64; 2])> {
    // parametrize by the coordinate with the smaller coefficient
    let (u, v) = if coef[1].abs() >= coef[0].abs() { (0, 1) } else { (1, 0) };
    if coef[v] == 0.0 {
        return None;
    }
    let slack = 1e-12;
    let (ulo, uhi) = bounds[u];
    let (vlo, vhi) = bounds[v];
    let (mut lo, mut hi) = (ulo, uhi);
    if coef[u] != 0.0 {
        let e1 = (rhs - coef[v] * vlo) / coef[u];
        let e2 = (rhs - coef[v] * vhi) / coef[u];
        lo = lo.max(e1.min(e2));
        hi = hi.min(e1.max(e2));
    } else {
        let at = rhs / coef[v];
        if at < vlo - slack || at > vhi + slack {
            return None;
        }
    }
    if lo > hi + slack {
        return None;
    }
    let hi = hi.max(lo);
    let point = |x: f64| {
        let y = ((rhs - coef[u] * x) / coef[v]).clamp(vlo, vhi);
        let mut p = [0.0; 2];
        p[u] = x;
        p[v] = y;
        p
    };
    Some((point(lo), point(hi)))
}

pub fn solve_three_asset(spec: &AmbiguitySpec, params: &MarketParams) -> Result<WorstCaseSolution> {
    let (b_hat, delta) = ellipsoid_parts(spec)?;
    if params.dim() != 3 {
        return Err(Error::Dimension("three-asset solver needs exactly three assets".into()));
    }
    if spec.gamma.full_ambiguity {
        return solve_full_ambiguity(b_hat, delta, params);
    }
    spec.validate(params)?;
    check_corners(spec, 3)?;
    let sp = profile(b_hat, params)?;
    let order = sp.order.clone();
    let lo = spec.gamma.lower.permuted(3, &order).0;
    let hi = spec.gamma.upper.permuted(3, &order).0;
    let ranked = Ranked {
        params: params.permuted(&order),
        b: order.iter().map(|&i| b_hat[i]).collect(),
        lo: [lo[0], lo[1], lo[2]],
        hi: [hi[0], hi[1], hi[2]],
        prox: [sp.proximity(0, 1), sp.proximity(0, 2), sp.proximity(1, 2)],
    };
    let inside = |k: usize| ranked.lo[k] <= ranked.prox[k] && ranked.prox[k] <= ranked.hi[k];

    let build = |rho: [f64; 3], norm: f64, label: CaseLabel, diagnostics: Diagnostics| -> WorstCaseSolution {
        let (scale, r_star) = shrink(norm, norm * norm, delta);
        let rho = RhoVector(rho.to_vec()).unpermuted(3, &order);
        finish(
            ThetaPoint::new(b_hat.iter().map(|b| scale * b).collect(), rho),
            r_star,
            label,
            diagnostics,
        )
    };

    if inside(P12) && inside(P13) {
        let rho = [
            ranked.prox[P12],
            ranked.prox[P13],
            0.5 * (ranked.lo[P23] + ranked.hi[P23]),
        ];
        if is_positive_definite(&RhoVector(rho.to_vec()), 3) {
            let kappa = ranked.kappa(rho)?;
            let norm = dot(&ranked.b, &kappa).max(0.0).sqrt();
            let diagnostics = Diagnostics {
                root_residual: Some(kappa[1].abs().max(kappa[2].abs())),
                ..Diagnostics::default()
            };
            return Ok(build(rho, norm, CaseLabel::ThreeAssetCase1, diagnostics));
        }
    }

    for case in &ZERO_CASES {
        let Some((fixed, label)) = ranked.zero_case_bound(case)? else {
            continue;
        };
        let Some((rho, premium)) = ranked.zero_case_root(case, fixed)? else {
            continue;
        };
        let kappa = ranked.kappa(rho)?;
        let diagnostics = Diagnostics {
            root_residual: Some(kappa[case.zeroed].abs()),
            zeroed_asset: Some(order[case.zeroed]),
            ..Diagnostics::default()
        };
        return Ok(build(rho, premium.sqrt(), label, diagnostics));
    }

    let (lo, hi) = (ranked.lo, ranked.hi);
    let corner_cases = [
        ([hi[P12], hi[P13], hi[P23]], 1.0, 1.0, CaseLabel::ThreeAssetCase5i),
        ([lo[P12], lo[P13], hi[P23]], -1.0, -1.0, CaseLabel::ThreeAssetCase5ii),
        ([hi[P12], lo[P13], lo[P23]], 1.0, -1.0, CaseLabel::ThreeAssetCase5iii),
        ([lo[P12], hi[P13], lo[P23]], -1.0, 1.0, CaseLabel::ThreeAssetCase5iv),
    ];
    for (rho, s12, s13, label) in corner_cases {
        let k = ranked.kappa(rho)?;
        if s12 * k[0] * k[1] > 0.0 && s13 * k[0] * k[2] > 0.0 {
            let norm = dot(&ranked.b, &k).max(0.0).sqrt();
            return Ok(build(rho, norm, label, Diagnostics::default()));
        }
    }

    let mut sol = numeric_minimize(spec, params, &NumericOptions::default())?;
    sol.diagnostics.note = Some("no closed-form case matched".into());
    Ok(sol)
}
