//! Uncertainty sets for the drift and the correlations.
//!
//! Two families are supported: a product of a drift box and a correlation box,
//! and an ellipsoid around a drift anchor (measured in the `Sigma(rho)^{-1}`
//! metric) combined with a correlation box. The correlation box may be replaced
//! by the whole open set of positive definite correlation matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{covariance_from, is_positive_definite, MarketParams, RhoVector, ThetaPoint};

/// Slack on the ellipsoid inequality.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

const MAX_REJECTIONS: usize = 1_000_000;
const SHRINK_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaBox {
    #[serde(default)]
    pub lower: RhoVector,
    #[serde(default)]
    pub upper: RhoVector,
    #[serde(default)]
    pub full_ambiguity: bool,
}

impl GammaBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        GammaBox {
            lower: RhoVector(lower),
            upper: RhoVector(upper),
            full_ambiguity: false,
        }
    }

    /// Every positive definite correlation matrix is admissible.
    pub fn full() -> Self {
        GammaBox {
            lower: RhoVector(Vec::new()),
            upper: RhoVector(Vec::new()),
            full_ambiguity: true,
        }
    }

    pub fn point(rho: RhoVector) -> Self {
        GammaBox {
            lower: rho.clone(),
            upper: rho,
            full_ambiguity: false,
        }
    }

    /// Effective per-pair bounds; `[-1, 1]` under full ambiguity.
    pub fn bounds(&self, d: usize) -> (Vec<f64>, Vec<f64>) {
        let n = RhoVector::pair_count(d);
        if self.full_ambiguity {
            (vec![-1.0; n], vec![1.0; n])
        } else {
            (self.lower.0.clone(), self.upper.0.clone())
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.full_ambiguity {
            return Ok(());
        }
        self.lower.check_dim(d)?;
        self.upper.check_dim(d)?;
        for (lo, hi) in self.lower.0.iter().zip(&self.upper.0) {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || *lo < -1.0 || *hi > 1.0 {
                return Err(Error::InvalidInput(format!("bad correlation bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn is_singleton(&self) -> bool {
        !self.full_ambiguity && self.lower == self.upper
    }

    pub fn in_box(&self, rho: &RhoVector) -> bool {
        if self.full_ambiguity {
            return rho.0.iter().all(|r| (-1.0..=1.0).contains(r));
        }
        rho.len() == self.lower.len()
            && rho
                .0
                .iter()
                .zip(self.lower.0.iter().zip(&self.upper.0))
                .all(|(r, (lo, hi))| lo <= r && r <= hi)
    }

    pub fn midpoint(&self, d: usize) -> RhoVector {
        let (lo, hi) = self.bounds(d);
        RhoVector(lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    /// All `2^pairs` corners, the first pair varying slowest.
    pub fn corners(&self, d: usize) -> Vec<RhoVector> {
        let (lo, hi) = self.bounds(d);
        let n = lo.len();
        (0..1usize << n)
            .map(|mask| {
                RhoVector(
                    (0..n)
                        .map(|k| if mask >> (n - 1 - k) & 1 == 1 { hi[k] } else { lo[k] })
                        .collect(),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DriftSet {
    Product { delta_lower: Vec<f64>, delta_upper: Vec<f64> },
    Ellipsoidal { b_hat: Vec<f64>, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    #[serde(flatten)]
    pub drift: DriftSet,
    pub gamma: GammaBox,
}

impl AmbiguitySpec {
    pub fn ellipsoidal(b_hat: Vec<f64>, delta: f64, gamma: GammaBox) -> Self {
        AmbiguitySpec {
            drift: DriftSet::Ellipsoidal { b_hat, delta },
            gamma,
        }
    }

    pub fn product(delta_lower: Vec<f64>, delta_upper: Vec<f64>, gamma: GammaBox) -> Self {
        AmbiguitySpec {
            drift: DriftSet::Product {
                delta_lower,
                delta_upper,
            },
            gamma,
        }
    }

    /// `Theta = {theta}`.
    pub fn singleton(theta: &ThetaPoint) -> Self {
        Self::product(theta.b.clone(), theta.b.clone(), GammaBox::point(theta.rho.clone()))
    }

    pub fn dim(&self) -> usize {
        match &self.drift {
            DriftSet::Product { delta_lower, .. } => delta_lower.len(),
            DriftSet::Ellipsoidal { b_hat, .. } => b_hat.len(),
        }
    }

    pub fn validate(&self, params: &MarketParams) -> Result<()> {
        let d = params.dim();
        if self.dim() != d {
            return Err(Error::Dimension(format!(
                "ambiguity set has {} assets, market has {d}",
                self.dim()
            )));
        }
        match &self.drift {
            DriftSet::Product {
                delta_lower,
                delta_upper,
            } => {
                if delta_upper.len() != d {
                    return Err(Error::Dimension("drift bounds differ in length".into()));
                }
                for (lo, hi) in delta_lower.iter().zip(delta_upper) {
                    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                        return Err(Error::InvalidInput(format!("bad drift bounds [{lo}, {hi}]")));
                    }
                }
            }
            DriftSet::Ellipsoidal { b_hat, delta } => {
                if !(delta.is_finite() && *delta >= 0.0) {
                    return Err(Error::InvalidInput(format!("radius {delta} must be nonnegative")));
                }
                if b_hat.iter().any(|b| !b.is_finite()) {
                    return Err(Error::InvalidInput("drift anchor is not finite".into()));
                }
            }
        }
        self.gamma.validate(d)
    }

    pub fn is_singleton(&self) -> bool {
        let drift_point = match &self.drift {
            DriftSet::Product {
                delta_lower,
                delta_upper,
            } => delta_lower == delta_upper,
            DriftSet::Ellipsoidal { delta, .. } => *delta == 0.0,
        };
        drift_point && self.gamma.is_singleton()
    }

    /// The single point of a singleton set.
    pub fn singleton_point(&self) -> Option<ThetaPoint> {
        if !self.is_singleton() {
            return None;
        }
        let b = match &self.drift {
            DriftSet::Product { delta_lower, .. } => delta_lower.clone(),
            DriftSet::Ellipsoidal { b_hat, .. } => b_hat.clone(),
        };
        Some(ThetaPoint::new(b, self.gamma.lower.clone()))
    }
}

pub fn contains(spec: &AmbiguitySpec, theta: &ThetaPoint, params: &MarketParams) -> bool {
    let d = params.dim();
    if theta.b.len() != d || theta.rho.check_dim(d).is_err() {
        return false;
    }
    if !spec.gamma.in_box(&theta.rho) || !is_positive_definite(&theta.rho, d) {
        return false;
    }
    match &spec.drift {
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => theta
            .b
            .iter()
            .zip(delta_lower.iter().zip(delta_upper))
            .all(|(b, (lo, hi))| lo <= b && b <= hi),
        DriftSet::Ellipsoidal { b_hat, delta } => {
            let Ok(cov) = covariance_from(&theta.rho, params) else {
                return false;
            };
            let diff: Vec<f64> = theta.b.iter().zip(b_hat).map(|(b, c)| b - c).collect();
            cov.whitened_norm_sq(&diff).sqrt() <= delta + MEMBERSHIP_TOLERANCE
        }
    }
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Clamp into the correlation box, then pull toward an interior anchor until
/// positive definite.
pub fn project_rho(spec: &AmbiguitySpec, rho: &RhoVector) -> Result<RhoVector> {
    let d = spec.dim();
    rho.check_dim(d)?;
    let (lo, hi) = spec.gamma.bounds(d);
    let mut clamped = rho.clone();
    clamp_into(&mut clamped.0, &lo, &hi);
    if is_positive_definite(&clamped, d) {
        return Ok(clamped);
    }
    let zero = RhoVector::zeros(d);
    let anchor = if spec.gamma.in_box(&zero) {
        zero
    } else {
        spec.gamma.midpoint(d)
    };
    if !is_positive_definite(&anchor, d) {
        return Err(Error::NoFeasiblePoint);
    }
    let along = |s: f64| {
        let mut p = RhoVector(
            anchor
                .0
                .iter()
                .zip(&clamped.0)
                .map(|(a, c)| a + s * (c - a))
                .collect(),
        );
        clamp_into(&mut p.0, &lo, &hi);
        p
    };
    let (mut good, mut bad) = (0.0, 1.0);
    for _ in 0..SHRINK_STEPS {
        let mid = 0.5 * (good + bad);
        if is_positive_definite(&along(mid), d) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    let out = along(good);
    if is_positive_definite(&out, d) {
        Ok(out)
    } else {
        Err(Error::NoFeasiblePoint)
    }
}

/// Nearest drift to `b` in the drift part of the set at correlation `rho`.
pub fn project_b(spec: &AmbiguitySpec, b: &[f64], rho: &RhoVector, params: &MarketParams) -> Result<Vec<f64>> {
    if b.len() != params.dim() {
        return Err(Error::Dimension("drift length does not match market".into()));
    }
    match &spec.drift {
        DriftSet::Product {
            delta_lower,
            delta_upper,
        } => {
            let mut out = b.to_vec();
            clamp_into(&mut out, delta_lower, delta_upper);
            Ok(out)
        }
        DriftSet::Ellipsoidal { b_hat, delta } => {
            let cov = covariance_from(rho, params)?;
            let diff: Vec<f64> = b.iter().zip(b_hat).map(|(x, c)| x - c).collect();
            let norm = cov.whitened_norm_sq(&diff).sqrt();
            if norm <= *delta {
                return Ok(b.to_vec());
            }
            let scale = delta / norm;
            Ok(b_hat.iter().zip(&diff).map(|(c, v)| c + scale * v).collect())
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(l, h)| l + rng.random::<f64>() * (h - l))
        .collect()
}

/// `count` feasible points. Correlations are proposed uniformly in the box and
/// rejected until positive definite; ellipsoidal drifts are drawn uniformly
/// from the ellipsoid at the accepted correlation.
pub fn sample(spec: &AmbiguitySpec, params: &MarketParams, count: usize, seed: u64) -> Result<Vec<ThetaPoint>> {
    spec.validate(params)?;
    let d = params.dim();
    let (lo, hi) = spec.gamma.bounds(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut rejections = 0;
        let theta = loop {
            let rho = RhoVector(uniform_in(&mut rng, &lo, &hi));
            let b = match &spec.drift {
                DriftSet::Product {
                    delta_lower,
                    delta_upper,
                } => uniform_in(&mut rng, delta_lower, delta_upper),
                DriftSet::Ellipsoidal { b_hat, delta } => {
                    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let radius = delta * rng.random::<f64>().powf(1.0 / d as f64);
                    match covariance_from(&rho, params) {
                        Ok(cov) if norm > 0.0 => {
                            let u: Vec<f64> = z.iter().map(|v| v * radius / norm).collect();
                            b_hat.iter().zip(cov.color(&u)).map(|(c, v)| c + v).collect()
                        }
                        _ => b_hat.clone(),
                    }
                }
            };
            let theta = ThetaPoint::new(b, rho);
            if contains(spec, &theta, params) {
                break theta;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::SamplingExhausted(rejections));
            }
        };
        out.push(theta);
    }
    Ok(out)
}

/// Deterministic piecewise-constant parameter path: `values[k]` holds on
/// `[breakpoints[k], breakpoints[k + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProcessSchedule {
    pub breakpoints: Vec<f64>,
    pub values: Vec<ThetaPoint>,
}

impl ThetaProcessSchedule {
    pub fn constant(theta: ThetaPoint) -> Self {
        ThetaProcessSchedule {
            breakpoints: vec![0.0],
            values: vec![theta],
        }
    }

    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<ThetaPoint>,
        spec: &AmbiguitySpec,
        params: &MarketParams,
    ) -> Result<Self> {
        let s = ThetaProcessSchedule { breakpoints, values };
        s.validate(spec, params)?;
        Ok(s)
    }

    pub fn validate(&self, spec: &AmbiguitySpec, params: &MarketParams) -> Result<()> {
        self.validate_shape(params)?;
        if let Some(k) = self.values.iter().position(|v| !contains(spec, v, params)) {
            return Err(Error::InvalidInput(format!("schedule piece {k} lies outside the ambiguity set")));
        }
        Ok(())
    }

    /// Structural checks and positive definiteness, without set membership.
    pub fn validate_shape(&self, params: &MarketParams) -> Result<()> {
        let d = params.dim();
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.values.len() {
            return Err(Error::InvalidInput("schedule needs one value per breakpoint".into()));
        }
        if self.breakpoints[0] != 0.0 {
            return Err(Error::InvalidInput("schedule must start at t = 0".into()));
        }
        if self
            .breakpoints
            .windows(2)
            .any(|w| !(w[0] < w[1]) || w[1] > params.horizon)
        {
            return Err(Error::InvalidInput("breakpoints must increase within [0, T]".into()));
        }
        for v in &self.values {
            if v.b.len() != d || v.b.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("schedule drift has the wrong shape".into()));
            }
            v.rho.check_dim(d)?;
            if !is_positive_definite(&v.rho, d) {
                return Err(Error::InvalidInput("schedule correlation is not positive definite".into()));
            }
        }
        Ok(())
    }

    /// Index of the piece in force at time `t`.
    pub fn piece_at(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t).saturating_sub(1)
    }

    pub fn at(&self, t: f64) -> &ThetaPoint {
        &self.values[self.piece_at(t)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::min_pivot;
    use proptest::prelude::*;

    fn ellipse2(gamma: GammaBox) -> AmbiguitySpec {
        AmbiguitySpec::ellipsoidal(vec![0.4, 0.2], 0.1, gamma)
    }

    #[test]
    fn membership_examples() {
        let p = MarketParams::unit(2);
        let spec = ellipse2(GammaBox::new(vec![-0.5], vec![0.8]));
        assert!(contains(&spec, &ThetaPoint::new(vec![0.4, 0.2], RhoVector(vec![0.3])), &p));
        let spec0 = ellipse2(GammaBox::new(vec![-0.5], vec![0.5]));
        assert!(!contains(&spec0, &ThetaPoint::new(vec![0.4, 0.31], RhoVector(vec![0.0])), &p));
        let prod = AmbiguitySpec::product(vec![0.0, 0.0], vec![1.0, 1.0], GammaBox::new(vec![-0.5], vec![0.5]));
        assert!(contains(&prod, &ThetaPoint::new(vec![0.5, 1.0], RhoVector(vec![0.5])), &p));
        assert!(!contains(&prod, &ThetaPoint::new(vec![0.5, 1.0], RhoVector(vec![0.6])), &p));
    }

    #[test]
    fn project_rho_examples() {
        let spec = ellipse2(GammaBox::new(vec![-0.5], vec![0.5]));
        let inside = RhoVector(vec![0.2]);
        assert_eq!(project_rho(&spec, &inside).unwrap(), inside);
        assert_eq!(project_rho(&spec, &RhoVector(vec![0.9])).unwrap(), RhoVector(vec![0.5]));

        let spec3 = AmbiguitySpec::ellipsoidal(
            vec![0.5, 0.3, 0.2],
            0.1,
            GammaBox::new(vec![0.85; 3], vec![0.95; 3]),
        );
        let start = RhoVector(vec![0.99, 0.99, 0.8]);
        let out = project_rho(&spec3, &start).unwrap();
        assert!(is_positive_definite(&out, 3));
        assert!(spec3.gamma.in_box(&out));
        let steps = 41;
        let node = |k: usize| 0.85 + 0.1 * k as f64 / (steps - 1) as f64;
        let dist = |r: &RhoVector| r.0.iter().zip(&start.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let mut best = f64::INFINITY;
        for a in 0..steps {
            for b in 0..steps {
                for c in 0..steps {
                    let r = RhoVector(vec![node(a), node(b), node(c)]);
                    if is_positive_definite(&r, 3) {
                        best = best.min(dist(&r));
                    }
                }
            }
        }
        assert!(dist(&out) <= best + 1e-3, "dist {} best {best}", dist(&out));

        // box without a PD midpoint
        let bad = AmbiguitySpec::ellipsoidal(
            vec![0.5, 0.3, 0.2],
            0.1,
            GammaBox::new(vec![0.8, 0.8, -0.9], vec![0.9, 0.9, -0.8]),
        );
        assert_eq!(project_rho(&bad, &RhoVector(vec![0.9, 0.9, -0.9])), Err(Error::NoFeasiblePoint));
    }

    #[test]
    fn project_rho_full_ambiguity_shrinks_to_pd() {
        let spec = AmbiguitySpec::ellipsoidal(vec![0.5, 0.3, 0.2], 0.1, GammaBox::full());
        let out = project_rho(&spec, &RhoVector(vec![0.9, -0.9, 0.9])).unwrap();
        assert!(is_positive_definite(&out, 3));
    }

    #[test]
    fn project_b_examples() {
        let p = MarketParams::unit(2);
        let spec = ellipse2(GammaBox::new(vec![-0.5], vec![0.5]));
        let rho = RhoVector(vec![0.0]);
        assert_eq!(project_b(&spec, &[0.41, 0.2], &rho, &p).unwrap(), vec![0.41, 0.2]);
        let out = project_b(&spec, &[0.4, 0.0], &rho, &p).unwrap();
        assert!((out[0] - 0.4).abs() < 1e-15 && (out[1] - 0.1).abs() < 1e-15);
        let zero = AmbiguitySpec::ellipsoidal(vec![0.4, 0.2], 0.0, spec.gamma.clone());
        assert_eq!(project_b(&zero, &[1.0, -3.0], &rho, &p).unwrap(), vec![0.4, 0.2]);
    }

    #[test]
    fn sampling_is_deterministic_and_feasible() {
        let p = MarketParams::unit(3);
        let spec = AmbiguitySpec::ellipsoidal(vec![0.5, 0.3, 0.2], 0.1, GammaBox::full());
        assert!(sample(&spec, &p, 0, 1).unwrap().is_empty());
        let a = sample(&spec, &p, 50, 7).unwrap();
        let b = sample(&spec, &p, 50, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| contains(&spec, t, &p)));
        let prod = AmbiguitySpec::product(vec![0.1, -0.2, 0.0], vec![0.4, 0.2, 0.0], GammaBox::new(vec![0.0; 3], vec![0.3; 3]));
        assert!(sample(&prod, &p, 20, 3).unwrap().iter().all(|t| contains(&prod, t, &p)));
    }

    #[test]
    fn sampling_gives_up_on_empty_sets() {
        let p = MarketParams::unit(3);
        let spec = AmbiguitySpec::ellipsoidal(vec![0.1; 3], 0.1, GammaBox::point(RhoVector(vec![0.9, -0.9, 0.9])));
        assert!(matches!(sample(&spec, &p, 1, 0), Err(Error::SamplingExhausted(_))));
    }

    #[test]
    fn schedule_lookup_and_validation() {
        let p = MarketParams::unit(2);
        let spec = ellipse2(GammaBox::new(vec![-0.5], vec![0.8]));
        let a = ThetaPoint::new(vec![0.4, 0.2], RhoVector(vec![0.0]));
        let b = ThetaPoint::new(vec![0.35, 0.2], RhoVector(vec![0.5]));
        let s = ThetaProcessSchedule::new(vec![0.0, 0.5], vec![a.clone(), b.clone()], &spec, &p).unwrap();
        assert_eq!(s.at(0.0), &a);
        assert_eq!(s.at(0.49), &a);
        assert_eq!(s.at(0.5), &b);
        assert_eq!(s.at(1.0), &b);
        assert!(ThetaProcessSchedule::new(vec![0.1], vec![a.clone()], &spec, &p).is_err());
        assert!(ThetaProcessSchedule::new(vec![0.0, 0.5, 0.4], vec![a.clone(), b.clone(), a.clone()], &spec, &p).is_err());
        let outside = ThetaPoint::new(vec![1.0, 0.2], RhoVector(vec![0.0]));
        assert!(ThetaProcessSchedule::new(vec![0.0], vec![outside], &spec, &p).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = ellipse2(GammaBox::new(vec![-0.5], vec![0.8]));
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"type\":\"ellipsoidal\""));
        let back: AmbiguitySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let full: AmbiguitySpec =
            serde_json::from_str(r#"{"type":"ellipsoidal","b_hat":[0.5,0.3,0.2],"delta":0.2,"gamma":{"full_ambiguity":true}}"#).unwrap();
        assert!(full.gamma.full_ambiguity);
    }

    fn spec_and_rho() -> impl Strategy<Value = (AmbiguitySpec, RhoVector, MarketParams)> {
        (
            prop::collection::vec(-1.0..1.0f64, 3),
            0.0..0.5f64,
            prop::collection::vec(-0.95..0.95f64, 3),
            prop::collection::vec(0.0..0.9f64, 3),
            prop::collection::vec(-1.0..1.0f64, 3),
        )
            .prop_map(|(b_hat, delta, centers, widths, rho)| {
                let lo: Vec<f64> = centers.iter().zip(&widths).map(|(c, w)| (c - w / 2.0).max(-0.99)).collect();
                let hi: Vec<f64> = centers.iter().zip(&widths).map(|(c, w)| (c + w / 2.0).min(0.99)).collect();
                (
                    AmbiguitySpec::ellipsoidal(b_hat, delta, GammaBox::new(lo, hi)),
                    RhoVector(rho),
                    MarketParams::unit(3),
                )
            })
    }

    proptest! {
        #[test]
        fn project_rho_is_idempotent((spec, rho, _p) in spec_and_rho()) {
            if let Ok(once) = project_rho(&spec, &rho) {
                prop_assert!(is_positive_definite(&once, 3));
                prop_assert!(spec.gamma.in_box(&once));
                let twice = project_rho(&spec, &once).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn projected_drift_is_contained((spec, rho, p) in spec_and_rho(), b in prop::collection::vec(-3.0..3.0f64, 3)) {
            let Ok(rho) = project_rho(&spec, &rho) else { return Ok(()) };
            prop_assume!(min_pivot(&rho, 3).unwrap() > 1e-6);
            let out = project_b(&spec, &b, &rho, &p).unwrap();
            prop_assert!(contains(&spec, &ThetaPoint::new(out, rho), &p));
        }

        #[test]
        fn membership_is_scale_invariant((spec, rho, p) in spec_and_rho(), dir in prop::collection::vec(-1.0..1.0f64, 3), t in 0.1..10.0f64) {
            let Ok(rho) = project_rho(&spec, &rho) else { return Ok(()) };
            let DriftSet::Ellipsoidal { b_hat, delta } = &spec.drift else { unreachable!() };
            let cov = covariance_from(&rho, &p).unwrap();
            let norm = cov.whitened_norm_sq(&dir).sqrt();
            // keep away from the tolerance band
            prop_assume!((norm - delta).abs() > 1e-6 && *delta > 0.0);
            let b1: Vec<f64> = b_hat.iter().zip(&dir).map(|(c, v)| c + v).collect();
            let scaled = AmbiguitySpec::ellipsoidal(b_hat.clone(), delta * t, spec.gamma.clone());
            let b2: Vec<f64> = b_hat.iter().zip(&dir).map(|(c, v)| c + t * v).collect();
            prop_assert_eq!(
                contains(&spec, &ThetaPoint::new(b1, rho.clone()), &p),
                contains(&scaled, &ThetaPoint::new(b2, rho), &p)
            );
        }
    }
}
