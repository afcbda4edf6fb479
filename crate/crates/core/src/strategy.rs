//! Optimal robust strategy, value function and diversification labels.
//!
//! Once the worst case `theta*` is known, the robust investor behaves like a
//! classical mean-variance investor facing `theta*`: hold
//! `(x0 + e^{R* T} / (2 lambda) - x) * Sigma(rho*)^{-1} b*`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::market::{risk_premium, variance_risk_ratio, MarketParams, ThetaPoint};
use crate::solver::{CaseLabel, WorstCaseSolution};

/// Wealth-feedback rule `alpha(x) = (target - x) * direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackStrategy {
    pub theta_star: ThetaPoint,
    pub allocation_direction: Vec<f64>,
    pub r_star: f64,
    pub x0: f64,
    pub lambda: f64,
    pub horizon: f64,
}

impl FeedbackStrategy {
    /// Wealth level at which the position is closed: `x0 + e^{R* T} / (2 lambda)`.
    pub fn target_wealth(&self) -> f64 {
        self.x0 + (self.r_star * self.horizon).exp() / (2.0 * self.lambda)
    }

    /// `Lambda(x)`, the scalar multiplying the direction.
    pub fn scale_at(&self, x: f64) -> f64 {
        self.target_wealth() - x
    }

    /// Allocation at time `t` and wealth `x`. The rule does not depend on `t`.
    pub fn evaluate_alpha(&self, _t: f64, x: f64) -> Vec<f64> {
        let s = self.scale_at(x);
        self.allocation_direction.iter().map(|v| s * v).collect()
    }
}

fn feedback(theta: ThetaPoint, r_star: f64, params: &MarketParams) -> Result<FeedbackStrategy> {
    let allocation_direction = variance_risk_ratio(&theta, params)?;
    Ok(FeedbackStrategy {
        theta_star: theta,
        allocation_direction,
        r_star,
        x0: params.x0,
        lambda: params.lambda,
        horizon: params.horizon,
    })
}

pub fn robust_strategy(solution: &WorstCaseSolution, params: &MarketParams) -> Result<FeedbackStrategy> {
    feedback(solution.theta_star.clone(), solution.r_star, params)
}

/// Mean-variance strategy for a market with known parameters.
pub fn classical_strategy(theta0: &ThetaPoint, params: &MarketParams) -> Result<FeedbackStrategy> {
    let r = risk_premium(theta0, params)?;
    feedback(theta0.clone(), r, params)
}

fn value_from_premium(r_star: f64, params: &MarketParams) -> f64 {
    params.x0 + (r_star * params.horizon).exp_m1() / (4.0 * params.lambda)
}

/// `V0 = x0 + (e^{R* T} - 1) / (4 lambda)`.
pub fn value_v0(solution: &WorstCaseSolution, params: &MarketParams) -> f64 {
    value_from_premium(solution.r_star, params)
}

pub fn classical_value(theta0: &ThetaPoint, params: &MarketParams) -> Result<f64> {
    Ok(value_from_premium(risk_premium(theta0, params)?, params))
}

/// Coefficients of the quadratic value process
/// `V_t = K_t (X_t - E X_t)^2 + Y_t X_t + chi_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueCoefficients {
    pub r_star: f64,
    pub lambda: f64,
    pub horizon: f64,
}

impl ValueCoefficients {
    pub fn new(r_star: f64, params: &MarketParams) -> Self {
        ValueCoefficients {
            r_star,
            lambda: params.lambda,
            horizon: params.horizon,
        }
    }

    pub fn k(&self, t: f64) -> f64 {
        -self.lambda * (self.r_star * (t - self.horizon)).exp()
    }

    pub fn y(&self, _t: f64) -> f64 {
        1.0
    }

    pub fn chi(&self, t: f64) -> f64 {
        (self.r_star * (self.horizon - t)).exp_m1() / (4.0 * self.lambda)
    }

    /// Expected value process given the wealth mean and variance at `t`.
    pub fn expected_value(&self, t: f64, mean: f64, var: f64) -> f64 {
        self.k(t) * var + self.y(t) * mean + self.chi(t)
    }
}

/// `E_{theta*}[X*_t]` on the given times.
pub fn mean_wealth_path(strategy: &FeedbackStrategy, params: &MarketParams, t_grid: &[f64]) -> Vec<f64> {
    let r = strategy.r_star;
    let lead = (r * params.horizon).exp() / (2.0 * params.lambda);
    t_grid.iter().map(|t| params.x0 - lead * (-r * t).exp_m1()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeMode {
    /// The two held positions have the same sign.
    Directional,
    /// Long one asset, short the other.
    Spread,
}

/// Asset indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DiversificationClass {
    NoTrade,
    AntiDiversification { asset: usize },
    UnderDiversification { excluded_asset: usize, mode: TradeMode },
    WellDiversified { signs: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversificationReport {
    pub class: DiversificationClass,
    pub case_label: CaseLabel,
    /// Set when exactly two positions are held.
    pub trade_mode: Option<TradeMode>,
    pub signs: String,
    /// Compact one-line form, e.g. `AntiDiversification asset=1`.
    pub summary: String,
    pub narrative: String,
}

/// Relative size below which an allocation component counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-10;

fn sign_pattern(direction: &[f64], held: &[bool]) -> String {
    direction
        .iter()
        .zip(held)
        .map(|(v, h)| match (h, *v > 0.0) {
            (false, _) => '0',
            (true, true) => '+',
            (true, false) => '-',
        })
        .collect()
}

fn side(v: f64) -> &'static str {
    if v > 0.0 {
        "long"
    } else {
        "short"
    }
}

pub fn classify(solution: &WorstCaseSolution, params: &MarketParams) -> Result<DiversificationReport> {
    let direction = variance_risk_ratio(&solution.theta_star, params)?;
    let d = direction.len();
    let scale = direction.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let held: Vec<bool> = direction.iter().map(|v| v.abs() >= ZERO_THRESHOLD * scale && *v != 0.0).collect();
    let signs = sign_pattern(&direction, &held);
    let active: Vec<usize> = (0..d).filter(|&i| held[i]).collect();

    let trade_mode = if !solution.no_trade && active.len() == 2 {
        let (a, b) = (direction[active[0]], direction[active[1]]);
        Some(if a * b > 0.0 {
            TradeMode::Directional
        } else {
            TradeMode::Spread
        })
    } else {
        None
    };

    let (class, summary, narrative) = if solution.no_trade || active.is_empty() {
        (
            DiversificationClass::NoTrade,
            "NoTrade".to_string(),
            "no trade: the worst-case risk premium is zero, stay in the riskless asset".to_string(),
        )
    } else if active.len() == 1 {
        let i = active[0];
        (
            DiversificationClass::AntiDiversification { asset: i + 1 },
            format!("AntiDiversification asset={}", i + 1),
            format!("anti-diversification: invest only in asset {}, {}", i + 1, side(direction[i])),
        )
    } else if d == 3 && active.len() == 2 {
        let excluded = (0..d).find(|i| !held[*i]).unwrap_or(0);
        let mode = trade_mode.unwrap_or(TradeMode::Directional);
        let how = match mode {
            TradeMode::Directional => "directional trading",
            TradeMode::Spread => "spread trading",
        };
        (
            DiversificationClass::UnderDiversification {
                excluded_asset: excluded + 1,
                mode,
            },
            format!("UnderDiversification excluded={} mode={:?}", excluded + 1, mode),
            format!(
                "under-diversification: no investment in asset {}, {how} in assets {} and {}",
                excluded + 1,
                active[0] + 1,
                active[1] + 1
            ),
        )
    } else {
        let mut summary = format!("WellDiversified signs={signs}");
        if let Some(mode) = trade_mode {
            summary.push_str(&format!(" mode={mode:?}"));
        }
        let narrative = format!(
            "well-diversification: positions in {} of {d} assets with signs {signs}",
            active.len()
        );
        (DiversificationClass::WellDiversified { signs: signs.clone() }, summary, narrative)
    };

    Ok(DiversificationReport {
        class,
        case_label: solution.case_label,
        trade_mode,
        signs,
        summary,
        narrative,
    })
}

/// Serializable summary of a solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub theta_star: ThetaPoint,
    pub r_star: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    pub direction: Vec<f64>,
    pub class: DiversificationClass,
    pub case_label: CaseLabel,
}

pub fn strategy_report(solution: &WorstCaseSolution, params: &MarketParams) -> Result<StrategyReport> {
    let strategy = robust_strategy(solution, params)?;
    let report = classify(solution, params)?;
    Ok(StrategyReport {
        theta_star: solution.theta_star.clone(),
        r_star: solution.r_star,
        v0: value_v0(solution, params),
        direction: strategy.allocation_direction,
        class: report.class,
        case_label: solution.case_label,
    })
}
