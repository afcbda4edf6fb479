//! Single-asset drift ambiguity where `t -> E_theta V_t` need not be
//! monotone for the optimal strategy.
//!
//! With unit volatility, drift known to lie above `b_low`, worst case
//! `R* = b_low^2`, and the market actually running at drift `theta`, the time
//! derivative of `E_theta V_t` is `f(t, c)` with `c = (theta - b_low) b_low`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;

/// Values of `c` used for the large-`c` limit.
pub const LIMIT_CS: [f64; 3] = [1e2, 1e3, 1e4];

/// `f(t, c) = e^{R T} / (2 lambda) [c e^{-2ct} - e^{-R t} (1 - e^{-ct}) (R/2 - (R/2 + c) e^{-ct})]`.
pub fn counterexample_f(t: f64, c: f64, r_star: f64, params: &MarketParams) -> f64 {
    let lead = (r_star * params.horizon).exp() / (2.0 * params.lambda);
    let decay = (-c * t).exp();
    let half = 0.5 * r_star;
    lead * (c * decay * decay - (-r_star * t).exp() * (-(-c * t).exp_m1()) * (half - (half + c) * decay))
}

/// `-(R / (4 lambda)) e^{R (T - t)}`, the value of `f` as `c -> infinity`.
pub fn counterexample_limit(t: f64, r_star: f64, params: &MarketParams) -> f64 {
    -r_star / (4.0 * params.lambda) * (r_star * (params.horizon - t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRow {
    pub t: f64,
    pub f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub c: f64,
    pub t: f64,
    pub f: f64,
    pub limit: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleTable {
    pub r_star: f64,
    pub c: f64,
    pub rows: Vec<CounterexampleRow>,
    pub min_f: f64,
    pub has_negative: bool,
    pub limit_checks: Vec<LimitCheck>,
}

/// Tabulate `f` on `t_grid`. Needs one asset with unit volatility and
/// `0 <= b_low < theta`.
pub fn remark_counterexample(b_low: f64, theta: f64, params: &MarketParams, t_grid: &[f64]) -> Result<CounterexampleTable> {
    params.validate()?;
    if params.dim() != 1 || params.sigmas[0] != 1.0 {
        return Err(Error::InvalidInput("needs a single asset with unit volatility".into()));
    }
    if !(0.0 <= b_low && b_low < theta) || !theta.is_finite() {
        return Err(Error::InvalidInput("needs 0 <= b_low < theta".into()));
    }
    if t_grid.iter().any(|t| !(0.0..=params.horizon).contains(t)) {
        return Err(Error::InvalidInput("time grid must lie in [0, T]".into()));
    }
    let r_star = b_low * b_low;
    let c = (theta - b_low) * b_low;
    let rows: Vec<CounterexampleRow> = t_grid
        .iter()
        .map(|&t| CounterexampleRow {
            t,
            f: counterexample_f(t, c, r_star, params),
        })
        .collect();
    let min_f = rows.iter().map(|r| r.f).fold(f64::INFINITY, f64::min);
    let t_mid = 0.5 * params.horizon;
    let limit = counterexample_limit(t_mid, r_star, params);
    let limit_checks = LIMIT_CS
        .iter()
        .map(|&big| {
            let f = counterexample_f(t_mid, big, r_star, params);
            LimitCheck {
                c: big,
                t: t_mid,
                f,
                limit,
                gap: (f - limit).abs(),
            }
        })
        .collect();
    Ok(CounterexampleTable {
        r_star,
        c,
        has_negative: rows.iter().any(|r| r.f < 0.0),
        min_f,
        rows,
        limit_checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::ValueCoefficients;

    fn params() -> MarketParams {
        MarketParams::new(vec![1.0], 1.0, 1.0, 1.0).unwrap()
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn zero_gap_gives_zero() {
        let p = params();
        for t in grid(10) {
            assert_eq!(counterexample_f(t, 0.0, 0.04, &p), 0.0);
        }
    }

    #[test]
    fn derivative_of_expected_value_process() {
        // E_theta[V_t] in closed form for the optimal rule when the drift is theta:
        // Lambda_t = A N_t with log N drifting at -(theta b + b^2/2) and variance rate b^2.
        let p = params();
        let (b, theta) = (0.2, 0.7);
        let r = b * b;
        let c = (theta - b) * b;
        let coef = ValueCoefficients::new(r, &p);
        let a = (r * p.horizon).exp() / (2.0 * p.lambda);
        let ev = |t: f64| {
            let m1 = (-(theta * b) * t).exp();
            let m2 = ((-2.0 * theta * b + r) * t).exp();
            let mean = p.x0 + a * (1.0 - m1);
            coef.k(t) * a * a * (m2 - m1 * m1) + mean + coef.chi(t)
        };
        let h = 1e-5;
        for t in [0.1, 0.4, 0.8] {
            let fd = (ev(t + h) - ev(t - h)) / (2.0 * h);
            assert!((fd - counterexample_f(t, c, r, &p)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn limit_is_reached() {
        let table = remark_counterexample(0.2, 5.0, &params(), &grid(100)).unwrap();
        assert!((table.c - 0.96).abs() < 1e-15);
        let last = table.limit_checks.last().unwrap();
        assert!(last.gap < 1e-3);
        assert!(table.limit_checks.windows(2).all(|w| w[1].gap <= w[0].gap));
    }

    #[test]
    fn negative_values_appear_for_a_distant_scenario() {
        let table = remark_counterexample(0.2, 60.0, &params(), &grid(100)).unwrap();
        assert!(table.has_negative);
        assert!(table.min_f < 0.0);
    }

    #[test]
    fn domain_checks() {
        let p = params();
        assert!(remark_counterexample(0.3, 0.3, &p, &[0.5]).is_err());
        assert!(remark_counterexample(-0.1, 0.3, &p, &[0.5]).is_err());
        assert!(remark_counterexample(0.1, 0.3, &MarketParams::unit(2), &[0.5]).is_err());
        let wide = MarketParams::new(vec![2.0], 1.0, 1.0, 1.0).unwrap();
        assert!(remark_counterexample(0.1, 0.3, &wide, &[0.5]).is_err());
        assert!(remark_counterexample(0.1, 0.3, &p, &[1.5]).is_err());
    }
}
