//! Correlation and covariance algebra for `d` assets.
//!
//! Correlations are stored as the strict upper triangle of `C(rho)` in
//! row-major order. Every solve goes through the lower Cholesky factor of the
//! correlation matrix, scaled by the volatilities; no inverse is ever formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold for accepting a correlation matrix as positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub sigmas: Vec<f64>,
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
    pub lambda: f64,
    pub x0: f64,
}

impl MarketParams {
    pub fn new(sigmas: Vec<f64>, horizon: f64, lambda: f64, x0: f64) -> Result<Self> {
        let params = MarketParams {
            sigmas,
            horizon,
            lambda,
            x0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Unit volatilities, `T = 1`, `lambda = 1`, `x0 = 1`.
    pub fn unit(d: usize) -> Self {
        MarketParams {
            sigmas: vec![1.0; d],
            horizon: 1.0,
            lambda: 1.0,
            x0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::InvalidInput("at least one asset is required".into()));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidInput(format!("volatility {s} is not positive")));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!("horizon {} is not positive", self.horizon)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidInput(format!("risk aversion {} is not positive", self.lambda)));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidInput("initial wealth is not finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    /// Same market with assets listed in `order`.
    pub fn permuted(&self, order: &[usize]) -> MarketParams {
        MarketParams {
            sigmas: order.iter().map(|&i| self.sigmas[i]).collect(),
            ..self.clone()
        }
    }
}

/// Strict upper triangle of a correlation matrix, row-major.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RhoVector(pub Vec<f64>);

impl RhoVector {
    pub fn zeros(d: usize) -> Self {
        RhoVector(vec![0.0; Self::pair_count(d)])
    }

    pub fn pair_count(d: usize) -> usize {
        d * d.saturating_sub(1) / 2
    }

    /// Position of pair `(i, j)`, `i < j`, in the packed vector.
    pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < d);
        i * d - i * (i + 1) / 2 + (j - i - 1)
    }

    /// All pairs `(i, j)` with `i < j`, in storage order.
    pub fn pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..d).flat_map(move |i| (i + 1..d).map(move |j| (i, j)))
    }

    /// Symmetric lookup with unit diagonal.
    pub fn get(&self, d: usize, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.0[Self::pair_index(d, i, j)],
            std::cmp::Ordering::Greater => self.0[Self::pair_index(d, j, i)],
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.0.len() != Self::pair_count(d) {
            return Err(Error::Dimension(format!(
                "expected {} correlations for {d} assets, got {}",
                Self::pair_count(d),
                self.0.len()
            )));
        }
        Ok(())
    }

    /// Correlations seen by the reordered assets: entry `(i, j)` of the result
    /// is entry `(order[i], order[j])` of `self`.
    pub fn permuted(&self, d: usize, order: &[usize]) -> RhoVector {
        RhoVector(Self::pairs(d).map(|(i, j)| self.get(d, order[i], order[j])).collect())
    }

    /// Inverse of [`RhoVector::permuted`].
    pub fn unpermuted(&self, d: usize, order: &[usize]) -> RhoVector {
        let mut out = RhoVector::zeros(d);
        for (i, j) in Self::pairs(d) {
            let (a, b) = (order[i].min(order[j]), order[i].max(order[j]));
            out.0[Self::pair_index(d, a, b)] = self.get(d, i, j);
        }
        out
    }
}

/// A candidate drift/correlation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub b: Vec<f64>,
    pub rho: RhoVector,
}

impl ThetaPoint {
    pub fn new(b: Vec<f64>, rho: RhoVector) -> Self {
        ThetaPoint { b, rho }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }
}

pub fn correlation_matrix(rho: &RhoVector, d: usize) -> Result<SymMatrix> {
    rho.check_dim(d)?;
    let mut data = vec![0.0; d * d];
    for i in 0..d {
        data[i * d + i] = 1.0;
    }
    for (k, (i, j)) in RhoVector::pairs(d).enumerate() {
        data[i * d + j] = rho.0[k];
        data[j * d + i] = rho.0[k];
    }
    Ok(SymMatrix { n: d, data })
}

/// Lower Cholesky factor, or the index of the first pivot below tolerance.
fn cholesky(a: &SymMatrix) -> std::result::Result<Vec<f64>, usize> {
    let n = a.n;
    let max_diag = (0..n).map(|i| a.get(i, i)).fold(0.0_f64, f64::max);
    let tol = PD_TOLERANCE * max_diag;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = a.get(j, j);
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        // NaN entries fail here as well
        if !(pivot > tol) {
            return Err(j);
        }
        let djj = pivot.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Smallest Cholesky pivot of `C(rho)`, or `None` when factorization fails.
pub fn min_pivot(rho: &RhoVector, d: usize) -> Option<f64> {
    let c = correlation_matrix(rho, d).ok()?;
    let l = cholesky(&c).ok()?;
    (0..d).map(|i| l[i * d + i] * l[i * d + i]).reduce(f64::min)
}

pub fn is_positive_definite(rho: &RhoVector, d: usize) -> bool {
    match correlation_matrix(rho, d) {
        Ok(c) => cholesky(&c).is_ok(),
        Err(_) => false,
    }
}

/// `Sigma(rho)` together with a lower factor `L`, `L L^T = Sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    cov: SymMatrix,
    factor: Vec<f64>,
}

impl CovMatrix {
    pub fn n(&self) -> usize {
        self.cov.n
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cov.get(i, j)
    }

    /// Entry `(i, j)` of the lower factor.
    pub fn factor(&self, i: usize, j: usize) -> f64 {
        self.factor[i * self.cov.n + j]
    }

    /// `L^{-1} x`
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let n = self.cov.n;
        let mut y = x.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.factor[i * n + k] * y[k];
            }
            y[i] = s / self.factor[i * n + i];
        }
        y
    }

    /// `L^{-T} y`
    fn back_substitute(&self, y: &[f64]) -> Vec<f64> {
        let n = self.cov.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.factor[k * n + i] * x[k];
            }
            x[i] = s / self.factor[i * n + i];
        }
        x
    }

    /// `Sigma^{-1} b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.back_substitute(&self.whiten(b))
    }

    /// `L z`
    pub fn color(&self, z: &[f64]) -> Vec<f64> {
        let n = self.cov.n;
        (0..n)
            .map(|i| (0..=i).map(|k| self.factor[i * n + k] * z[k]).sum())
            .collect()
    }

    /// `||L^{-1} x||_2^2`
    pub fn whitened_norm_sq(&self, x: &[f64]) -> f64 {
        self.whiten(x).iter().map(|v| v * v).sum()
    }
}

pub fn covariance_from(rho: &RhoVector, params: &MarketParams) -> Result<CovMatrix> {
    let d = params.dim();
    let c = correlation_matrix(rho, d)?;
    let lc = cholesky(&c).map_err(|pivot| Error::NotPositiveDefinite { pivot })?;
    let s = &params.sigmas;
    let mut cov = c;
    let mut factor = lc;
    for i in 0..d {
        for j in 0..d {
            cov.data[i * d + j] *= s[i] * s[j];
        }
        for k in 0..=i {
            factor[i * d + k] *= s[i];
        }
    }
    Ok(CovMatrix { cov, factor })
}

fn check_drift(b: &[f64], params: &MarketParams) -> Result<()> {
    if b.len() != params.dim() {
        return Err(Error::Dimension(format!(
            "drift has {} entries for {} assets",
            b.len(),
            params.dim()
        )));
    }
    Ok(())
}

/// `R(theta) = b^T Sigma(rho)^{-1} b`.
pub fn risk_premium(theta: &ThetaPoint, params: &MarketParams) -> Result<f64> {
    check_drift(&theta.b, params)?;
    let cov = covariance_from(&theta.rho, params)?;
    Ok(cov.whitened_norm_sq(&theta.b))
}

/// `kappa = Sigma(rho)^{-1} b`.
pub fn variance_risk_ratio(theta: &ThetaPoint, params: &MarketParams) -> Result<Vec<f64>> {
    check_drift(&theta.b, params)?;
    let cov = covariance_from(&theta.rho, params)?;
    Ok(cov.solve(&theta.b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskGradient {
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
}

/// `dR/db_i = 2 kappa_i`, and `dR/drho_ij = -2 sigma_i sigma_j kappa_i kappa_j` for the
/// pair coordinate, which enters the matrix twice.
pub fn risk_premium_gradients(theta: &ThetaPoint, params: &MarketParams) -> Result<RiskGradient> {
    let kappa = variance_risk_ratio(theta, params)?;
    let d = params.dim();
    let s = &params.sigmas;
    Ok(RiskGradient {
        b: kappa.iter().map(|k| 2.0 * k).collect(),
        rho: RhoVector::pairs(d)
            .map(|(i, j)| -2.0 * s[i] * s[j] * kappa[i] * kappa[j])
            .collect(),
    })
}

/// `H(b, rho) = b^T Sigma(rho*)^{-1} Sigma(rho) Sigma(rho*)^{-1} b*`.
pub fn saddle_h(b: &[f64], rho: &RhoVector, theta_star: &ThetaPoint, params: &MarketParams) -> Result<f64> {
    check_drift(b, params)?;
    check_drift(&theta_star.b, params)?;
    let cov_star = covariance_from(&theta_star.rho, params)?;
    let cov = covariance_from(rho, params)?;
    let u = cov_star.solve(b);
    let v = cov_star.solve(&theta_star.b);
    Ok(dot(&u, &cov.matrix().mul_vec(&v)))
}

/// Sharpe ratios of the drift anchor and their proximities in descending
/// `|beta|` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeProfile {
    pub betas: Vec<f64>,
    /// `order[k]` is the original index of the asset ranked `k`.
    pub order: Vec<usize>,
    /// `beta[order[j]] / beta[order[i]]` for ranked pairs `i < j`.
    pub proximities: RhoVector,
    pub zero_drift: bool,
}

impl SharpeProfile {
    /// Proximity between ranks `i < j`.
    pub fn proximity(&self, i: usize, j: usize) -> f64 {
        self.proximities.get(self.betas.len(), i, j)
    }

    /// Sharpe ratio of the asset ranked `k`.
    pub fn ranked_beta(&self, k: usize) -> f64 {
        self.betas[self.order[k]]
    }
}

pub fn sharpe_profile(b_hat: &[f64], params: &MarketParams) -> Result<SharpeProfile> {
    check_drift(b_hat, params)?;
    let d = params.dim();
    let betas: Vec<f64> = b_hat.iter().zip(&params.sigmas).map(|(b, s)| b / s).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| betas[b].abs().total_cmp(&betas[a].abs()));
    let proximities = RhoVector(
        RhoVector::pairs(d)
            .map(|(i, j)| {
                let lead = betas[order[i]];
                if lead == 0.0 {
                    0.0
                } else {
                    betas[order[j]] / lead
                }
            })
            .collect(),
    );
    let zero_drift = betas.iter().all(|b| *b == 0.0);
    Ok(SharpeProfile {
        betas,
        order,
        proximities,
        zero_drift,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
