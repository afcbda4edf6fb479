//! Worst-case parameters: `theta* = argmin R(theta)` over the ambiguity set.
//!
//! Ellipsoidal sets with full correlation ambiguity, two assets or three
//! assets have closed forms. Everything else goes through projected
//! gradient descent. A brute-force grid search is kept as an independent
//! reference.

mod closed_form;
mod numeric;
mod oracle;
mod saddle;

use serde::{Deserialize, Serialize};

pub use closed_form::{
    solve_ellipsoidal_given_rho, solve_full_ambiguity, solve_three_asset, solve_two_asset, EllipsoidalWorstDrift,
};
pub use numeric::{numeric_minimize, solve_product, NumericOptions};
pub use oracle::{grid_oracle, MAX_GRID_POINTS};
pub use saddle::{verify_saddle, SaddleReport, SADDLE_TOLERANCE};

use crate::ambiguity::{AmbiguitySpec, DriftSet};
use crate::error::{Error, Result};
use crate::market::{risk_premium, MarketParams, ThetaPoint};

/// Which branch produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Singleton,
    FixedCorrelation,
    FullAmbiguity,
    #[serde(rename = "TwoAsset.Interior")]
    TwoAssetInterior,
    #[serde(rename = "TwoAsset.Upper")]
    TwoAssetUpper,
    #[serde(rename = "TwoAsset.Lower")]
    TwoAssetLower,
    #[serde(rename = "ThreeAsset.Case1")]
    ThreeAssetCase1,
    #[serde(rename = "ThreeAsset.Case2i")]
    ThreeAssetCase2i,
    #[serde(rename = "ThreeAsset.Case2ii")]
    ThreeAssetCase2ii,
    #[serde(rename = "ThreeAsset.Case3i")]
    ThreeAssetCase3i,
    #[serde(rename = "ThreeAsset.Case3ii")]
    ThreeAssetCase3ii,
    #[serde(rename = "ThreeAsset.Case4i")]
    ThreeAssetCase4i,
    #[serde(rename = "ThreeAsset.Case4ii")]
    ThreeAssetCase4ii,
    #[serde(rename = "ThreeAsset.Case5i")]
    ThreeAssetCase5i,
    #[serde(rename = "ThreeAsset.Case5ii")]
    ThreeAssetCase5ii,
    #[serde(rename = "ThreeAsset.Case5iii")]
    ThreeAssetCase5iii,
    #[serde(rename = "ThreeAsset.Case5iv")]
    ThreeAssetCase5iv,
    Numeric,
    Oracle,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        use CaseLabel::*;
        match self {
            Singleton => "Singleton",
            FixedCorrelation => "FixedCorrelation",
            FullAmbiguity => "FullAmbiguity",
            TwoAssetInterior => "TwoAsset.Interior",
            TwoAssetUpper => "TwoAsset.Upper",
            TwoAssetLower => "TwoAsset.Lower",
            ThreeAssetCase1 => "ThreeAsset.Case1",
            ThreeAssetCase2i => "ThreeAsset.Case2i",
            ThreeAssetCase2ii => "ThreeAsset.Case2ii",
            ThreeAssetCase3i => "ThreeAsset.Case3i",
            ThreeAssetCase3ii => "ThreeAsset.Case3ii",
            ThreeAssetCase4i => "ThreeAsset.Case4i",
            ThreeAssetCase4ii => "ThreeAsset.Case4ii",
            ThreeAssetCase5i => "ThreeAsset.Case5i",
            ThreeAssetCase5ii => "ThreeAsset.Case5ii",
            ThreeAssetCase5iii => "ThreeAsset.Case5iii",
            ThreeAssetCase5iv => "ThreeAsset.Case5iv",
            Numeric => "Numeric",
            Oracle => "Oracle",
        }
    }

    /// Three-asset case number (1 to 5), if any.
    pub fn three_asset_case(self) -> Option<u8> {
        use CaseLabel::*;
        match self {
            ThreeAssetCase1 => Some(1),
            ThreeAssetCase2i | ThreeAssetCase2ii => Some(2),
            ThreeAssetCase3i | ThreeAssetCase3ii => Some(3),
            ThreeAssetCase4i | ThreeAssetCase4ii => Some(4),
            ThreeAssetCase5i | ThreeAssetCase5ii | ThreeAssetCase5iii | ThreeAssetCase5iv => Some(5),
            _ => None,
        }
    }
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub starts: usize,
    pub grid_resolution: Option<usize>,
    pub grid_points: usize,
    /// `|kappa_i(rho*)|` of the component a closed form sets to zero.
    pub root_residual: Option<f64>,
    /// Box variational-inequality residual of the numeric solver.
    pub optimality_residual: Option<f64>,
    pub converged: bool,
    /// Asset (0-based, input order) whose allocation a closed form zeroes.
    pub zeroed_asset: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseSolution {
    pub theta_star: ThetaPoint,
    pub r_star: f64,
    pub case_label: CaseLabel,
    pub no_trade: bool,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

fn solve_singleton(theta: ThetaPoint, params: &MarketParams) -> Result<WorstCaseSolution> {
    let r_star = risk_premium(&theta, params)?;
    Ok(WorstCaseSolution {
        no_trade: theta.b.iter().all(|b| *b == 0.0),
        theta_star: theta,
        r_star,
        case_label: CaseLabel::Singleton,
        diagnostics: Diagnostics {
            converged: true,
            ..Diagnostics::default()
        },
    })
}

/// Pick the closed form that applies, falling back to the numeric solver.
pub fn solve(spec: &AmbiguitySpec, params: &MarketParams) -> Result<WorstCaseSolution> {
    params.validate()?;
    spec.validate(params)?;
    if let Some(theta) = spec.singleton_point() {
        return solve_singleton(theta, params);
    }
    let d = params.dim();
    match &spec.drift {
        DriftSet::Product { .. } => solve_product(spec, params),
        DriftSet::Ellipsoidal { b_hat, delta } => {
            if spec.gamma.full_ambiguity {
                return solve_full_ambiguity(b_hat, *delta, params);
            }
            match d {
                2 => solve_two_asset(spec, params),
                3 => solve_three_asset(spec, params),
                _ if spec.gamma.is_singleton() => closed_form::solve_fixed_correlation(spec, params),
                _ => numeric_minimize(spec, params, &NumericOptions::default()),
            }
        }
    }
}

pub(crate) fn ellipsoid_parts(spec: &AmbiguitySpec) -> Result<(&[f64], f64)> {
    match &spec.drift {
        DriftSet::Ellipsoidal { b_hat, delta } => Ok((b_hat, *delta)),
        DriftSet::Product { .. } => Err(Error::InvalidInput("expected an ellipsoidal ambiguity set".into())),
    }
}
