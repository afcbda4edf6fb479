//! Robust dynamic mean-variance portfolio selection under drift and
//! correlation ambiguity.
//!
//! The pipeline is: describe the market ([`MarketParams`]) and the ambiguity
//! set ([`AmbiguitySpec`]), find the worst-case parameters with
//! [`solver::solve`], then turn the result into a feedback strategy with
//! [`strategy::robust_strategy`]. The [`simulator`] checks the outcome by
//! Monte Carlo.

pub mod ambiguity;
pub mod error;
pub mod market;
pub mod simulator;
pub mod solver;
pub mod strategy;

pub use ambiguity::{AmbiguitySpec, DriftSet, GammaBox, ThetaProcessSchedule};
pub use error::{Error, Result};
pub use market::{CovMatrix, MarketParams, RhoVector, SharpeProfile, SymMatrix, ThetaPoint};
pub use simulator::{ObjectiveEstimate, SimConfig, WealthPaths};
pub use solver::{CaseLabel, Diagnostics, WorstCaseSolution};
pub use strategy::{DiversificationClass, DiversificationReport, FeedbackStrategy, StrategyReport};
