//! Pricing of a storable good by a monopolist who faces two-state demand
//! uncertainty and, under regulation, may never raise the posted price.
//!
//! The crate solves the seller's finite-horizon problem three ways that are
//! kept in agreement by the test suite: closed-form schedules where they
//! exist, backward induction on a price grid, and exhaustive enumeration of
//! demand paths. On top of that sit a deterministic parallel Monte Carlo
//! engine, a nonlinear-demand extension solved by bisection, and utilities
//! for synthesizing and summarizing station-level price archives.

pub mod closed_form;
pub mod dp;
pub mod empirics;
pub mod error;
pub mod model;
pub mod nonlinear;
pub mod sim;

pub use closed_form::{
    expected_avg_price_flexible, expected_avg_price_regulated_2p, expected_cs_diff_2p, gamma_tilde,
    geometric_sum, kappa, marginal_ceiling_value, regime_classify, t_period_low_target,
    t_period_policy, two_period_policy, FlexiblePolicy, PricingPolicy, Regime, RegulatedClosedForm,
};
pub use dp::{enumerate_expectation, simulate_day, solve_dp, GridSpec, TabulatedPolicy};
pub use error::{Error, Result};
pub use model::{DemandState, MarketParams, PathOutcome};
pub use sim::{run_mc, synthesize_archive, PolicySelector, SimConfig, SimReport};
