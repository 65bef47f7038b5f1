//! Economics of ransom pricing.
//!
//! Builds demand curves from victim valuations, finds profit-maximizing
//! ransoms under uniform, segmented and personalized pricing, solves the
//! bargaining games between criminals and victims, and simulates seeded
//! extortion campaigns.
//!
//! Batch work (sweeps, victim evaluations, per-segment optimization) runs on
//! rayon when the `parallel` feature is enabled and sequentially otherwise;
//! results are identical either way.

pub mod bargaining;
pub mod demand;
pub mod exec;
pub mod learning;
pub mod money;
pub mod pricing;
pub mod simulator;
pub mod survey;

pub use demand::{DemandCurve, DemandPoint, Polynomial};
pub use exec::Execution;
pub use money::Money;
pub use pricing::{CostModel, PricingOutcome};
