//! Nonlinear system identification from non-uniform observations.
//!
//! Physics-based models with optional black-box compensators are fitted by
//! first-order minimization of multi-step prediction costs, differentiated in
//! reverse mode through the unrolled dynamics. Observation schemes cover
//! uniform sampling, missing samples, multiple runs and aggregated windows.

pub mod adiff;
pub mod dynamics;
pub mod observations;
pub mod cost;
pub mod optimizer;
pub mod analysis;
pub mod harness;
