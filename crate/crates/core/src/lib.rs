//! Pricing and hedging of reinsurance counterparty credit risk.
//!
//! The crate simulates a coupled claims/default model in which the claim
//! arrival intensity of a ceding insurer jumps when its reinsurer defaults,
//! values the stop-loss contract and its credit value adjustment (CVA), and
//! computes quadratic (mean-variance) CDS hedges of the resulting exposure.
//!
//! Module map:
//!
//! - [`model`]: parameters, intensity and payoff maps, assumption checks.
//! - [`paths`]: joint simulation of intensities, claims and default time.
//! - [`panjer`] and [`pricer`]: default-free contract value `v(t, l, x)`.
//! - [`cds`]: affine CIR survival, CDS value `g(t, y)` and gains process.
//! - [`cva`]: CVA estimators, sensitivities and wrong-way sweeps.
//! - [`hedge`]: mean-variance hedge ratio and tracking-error backtests.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cds;
pub mod cva;
pub mod error;
pub mod hedge;
pub mod model;
pub mod panjer;
pub mod paths;
pub mod presets;
pub mod pricer;
pub mod quad;
pub mod regression;
pub mod rng;
pub mod stats;

mod par;

pub use error::{Error, Result};
pub use model::{ClaimLaw, IntensityMap, JumpKind, ModelParams, PayoffSpec};
pub use paths::{Mode, PathEngine, ScenarioPath, SimGrid, StartState};
