//! Hong-Ou-Mandel time-delay metrology with time- and number-resolving
//! detectors.
//!
//! The crate covers the full chain from arrival-time densities to estimates:
//!
//! - [`model`]: closed-form coincidence, bunching and no-beamsplitter densities.
//! - [`binned`]: time-binned outcome distributions for every detector type.
//! - [`information`]: classical and quantum Fisher information, optimal
//!   operating delay and matrix structure.
//! - [`simulate`]: seedable Monte Carlo with two independent samplers.
//! - [`estimate`]: maximum-likelihood estimation with Cramér-Rao comparison.
//! - [`verify`]: independent quadrature and differencing oracles.
//! - [`cli`]: the `homtool` front end (distributions, scans, benchmarks).

pub mod binned;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod information;
pub mod model;
pub mod simulate;
pub mod verify;

pub use binned::{
    BinningConfig, DetectorConfig, MeasurementConfig, Outcome, OutcomeDistribution, Protocol,
    Support,
};
pub use error::{Error, Result};
pub use model::{Parameter, PhysicalParams, SpectrumNote};
