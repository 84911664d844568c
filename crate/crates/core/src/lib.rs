//! Energy accounting for wireless sensor networks.
//!
//! Node energy is split across five constituents (Individual, Local, Global,
//! Environment, Sink). Each constituent's energy is a per-packet coefficient
//! times the packets it handles. The crate provides:
//!
//! - closed-form packet flows with probability corrections ([`flows`]),
//! - the first-order radio model and relay threshold ([`radio`]),
//! - a deterministic slice-stepped network simulator ([`sim`]),
//! - least-squares coefficient estimation and error metrics ([`estimate`]),
//! - budget-constrained task selection ([`policy`]),
//! - CSV/TOML formats and the end-to-end pipelines behind the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod error;
pub mod estimate;
pub mod flows;
pub mod io;
pub mod pipeline;
pub mod policy;
pub mod radio;
pub mod sim;

pub use config::ScenarioConfig;
pub use energy::{
    CoefficientVector, Constituent, ConstituentFlowVector, ConstituentMask, ConstituentResourceMix,
    ResourcePowerProfile, ResourceUsageVector,
};
pub use error::{Error, Result};
