//! Joint transmit beamforming and IRS phase-shift design for a secure MISO
//! SWIPT downlink.
//!
//! Two alternating-optimization solvers maximize the power collected by an
//! energy-harvesting receiver subject to a minimum secrecy rate toward the
//! information receiver: [`sdr_ao`] (semidefinite relaxation with Gaussian
//! randomization) and [`sca_ao`] (successive convex approximation with a
//! closed-form phase update). [`oracle`] holds brute-force references for
//! small instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod sca;
pub mod sdp;
pub mod sdr;

pub use channel::{ChannelSet, Link};
pub use config::{Distances, InitPhase, ScenarioConfig, SolverSettings};
pub use error::{Error, Result};
pub use linalg::{CVector, HermitianMatrix, C64};
pub use metrics::{
    check_feasible, harvested_power, secrecy_rate, Beamformer, Feasibility, PhaseProfile, SolveResult, SolveStatus,
};
pub use sca::{fixed_phase_beamforming, sca_ao};
pub use sdr::sdr_ao;
