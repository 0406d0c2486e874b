//! Desk-scale simulator and analysis toolkit for ghost imaging of
//! polarization/wavevector Bell correlations between a heralding photon
//! and a photon released from a multimode quantum memory.
//!
//! The pipeline is:
//!
//! * [`kspace`]: transverse-wavevector geometry, the Gaussian EPR biphoton
//!   and the phase-engineered Bell-EPR state.
//! * [`measurement`]: polarization outcome probabilities (adaptive
//!   quadrature and closed forms) and the visibility budget.
//! * [`montecarlo`]: event-level simulation of the feedback-gated sequence,
//!   classical fringe frames, g² diagnostics and rate figures.
//! * [`analysis`]: correlation maps, fringe fits, Bell S parameters,
//!   κ estimation and a local-hidden-variable bound oracle.
//! * [`phaseret`]: Fourier-transform phase retrieval from fringe stacks.
//!
//! The geometric and closed-form layers are generic over [`Real`]; the
//! aliases below fix them to `f64`, which is what the simulator and the
//! analysis code consume.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod analysis;
pub mod error;
pub mod fit;
pub mod formats;
pub mod kspace;
pub mod measurement;
pub mod montecarlo;
pub mod phaseret;
pub mod quadrature;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type KVector = kspace::KVector<f64>;
pub type Grid = kspace::Grid<f64>;
pub type BiphotonParams = kspace::BiphotonParams<f64>;
pub type PhaseProfile = kspace::PhaseProfile<f64>;
pub type SampledPhase = kspace::SampledPhase<f64>;
pub type BellEprState = kspace::BellEprState<f64>;
pub type Setting = measurement::Setting<f64>;
pub type VisibilityBudget = measurement::VisibilityBudget<f64>;

pub use measurement::{Channel, SignalAnalyzer};
