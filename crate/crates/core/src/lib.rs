//! Simulation and analysis toolkit for Stark-echo-modulated spin-wave
//! quantum memories in rare-earth-ion ensembles.
//!
//! The crate is organised around a pulse sequence acting on a small level
//! scheme:
//!
//! * [`scheme`], [`material`] and [`sequence`] hold the data model and the
//!   validated sequence builders for the forward and backward protocols.
//! * [`pathways`] enumerates every coherent emission channel symbolically and
//!   predicts its emission time, direction and Stark silencing.
//! * [`ensemble`] is an independent stochastic oracle that propagates a
//!   discrete ion ensemble through the same sequence.
//! * [`analytic`] and [`analysis`] contain the closed-form efficiency models,
//!   curve fitting and the time-bin qubit fidelity calculus.
//! * [`scenario`] and [`reproduce`] connect everything to scenario files and
//!   the bundled reference checks.

pub mod analysis;
pub mod analytic;
pub mod ensemble;
mod error;
pub mod material;
pub mod pathways;
pub mod reproduce;
pub mod scenario;
pub mod scheme;
pub mod sequence;
pub mod units;

pub use error::{Error, Result};
pub use material::{FeatureShape, MaterialParams};
pub use pathways::{EchoPathway, PathwayKind};
pub use scenario::Scenario;
pub use scheme::{Band, LevelScheme, TransitionKind};
pub use sequence::{Direction, OpticalPulse, PulseRole, PulseSequence, StarkPulse, ValidatedSequence};
