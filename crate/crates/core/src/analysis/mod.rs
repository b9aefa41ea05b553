//! Curve fitting and qubit fidelity analysis.

pub mod fidelity;
pub mod fit;
pub mod lm;
pub mod mzi;

pub use fidelity::{equator_fidelity, pole_fidelity, qubit_fidelity, total_fidelity, FidelitySummary, QubitInput, QubitResult};
pub use fit::{fit_decay, fit_stark_modulation, CurvePoint, DecayCurve, DecayModel, FitParameter, FitResult, SweptVariable};
pub use mzi::{fit_fringe, mzi_fringe, FringeFit, FringePoint};
