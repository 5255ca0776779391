//! Fractional-moment localization diagnostics for finite-difference random
//! Schrödinger operators `H = H0 + lambda V`.
//!
//! All numerical code is generic over a [`Real`] scalar; the aliases at the
//! crate root fix it to `f64`.

pub mod criterion;
pub mod error;
pub mod linalg;
pub mod localization;
pub mod model;
pub mod moments;
pub mod resolvent;
pub mod scalar;
pub mod validation;

pub use error::{Error, Result};
pub use model::Ensemble;
pub use moments::Workers;
pub use scalar::{Cx, Real};

/// Grid with `f64` coordinates.
pub type Grid = model::GridSpec<f64>;
/// Hamiltonian with `f64` entries.
pub type Hamiltonian = model::DiscreteHamiltonian<f64>;
/// Random model ensemble in `f64`.
pub type Model = model::ModelEnsemble<f64>;
/// Complex `f64`.
pub type C64 = Cx<f64>;
pub type Shift = resolvent::SpectralShift<f64>;
pub type Indicator = resolvent::IndicatorSet<f64>;
pub type Solver = resolvent::SolverOptions<f64>;
pub type Exponent = moments::FractionalExponent<f64>;
pub type Moment = moments::MomentEstimate<f64>;
pub type Schedule = moments::EpsilonSchedule<f64>;
pub type Scan = moments::EpsilonScan<f64>;
pub type Criterion = criterion::CriterionReport<f64>;
pub type Fit = criterion::DecayFit<f64>;
pub type Window = localization::EigenWindow<f64>;
