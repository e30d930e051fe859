//! Hopf bifurcation analysis for scalar diffusion on the half-line with a
//! dynamic boundary condition.
//!
//! Everything is generic over a [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`, which is what the command-line tool uses.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod continuation;
pub mod dispersion;
pub mod error;
pub mod fieldsim;
pub mod kinetics;
pub mod normalform;
pub mod scalar;
pub mod spectral;
pub mod stability;

pub use bvp::{Bvp, BvpState, JacobianMode, NewtonReport, NewtonSettings};
pub use continuation::{
    continue_branch, fit_mu2, seed_branch, Branch, BranchFit, BranchPoint, ContinuationSettings, Termination,
};
pub use dispersion::{check_assumptions, char_fn, find_hopf, AssumptionReport, HopfPoint, ScanConfig};
pub use error::{Error, Result};
pub use fieldsim::{
    extract_period, fit_far_field, reconstruct, simulate, FarBc, FarField, FieldSlice, PeriodEstimate, SimSettings,
    Trajectory,
};
pub use kinetics::{BoundaryKinetics, CubicKinetics, FnKinetics, Partials};
pub use normalform::{cubic_hopf, expansion_coefficients, gamma_crit, mu2_omega2, Criticality, ExpansionCoefficients};
pub use scalar::Scalar;
pub use spectral::{FourierGrid, PeriodicProfile, Spectrum};
pub use stability::{
    classify, floquet_numeric, leading_eigenvalue, reduced_coeffs, ClassifyMethod, FloquetResult, FloquetSettings,
    Stability,
};

pub type Cubic = kinetics::CubicKinetics<f64>;
pub type Grid = spectral::FourierGrid<f64>;
pub type Profile = spectral::PeriodicProfile<f64>;
pub type Hopf = dispersion::HopfPoint<f64>;
pub type State = bvp::BvpState<f64>;
pub type Point = continuation::BranchPoint<f64>;
pub type Diagram = continuation::Branch<f64>;
pub type Coefficients = normalform::ExpansionCoefficients<f64>;
pub type Floquet = stability::FloquetResult<f64>;
pub type Field = fieldsim::FieldSlice<f64>;
pub type Traj = fieldsim::Trajectory<f64>;
