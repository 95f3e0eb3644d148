//! Comparison models: Gaussian HJM, quadratic Gaussian, and Gaussian HJM with
//! finite-mark jumps.

mod curve;
mod gauss;
mod qtsm;
mod shirakawa;
mod vol;

pub use curve::{InitialCurve, Knots};
pub use gauss::{gauss_bond, gauss_forward, gauss_ln_bond, gauss_ln_state_price, BrownianPath};
pub use qtsm::{
    gaussian_density_as_qtsm, qtsm_bond, qtsm_bond_printed, qtsm_forward, qtsm_oracle, QtsmInputs,
    QtsmSpec, ORACLE_TOL,
};
pub use shirakawa::{
    shirakawa_bond, shirakawa_forward, shirakawa_ln_bond, shirakawa_ln_state_price, JumpKernel,
    ShirakawaSpec,
};
pub use vol::{HjmVolFamily, VolatilityKernel};
