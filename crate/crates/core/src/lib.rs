//! Term structure models whose state price density is the transition density
//! of a Lévy process, together with the Gaussian, quadratic-Gaussian and
//! finite-mark jump HJM models they are compared against.
//!
//! The crate is split along the numerical responsibilities:
//!
//! - [`levy`]: driver families, their symbols and closed-form densities.
//! - [`density`]: Fourier inversion of symbols and the convolution oracle.
//! - [`ldtsm`]: bond prices `p(λ_T + T - t, Z_t) / p(λ_t, Z_t)`, rates and λ calibration.
//! - [`hjm`]: Gaussian HJM, quadratic Gaussian and generalized Shirakawa models.
//! - [`simulation`]: exact-increment path generation with per-path seeding.
//! - [`validation`]: martingale and oracle checks producing [`validation::ValidationReport`]s.
//! - [`scenario`]: the JSON scenario format consumed by the command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod hjm;
pub mod ldtsm;
pub mod levy;
pub mod quadrature;
pub mod scenario;
pub mod simulation;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
pub use ldtsm::{LambdaSchedule, LdtsmFactor, LdtsmModel, StateSnapshot};
pub use levy::{LevySpec, LevySymbol};
