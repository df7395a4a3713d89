//! Numerical laboratory for Ruelle probability cascades and the
//! replica-symmetry-breaking bound on the free energy of mixed p-spin models.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod error;
pub mod estimate;
pub mod functional;
pub mod interpolation;
pub mod mixture;
pub mod mu_quadrature;
pub mod optimize;
pub mod par;
pub mod pd_process;
pub mod quadrature;
pub mod recursion;
pub mod rng;
pub mod sk_model;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use estimate::{CheckRecord, Estimate, EstimatePair, TruncatedEstimate};
pub use mixture::{MixtureFunction, RsbParams};
pub use rng::Seed;
