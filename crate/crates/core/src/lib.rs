//! Learning out-of-time-ordered correlators of parameterised spin chains.
//!
//! The crate builds four families of 1D Hamiltonians as Pauli term lists,
//! labels sampled couplings with OTOC values from either an exact dense
//! engine or an MPO/TEBD engine, and fits kernel ridge regression models to
//! the resulting datasets.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod exact_sim;
pub mod hamiltonians;
pub mod kernels;
pub mod mpo;
pub mod parallel;
pub mod pauli;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
pub use exact_sim::{OtocValue, Sign, Target};
pub use hamiltonians::{Family, ParamVector};
pub use parallel::Execution;
pub use pauli::Pauli;
