//! Entropy numbers, Lipschitz extension and stable encoder/decoder pairs for
//! finite surrogates of compact model classes.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod combinations;
pub mod counterexample;
pub mod csrecovery;
pub mod error;
pub mod experiment;
pub mod extend;
pub mod interp;
pub mod io;
pub mod nets;
pub mod rng;
pub mod spaces;
pub mod stablewidth;

pub use error::{Error, Result};
