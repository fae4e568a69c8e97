//! Synthesis of optimal linear Gaussian privacy mechanisms `Z = G Y + V`.
//!
//! The crate minimizes the leakage `I[S; Z]` between private data `S` and
//! disclosed data `Z` subject to a weighted mean-squared distortion budget,
//! by solving a log-det semidefinite program with an in-crate barrier
//! solver. It also provides log-concave leakage bounds, a Monte Carlo
//! harness and a command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod gaussmat;
pub mod model;
pub mod sdp;
pub mod sim;

pub use error::{Error, Result};
pub use gaussmat::{LogBase, Matrix, SymMatrix, Vector};
pub use model::{JointZS, Mechanism, Prior};
