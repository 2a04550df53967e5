//! Numerical toolkit for one-shot entropies of approximation chains:
//! Rényi divergences, conditional entropies, classical smoothing oracles,
//! theorem-level smooth min-entropy bounds and the sequential processes they
//! are checked against.

#![forbid(unsafe_code)]

pub mod bounds;
pub mod channel;
pub mod diqkd;
pub mod divergences;
pub mod entropies;
pub mod error;
pub mod linalg;
pub mod optimize;
pub mod random;
pub mod simulate;
pub mod smoothing;
pub mod suites;

pub use error::{Error, Result};
