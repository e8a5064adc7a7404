//! Stochastic adding machines in base 2 and in Fibonacci base, truncations of
//! their transition operators, and the polynomial families and Julia sets that
//! describe their spectra.

pub mod chain;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod julia;
pub mod numeration;
pub mod operator;
pub mod qseq;
pub mod spectra;

pub use chain::{Base, ProbParam, RngStream, TransitionRow};
pub use error::{Error, Result};
pub use num_complex::Complex64;
