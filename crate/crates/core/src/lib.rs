//! Block-parallel mesh adaptive direct search with LOWESS surrogate-assisted
//! candidate selection.
//!
//! The engine ([`mads::Mads`]) proposes blocks of `q` candidates that are
//! evaluated concurrently. Its search step fits a local linear regression
//! surrogate ([`surrogate`]), solves the surrogate problem and picks
//! candidates with one of six selection rules ([`search`]).

pub mod bench;
pub mod domain;
pub mod error;
pub mod mads;
pub mod problems;
pub mod rng;
pub mod search;
pub mod surrogate;

pub use domain::{Cache, EvalFailure, EvalSource, Evaluation, ProblemSpec, Score};
pub use error::{Error, Result};
