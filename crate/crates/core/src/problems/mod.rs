//! Engineering design test problems and Latin hypercube sampling.

mod catalog;
mod lhs;

pub use catalog::{catalog, eval_tcsd, eval_vessel, eval_welded, lookup, CatalogEntry};
pub use lhs::{lhs_sample, UNBOUNDED_RANGE};
pub(crate) use lhs::lhs_sample_with;
