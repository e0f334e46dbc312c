//! The surrogate-assisted search step: inner surrogate solve and candidate
//! selection.

pub mod inner;
pub mod selection;
pub mod spatial;

pub use inner::{solve_surrogate, InnerBudget, Predictor, SearchConfig, SurrogateCache, SurrogatePoint};
pub use selection::{cycle_select, SelectionMethod, SelectionState, Selector};
pub use spatial::KdTree;
