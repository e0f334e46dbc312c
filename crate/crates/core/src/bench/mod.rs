//! Experiment harness: solver configurations, runs, aggregation.

pub mod config;
pub mod matrix;
pub mod profiles;
pub mod run;

pub use config::{SolverConfig, SolverKind};
pub use matrix::{
    history, read_histories, run_bench, run_cell, run_name, write_bench, write_profiles, write_run, BenchPlan, Cell,
};
pub use profiles::{
    blocks_to_reach, blocks_to_solve, distribution, median, performance_profile, speedup_efficiency,
    summary_distribution, Distribution, History, ProfilePoint, ScalabilityRow, SummaryRow, DEFAULT_ALPHAS,
};
pub use run::{run_seed, run_solver, starting_points, RunRecord, TraceRow, STARTING_SET_SIZE};
