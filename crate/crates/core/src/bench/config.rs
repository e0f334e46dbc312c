use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mads::SearchKind;
use crate::search::SelectionMethod;

/// The five compared solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// MADS without search step.
    Mads,
    /// `q` independent sequential MADS runs without a shared cache.
    Multistart,
    /// MADS with `q` Latin hypercube points as search step.
    Lhsearch,
    /// Surrogate search cycling through the best and most distant points.
    LowessA,
    /// Surrogate search cycling through methods 3 to 6.
    LowessB,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Mads,
        SolverKind::Multistart,
        SolverKind::Lhsearch,
        SolverKind::LowessA,
        SolverKind::LowessB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Mads => "mads",
            SolverKind::Multistart => "multistart",
            SolverKind::Lhsearch => "lhsearch",
            SolverKind::LowessA => "lowess-a",
            SolverKind::LowessB => "lowess-b",
        }
    }

    /// Search step of the underlying MADS instance(s).
    pub fn search(self) -> SearchKind {
        use SelectionMethod::*;
        match self {
            SolverKind::Mads | SolverKind::Multistart => SearchKind::None,
            SolverKind::Lhsearch => SearchKind::LatinHypercube,
            SolverKind::LowessA => SearchKind::Surrogate(vec![Best, MostDistant]),
            SolverKind::LowessB => SearchKind::Surrogate(vec![
                DistanceConstrained,
                FeasibilityMargin,
                MostIsolated,
                PopulatedArea,
            ]),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown solver '{s}' (expected mads, multistart, lhsearch, lowess-a or lowess-b)"
                ))
            })
    }
}

/// One solver setting of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Block size.
    pub q: usize,
    /// Number of block evaluations.
    pub block_budget: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(kind: SolverKind, q: usize, seed: u64) -> Self {
        Self {
            kind,
            q,
            block_budget: 100,
            seed,
        }
    }

    pub fn with_budget(mut self, blocks: usize) -> Self {
        self.block_budget = blocks;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidConfig("block size q must be at least 1".into()));
        }
        if self.block_budget == 0 {
            return Err(Error::InvalidConfig("block budget must be at least 1".into()));
        }
        Ok(())
    }

    /// Starting points consumed by one run.
    pub fn starting_points_needed(&self) -> usize {
        match self.kind {
            SolverKind::Multistart => self.q,
            _ => 1,
        }
    }
}
