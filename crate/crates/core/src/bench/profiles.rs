//! Performance profiles, speed-up/efficiency and result distributions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Best feasible objective after each block of one run (`+inf` while
/// infeasible).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub problem: String,
    pub solver: String,
    pub q: usize,
    pub run: usize,
    pub best_f: Vec<f64>,
}

impl History {
    pub fn final_f(&self) -> f64 {
        self.best_f.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Default ratio grid of the performance profiles.
pub const DEFAULT_ALPHAS: [f64; 17] = [
    1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 75.0, 100.0,
];

/// First (1-based) block count whose value is within `tau |f*|` of `f*`.
pub fn blocks_to_solve(best_f: &[f64], f_star: f64, tau: f64) -> Option<usize> {
    best_f
        .iter()
        .position(|&f| f.is_finite() && (f - f_star).abs() <= tau * f_star.abs())
        .map(|i| i + 1)
}

/// First (1-based) block count whose value is at most `target`.
pub fn blocks_to_reach(best_f: &[f64], target: f64) -> Option<usize> {
    best_f.iter().position(|&f| f <= target).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub solver: String,
    pub alpha: f64,
    pub proportion: f64,
}

/// Proportion of `(problem, run)` instances each solver solves within `alpha`
/// times the fewest blocks any solver needed. Unsolved instances never count.
///
/// `f_star` maps a problem name to its best known value; a zero or missing
/// value is an error since the relative criterion is then undefined.
pub fn performance_profile(
    histories: &[History],
    f_star: impl Fn(&str) -> Option<f64>,
    tau: f64,
    alphas: &[f64],
) -> Result<Vec<ProfilePoint>> {
    let mut solved: BTreeMap<(String, usize), BTreeMap<String, Option<usize>>> = BTreeMap::new();
    let mut solvers = BTreeSet::new();
    for h in histories {
        let fs = f_star(&h.problem)
            .ok_or_else(|| Error::Profile(format!("no best known value for {}", h.problem)))?;
        if fs == 0.0 || !fs.is_finite() {
            return Err(Error::Profile(format!(
                "best known value of {} is {fs}; relative criterion undefined",
                h.problem
            )));
        }
        solvers.insert(h.solver.clone());
        solved
            .entry((h.problem.clone(), h.run))
            .or_default()
            .insert(h.solver.clone(), blocks_to_solve(&h.best_f, fs, tau));
    }
    let mut out = Vec::with_capacity(solvers.len() * alphas.len());
    for s in &solvers {
        for &alpha in alphas {
            let mut total = 0usize;
            let mut hits = 0usize;
            for by_solver in solved.values() {
                let Some(b) = by_solver.get(s) else { continue };
                total += 1;
                let b_min = by_solver.values().flatten().min();
                if let (Some(b), Some(&b_min)) = (b, b_min) {
                    if (*b as f64) <= alpha * b_min as f64 {
                        hits += 1;
                    }
                }
            }
            let proportion = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
            out.push(ProfilePoint {
                solver: s.clone(),
                alpha,
                proportion,
            });
        }
    }
    Ok(out)
}

/// Speed-up and efficiency of one solver at one block size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityRow {
    pub solver: String,
    pub q: usize,
    /// Geometric mean of `b_ref(1) / b_ref(q)`; absent without valid pairs.
    pub speedup: Option<f64>,
    pub efficiency: Option<f64>,
    pub pairs: usize,
    /// Pairs left out because a reference block count was undefined.
    pub excluded: usize,
}

/// For each solver and `q`, with `f_ref` the best value a `q = 1` run
/// reached and `b_ref(q)` the first block where the `q` run matches it.
pub fn speedup_efficiency(histories: &[History]) -> Vec<ScalabilityRow> {
    let mut by_key: BTreeMap<(String, usize), BTreeMap<(String, usize), &History>> = BTreeMap::new();
    for h in histories {
        by_key
            .entry((h.solver.clone(), h.q))
            .or_default()
            .insert((h.problem.clone(), h.run), h);
    }
    let mut out = Vec::new();
    for ((solver, q), runs) in &by_key {
        let reference = by_key.get(&(solver.clone(), 1));
        let mut logs = Vec::new();
        let mut excluded = 0;
        for (pair, h) in runs {
            let base = reference.and_then(|r| r.get(pair));
            let ratio = base.and_then(|base| {
                let f_ref = base.best_f.iter().copied().fold(f64::INFINITY, f64::min);
                if !f_ref.is_finite() {
                    return None;
                }
                let b1 = blocks_to_reach(&base.best_f, f_ref)?;
                let bq = blocks_to_reach(&h.best_f, f_ref)?;
                Some(b1 as f64 / bq as f64)
            });
            match ratio {
                Some(r) => logs.push(r.ln()),
                None => excluded += 1,
            }
        }
        let speedup = (!logs.is_empty()).then(|| (logs.iter().sum::<f64>() / logs.len() as f64).exp());
        // Exact for q = 1, where every ratio is 1.
        let speedup = speedup.map(|s| if *q == 1 { 1.0 } else { s });
        out.push(ScalabilityRow {
            solver: solver.clone(),
            q: *q,
            efficiency: speedup.map(|s| s / *q as f64),
            speedup,
            pairs: logs.len(),
            excluded,
        });
    }
    out
}

/// Five-number summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile(&v, 0.5)
}

pub fn distribution(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Some(Distribution {
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub solver: String,
    pub q: usize,
    pub runs: usize,
    pub feasible_runs: usize,
    /// Distribution of the final relative gap `(f - f*) / |f*|` over feasible runs.
    pub gap: Option<Distribution>,
}

/// Final relative gaps per `(problem, solver, q)`.
pub fn summary_distribution(histories: &[History], f_star: impl Fn(&str) -> Option<f64>) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, usize), Vec<&History>> = BTreeMap::new();
    for h in histories {
        groups
            .entry((h.problem.clone(), h.solver.clone(), h.q))
            .or_default()
            .push(h);
    }
    groups
        .into_iter()
        .map(|((problem, solver, q), hs)| {
            let fs = f_star(&problem);
            let finals: Vec<f64> = hs.iter().map(|h| h.final_f()).filter(|f| f.is_finite()).collect();
            let gap = fs.filter(|&fs| fs != 0.0).and_then(|fs| {
                let gaps: Vec<f64> = finals.iter().map(|f| (f - fs) / fs.abs()).collect();
                distribution(&gaps)
            });
            SummaryRow {
                problem,
                solver,
                q,
                runs: hs.len(),
                feasible_runs: finals.len(),
                gap,
            }
        })
        .collect()
}
