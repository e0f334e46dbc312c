//! The experiment matrix and its on-disk outputs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::Path;

use rayon::prelude::*;

use super::config::{SolverConfig, SolverKind};
use super::profiles::{performance_profile, speedup_efficiency, summary_distribution, History, DEFAULT_ALPHAS};
use super::run::{fmt_float, parse_float, run_seed, run_solver, starting_points, RunRecord};
use crate::error::{Error, Result};
use crate::mads::{Executor, ScaledProblem};
use crate::problems::lookup;

/// Problems × solvers × block sizes × runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub problems: Vec<String>,
    pub solvers: Vec<SolverKind>,
    pub qs: Vec<usize>,
    pub runs: usize,
    pub blocks: usize,
    pub seed: u64,
}

/// One cell of the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub problem: String,
    pub config: SolverConfig,
    pub run: usize,
}

impl BenchPlan {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for p in &self.problems {
            for &s in &self.solvers {
                for &q in &self.qs {
                    for run in 0..self.runs {
                        out.push(Cell {
                            problem: p.clone(),
                            config: SolverConfig::new(s, q, run_seed(self.seed, run)).with_budget(self.blocks),
                            run,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Runs a single cell with a given executor.
pub fn run_cell(cell: &Cell, plan_seed: u64, exec: &Executor) -> Result<RunRecord> {
    let entry = lookup(&cell.problem)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown problem '{}'", cell.problem)))?;
    let problem = ScaledProblem::new(entry.spec);
    let starts = starting_points(problem.spec(), plan_seed, cell.run);
    run_solver(&cell.config, &problem, &starts, cell.run, exec)
}

/// Runs every cell, independent runs in parallel. Records come back in
/// [`BenchPlan::cells`] order.
pub fn run_bench(plan: &BenchPlan) -> Result<Vec<RunRecord>> {
    for p in &plan.problems {
        if lookup(p).is_none() {
            return Err(Error::InvalidConfig(format!("unknown problem '{p}'")));
        }
    }
    let exec = Executor::ambient();
    plan.cells()
        .par_iter()
        .map(|cell| {
            let rec = run_cell(cell, plan.seed, &exec)?;
            log::info!(
                "{} {} q={} run={}: f={} h={} ({:.1}s)",
                rec.problem,
                rec.solver,
                rec.q,
                rec.run,
                rec.final_f,
                rec.final_h,
                rec.wall_clock
            );
            Ok(rec)
        })
        .collect()
}

/// File stem identifying a run.
pub fn run_name(rec: &RunRecord) -> String {
    format!("{}_{}_q{}_r{}", rec.problem, rec.solver, rec.q, rec.run)
}

pub fn history(rec: &RunRecord) -> History {
    History {
        problem: rec.problem.clone(),
        solver: rec.solver.name().to_string(),
        q: rec.q,
        run: rec.run,
        best_f: rec.feasible_history(),
    }
}

/// Writes the trace and search report of one run into `dir`.
pub fn write_run(rec: &RunRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = run_name(rec);
    rec.write_trace(BufWriter::new(File::create(dir.join(format!("trace_{name}.csv")))?))?;
    if !rec.search_records.is_empty() {
        let f = File::create(dir.join(format!("search_report_{name}.jsonl")))?;
        rec.write_search_report(BufWriter::new(f))?;
    }
    Ok(())
}

const SUMMARY_HEADER: [&str; 7] = ["problem", "solver", "q", "run", "block", "best_f", "best_h"];

/// Writes per-run traces, `bench_summary.csv` (best values after every
/// block) and `bench_runs.csv` (one line per run).
pub fn write_bench(records: &[RunRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for rec in records {
        write_run(rec, dir)?;
    }
    let mut w = csv::Writer::from_path(dir.join("bench_summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for rec in records {
        for row in &rec.trace {
            w.write_record([
                rec.problem.clone(),
                rec.solver.to_string(),
                rec.q.to_string(),
                rec.run.to_string(),
                row.block.to_string(),
                fmt_float(row.best_f),
                fmt_float(row.best_h),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("bench_runs.csv"))?;
    w.write_record([
        "problem", "solver", "q", "run", "blocks", "evaluations", "final_f", "final_h", "wall_clock_s",
    ])?;
    for rec in records {
        w.write_record([
            rec.problem.clone(),
            rec.solver.to_string(),
            rec.q.to_string(),
            rec.run.to_string(),
            rec.blocks().to_string(),
            rec.evaluations.to_string(),
            fmt_float(rec.final_f),
            fmt_float(rec.final_h),
            format!("{:.3}", rec.wall_clock),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `bench_summary.csv` back into per-run feasible histories.
pub fn read_histories<R: Read>(r: R) -> Result<Vec<History>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::Record(format!("unexpected summary header: {header:?}")));
    }
    let mut runs: BTreeMap<(String, String, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let int = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::Record(format!("bad integer '{}'", &rec[i])))
        };
        let (f, h) = (parse_float(&rec[5])?, parse_float(&rec[6])?);
        runs.entry((rec[0].to_string(), rec[1].to_string(), int(2)?, int(3)?))
            .or_default()
            .push((int(4)?, if h == 0.0 { f } else { f64::INFINITY }));
    }
    Ok(runs
        .into_iter()
        .map(|((problem, solver, q, run), mut rows)| {
            rows.sort_by_key(|r| r.0);
            History {
                problem,
                solver,
                q,
                run,
                best_f: rows.into_iter().map(|r| r.1).collect(),
            }
        })
        .collect())
}

fn best_known(problem: &str) -> Option<f64> {
    lookup(problem).map(|e| e.best_known_f)
}

/// Profile file name for a tolerance, e.g. `profiles_tau1e-2.csv`.
pub fn profile_file_name(tau: f64) -> String {
    format!("profiles_tau{tau:e}.csv")
}

/// Writes performance profiles (one file per `tau`), `scalability.csv` and
/// `summary_distribution.csv` computed from the histories.
pub fn write_profiles(histories: &[History], taus: &[f64], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut qs: Vec<usize> = histories.iter().map(|h| h.q).collect();
    qs.sort_unstable();
    qs.dedup();
    for &tau in taus {
        let mut w = csv::Writer::from_path(dir.join(profile_file_name(tau)))?;
        w.write_record(["q", "solver", "alpha", "proportion"])?;
        for &q in &qs {
            let subset: Vec<History> = histories.iter().filter(|h| h.q == q).cloned().collect();
            for pt in performance_profile(&subset, best_known, tau, &DEFAULT_ALPHAS)? {
                w.write_record([q.to_string(), pt.solver, fmt_float(pt.alpha), fmt_float(pt.proportion)])?;
            }
        }
        w.flush()?;
    }

    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_float);
    let mut w = csv::Writer::from_path(dir.join("scalability.csv"))?;
    w.write_record(["solver", "q", "speedup", "efficiency", "pairs", "excluded"])?;
    for r in speedup_efficiency(histories) {
        w.write_record([
            r.solver,
            r.q.to_string(),
            opt(r.speedup),
            opt(r.efficiency),
            r.pairs.to_string(),
            r.excluded.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary_distribution.csv"))?;
    w.write_record([
        "problem", "solver", "q", "runs", "feasible_runs", "gap_min", "gap_q1", "gap_median", "gap_q3", "gap_max",
    ])?;
    for r in summary_distribution(histories, best_known) {
        let g = r.gap;
        w.write_record([
            r.problem,
            r.solver,
            r.q.to_string(),
            r.runs.to_string(),
            r.feasible_runs.to_string(),
            opt(g.map(|d| d.min)),
            opt(g.map(|d| d.q1)),
            opt(g.map(|d| d.median)),
            opt(g.map(|d| d.q3)),
            opt(g.map(|d| d.max)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
