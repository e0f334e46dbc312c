use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{SolverConfig, SolverKind};
use crate::domain::{Evaluation, ProblemSpec, Score};
use crate::error::{Error, Result};
use crate::mads::{Block, Executor, Mads, MadsConfig, Phase, ScaledProblem, SearchRecord};
use crate::problems::lhs_sample;
use crate::rng::derive_seed;

/// Size of each starting point set.
pub const STARTING_SET_SIZE: usize = 64;

/// The starting point set of run `run`: a Latin hypercube of
/// [`STARTING_SET_SIZE`] points, shared by every solver.
pub fn starting_points(spec: &ProblemSpec, seed: u64, run: usize) -> Vec<Vec<f64>> {
    let s = derive_seed(seed, &format!("starts/{}", spec.name), run as u64);
    lhs_sample(&spec.lower, &spec.upper, STARTING_SET_SIZE, s)
}

/// Engine seed of run `run`.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    derive_seed(seed, "engine", run as u64)
}

/// State after one block evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub phase: Phase,
    /// 1-based block count.
    pub block: usize,
    /// Candidates in this block.
    pub q: usize,
    pub best_f: f64,
    pub best_h: f64,
    pub delta_mesh: f64,
    pub delta_poll: f64,
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub problem: String,
    pub solver: SolverKind,
    pub q: usize,
    pub run: usize,
    pub trace: Vec<TraceRow>,
    pub final_x: Option<Vec<f64>>,
    pub final_f: f64,
    pub final_h: f64,
    pub evaluations: usize,
    pub wall_clock: f64,
    pub search_records: Vec<SearchRecord>,
}

impl RunRecord {
    pub fn blocks(&self) -> usize {
        self.trace.len()
    }

    /// Best feasible objective after each block (`+inf` before the first
    /// feasible point).
    pub fn feasible_history(&self) -> Vec<f64> {
        self.trace
            .iter()
            .map(|r| if r.best_h == 0.0 { r.best_f } else { f64::INFINITY })
            .collect()
    }

    /// Best feasible objective at the end of the run.
    pub fn final_feasible_f(&self) -> f64 {
        if self.final_h == 0.0 {
            self.final_f
        } else {
            f64::INFINITY
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.final_h == 0.0 && self.final_f.is_finite()
    }

    /// Writes the per-block trace as CSV.
    pub fn write_trace<W: Write>(&self, w: W) -> Result<()> {
        write_trace(&self.trace, w)
    }

    /// Writes the search-step records, one JSON object per line.
    pub fn write_search_report<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.search_records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub const TRACE_HEADER: [&str; 8] = [
    "iteration",
    "phase",
    "block",
    "q",
    "best_f",
    "best_h",
    "delta_mesh",
    "delta_poll",
];

/// Floats with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Record(format!("not a number: '{s}'")))
}

pub fn write_trace<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in rows {
        out.write_record([
            r.iteration.to_string(),
            r.phase.to_string(),
            r.block.to_string(),
            r.q.to_string(),
            fmt_float(r.best_f),
            fmt_float(r.best_h),
            fmt_float(r.delta_mesh),
            fmt_float(r.delta_poll),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Record(format!("unexpected trace header: {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let int = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::Record(format!("bad integer '{}'", &rec[i])))
        };
        let phase = match &rec[1] {
            "init" => Phase::Init,
            "search" => Phase::Search,
            "poll" => Phase::Poll,
            other => return Err(Error::Record(format!("unknown phase '{other}'"))),
        };
        rows.push(TraceRow {
            iteration: int(0)?,
            phase,
            block: int(2)?,
            q: int(3)?,
            best_f: parse_float(&rec[4])?,
            best_h: parse_float(&rec[5])?,
            delta_mesh: parse_float(&rec[6])?,
            delta_poll: parse_float(&rec[7])?,
        });
    }
    Ok(rows)
}

fn better(a: Score, b: Score) -> Score {
    if a.precedes(&b) {
        a
    } else {
        b
    }
}

/// Runs one solver for at most `config.block_budget` block evaluations (fewer
/// if every mesh is exhausted first). `starts` are in problem coordinates;
/// multi-start uses the first `q` of them, the others the first one.
pub fn run_solver(
    config: &SolverConfig,
    problem: &ScaledProblem,
    starts: &[Vec<f64>],
    run: usize,
    exec: &Executor,
) -> Result<RunRecord> {
    config.validate()?;
    let needed = config.starting_points_needed();
    if starts.len() < needed {
        return Err(Error::InvalidConfig(format!(
            "{} needs {needed} starting points, got {}",
            config.kind,
            starts.len()
        )));
    }
    if let Some(s) = starts.iter().find(|s| s.len() != problem.dim()) {
        return Err(Error::InvalidConfig(format!(
            "starting point has {} coordinates, problem {} has {}",
            s.len(),
            problem.spec().name,
            problem.dim()
        )));
    }

    let clock = Instant::now();
    let mut engines: Vec<Mads> = match config.kind {
        SolverKind::Multistart => starts[..config.q]
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut c = MadsConfig::new(1, config.kind.search(), config.seed);
                c.stream = i as u64;
                Mads::new(problem, s, c)
            })
            .collect(),
        kind => vec![Mads::new(
            problem,
            &starts[0],
            MadsConfig::new(config.q, kind.search(), config.seed),
        )],
    };

    let mut trace = Vec::with_capacity(config.block_budget);
    let mut evaluations = 0;
    for b in 1..=config.block_budget {
        let blocks: Vec<(usize, Block, f64, f64)> = engines
            .iter_mut()
            .enumerate()
            .filter_map(|(i, m)| {
                let (dm, dp) = (m.mesh().delta_mesh(), m.mesh().delta_poll());
                m.next_block().map(|blk| (i, blk, dm, dp))
            })
            .collect();
        if blocks.is_empty() {
            break;
        }
        let points: Vec<Vec<f64>> = blocks.iter().flat_map(|(_, blk, _, _)| blk.points()).collect();
        let mut evals: Vec<Evaluation> = exec.evaluate(problem, &points);
        evaluations += evals.len();
        for (i, blk, _, _) in &blocks {
            let rest = evals.split_off(blk.len());
            engines[*i].tell(blk, std::mem::replace(&mut evals, rest));
        }

        let best = engines
            .iter()
            .fold(Score::WORST, |acc, m| better(m.best_score(), acc));
        let lead = &blocks[0];
        trace.push(TraceRow {
            iteration: blocks.iter().map(|(_, blk, _, _)| blk.iteration).max().unwrap_or(0),
            phase: lead.1.phase,
            block: b,
            q: points.len(),
            best_f: best.f,
            best_h: best.h,
            delta_mesh: lead.2,
            delta_poll: lead.3,
        });
    }

    let best = engines
        .iter()
        .filter_map(|m| m.best())
        .fold(None::<Evaluation>, |acc, e| match acc {
            Some(a) if !e.score().precedes(&a.score()) => Some(a),
            _ => Some(e),
        });
    let search_records = engines.iter_mut().flat_map(|m| m.take_search_records()).collect();
    Ok(RunRecord {
        problem: problem.spec().name.clone(),
        solver: config.kind,
        q: config.q,
        run,
        trace,
        final_f: best.as_ref().map_or(f64::INFINITY, |e| e.f),
        final_h: best.as_ref().map_or(f64::INFINITY, |e| e.h),
        final_x: best.map(|e| e.x),
        evaluations,
        wall_clock: clock.elapsed().as_secs_f64(),
        search_records,
    })
}
