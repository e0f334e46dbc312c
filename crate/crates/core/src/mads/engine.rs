//! Block-parallel MADS driven through an ask/tell interface.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::directions::{extra_poll_point, pad_poll, poll_points};
use super::incumbents::Incumbents;
use super::mesh::{IterationOutcome, MeshState, Scaling};
use crate::domain::{distance, Cache, Evaluation, PointKey, ProblemSpec, Score};
use crate::problems::lhs_sample_with;
use crate::rng::{self, Rng};
use crate::search::inner::finite_box;
use crate::search::{cycle_select, solve_surrogate, SearchConfig, SelectionMethod, SelectionState};
use crate::surrogate::{fit, prediction_score, LowessModel, ModelDiagnostics};

/// What the search step does before each poll.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchKind {
    None,
    /// `q` fresh Latin hypercube points per iteration.
    LatinHypercube,
    /// Surrogate solve followed by selection with the given method cycle.
    Surrogate(Vec<SelectionMethod>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MadsConfig {
    /// Block size.
    pub q: usize,
    pub search: SearchKind,
    pub inner: SearchConfig,
    /// Initial poll size in unit-box coordinates.
    pub initial_poll: f64,
    /// Most recent evaluations used to train the surrogate.
    pub training_cap: usize,
    pub seed: u64,
    /// Distinguishes engines sharing a seed (multi-start instances).
    pub stream: u64,
}

impl MadsConfig {
    pub fn new(q: usize, search: SearchKind, seed: u64) -> Self {
        Self {
            q: q.max(1),
            search,
            inner: SearchConfig::default(),
            initial_poll: 0.1,
            training_cap: 500,
            seed,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Search,
    Poll,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "init",
            Phase::Search => "search",
            Phase::Poll => "poll",
        })
    }
}

/// A point to evaluate, in unit-box coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: Vec<f64>,
    /// Selection method that proposed a search point.
    pub method: Option<SelectionMethod>,
    /// Surrogate `(ĥ, f̂)` when a model was available.
    pub predicted: Option<Score>,
}

impl Candidate {
    fn plain(x: Vec<f64>) -> Self {
        Self {
            x,
            method: None,
            predicted: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub iteration: usize,
    pub phase: Phase,
    /// Position of the block within its iteration.
    pub index: usize,
    pub candidates: Vec<Candidate>,
}

impl Block {
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.candidates.iter().map(|c| c.x.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// One evaluated search-step point: its selection method and predicted versus
/// true outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub iteration: usize,
    pub method: u8,
    pub f_hat: f64,
    pub h_hat: f64,
    pub f: f64,
    pub h: f64,
}

/// A problem mapped to the unit box.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    spec: ProblemSpec,
    scaling: Scaling,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ScaledProblem {
    pub fn new(spec: ProblemSpec) -> Self {
        let scaling = Scaling::new(&spec.lower, &spec.upper, &spec.integer_mask);
        let lower = scaling.to_unit(&spec.lower);
        let upper = scaling.to_unit(&spec.upper);
        Self {
            spec,
            scaling,
            lower,
            upper,
        }
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Evaluates a unit-box point; the returned evaluation keeps unit coordinates.
    pub fn evaluate(&self, u: &[f64]) -> Evaluation {
        let mut e = self.spec.evaluate(&self.scaling.to_original(u));
        e.x = u.to_vec();
        e
    }
}

/// MADS state machine. Call [`Mads::next_block`] for the next block of
/// candidates and hand the evaluations back through [`Mads::tell`].
pub struct Mads {
    config: MadsConfig,
    lower: Vec<f64>,
    upper: Vec<f64>,
    scaling: Scaling,
    cache: Cache,
    incumbents: Incumbents,
    mesh: MeshState,
    iteration: usize,
    blocks_in_iteration: usize,
    start: Option<Vec<f64>>,
    queue: VecDeque<Block>,
    poll_center: Vec<f64>,
    model: Option<LowessModel>,
    diagnostics: Option<ModelDiagnostics>,
    surrogate_bests: Vec<Vec<f64>>,
    selection: SelectionState,
    directions_rng: Rng,
    search_rng: Rng,
    reports: Vec<SearchRecord>,
}

impl Mads {
    /// `start` is in the problem's own coordinates.
    pub fn new(problem: &ScaledProblem, start: &[f64], config: MadsConfig) -> Self {
        let mut u = problem.scaling.to_unit(start);
        for (j, v) in u.iter_mut().enumerate() {
            *v = v.clamp(problem.lower[j], problem.upper[j]);
        }
        problem.scaling.snap_integers(&mut u);
        let directions_rng = rng::stream(config.seed, "directions", config.stream);
        let search_rng = rng::stream(config.seed, "search", config.stream);
        Self {
            mesh: MeshState::new(config.initial_poll, u.clone()),
            lower: problem.lower.clone(),
            upper: problem.upper.clone(),
            scaling: problem.scaling.clone(),
            cache: Cache::new(),
            incumbents: Incumbents::new(),
            iteration: 0,
            blocks_in_iteration: 0,
            poll_center: u.clone(),
            start: Some(u),
            queue: VecDeque::new(),
            model: None,
            diagnostics: None,
            surrogate_bests: Vec::new(),
            selection: SelectionState::new(),
            directions_rng,
            search_rng,
            reports: Vec::new(),
            config,
        }
    }

    pub fn config(&self) -> &MadsConfig {
        &self.config
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn incumbents(&self) -> &Incumbents {
        &self.incumbents
    }

    pub fn mesh(&self) -> &MeshState {
        &self.mesh
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Diagnostics of the most recent surrogate fit.
    pub fn model_diagnostics(&self) -> Option<&ModelDiagnostics> {
        self.diagnostics.as_ref()
    }

    pub fn search_records(&self) -> &[SearchRecord] {
        &self.reports
    }

    pub fn take_search_records(&mut self) -> Vec<SearchRecord> {
        std::mem::take(&mut self.reports)
    }

    /// Best evaluation under `≺`, in the problem's coordinates.
    pub fn best(&self) -> Option<Evaluation> {
        self.incumbents.best().map(|e| {
            let mut e = e.clone();
            e.x = self.scaling.to_original(&e.x);
            e
        })
    }

    /// Best `(h, f)` so far, or the virtual worst.
    pub fn best_score(&self) -> Score {
        self.incumbents.best().map_or(Score::WORST, |e| e.score())
    }

    pub fn is_done(&self) -> bool {
        self.start.is_none() && self.queue.is_empty() && self.mesh.is_exhausted()
    }

    /// Next block to evaluate; `None` once the mesh is exhausted.
    pub fn next_block(&mut self) -> Option<Block> {
        if let Some(u) = self.start.take() {
            return Some(Block {
                iteration: 0,
                phase: Phase::Init,
                index: 0,
                candidates: vec![Candidate::plain(u)],
            });
        }
        if let Some(b) = self.queue.pop_front() {
            return Some(self.number(b));
        }
        loop {
            if self.mesh.is_exhausted() {
                return None;
            }
            self.begin_iteration();
            let search = self.search_candidates();
            if !search.is_empty() {
                let b = Block {
                    iteration: self.iteration,
                    phase: Phase::Search,
                    index: 0,
                    candidates: search,
                };
                return Some(self.number(b));
            }
            self.queue = self.poll_blocks();
            if let Some(b) = self.queue.pop_front() {
                return Some(self.number(b));
            }
            self.end_iteration(IterationOutcome::Failure);
        }
    }

    fn number(&mut self, mut b: Block) -> Block {
        b.index = self.blocks_in_iteration;
        self.blocks_in_iteration += 1;
        b
    }

    /// Records the evaluations of `block` (in candidate order) and advances
    /// the iteration.
    pub fn tell(&mut self, block: &Block, evals: Vec<Evaluation>) {
        debug_assert_eq!(block.len(), evals.len());
        if block.phase == Phase::Search {
            for (c, e) in block.candidates.iter().zip(&evals) {
                let (Some(m), Some(p)) = (c.method, c.predicted) else { continue };
                self.reports.push(SearchRecord {
                    iteration: block.iteration,
                    method: m.id(),
                    f_hat: p.f,
                    h_hat: p.h,
                    f: e.f,
                    h: e.h,
                });
            }
        }
        let success = self.incumbents.update(&evals);
        for e in evals {
            self.cache.insert(e);
        }
        match block.phase {
            Phase::Init => {}
            Phase::Search => {
                if success {
                    self.end_iteration(IterationOutcome::Success);
                } else {
                    self.queue = self.poll_blocks();
                    if self.queue.is_empty() {
                        self.end_iteration(IterationOutcome::Failure);
                    }
                }
            }
            Phase::Poll => {
                if success {
                    self.queue.clear();
                    let outcome = if self.at_poll_distance() {
                        IterationOutcome::PollSuccess
                    } else {
                        IterationOutcome::Success
                    };
                    self.end_iteration(outcome);
                } else if self.queue.is_empty() {
                    self.end_iteration(IterationOutcome::Failure);
                }
            }
        }
    }

    fn at_poll_distance(&self) -> bool {
        let Some(best) = self.incumbents.best() else { return false };
        let inf = best
            .x
            .iter()
            .zip(&self.poll_center)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        inf >= self.mesh.delta_poll() * (1.0 - 1e-9)
    }

    fn begin_iteration(&mut self) {
        self.iteration += 1;
        self.blocks_in_iteration = 0;
        self.selection = SelectionState::new();
        self.poll_center = match self.incumbents.center() {
            Some(e) => e.x.clone(),
            None => self.cache.entries()[0].x.clone(),
        };
        self.mesh.anchor = self.poll_center.clone();
        if matches!(self.config.search, SearchKind::Surrogate(_)) {
            self.fit_model();
        }
    }

    fn end_iteration(&mut self, outcome: IterationOutcome) {
        self.queue.clear();
        self.mesh.update(outcome);
    }

    fn fit_model(&mut self) {
        let usable: Vec<&Evaluation> = self.cache.iter().filter(|e| !e.is_failed()).collect();
        let recent = &usable[usable.len().saturating_sub(self.config.training_cap)..];
        let x: Vec<&[f64]> = recent.iter().map(|e| e.x.as_slice()).collect();
        let y: Vec<Vec<f64>> = recent
            .iter()
            .map(|e| {
                let mut row = vec![e.f];
                row.extend(e.c.as_deref().unwrap_or(&[]));
                row
            })
            .collect();
        let started = Instant::now();
        match fit(&x, &y) {
            Ok((model, diag)) => {
                log::debug!("iteration {}: fitted {diag:?} in {:?}", self.iteration, started.elapsed());
                self.model = Some(model);
                self.diagnostics = Some(diag);
            }
            Err(e) => {
                log::debug!("iteration {}: no surrogate ({e})", self.iteration);
                self.model = None;
            }
        }
    }

    fn snap(&self, x: Vec<f64>) -> Vec<f64> {
        let mut p = self.mesh.project(&x, &self.lower, &self.upper);
        self.scaling.snap_integers(&mut p);
        p
    }

    fn search_candidates(&mut self) -> Vec<Candidate> {
        let q = self.config.q;
        let mut seen = HashSet::new();
        match self.config.search.clone() {
            SearchKind::None => Vec::new(),
            SearchKind::LatinHypercube => {
                let (lo, up) = finite_box(&self.lower, &self.upper);
                lhs_sample_with(&lo, &up, q, &mut self.search_rng)
                    .into_iter()
                    .map(|x| self.snap(x))
                    .filter(|x| !self.cache.contains(x) && seen.insert(PointKey::new(x)))
                    .map(Candidate::plain)
                    .collect()
            }
            SearchKind::Surrogate(cycle) => {
                let Some(model) = self.model.as_ref() else { return Vec::new() };
                let mut seeds: Vec<Vec<f64>> = Vec::new();
                for e in [&self.incumbents.best_feasible, &self.incumbents.best_infeasible]
                    .into_iter()
                    .flatten()
                {
                    seeds.push(e.x.clone());
                }
                seeds.extend(self.surrogate_bests.iter().cloned());
                let predict = |x: &[f64]| model.predict(x);
                let started = Instant::now();
                let view = solve_surrogate(
                    &predict,
                    &self.lower,
                    &self.upper,
                    &seeds,
                    0.1 * self.mesh.delta_mesh(),
                    &self.config.inner,
                    &mut self.search_rng,
                );
                log::debug!("iteration {}: inner solve {:?}", self.iteration, started.elapsed());
                let started = Instant::now();
                let (feas, infeas) = view.incumbents();
                self.surrogate_bests = feas.into_iter().chain(infeas).map(|p| p.x.clone()).collect();

                let evaluated: Vec<&[f64]> = self.cache.iter().map(|e| e.x.as_slice()).collect();
                let picks = cycle_select(
                    &view,
                    &evaluated,
                    q,
                    &cycle,
                    &mut self.selection,
                    self.mesh.delta_mesh(),
                );
                log::debug!("iteration {}: selection {:?}", self.iteration, started.elapsed());
                let mut out = Vec::with_capacity(picks.len());
                for (i, method) in picks {
                    let p = view.get(i);
                    let x = self.snap(p.x.clone());
                    if self.cache.contains(&x) || !seen.insert(PointKey::new(&x)) {
                        continue;
                    }
                    out.push(Candidate {
                        x,
                        method: Some(method),
                        predicted: Some(p.score),
                    });
                }
                out
            }
        }
    }

    fn poll_blocks(&mut self) -> VecDeque<Block> {
        let center = self.poll_center.clone();
        let raw: Vec<Vec<f64>> = poll_points(&center, &self.mesh, &self.lower, &self.upper, &mut self.directions_rng)
            .into_iter()
            .map(|x| self.snap(x))
            .collect();
        let mut points = {
            let (mesh, lower, upper, scaling, cache) =
                (&self.mesh, &self.lower, &self.upper, &self.scaling, &self.cache);
            let rng = &mut self.directions_rng;
            pad_poll(
                raw,
                self.config.q,
                |p| !cache.contains(p),
                || {
                    let mut p = extra_poll_point(&center, mesh, lower, upper, rng);
                    scaling.snap_integers(&mut p);
                    p
                },
            )
        };
        self.order_poll(&mut points);
        points
            .chunks(self.config.q)
            .map(|chunk| Block {
                iteration: self.iteration,
                phase: Phase::Poll,
                index: 0,
                candidates: chunk
                    .iter()
                    .map(|x| Candidate::plain(x.clone()))
                    .collect(),
            })
            .collect()
    }

    /// Surrogate order when a model exists, else distance to the best
    /// feasible point (or the poll center).
    fn order_poll(&self, points: &mut Vec<Vec<f64>>) {
        if let Some(model) = &self.model {
            let mut keyed: Vec<(Score, Vec<f64>)> = points
                .drain(..)
                .map(|x| {
                    let s = model.predict(&x).map_or(Score::WORST, |y| prediction_score(&y));
                    (s, x)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.order(&b.0));
            points.extend(keyed.into_iter().map(|(_, x)| x));
        } else {
            let target = self
                .incumbents
                .best_feasible
                .as_ref()
                .map_or(&self.poll_center, |e| &e.x);
            let mut keyed: Vec<(f64, Vec<f64>)> =
                points.drain(..).map(|x| (distance(&x, target), x)).collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            points.extend(keyed.into_iter().map(|(_, x)| x));
        }
    }
}
