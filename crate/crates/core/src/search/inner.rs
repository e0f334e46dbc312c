//! Inner solve of the surrogate problem: LHS, seeded poll descent and
//! perturb-and-descend restarts, all on surrogate predictions.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PointKey, Score};
use crate::mads::directions::poll_points;
use crate::mads::mesh::{IterationOutcome, MeshState};
use crate::problems::lhs_sample_with;
use crate::surrogate::prediction_score;

/// Surrogate prediction `x -> [f̂, ĉ_1, ..., ĉ_m]`; `None` on failure.
pub type Predictor<'a> = dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync + 'a;

/// Inner surrogate-solve settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Surrogate evaluations per inner solve.
    pub inner_budget: usize,
    /// Share of the budget spent on the initial Latin hypercube.
    pub lhs_fraction: f64,
    /// Share of the remainder spent on perturb-and-descend restarts.
    pub vns_fraction: f64,
    /// Initial poll size of the inner descents (unit box coordinates).
    pub inner_poll: f64,
    /// Restart radius unit; the k-th neighborhood has radius `k * shake_step`.
    pub shake_step: f64,
    pub neighborhoods: usize,
    /// Surrogate evaluations allowed in a single restart descent.
    pub descent_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            inner_budget: 10_000,
            lhs_fraction: 0.30,
            vns_fraction: 0.75,
            inner_poll: 0.1,
            shake_step: 0.1,
            neighborhoods: 5,
            descent_cap: 500,
        }
    }
}

/// Split of the inner budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerBudget {
    pub lhs: usize,
    pub vns: usize,
    pub poll: usize,
}

impl SearchConfig {
    pub fn split(&self) -> InnerBudget {
        let lhs = (self.inner_budget as f64 * self.lhs_fraction).round() as usize;
        let lhs = lhs.min(self.inner_budget);
        let rest = self.inner_budget - lhs;
        let vns = ((rest as f64 * self.vns_fraction).round() as usize).min(rest);
        InnerBudget {
            lhs,
            vns,
            poll: rest - vns,
        }
    }
}

/// A point of the surrogate cache with its prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePoint {
    pub x: Vec<f64>,
    pub prediction: Option<Vec<f64>>,
    pub score: Score,
    /// `max_j ĉ_j`; `-inf` without constraints, `+inf` for failed predictions.
    pub c_max: f64,
}

impl SurrogatePoint {
    pub fn new(x: Vec<f64>, prediction: Option<Vec<f64>>) -> Self {
        let (score, c_max) = match &prediction {
            Some(y) => {
                let score = prediction_score(y);
                if score == Score::WORST {
                    (score, f64::INFINITY)
                } else {
                    (score, y[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                }
            }
            None => (Score::WORST, f64::INFINITY),
        };
        let prediction = prediction.filter(|_| score != Score::WORST);
        Self {
            x,
            prediction,
            score,
            c_max,
        }
    }

    pub fn f_hat(&self) -> f64 {
        self.score.f
    }

    pub fn h_hat(&self) -> f64 {
        self.score.h
    }
}

/// Insertion-ordered set of surrogate-evaluated points.
#[derive(Debug, Clone, Default)]
pub struct SurrogateCache {
    points: Vec<SurrogatePoint>,
    index: HashSet<PointKey>,
}

impl SurrogateCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: impl IntoIterator<Item = SurrogatePoint>) -> Self {
        let mut c = Self::new();
        for p in points {
            c.insert(p);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SurrogatePoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &SurrogatePoint {
        &self.points[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.index.contains(&PointKey::new(x))
    }

    /// Returns `false` (and drops the point) when its coordinates are cached.
    pub fn insert(&mut self, p: SurrogatePoint) -> bool {
        if self.index.insert(PointKey::new(&p.x)) {
            self.points.push(p);
            true
        } else {
            false
        }
    }

    /// Index of the `≺̂`-best point; ties keep the earliest.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.points.iter().enumerate() {
            if best.is_none_or(|b| p.score.precedes(&self.points[b].score)) {
                best = Some(i);
            }
        }
        best
    }

    /// Best surrogate-feasible and best surrogate-infeasible points.
    pub fn incumbents(&self) -> (Option<&SurrogatePoint>, Option<&SurrogatePoint>) {
        let mut feas: Option<&SurrogatePoint> = None;
        let mut infeas: Option<&SurrogatePoint> = None;
        for p in &self.points {
            if p.score == Score::WORST {
                continue;
            }
            let slot = if p.score.h == 0.0 { &mut feas } else { &mut infeas };
            if slot.is_none_or(|b| p.score.precedes(&b.score)) {
                *slot = Some(p);
            }
        }
        (feas, infeas)
    }
}

/// Unit-box bounds with unbounded sides replaced by a width of one.
pub(crate) fn finite_box(lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
    lower
        .iter()
        .zip(upper)
        .map(|(&lo, &up)| match (lo.is_finite(), up.is_finite()) {
            (true, true) => (lo, up),
            (true, false) => (lo, lo + 1.0),
            (false, true) => (up - 1.0, up),
            (false, false) => (0.0, 1.0),
        })
        .unzip()
}

struct InnerSolver<'a, 'p> {
    predict: &'a Predictor<'p>,
    lower: &'a [f64],
    upper: &'a [f64],
    cache: SurrogateCache,
    stop_mesh: f64,
    cfg: &'a SearchConfig,
}

impl InnerSolver<'_, '_> {
    fn predict_all(&self, pts: Vec<Vec<f64>>) -> Vec<SurrogatePoint> {
        let predict = self.predict;
        pts.into_par_iter()
            .map(|x| {
                let y = predict(&x);
                SurrogatePoint::new(x, y)
            })
            .collect()
    }

    fn incumbent_score(&self) -> Score {
        self.cache
            .best()
            .map_or(Score::WORST, |i| self.cache.get(i).score)
    }

    /// Poll descent from `start` until the inner mesh falls below the stop
    /// size or `budget` runs out. Returns the final center.
    fn descent<R: Rng>(&mut self, start: SurrogatePoint, budget: &mut usize, rng: &mut R) -> SurrogatePoint {
        let mut center = start;
        let mut mesh = MeshState::new(self.cfg.inner_poll, center.x.clone());
        let mut stalls = 0;
        while *budget > 0 && mesh.delta_mesh() >= self.stop_mesh {
            mesh.anchor = center.x.clone();
            let mut seen = HashSet::new();
            let pts: Vec<Vec<f64>> = poll_points(&center.x, &mesh, self.lower, self.upper, rng)
                .into_iter()
                .filter(|p| !self.cache.contains(p) && seen.insert(PointKey::new(p)))
                .take(*budget)
                .collect();
            if pts.is_empty() {
                stalls += 1;
                mesh.update(IterationOutcome::Failure);
                if stalls > 64 {
                    break;
                }
                continue;
            }
            let mut improved = false;
            for p in self.predict_all(pts) {
                *budget -= 1;
                let better = p.score.precedes(&center.score);
                let copy = better.then(|| p.clone());
                self.cache.insert(p);
                if let Some(p) = copy {
                    center = p;
                    improved = true;
                    break;
                }
            }
            mesh.update(if improved {
                IterationOutcome::PollSuccess
            } else {
                IterationOutcome::Failure
            });
        }
        center
    }

    fn shake<R: Rng>(&self, center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
        let n = center.len();
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
        center
            .iter()
            .zip(&dir)
            .zip(self.lower.iter().zip(self.upper))
            .map(|((c, d), (&lo, &up))| (c + r * d / norm).clamp(lo, up))
            .collect()
    }
}

/// Solves `min f̂ s.t. ĉ <= 0` over the box with a budget of surrogate
/// evaluations and returns every point visited.
///
/// `seeds` are inserted after the Latin hypercube and count against the poll
/// budget. Inner descents stop once their mesh is finer than `stop_mesh`.
pub fn solve_surrogate<R: Rng>(
    predict: &Predictor<'_>,
    lower: &[f64],
    upper: &[f64],
    seeds: &[Vec<f64>],
    stop_mesh: f64,
    cfg: &SearchConfig,
    rng: &mut R,
) -> SurrogateCache {
    let budget = cfg.split();
    let mut solver = InnerSolver {
        predict,
        lower,
        upper,
        cache: SurrogateCache::new(),
        stop_mesh: stop_mesh.max(1e-12),
        cfg,
    };

    let (lo, up) = finite_box(lower, upper);
    let lhs = lhs_sample_with(&lo, &up, budget.lhs, rng);
    for p in solver.predict_all(lhs) {
        solver.cache.insert(p);
    }

    let mut poll_budget = budget.poll;
    let fresh: Vec<Vec<f64>> = seeds
        .iter()
        .filter(|s| !solver.cache.contains(s))
        .take(poll_budget)
        .cloned()
        .collect();
    for p in solver.predict_all(fresh) {
        if solver.cache.insert(p) {
            poll_budget -= 1;
        }
    }

    if let Some(b) = solver.cache.best() {
        let start = solver.cache.get(b).clone();
        solver.descent(start, &mut poll_budget, rng);
    }

    // Unused poll budget goes to the restarts.
    let mut vns_budget = budget.vns + poll_budget;
    let mut k = 1;
    let mut idle = 0;
    while vns_budget > 0 && !solver.cache.is_empty() {
        let before = solver.incumbent_score();
        let center = solver.cache.get(solver.cache.best().unwrap_or(0)).x.clone();
        let x = solver.shake(&center, k as f64 * cfg.shake_step, rng);
        vns_budget -= 1;
        if solver.cache.contains(&x) {
            idle += 1;
            if idle > 1000 {
                break;
            }
            k = k % cfg.neighborhoods.max(1) + 1;
            continue;
        }
        let start = solver.predict_all(vec![x]).pop().expect("one prediction");
        solver.cache.insert(start.clone());
        let mut local = vns_budget.min(cfg.descent_cap);
        let spent_before = local;
        solver.descent(start, &mut local, rng);
        vns_budget -= spent_before - local;
        if solver.incumbent_score().precedes(&before) {
            k = 1;
        } else {
            k = k % cfg.neighborhoods.max(1) + 1;
        }
    }
    solver.cache
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn quadratic(x: &[f64]) -> Option<Vec<f64>> {
        let f = x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>();
        let c = 0.2 - x[0];
        Some(vec![f, c])
    }

    fn small_config() -> SearchConfig {
        SearchConfig {
            inner_budget: 1000,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn default_budget_split() {
        let b = SearchConfig::default().split();
        assert_eq!(b, InnerBudget { lhs: 3000, vns: 5250, poll: 1750 });
    }

    #[test]
    fn respects_budget_and_finds_the_minimizer() {
        let cfg = small_config();
        let mut rng = stream(7, "inner", 0);
        let cache = solve_surrogate(&quadratic, &[0.0; 2], &[1.0; 2], &[], 1e-6, &cfg, &mut rng);
        assert!(cache.len() <= cfg.inner_budget);
        assert!(cache.len() >= cfg.inner_budget - 10);
        let best = cache.get(cache.best().unwrap());
        assert!(best.score.h == 0.0);
        assert!(best.x.iter().all(|v| (v - 0.3).abs() < 1e-3), "{:?}", best.x);
    }

    #[test]
    fn seeds_are_included() {
        let cfg = small_config();
        let mut rng = stream(8, "inner", 0);
        let seed = vec![0.123456, 0.654321];
        let cache = solve_surrogate(&quadratic, &[0.0; 2], &[1.0; 2], std::slice::from_ref(&seed), 1e-3, &cfg, &mut rng);
        assert!(cache.contains(&seed));
        assert_eq!(cache.points()[cfg.split().lhs].x, seed);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let cfg = small_config();
        let a = solve_surrogate(&quadratic, &[0.0; 3], &[1.0; 3], &[], 1e-4, &cfg, &mut stream(9, "inner", 0));
        let b = solve_surrogate(&quadratic, &[0.0; 3], &[1.0; 3], &[], 1e-4, &cfg, &mut stream(9, "inner", 0));
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn failed_predictions_become_worst() {
        let p = SurrogatePoint::new(vec![0.0], None);
        assert_eq!(p.score, Score::WORST);
        assert_eq!(p.c_max, f64::INFINITY);
        let p = SurrogatePoint::new(vec![0.0], Some(vec![f64::NAN, 0.0]));
        assert_eq!(p.score, Score::WORST);
        let p = SurrogatePoint::new(vec![0.0], Some(vec![1.0]));
        assert_eq!(p.c_max, f64::NEG_INFINITY);
        assert_eq!(p.score.h, 0.0);
    }

    #[test]
    fn all_points_inside_bounds() {
        let cfg = small_config();
        let cache = solve_surrogate(&quadratic, &[0.0; 2], &[1.0; 2], &[], 1e-6, &cfg, &mut stream(1, "inner", 0));
        for p in cache.points() {
            assert!(p.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
