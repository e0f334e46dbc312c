//! Greedy selection of evaluation candidates from the surrogate cache.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::inner::SurrogateCache;
use super::spatial::KdTree;
use crate::domain::distance;

/// The six candidate selection rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SelectionMethod {
    /// Best surrogate point not yet evaluated or selected.
    Best,
    /// Point farthest from everything evaluated or selected.
    MostDistant,
    /// Best point at distance at least `d_min` from the evaluated and selected points.
    DistanceConstrained,
    /// Lowest `f̂` among points with a predicted feasibility margin.
    FeasibilityMargin,
    /// Point with the largest isolation number.
    MostIsolated,
    /// Point with the largest density number.
    PopulatedArea,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 6] = [
        SelectionMethod::Best,
        SelectionMethod::MostDistant,
        SelectionMethod::DistanceConstrained,
        SelectionMethod::FeasibilityMargin,
        SelectionMethod::MostIsolated,
        SelectionMethod::PopulatedArea,
    ];

    /// Numeric id, 1 to 6.
    pub fn id(self) -> u8 {
        match self {
            SelectionMethod::Best => 1,
            SelectionMethod::MostDistant => 2,
            SelectionMethod::DistanceConstrained => 3,
            SelectionMethod::FeasibilityMargin => 4,
            SelectionMethod::MostIsolated => 5,
            SelectionMethod::PopulatedArea => 6,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get((id as usize).checked_sub(1)?).copied()
    }
}

impl From<SelectionMethod> for u8 {
    fn from(m: SelectionMethod) -> u8 {
        m.id()
    }
}

impl TryFrom<u8> for SelectionMethod {
    type Error = String;
    fn try_from(id: u8) -> Result<Self, String> {
        Self::from_id(id).ok_or_else(|| format!("no selection method {id}"))
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Cursors of the distance and feasibility constrained methods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionState {
    pub d_min: f64,
    /// Unset until the feasibility method first runs.
    pub c_margin: Option<f64>,
}

impl SelectionState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Selection context over a surrogate cache `X̂`, the evaluated points `X`
/// and the growing selection `S`.
pub struct Selector<'a> {
    view: &'a SurrogateCache,
    tree: KdTree,
    /// Dense rank of each surrogate score under `≺`.
    ranks: Vec<usize>,
    /// `d(s, X ∪ S)` per surrogate point.
    dist: Vec<f64>,
    selected: Vec<usize>,
    isolation: Option<Vec<usize>>,
    density: Option<Vec<usize>>,
    density_dirty: Vec<bool>,
    /// Upper bounds on `n_density`, keyed for the lowest-index argmax.
    density_heap: BinaryHeap<(usize, Reverse<usize>)>,
}

impl<'a> Selector<'a> {
    pub fn new<P: AsRef<[f64]>>(view: &'a SurrogateCache, evaluated: &[P]) -> Self {
        let pts: Vec<&[f64]> = view.points().iter().map(|p| p.x.as_slice()).collect();
        let ranks = score_ranks(view);
        let tree = KdTree::with_ranks(&pts, &ranks);
        let eval_tree = KdTree::new(evaluated);
        let dist = pts
            .iter()
            .map(|x| eval_tree.nearest_where(x, |_| true))
            .collect();
        Self {
            view,
            tree,
            ranks,
            dist,
            selected: Vec::new(),
            isolation: None,
            density: None,
            density_dirty: vec![false; view.len()],
            density_heap: BinaryHeap::new(),
        }
    }

    pub fn view(&self) -> &SurrogateCache {
        self.view
    }

    /// `d(s, X ∪ S)`.
    pub fn distance(&self, s: usize) -> f64 {
        self.dist[s]
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Adds `s` to the selection.
    pub fn accept(&mut self, s: usize) {
        let x = &self.view.get(s).x;
        for (i, p) in self.view.points().iter().enumerate() {
            let d = distance(&p.x, x);
            if d < self.dist[i] {
                self.dist[i] = d;
                self.density_dirty[i] = true;
            }
        }
        self.selected.push(s);
    }

    fn argbest(&self, admissible: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.view.points().iter().enumerate() {
            if admissible(i) && best.is_none_or(|b| p.score.precedes(&self.view.get(b).score)) {
                best = Some(i);
            }
        }
        best
    }

    fn argmax<T: PartialOrd + Copy>(&self, value: impl Fn(usize) -> T, admissible: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.view.len() {
            if !admissible(i) {
                continue;
            }
            let v = value(i);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn method1(&self) -> Option<usize> {
        self.argbest(|i| self.dist[i] > 0.0)
    }

    pub fn method2(&self) -> Option<usize> {
        self.argmax(|i| self.dist[i], |i| self.dist[i] > 0.0)
    }

    pub fn method3(&self, state: &SelectionState) -> Option<usize> {
        self.argbest(|i| self.dist[i] > 0.0 && self.dist[i] >= state.d_min)
    }

    /// Initial feasibility margin: the largest `ĉ_max` among surrogate
    /// feasible points, capped at 0.
    pub fn initial_margin(&self) -> f64 {
        self.view
            .points()
            .iter()
            .filter(|p| p.c_max <= 0.0)
            .map(|p| p.c_max)
            .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))))
            .map_or(0.0, |m| m.min(0.0))
    }

    pub fn method4(&self, margin: f64, delta_mesh: f64) -> Option<usize> {
        let pts = self.view.points();
        let mut best: Option<usize> = None;
        for (i, p) in pts.iter().enumerate() {
            if p.c_max <= margin && self.dist[i] > delta_mesh && p.f_hat().is_finite()
                && best.is_none_or(|b| p.f_hat() < pts[b].f_hat())
            {
                best = Some(i);
            }
        }
        best
    }

    /// `d_iso(s)`: distance to the closest strictly better surrogate point.
    pub fn isolation_distance(&self, s: usize) -> f64 {
        self.tree
            .nearest_ranked_below(&self.view.get(s).x, &self.ranks, self.ranks[s])
    }

    /// `n_iso(s)` for every surrogate point.
    pub fn isolation_numbers(&mut self) -> &[usize] {
        if self.isolation.is_none() {
            let pts = self.view.points();
            let n_iso = (0..pts.len())
                .map(|s| self.tree.count_within(&pts[s].x, self.isolation_distance(s)))
                .collect();
            self.isolation = Some(n_iso);
        }
        self.isolation.as_deref().expect("computed above")
    }

    pub fn method5(&mut self) -> Option<usize> {
        self.isolation_numbers();
        let iso = self.isolation.as_ref().expect("computed above");
        self.argmax(|i| iso[i], |i| self.dist[i] > 0.0)
    }

    fn count_density(&self, s: usize) -> usize {
        self.tree.count_within(&self.view.get(s).x, self.dist[s])
    }

    fn init_density(&mut self) {
        if self.density.is_none() {
            let d: Vec<usize> = (0..self.view.len()).map(|s| self.count_density(s)).collect();
            self.density_heap = d.iter().enumerate().map(|(s, &c)| (c, Reverse(s))).collect();
            self.density = Some(d);
            self.density_dirty.iter_mut().for_each(|f| *f = false);
        }
    }

    /// `n_density(s)` for every surrogate point, under the current selection.
    pub fn density_numbers(&mut self) -> &[usize] {
        self.init_density();
        for s in 0..self.view.len() {
            if self.density_dirty[s] {
                let c = self.count_density(s);
                self.density.as_mut().expect("initialized")[s] = c;
                self.density_dirty[s] = false;
            }
        }
        self.density.as_deref().expect("initialized")
    }

    /// Densities only shrink as the selection grows, so stale heap entries
    /// are upper bounds and only the candidates reaching the top get recounted.
    pub fn method6(&mut self) -> Option<usize> {
        self.init_density();
        while let Some((bound, Reverse(s))) = self.density_heap.pop() {
            if self.density_dirty[s] {
                let c = self.count_density(s);
                self.density.as_mut().expect("initialized")[s] = c;
                self.density_dirty[s] = false;
            }
            let c = self.density.as_ref().expect("initialized")[s];
            self.density_heap.push((c, Reverse(s)));
            if c == bound {
                return (c > 0).then_some(s);
            }
        }
        None
    }

    /// Runs one method; on success the point joins the selection and the
    /// method's cursor in `state` advances.
    pub fn select(&mut self, method: SelectionMethod, state: &mut SelectionState, delta_mesh: f64) -> Option<usize> {
        let pick = match method {
            SelectionMethod::Best => self.method1(),
            SelectionMethod::MostDistant => self.method2(),
            SelectionMethod::DistanceConstrained => {
                let pick = self.method3(state);
                if pick.is_some() {
                    state.d_min += delta_mesh;
                }
                pick
            }
            SelectionMethod::FeasibilityMargin => {
                let margin = match state.c_margin {
                    Some(m) => m,
                    None => *state.c_margin.insert(self.initial_margin()),
                };
                let pick = self.method4(margin, delta_mesh);
                if let Some(s) = pick {
                    state.c_margin = Some((2.0 * self.view.get(s).c_max).min(0.0));
                }
                pick
            }
            SelectionMethod::MostIsolated => self.method5(),
            SelectionMethod::PopulatedArea => self.method6(),
        };
        if let Some(s) = pick {
            self.accept(s);
        }
        pick
    }
}

fn score_ranks(view: &SurrogateCache) -> Vec<usize> {
    let pts = view.points();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a].score.order(&pts[b].score));
    let mut ranks = vec![0; pts.len()];
    let mut rank = 0;
    for w in 0..order.len() {
        if w > 0 && pts[order[w - 1]].score.precedes(&pts[order[w]].score) {
            rank += 1;
        }
        ranks[order[w]] = rank;
    }
    ranks
}

/// Applies the methods of `cycle` in turn until `q` points are selected or
/// every method failed consecutively. Returns surrogate-cache indices with
/// the method that chose each.
pub fn cycle_select<P: AsRef<[f64]>>(
    view: &SurrogateCache,
    evaluated: &[P],
    q: usize,
    cycle: &[SelectionMethod],
    state: &mut SelectionState,
    delta_mesh: f64,
) -> Vec<(usize, SelectionMethod)> {
    let mut sel = Selector::new(view, evaluated);
    let mut out = Vec::new();
    let mut failures = 0;
    let mut k = 0;
    while out.len() < q && failures < cycle.len() {
        let method = cycle[k % cycle.len()];
        k += 1;
        match sel.select(method, state, delta_mesh) {
            Some(s) => {
                out.push((s, method));
                failures = 0;
            }
            None => failures += 1,
        }
    }
    out
}
