#![allow(dead_code)]

use blockmads::domain::distance;
use blockmads::search::{SelectionMethod, SelectionState, SurrogateCache, SurrogatePoint};
use blockmads::Score;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random selection fixture on a coarse lattice so that distance and score
/// ties are frequent.
pub struct Fixture {
    pub view: SurrogateCache,
    pub evaluated: Vec<Vec<f64>>,
    pub delta_mesh: f64,
}

pub fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(0..=2);
    let size = rng.gen_range(1..=200);
    let lattice = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0..6) as f64 * 0.5).collect() };
    let mut points = Vec::new();
    for _ in 0..size {
        let x = lattice(&mut rng);
        let prediction = if rng.gen_bool(0.05) {
            None
        } else {
            let mut y = vec![rng.gen_range(-3..4) as f64];
            for _ in 0..m {
                y.push(rng.gen_range(-4..3) as f64 * 0.25);
            }
            Some(y)
        };
        points.push(SurrogatePoint::new(x, prediction));
    }
    let view = SurrogateCache::from_points(points);
    let mut evaluated: Vec<Vec<f64>> = (0..rng.gen_range(0..6)).map(|_| lattice(&mut rng)).collect();
    // Some evaluated points duplicate surrogate points.
    for _ in 0..rng.gen_range(0..3) {
        let k = rng.gen_range(0..view.len());
        evaluated.push(view.get(k).x.clone());
    }
    let delta_mesh = [0.0, 0.25, 0.5, 1.0][rng.gen_range(0..4)];
    Fixture {
        view,
        evaluated,
        delta_mesh,
    }
}

/// Direct transcription of the six selection rules, recomputing every
/// quantity from scratch on each call.
pub struct Reference<'a> {
    pub view: &'a SurrogateCache,
    pub evaluated: Vec<Vec<f64>>,
    pub selected: Vec<usize>,
}

impl<'a> Reference<'a> {
    pub fn new(view: &'a SurrogateCache, evaluated: &[Vec<f64>]) -> Self {
        Self {
            view,
            evaluated: evaluated.to_vec(),
            selected: Vec::new(),
        }
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.view.get(i).x
    }

    fn score(&self, i: usize) -> Score {
        self.view.get(i).score
    }

    pub fn dist(&self, i: usize) -> f64 {
        let mut d = f64::INFINITY;
        for e in &self.evaluated {
            d = d.min(distance(self.x(i), e));
        }
        for &s in &self.selected {
            d = d.min(distance(self.x(i), self.x(s)));
        }
        d
    }

    fn best_where(&self, ok: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.view.len() {
            if !ok(i) {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if self.score(i).precedes(&self.score(b)) => best = Some(i),
                _ => {}
            }
        }
        best
    }

    fn max_where<T: PartialOrd>(&self, value: impl Fn(usize) -> T, ok: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.view.len() {
            if !ok(i) {
                continue;
            }
            let v = value(i);
            let better = match &best {
                None => true,
                Some((_, b)) => v > *b,
            };
            if better {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn n_iso(&self, s: usize) -> usize {
        let mut d_iso = f64::INFINITY;
        for j in 0..self.view.len() {
            if self.score(j).precedes(&self.score(s)) {
                d_iso = d_iso.min(distance(self.x(s), self.x(j)));
            }
        }
        (0..self.view.len())
            .filter(|&j| distance(self.x(s), self.x(j)) < d_iso)
            .count()
    }

    pub fn n_density(&self, s: usize) -> usize {
        let r = self.dist(s);
        (0..self.view.len())
            .filter(|&j| distance(self.x(s), self.x(j)) < r)
            .count()
    }

    pub fn select(&mut self, method: SelectionMethod, state: &mut SelectionState, delta_mesh: f64) -> Option<usize> {
        let p = self.view.len();
        let dist: Vec<f64> = (0..p).map(|i| self.dist(i)).collect();
        let pick = match method {
            SelectionMethod::Best => self.best_where(|i| dist[i] > 0.0),
            SelectionMethod::MostDistant => self.max_where(|i| dist[i], |i| dist[i] > 0.0),
            SelectionMethod::DistanceConstrained => {
                let pick = self.best_where(|i| dist[i] > 0.0 && dist[i] >= state.d_min);
                if pick.is_some() {
                    state.d_min += delta_mesh;
                }
                pick
            }
            SelectionMethod::FeasibilityMargin => {
                let margin = *state.c_margin.get_or_insert_with(|| {
                    let mut m: Option<f64> = None;
                    for i in 0..p {
                        let c = self.view.get(i).c_max;
                        if c <= 0.0 {
                            m = Some(m.map_or(c, |m| m.max(c)));
                        }
                    }
                    m.map_or(0.0, |m| m.min(0.0))
                });
                let mut best: Option<usize> = None;
                for i in 0..p {
                    let pt = self.view.get(i);
                    if pt.c_max <= margin
                        && dist[i] > delta_mesh
                        && pt.f_hat().is_finite()
                        && best.is_none_or(|b| pt.f_hat() < self.view.get(b).f_hat())
                    {
                        best = Some(i);
                    }
                }
                if let Some(s) = best {
                    state.c_margin = Some((2.0 * self.view.get(s).c_max).min(0.0));
                }
                best
            }
            SelectionMethod::MostIsolated => {
                let iso: Vec<usize> = (0..p).map(|i| self.n_iso(i)).collect();
                self.max_where(|i| iso[i], |i| dist[i] > 0.0)
            }
            SelectionMethod::PopulatedArea => {
                let dens: Vec<usize> = (0..p).map(|i| self.n_density(i)).collect();
                self.max_where(|i| dens[i], |i| dens[i] > 0)
            }
        };
        if let Some(s) = pick {
            self.selected.push(s);
        }
        pick
    }
}

/// Median of block counts where `None` (target never reached) counts as
/// `+inf`.
pub fn median_blocks(values: &[Option<usize>]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|b| b.map_or(f64::INFINITY, |b| b as f64)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            f64::INFINITY
        } else {
            0.5 * (a + b)
        }
    }
}

/// Worst relative error of a LOWESS prediction on random affine data, or
/// `None` when the drawn weighted system is singular.
pub fn affine_instance(seed: u64) -> Option<f64> {
    use blockmads::surrogate::{default_lambda_grid, KernelType, LowessModel};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5);
    let p = rng.gen_range(n + 2..=40);
    let outputs = rng.gen_range(1..=3);
    let coef: Vec<Vec<f64>> = (0..outputs)
        .map(|_| (0..=n).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let affine = |x: &[f64], c: &[f64]| c[0] + x.iter().zip(&c[1..]).map(|(a, b)| a * b).sum::<f64>();
    let x: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|r| coef.iter().map(|c| affine(r, c)).collect()).collect();
    let kernel = KernelType::ALL[rng.gen_range(0..KernelType::ALL.len())];
    let grid = default_lambda_grid();
    let lambda = grid[rng.gen_range(0..grid.len())];
    let model = LowessModel::new(&x, &y, lambda, kernel).ok()?;
    let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.2..1.2)).collect();
    if !weighted_system_is_regular(&x, &model.weights(&xi), &xi) {
        return None;
    }
    let pred = model.predict(&xi)?;
    let worst = coef
        .iter()
        .zip(&pred)
        .map(|(c, v)| {
            let truth = affine(&xi, c);
            (v - truth).abs() / truth.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    Some(worst)
}

/// Whether `Zᵀ W Z` (rows `[1, x_i − ξ]`) is numerically nonsingular.
pub fn weighted_system_is_regular(x: &[Vec<f64>], w: &[f64], xi: &[f64]) -> bool {
    let k = xi.len() + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    for (row, &wi) in x.iter().zip(w) {
        let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().zip(xi).map(|(a, b)| a - b)).collect();
        for r in 0..k {
            for c in 0..k {
                a[(r, c)] += wi * z[r] * z[c];
            }
        }
    }
    let sv = a.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    hi > 0.0 && lo > 1e-9 * hi
}

/// History whose best value drops from 10 to `1` at `solved_at` (1-based)
/// and stays there; `None` never gets there.
pub fn history(problem: &str, solver: &str, q: usize, run: usize, solved_at: Option<usize>, blocks: usize) -> blockmads::bench::History {
    let best_f = (1..=blocks)
        .map(|b| match solved_at {
            Some(s) if b >= s => 1.0,
            _ => 10.0,
        })
        .collect();
    blockmads::bench::History {
        problem: problem.into(),
        solver: solver.into(),
        q,
        run,
        best_f,
    }
}

/// Checks the hand-computed profile and speed-up examples; returns the
/// failed checks.
pub fn scalability_examples() -> Vec<String> {
    use blockmads::bench::{performance_profile, speedup_efficiency};

    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let f_star = |_: &str| Some(1.0);
    let proportion = |pts: &[blockmads::bench::ProfilePoint], solver: &str, alpha: f64| {
        pts.iter()
            .find(|p| p.solver == solver && p.alpha == alpha)
            .map(|p| p.proportion)
    };

    let single = [history("p", "a", 1, 0, Some(7), 20)];
    let pts = performance_profile(&single, f_star, 1e-2, &[1.0]).unwrap();
    check("single solver solving at block 7 has proportion 1 at alpha 1", proportion(&pts, "a", 1.0) == Some(1.0));

    let pair = [history("p", "a", 1, 0, Some(5), 20), history("p", "b", 1, 0, Some(10), 20)];
    let pts = performance_profile(&pair, f_star, 1e-2, &[1.0, 2.0]).unwrap();
    check(
        "blocks (5, 10) give (1, 0) at alpha 1",
        proportion(&pts, "a", 1.0) == Some(1.0) && proportion(&pts, "b", 1.0) == Some(0.0),
    );
    check(
        "blocks (5, 10) give (1, 1) at alpha 2",
        proportion(&pts, "a", 2.0) == Some(1.0) && proportion(&pts, "b", 2.0) == Some(1.0),
    );

    let unsolved = [history("p", "a", 1, 0, Some(5), 20), history("p", "b", 1, 0, None, 20)];
    let pts = performance_profile(&unsolved, f_star, 1e-2, &[1.0, 2.0, 100.0]).unwrap();
    check(
        "an unsolved run contributes 0 at every alpha",
        [1.0, 2.0, 100.0].iter().all(|&a| proportion(&pts, "b", a) == Some(0.0)),
    );
    check(
        "zero best known value is rejected",
        performance_profile(&single, |_| Some(0.0), 1e-2, &[1.0]).is_err(),
    );

    // b_ref(1) = 40, b_ref(8) = 10.
    let runs = [history("p", "s", 1, 0, Some(40), 100), history("p", "s", 8, 0, Some(10), 100)];
    let rows = speedup_efficiency(&runs);
    let row = |q: usize| rows.iter().find(|r| r.solver == "s" && r.q == q).cloned();
    check(
        "speed-up 4 and efficiency 0.5 for b_ref (40, 10) at q = 8",
        row(8).is_some_and(|r| r.speedup == Some(4.0) && r.efficiency == Some(0.5)),
    );
    check(
        "speed-up and efficiency 1 at q = 1",
        row(1).is_some_and(|r| r.speedup == Some(1.0) && r.efficiency == Some(1.0)),
    );

    // Ratios 2 and 8 over two pairs: geometric mean 4.
    let runs = [
        history("p", "s", 1, 0, Some(20), 100),
        history("p", "s", 4, 0, Some(10), 100),
        history("p", "s", 1, 1, Some(40), 100),
        history("p", "s", 4, 1, Some(5), 100),
    ];
    let rows = speedup_efficiency(&runs);
    check(
        "geometric mean of ratios 2 and 8 is 4",
        rows.iter()
            .find(|r| r.q == 4)
            .and_then(|r| r.speedup)
            .is_some_and(|s| (s - 4.0).abs() <= 1e-12),
    );
    for r in &rows {
        if let (Some(s), Some(e)) = (r.speedup, r.efficiency) {
            check("efficiency is speed-up over q", e == s / r.q as f64);
        }
    }

    let never = [history("p", "s", 1, 0, Some(3), 50), history("p", "s", 8, 0, None, 50)];
    let rows = speedup_efficiency(&never);
    check(
        "pairs that never reach the reference are excluded and counted",
        rows.iter()
            .find(|r| r.q == 8)
            .is_some_and(|r| r.speedup.is_none() && r.excluded == 1 && r.pairs == 0),
    );
    failures
}
