//! Mesh and poll sizes, projection onto the mesh, and the affine map between a
//! problem's coordinates and the unit box the engine works in.

use crate::problems::UNBOUNDED_RANGE;

/// Mesh sizes below this stop the run.
pub const MIN_MESH_SIZE: f64 = 1e-13;

/// Coarsest allowed poll size, as a power of two above the initial one.
const MAX_ENLARGEMENT_LEVEL: i32 = -2;

/// How an iteration ended, as far as the mesh update is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOutcome {
    Failure,
    /// Success from a point that was not polled at full poll distance.
    Success,
    /// Success from a poll point at full poll distance.
    PollSuccess,
}

impl IterationOutcome {
    pub fn is_success(self) -> bool {
        self != IterationOutcome::Failure
    }
}

/// Mesh `M = {anchor + Δ^M z}` with the companion poll size `Δ^P`.
///
/// Sizes are kept as an integer level so that every size is the initial poll
/// size times an exact power of two:
/// `Δ^P = Δ0 2^-l` and `Δ^M = Δ0 min(2^-l, 4^-l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshState {
    initial_poll: f64,
    level: i32,
    pub anchor: Vec<f64>,
}

impl MeshState {
    pub fn new(initial_poll: f64, anchor: Vec<f64>) -> Self {
        assert!(initial_poll > 0.0, "poll size must be positive");
        Self {
            initial_poll,
            level: 0,
            anchor,
        }
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn delta_poll(&self) -> f64 {
        self.initial_poll * 2f64.powi(-self.level)
    }

    pub fn delta_mesh(&self) -> f64 {
        let r = 2f64.powi(-self.level);
        self.initial_poll * r.min(r * r)
    }

    /// Mesh coarsening on poll success, refinement on failure.
    pub fn update(&mut self, outcome: IterationOutcome) {
        match outcome {
            IterationOutcome::Failure => self.level += 1,
            IterationOutcome::Success => {}
            IterationOutcome::PollSuccess => {
                self.level = (self.level - 1).max(MAX_ENLARGEMENT_LEVEL)
            }
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.delta_mesh() < MIN_MESH_SIZE
    }

    /// Nearest mesh point to `x`, with coordinates outside `[lower, upper]`
    /// clamped onto the violated bound.
    pub fn project(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
        let dm = self.delta_mesh();
        x.iter()
            .zip(&self.anchor)
            .zip(lower.iter().zip(upper))
            .map(|((&v, &a), (&lo, &up))| {
                let k = ((v - a) / dm).round();
                (a + k * dm).clamp(lo, up)
            })
            .collect()
    }
}

/// Diagonal map from problem coordinates to the unit box and back.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    origin: Vec<f64>,
    range: Vec<f64>,
    integer: Vec<bool>,
}

impl Scaling {
    /// Variables without a finite bound get a range of [`UNBOUNDED_RANGE`]
    /// for scaling purposes only.
    pub fn new(lower: &[f64], upper: &[f64], integer: &[bool]) -> Self {
        let mut origin = Vec::with_capacity(lower.len());
        let mut range = Vec::with_capacity(lower.len());
        for (&lo, &up) in lower.iter().zip(upper) {
            let (o, r) = match (lo.is_finite(), up.is_finite()) {
                (true, true) if up > lo => (lo, up - lo),
                (true, true) => (lo, 1.0),
                (true, false) => (lo, UNBOUNDED_RANGE),
                (false, true) => (up - UNBOUNDED_RANGE, UNBOUNDED_RANGE),
                (false, false) => (-0.5 * UNBOUNDED_RANGE, UNBOUNDED_RANGE),
            };
            origin.push(o);
            range.push(r);
        }
        Self {
            origin,
            range,
            integer: integer.to_vec(),
        }
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.origin.iter().zip(&self.range))
            .map(|(v, (o, r))| (v - o) / r)
            .collect()
    }

    pub fn to_original(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.origin.iter().zip(&self.range))
            .map(|(v, (o, r))| o + v * r)
            .collect()
    }

    /// Rounds integer variables (in problem coordinates) and returns the
    /// matching unit-box point.
    pub fn snap_integers(&self, u: &mut [f64]) {
        for (j, v) in u.iter_mut().enumerate() {
            if self.integer[j] {
                let x = (self.origin[j] + *v * self.range[j]).round();
                *v = (x - self.origin[j]) / self.range[j];
            }
        }
    }
}
