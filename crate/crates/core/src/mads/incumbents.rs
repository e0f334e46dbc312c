use crate::domain::{precedes, Evaluation};

/// Best feasible and best infeasible evaluations seen so far.
#[derive(Debug, Clone, Default)]
pub struct Incumbents {
    pub best_feasible: Option<Evaluation>,
    pub best_infeasible: Option<Evaluation>,
}

impl Incumbents {
    pub fn new() -> Self {
        Self::default()
    }

    /// Poll center: the best feasible point, else the best infeasible one.
    pub fn center(&self) -> Option<&Evaluation> {
        self.best_feasible.as_ref().or(self.best_infeasible.as_ref())
    }

    /// Best point under `≺`.
    pub fn best(&self) -> Option<&Evaluation> {
        self.center()
    }

    /// Folds new evaluations in (in order) and reports whether any of them
    /// improved on the incumbent: a better feasible point when one exists,
    /// otherwise a point preceding the best infeasible one.
    pub fn update(&mut self, evals: &[Evaluation]) -> bool {
        let reference = self.best().cloned();
        for e in evals {
            if e.is_failed() {
                continue;
            }
            if e.is_feasible() {
                if self.best_feasible.as_ref().is_none_or(|b| e.f < b.f) {
                    self.best_feasible = Some(e.clone());
                }
            } else if self.best_infeasible.as_ref().is_none_or(|b| precedes(e, b)) {
                self.best_infeasible = Some(e.clone());
            }
        }
        match (reference, self.best()) {
            (None, Some(_)) => true,
            (Some(r), Some(b)) => precedes(b, &r),
            _ => false,
        }
    }
}
