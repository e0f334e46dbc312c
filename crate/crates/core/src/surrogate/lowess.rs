//! Multi-output local linear regression (LOWESS).
//!
//! At a query point `ξ` the model solves the weighted least-squares problem
//! with design rows `[1, (x_i - ξ)^T]` and weights `w_i = φ(λ ||ξ - x_i|| / d_{n+1}(ξ))`.
//! The prediction is `u^T Z^T W Y` where `u` solves `Z^T W Z u = e_1`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gamma::gamma_quantile;
use super::kernel::KernelType;
use crate::domain::{aggregate_violation, Score};
use crate::error::{Error, Result};
use crate::rng;

/// Quantile levels are clamped here so that `d_{n+1}` stays finite.
pub const MAX_QUANTILE_LEVEL: f64 = 1.0 - 1e-6;

/// Gamma shapes above this are treated as degenerate (all squared distances
/// practically equal); the empirical quantile is used instead.
const MAX_GAMMA_SHAPE: f64 = 1e6;

/// Relative pivot size below which the normal matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Diagonal jitter, relative to the trace, added to rank-deficient systems.
pub const RIDGE_JITTER: f64 = 1e-10;

/// Local scaling of the kernel at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalScale {
    /// Mean of the squared distances from the query point to the training inputs.
    pub mu: f64,
    /// Population variance of those squared distances.
    pub sigma2: f64,
    /// Estimated distance to the (n+1)-th closest training point.
    pub d_np1: f64,
}

/// Local scale from squared distances, for inputs of dimension `n`.
pub fn local_scale_from_squared(sq: &[f64], n: usize) -> LocalScale {
    let p = sq.len();
    let pf = p as f64;
    let mu = sq.iter().sum::<f64>() / pf;
    let sigma2 = sq.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / pf;
    let level = ((n + 1) as f64 / pf).min(MAX_QUANTILE_LEVEL);

    let shape = mu * mu / sigma2;
    let d_np1 = if mu > 0.0 && sigma2 > 0.0 && shape.is_finite() && shape <= MAX_GAMMA_SHAPE {
        gamma_quantile(shape, sigma2 / mu, level).sqrt()
    } else {
        empirical_scale(sq, n)
    };
    LocalScale { mu, sigma2, d_np1 }
}

/// The (n+1)-th smallest distance, else the smallest positive one, else 1.
fn empirical_scale(sq: &[f64], n: usize) -> f64 {
    let mut d: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    let k = n.min(d.len() - 1);
    if d[k] > 0.0 {
        return d[k];
    }
    d.into_iter().find(|&v| v > 0.0).unwrap_or(1.0)
}

/// Local scale of the training inputs `x` around `xi`.
pub fn local_scale<R: AsRef<[f64]>>(x: &[R], xi: &[f64]) -> LocalScale {
    let sq: Vec<f64> = x
        .iter()
        .map(|r| crate::domain::squared_distance(r.as_ref(), xi))
        .collect();
    local_scale_from_squared(&sq, xi.len())
}

/// Fitted LOWESS surrogate predicting `[f, c_1, ..., c_m]` jointly.
#[derive(Debug, Clone)]
pub struct LowessModel {
    n: usize,
    n_out: usize,
    p: usize,
    /// Standardized inputs, column-major: coordinate `j` of point `i` at `j * p + i`.
    inputs: Vec<f64>,
    /// Outputs, column-major.
    outputs: Vec<f64>,
    center: Vec<f64>,
    spread: Vec<f64>,
    lambda: f64,
    kernel: KernelType,
}

/// Offsets `x_i - ξ` (column-major) and distances from a query point to every
/// training input, plus its local scale.
struct Geometry {
    diff: Vec<f64>,
    dist: Vec<f64>,
    scale: LocalScale,
}

/// Dot product with independent partial sums so that it vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

impl LowessModel {
    /// Builds a model with fixed hyperparameters. Inputs are standardized per
    /// coordinate (mean 0, unit variance) before distances are taken.
    pub fn new<X, Y>(x: &[X], y: &[Y], lambda: f64, kernel: KernelType) -> Result<Self>
    where
        X: AsRef<[f64]>,
        Y: AsRef<[f64]>,
    {
        let p = x.len();
        if p == 0 {
            return Err(Error::Fit("empty training set".into()));
        }
        if y.len() != p {
            return Err(Error::Fit(format!("{} inputs but {} outputs", p, y.len())));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Fit(format!("kernel shape must be positive, got {lambda}")));
        }
        let n = x[0].as_ref().len();
        let n_out = y[0].as_ref().len();
        if n == 0 || n_out == 0 {
            return Err(Error::Fit("zero-width inputs or outputs".into()));
        }
        let mut inputs = vec![0.0; p * n];
        let mut outputs = vec![0.0; p * n_out];
        for (i, (xr, yr)) in x.iter().zip(y).enumerate() {
            let (xr, yr) = (xr.as_ref(), yr.as_ref());
            if xr.len() != n || yr.len() != n_out {
                return Err(Error::Fit("ragged training data".into()));
            }
            if xr.iter().chain(yr).any(|v| !v.is_finite()) {
                return Err(Error::Fit("non-finite training value".into()));
            }
            for (j, &v) in xr.iter().enumerate() {
                inputs[j * p + i] = v;
            }
            for (o, &v) in yr.iter().enumerate() {
                outputs[o * p + i] = v;
            }
        }

        let pf = p as f64;
        let mut center = vec![0.0; n];
        let mut spread = vec![0.0; n];
        for j in 0..n {
            let col = &mut inputs[j * p..(j + 1) * p];
            let mean = col.iter().sum::<f64>() / pf;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pf;
            let sd = var.sqrt();
            let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
            for v in col.iter_mut() {
                *v = (*v - mean) / sd;
            }
            center[j] = mean;
            spread[j] = sd;
        }

        Ok(Self {
            n,
            n_out,
            p,
            inputs,
            outputs,
            center,
            spread,
            lambda,
            kernel,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel(&self) -> KernelType {
        self.kernel
    }

    /// Number of training points.
    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_outputs(&self) -> usize {
        self.n_out
    }

    fn input_col(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.p..(j + 1) * self.p]
    }

    fn output_col(&self, o: usize) -> &[f64] {
        &self.outputs[o * self.p..(o + 1) * self.p]
    }

    fn output_row(&self, i: usize) -> Vec<f64> {
        (0..self.n_out).map(|o| self.outputs[o * self.p + i]).collect()
    }

    fn standardized_row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.inputs[j * self.p + i]).collect()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.center[j]) / self.spread[j])
            .collect()
    }

    fn geometry_std(&self, xi: &[f64]) -> Geometry {
        let p = self.p;
        let mut diff = vec![0.0; self.n * p];
        let mut sq = vec![0.0; p];
        for (j, &c) in xi.iter().enumerate() {
            let d = &mut diff[j * p..(j + 1) * p];
            for ((dv, &v), s) in d.iter_mut().zip(self.input_col(j)).zip(sq.iter_mut()) {
                *dv = v - c;
                *s += *dv * *dv;
            }
        }
        let scale = local_scale_from_squared(&sq, self.n);
        let dist = sq.into_iter().map(f64::sqrt).collect();
        Geometry { diff, dist, scale }
    }

    fn geometry(&self, xi: &[f64]) -> Geometry {
        self.geometry_std(&self.standardize(xi))
    }

    /// Local scale at `xi`, measured in the standardized input space.
    pub fn local_scale(&self, xi: &[f64]) -> LocalScale {
        self.geometry(xi).scale
    }

    fn weights_for(&self, g: &Geometry, lambda: f64, kernel: KernelType) -> Vec<f64> {
        let inv = lambda / g.scale.d_np1;
        g.dist.iter().map(|&d| kernel.eval(d * inv)).collect()
    }

    /// Regression weights of every training point for a prediction at `xi`.
    pub fn weights(&self, xi: &[f64]) -> Vec<f64> {
        let g = self.geometry(xi);
        self.weights_for(&g, self.lambda, self.kernel)
    }

    /// Local linear regression with design rows `[1, x_i - ξ]` and weights `w`.
    fn regress(&self, g: &Geometry, w: &[f64]) -> Option<Vec<f64>> {
        let (n, p) = (self.n, self.p);
        let k = n + 1;
        let d = |r: usize| &g.diff[r * p..(r + 1) * p];
        let wd: Vec<Vec<f64>> = (0..n)
            .map(|r| w.iter().zip(d(r)).map(|(a, b)| a * b).collect())
            .collect();
        let mut a = DMatrix::zeros(k, k);
        a[(0, 0)] = w.iter().sum::<f64>();
        for r in 0..n {
            a[(0, r + 1)] = wd[r].iter().sum::<f64>();
            a[(r + 1, 0)] = a[(0, r + 1)];
            for c in r..n {
                let v = dot(&wd[r], d(c));
                a[(r + 1, c + 1)] = v;
                a[(c + 1, r + 1)] = v;
            }
        }
        let u = solve_first_unit(a)?;
        // t_i = w_i (u_0 + u_{1..} . (x_i - ξ)), prediction = Σ t_i y_i.
        let mut t: Vec<f64> = w.iter().map(|wi| wi * u[0]).collect();
        for (r, wdr) in wd.iter().enumerate() {
            let ur = u[r + 1];
            for (ti, v) in t.iter_mut().zip(wdr) {
                *ti += ur * v;
            }
        }
        let pred: Vec<f64> = (0..self.n_out).map(|o| dot(&t, self.output_col(o))).collect();
        pred.iter().all(|v| v.is_finite()).then_some(pred)
    }

    /// Predicts `[f̂, ĉ_1, ..., ĉ_m]` at `xi`; `None` when the local system is
    /// singular even after regularization.
    pub fn predict(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let g = self.geometry(xi);
        let w = self.weights_for(&g, self.lambda, self.kernel);
        self.regress(&g, &w)
    }

    /// Cross-validation value at training point `i`: the prediction at `x_i`
    /// with `w_i` forced to zero.
    pub fn cross_validate(&self, i: usize) -> Option<Vec<f64>> {
        let g = self.geometry_std(&self.standardized_row(i));
        self.cross_validate_with(&g, i, self.lambda, self.kernel)
    }

    fn cross_validate_with(
        &self,
        g: &Geometry,
        i: usize,
        lambda: f64,
        kernel: KernelType,
    ) -> Option<Vec<f64>> {
        let mut w = self.weights_for(g, lambda, kernel);
        w[i] = 0.0;
        self.regress(g, &w)
    }

    fn training_score(&self, i: usize) -> Score {
        prediction_score(&self.output_row(i))
    }

    /// Aggregate order error with cross-validation over all training points.
    pub fn aoecv(&self) -> f64 {
        let rows: Vec<usize> = (0..self.p).collect();
        let truth: Vec<Score> = rows.iter().map(|&i| self.training_score(i)).collect();
        let cv: Vec<Score> = rows
            .iter()
            .map(|&i| {
                self.cross_validate(i)
                    .map_or(Score::WORST, |y| prediction_score(&y))
            })
            .collect();
        aoecv_from_scores(&truth, &cv)
    }

    pub fn diagnostics(&self, aoecv: f64) -> ModelDiagnostics {
        ModelDiagnostics {
            lambda: self.lambda,
            kernel: self.kernel,
            aoecv,
            p: self.p,
        }
    }

    fn with_params(&self, lambda: f64, kernel: KernelType) -> Self {
        Self {
            lambda,
            kernel,
            ..self.clone()
        }
    }
}

/// `(ĥ, f̂)` of an output vector `[f, c_1, ..., c_m]`; non-finite values map to
/// the virtual worst score.
pub fn prediction_score(y: &[f64]) -> Score {
    match aggregate_violation(&y[1..]) {
        Some(h) if y[0].is_finite() => Score::new(h, y[0]),
        _ => Score::WORST,
    }
}

/// Solves `A u = e_1` with a column-pivoted QR. Rank-deficient systems get a
/// single diagonal jitter of `RIDGE_JITTER * trace(A)`.
fn solve_first_unit(a: DMatrix<f64>) -> Option<DVector<f64>> {
    let k = a.nrows();
    let trace = a.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return None;
    }
    let e1 = DVector::from_fn(k, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let r0 = r[(0, 0)].abs();
    let full_rank = r0 > 0.0 && (1..k).all(|i| r[(i, i)].abs() > RANK_TOL * r0);
    let u = if full_rank {
        qr.solve(&e1)?
    } else {
        let mut reg = a;
        for i in 0..k {
            reg[(i, i)] += RIDGE_JITTER * trace;
        }
        reg.col_piv_qr().solve(&e1)?
    };
    u.iter().all(|v| v.is_finite()).then_some(u)
}

/// `(1/p^2) Σ_i Σ_j xor(x_i ≺ x_j, x_i ≺̂̂ x_j)` for paired true and
/// cross-validated scores.
pub fn aoecv_from_scores(truth: &[Score], cv: &[Score]) -> f64 {
    assert_eq!(truth.len(), cv.len());
    let p = truth.len();
    if p == 0 {
        return 0.0;
    }
    let mut errors = 0usize;
    for i in 0..p {
        for j in 0..p {
            if truth[i].precedes(&truth[j]) != cv[i].precedes(&cv[j]) {
                errors += 1;
            }
        }
    }
    errors as f64 / (p * p) as f64
}

/// Summary of a fitted model, suitable for a JSON diagnostics dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub lambda: f64,
    pub kernel: KernelType,
    pub aoecv: f64,
    pub p: usize,
}

/// Hyperparameter search used by [`fit`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Candidate kernel shapes, in increasing order.
    pub lambdas: Vec<f64>,
    pub kernels: Vec<KernelType>,
    /// Above this many training points the AOECV is computed on a fixed
    /// subsample of this many rows.
    pub max_aoecv_rows: usize,
    pub subsample_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lambdas: default_lambda_grid(),
            kernels: KernelType::ALL.to_vec(),
            max_aoecv_rows: 200,
            subsample_seed: 0x10e55,
        }
    }
}

/// 13 logarithmically spaced shapes in `[0.1, 10]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-1.0 + k as f64 / 6.0)).collect()
}

/// Fits a model with the default search grid.
pub fn fit<X, Y>(x: &[X], y: &[Y]) -> Result<(LowessModel, ModelDiagnostics)>
where
    X: AsRef<[f64]>,
    Y: AsRef<[f64]>,
{
    fit_with(x, y, &FitOptions::default())
}

/// Chooses `(λ, φ)` minimizing the AOECV. Ties go to the smaller `λ`, then to
/// the kernel listed first.
pub fn fit_with<X, Y>(x: &[X], y: &[Y], opts: &FitOptions) -> Result<(LowessModel, ModelDiagnostics)>
where
    X: AsRef<[f64]>,
    Y: AsRef<[f64]>,
{
    let p = x.len();
    let n = x.first().map_or(0, |r| r.as_ref().len());
    if p < n + 2 {
        return Err(Error::Fit(format!(
            "need at least {} training points in dimension {n}, got {p}",
            n + 2
        )));
    }
    if opts.lambdas.is_empty() || opts.kernels.is_empty() {
        return Err(Error::Fit("empty hyperparameter grid".into()));
    }
    let base = LowessModel::new(x, y, opts.lambdas[0], opts.kernels[0])?;

    let rows: Vec<usize> = if p > opts.max_aoecv_rows {
        let mut r = rng::stream(opts.subsample_seed, "aoecv-subsample", p as u64);
        let mut idx = sample(&mut r, p, opts.max_aoecv_rows).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..p).collect()
    };
    let truth: Vec<Score> = rows.iter().map(|&i| base.training_score(i)).collect();
    let geometries: Vec<Geometry> = rows
        .iter()
        .map(|&i| base.geometry_std(&base.standardized_row(i)))
        .collect();

    let candidates: Vec<(f64, KernelType)> = opts
        .lambdas
        .iter()
        .flat_map(|&l| opts.kernels.iter().map(move |&k| (l, k)))
        .collect();

    let errors: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&(lambda, kernel)| {
            let mut any_ok = false;
            let cv: Vec<Score> = rows
                .iter()
                .zip(&geometries)
                .map(|(&i, g)| match base.cross_validate_with(g, i, lambda, kernel) {
                    Some(yv) => {
                        any_ok = true;
                        prediction_score(&yv)
                    }
                    None => Score::WORST,
                })
                .collect();
            any_ok.then(|| aoecv_from_scores(&truth, &cv))
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (c, e) in errors.iter().enumerate() {
        if let Some(e) = *e {
            if best.is_none_or(|(_, be)| e < be) {
                best = Some((c, e));
            }
        }
    }
    let (c, err) = best.ok_or_else(|| Error::Fit("every candidate model is singular".into()))?;
    let (lambda, kernel) = candidates[c];
    let model = base.with_params(lambda, kernel);
    let diag = model.diagnostics(err);
    Ok((model, diag))
}
