//! Poll directions from a Householder reflection of a random unit vector.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mesh::MeshState;
use crate::domain::PointKey;
use std::collections::HashSet;

/// Uniformly distributed unit vector in `R^n`.
pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

/// Columns of `H = I - 2 v v^T / |v|^2`, an orthogonal basis of `R^n`.
pub fn householder_basis(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let nn: f64 = v.iter().map(|a| a * a).sum();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id - 2.0 * v[i] * v[j] / nn
                })
                .collect()
        })
        .collect()
}

/// `center + d`, with `d` rescaled to infinity-norm `Δ^P`, projected on the
/// mesh and the bounds.
pub fn step(center: &[f64], dir: &[f64], mesh: &MeshState, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let inf = dir.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let scale = if inf > 0.0 { mesh.delta_poll() / inf } else { 0.0 };
    let raw: Vec<f64> = center.iter().zip(dir).map(|(c, d)| c + scale * d).collect();
    mesh.project(&raw, lower, upper)
}

/// The `2n` poll candidates `center ± h_j` for a fresh random reflection,
/// ordered `+h_1, -h_1, +h_2, -h_2, ...`.
pub fn poll_points<R: Rng + ?Sized>(
    center: &[f64],
    mesh: &MeshState,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let basis = householder_basis(&random_unit(center.len(), rng));
    let mut out = Vec::with_capacity(2 * basis.len());
    for h in &basis {
        out.push(step(center, h, mesh, lower, upper));
        let neg: Vec<f64> = h.iter().map(|a| -a).collect();
        out.push(step(center, &neg, mesh, lower, upper));
    }
    out
}

/// Smallest multiple of `q` that is at least `max(len, q)`.
pub fn padded_size(len: usize, q: usize) -> usize {
    let q = q.max(1);
    len.max(q).div_ceil(q) * q
}

/// Deduplicates `points` (dropping those rejected by `is_new`) and tops the
/// set up to [`padded_size`] with points from `generate`. If `generate` keeps
/// producing known points the result is shorter.
pub fn pad_poll(
    points: Vec<Vec<f64>>,
    q: usize,
    mut is_new: impl FnMut(&[f64]) -> bool,
    mut generate: impl FnMut() -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let mut seen = HashSet::new();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if is_new(&p) && seen.insert(PointKey::new(&p)) {
            out.push(p);
        }
    }
    let target = padded_size(out.len(), q);
    let max_attempts = 50 * (target - out.len()) + 100;
    let mut attempts = 0;
    while out.len() < target && attempts < max_attempts {
        attempts += 1;
        let p = generate();
        if is_new(&p) && seen.insert(PointKey::new(&p)) {
            out.push(p);
        }
    }
    if out.len() < target {
        log::debug!("short poll: {} of {} points", out.len(), target);
    }
    out
}

/// Extra poll point at poll distance along the first direction of a fresh
/// random reflection.
pub fn extra_poll_point<R: Rng + ?Sized>(
    center: &[f64],
    mesh: &MeshState,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let dir = householder_basis(&random_unit(center.len(), rng)).swap_remove(0);
    step(center, &dir, mesh, lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn padded_sizes() {
        assert_eq!(padded_size(6, 16), 16);
        assert_eq!(padded_size(20, 16), 32);
        assert_eq!(padded_size(8, 1), 8);
        assert_eq!(padded_size(8, 8), 8);
        assert_eq!(padded_size(0, 4), 4);
    }

    #[test]
    fn one_dimensional_poll_is_symmetric() {
        let mesh = MeshState::new(0.25, vec![0.5]);
        let mut rng = stream(1, "t", 0);
        let mut pts = poll_points(&[0.5], &mesh, &[0.0], &[1.0], &mut rng);
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(pts, vec![vec![0.25], vec![0.75]]);
    }

    #[test]
    fn pad_poll_reaches_multiple_of_q() {
        let mesh = MeshState::new(0.1, vec![0.5; 3]);
        let mut rng = stream(2, "t", 0);
        let center = vec![0.5; 3];
        let pts = poll_points(&center, &mesh, &[0.0; 3], &[1.0; 3], &mut rng);
        let padded = pad_poll(pts.clone(), 16, |_| true, || {
            extra_poll_point(&center, &mesh, &[0.0; 3], &[1.0; 3], &mut rng)
        });
        assert_eq!(padded.len(), 16);
        assert_eq!(&padded[..pts.len()], &pts[..]);
        let set: HashSet<_> = padded.iter().map(|p| PointKey::new(p)).collect();
        assert_eq!(set.len(), 16);
        for p in &padded {
            let inf = p.iter().zip(&center).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!((inf - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn pad_poll_drops_cached_points() {
        let mesh = MeshState::new(0.1, vec![0.5; 2]);
        let mut rng = stream(3, "t", 0);
        let center = vec![0.5; 2];
        let pts = poll_points(&center, &mesh, &[0.0; 2], &[1.0; 2], &mut rng);
        let banned = PointKey::new(&pts[0]);
        let padded = pad_poll(pts, 1, |p| PointKey::new(p) != banned, || {
            extra_poll_point(&center, &mesh, &[0.0; 2], &[1.0; 2], &mut rng)
        });
        assert_eq!(padded.len(), 3);
    }

    proptest! {
        #[test]
        fn householder_is_orthogonal(seed in 0u64..1000, n in 1usize..8) {
            let mut rng = stream(seed, "h", 0);
            let h = householder_basis(&random_unit(n, &mut rng));
            for i in 0..n {
                for j in 0..n {
                    let d = dot(&h[i], &h[j]);
                    let e = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - e).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn poll_points_lie_on_mesh_within_bounds(seed in 0u64..1000, n in 1usize..6, level in 0u32..6) {
            let mut mesh = MeshState::new(0.1, vec![0.3; n]);
            for _ in 0..level {
                mesh.update(super::super::mesh::IterationOutcome::Failure);
            }
            let mut rng = stream(seed, "p", 0);
            let center = vec![0.3; n];
            let pts = poll_points(&center, &mesh, &vec![0.0; n], &vec![1.0; n], &mut rng);
            prop_assert_eq!(pts.len(), 2 * n);
            let dm = mesh.delta_mesh();
            for p in &pts {
                for (v, a) in p.iter().zip(&center) {
                    let k = (v - a) / dm;
                    prop_assert!((k - k.round()).abs() < 1e-6);
                    prop_assert!((0.0..=1.0).contains(v));
                }
            }
        }
    }
}
