use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng;

/// Width of the sampling range used for a variable without a finite upper bound.
pub const UNBOUNDED_RANGE: f64 = 1000.0;

fn sampling_range(lo: f64, up: f64) -> (f64, f64) {
    match (lo.is_finite(), up.is_finite()) {
        (true, true) => (lo, up),
        (true, false) => (lo, lo + UNBOUNDED_RANGE),
        (false, true) => (up - UNBOUNDED_RANGE, up),
        (false, false) => (-0.5 * UNBOUNDED_RANGE, 0.5 * UNBOUNDED_RANGE),
    }
}

/// `count` Latin hypercube points in the box `[lower, upper]`: along every
/// coordinate each of the `count` equal strata holds exactly one sample.
pub fn lhs_sample(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, "lhs", count as u64);
    lhs_sample_with(lower, upper, count, &mut r)
}

pub(crate) fn lhs_sample_with<R: Rng + ?Sized>(
    lower: &[f64],
    upper: &[f64],
    count: usize,
    r: &mut R,
) -> Vec<Vec<f64>> {
    let n = lower.len();
    let mut points = vec![vec![0.0; n]; count];
    let mut strata: Vec<usize> = (0..count).collect();
    for j in 0..n {
        let (lo, up) = sampling_range(lower[j], upper[j]);
        let width = (up - lo) / count as f64;
        strata.shuffle(r);
        for (p, &k) in points.iter_mut().zip(&strata) {
            let v = lo + (k as f64 + r.gen::<f64>()) * width;
            // Guard against rounding past the top of the stratum.
            p[j] = v.min(lo + (k as f64 + 1.0) * width).min(up);
        }
    }
    points
}
