//! Regularized incomplete gamma function and the Gamma quantile used for the
//! LOWESS local scale.

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const MAX_ITER: usize = 100_000;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Regularized lower incomplete gamma `P(a, x)` for `a > 0`, `x >= 0`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    lower_gamma_with(a, ln_gamma(a), x)
}

fn lower_gamma_with(a: f64, ln_gamma_a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma_a;
    if x < a + 1.0 {
        // Series expansion.
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // Continued fraction for Q(a, x), modified Lentz.
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (1.0 - (h.ln() + log_prefix).exp()).max(0.0)
    }
}

/// Relative accuracy at which the quantile search stops.
pub const QUANTILE_TOL: f64 = 1e-10;

/// Inverse CDF of the Gamma distribution with shape `k` and scale `theta`.
///
/// Bracketed root search on [`regularized_lower_gamma`]: Newton steps that
/// stay inside the bracket, bisection otherwise.
pub fn gamma_quantile(k: f64, theta: f64, level: f64) -> f64 {
    debug_assert!(k > 0.0 && theta > 0.0);
    if level <= 0.0 {
        return 0.0;
    }
    if level >= 1.0 {
        return f64::INFINITY;
    }
    let lg = ln_gamma(k);
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while lower_gamma_with(k, lg, hi) < level {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = lower_gamma_with(k, lg, x) - level;
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((k - 1.0) * x.ln() - x - lg).exp();
        let newton = x - r / density;
        let next = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - x).abs() <= 0.01 * QUANTILE_TOL * next || hi - lo <= QUANTILE_TOL * hi;
        x = next;
        if done {
            break;
        }
    }
    theta * x
}
