use std::f64::consts::PI;

use crate::domain::{EvalFailure, ProblemSpec};

/// A named test problem with its best known solution.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub spec: ProblemSpec,
    pub best_known_f: f64,
    pub best_known_x: Vec<f64>,
}

type Outputs = Result<Vec<f64>, EvalFailure>;

fn arity(x: &[f64], n: usize, name: &str) -> Result<(), EvalFailure> {
    if x.len() == n {
        Ok(())
    } else {
        Err(EvalFailure(format!("{name} expects {n} variables, got {}", x.len())))
    }
}

/// Tension/compression spring design.
///
/// `x = (d, D, N)`: wire diameter, mean coil diameter, number of active coils.
/// Returns the spring weight and the shear stress, surge frequency, minimum
/// deflection and outer diameter constraints.
pub fn eval_tcsd(x: &[f64]) -> Outputs {
    arity(x, 3, "tcsd")?;
    let (d, dd, n) = (x[0], x[1], x[2]);
    let f = (n + 2.0) * dd * d * d;
    let c1 = 1.0 - dd.powi(3) * n / (71_785.0 * d.powi(4));
    let c2 = (4.0 * dd * dd - d * dd) / (12_566.0 * (dd * d.powi(3) - d.powi(4)))
        + 1.0 / (5_108.0 * d * d)
        - 1.0;
    let c3 = 1.0 - 140.45 * d / (dd * dd * n);
    let c4 = (dd + d) / 1.5 - 1.0;
    Ok(vec![f, c1, c2, c3, c4])
}

/// Pressure vessel (compressed air tank).
///
/// `x = (Ts, Th, R, L)`: shell and head thickness, inner radius, length.
/// Returns the material, forming and welding cost and four constraints.
pub fn eval_vessel(x: &[f64]) -> Outputs {
    arity(x, 4, "vessel")?;
    let (ts, th, r, l) = (x[0], x[1], x[2], x[3]);
    let f = 0.6224 * ts * r * l + 1.7781 * th * r * r + 3.1661 * ts * ts * l + 19.84 * ts * ts * r;
    let c1 = -ts + 0.0193 * r;
    let c2 = -th + 0.00954 * r;
    let c3 = -PI * r * r * l - 4.0 / 3.0 * PI * r.powi(3) + 1_296_000.0;
    let c4 = l - 240.0;
    Ok(vec![f, c1, c2, c3, c4])
}

/// Welded beam design.
///
/// `x = (h, l, t, b)`: weld thickness, weld length, beam width, beam thickness.
/// Constraints: shear stress, bending stress, weld not thicker than the beam,
/// buckling load, end deflection, minimum weld thickness.
pub fn eval_welded(x: &[f64]) -> Outputs {
    arity(x, 4, "welded")?;
    let (h, l, t, b) = (x[0], x[1], x[2], x[3]);
    const LOAD: f64 = 6_000.0;
    const LENGTH: f64 = 14.0;

    let f = 1.10471 * h * h * l + 0.04811 * t * b * (LENGTH + l);

    let tau_p = LOAD / (2f64.sqrt() * h * l);
    let radius = (0.25 * (l * l + (h + t).powi(2))).sqrt();
    let moment = LOAD * (LENGTH + 0.5 * l);
    let polar = 2.0 * (h * l / 2f64.sqrt() * (l * l / 12.0 + 0.25 * (h + t).powi(2)));
    let tau_pp = moment * radius / polar;
    let tau = (tau_p * tau_p + tau_pp * tau_pp + l * tau_p * tau_pp / radius).sqrt();
    let sigma = 6.0 * LOAD * LENGTH / (b * t * t);
    let delta = 2.1952 / (t.powi(3) * b);
    let buckling = 64_746.022 * (1.0 - 0.028_234_6 * t) * t * b.powi(3);

    Ok(vec![
        f,
        tau - 13_600.0,
        sigma - 30_000.0,
        h - b,
        LOAD - buckling,
        delta - 0.25,
        0.125 - h,
    ])
}

fn entry(
    name: &'static str,
    lower: Vec<f64>,
    upper: Vec<f64>,
    m: usize,
    eval: fn(&[f64]) -> Outputs,
    best_known_f: f64,
    best_known_x: Vec<f64>,
) -> CatalogEntry {
    let spec = ProblemSpec::new(name, lower, upper, m, eval).expect("catalog bounds are valid");
    CatalogEntry {
        name,
        spec,
        best_known_f,
        best_known_x,
    }
}

/// TCSD, Vessel and Welded with their bounds and best known solutions.
#[allow(clippy::excessive_precision)]
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        entry(
            "tcsd",
            vec![0.05, 0.25, 2.0],
            vec![2.0, 1.3, 15.0],
            4,
            eval_tcsd,
            0.0126652,
            vec![0.051686696913218, 0.356660815351066, 11.292312882259289],
        ),
        entry(
            "vessel",
            vec![0.0625, 0.0625, 10.0, 10.0],
            vec![6.1875, 6.1875, 200.0, 200.0],
            4,
            eval_vessel,
            5885.332,
            vec![
                0.778168641330718,
                0.384649162605973,
                40.319618721803231,
                199.999999998822659,
            ],
        ),
        entry(
            "welded",
            vec![0.1, 0.1, 0.1, 0.1],
            vec![2.0, 10.0, 10.0, 2.0],
            6,
            eval_welded,
            2.38096,
            vec![
                0.244368407428265,
                6.217496713101864,
                8.291517255567012,
                0.244368666449562,
            ],
        ),
    ]
}

/// Looks a problem up by (case-insensitive) name.
pub fn lookup(name: &str) -> Option<CatalogEntry> {
    let name = name.to_ascii_lowercase();
    catalog().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint(e: &CatalogEntry) -> Vec<f64> {
        e.spec
            .lower
            .iter()
            .zip(&e.spec.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    #[test]
    fn best_known_points_reproduce_reported_values() {
        for e in catalog() {
            let ev = e.spec.evaluate(&e.best_known_x);
            assert!(ev.h <= 1e-6, "{}: h = {}", e.name, ev.h);
            let rel = (ev.f - e.best_known_f).abs() / e.best_known_f.abs();
            assert!(rel <= 1e-4, "{}: f = {} vs {}", e.name, ev.f, e.best_known_f);
        }
    }

    #[test]
    fn tcsd_constraints_nearly_active_at_optimum() {
        let e = lookup("tcsd").unwrap();
        let out = eval_tcsd(&e.best_known_x).unwrap();
        assert!(out[1..].iter().all(|&c| c <= 1e-6));
        // Shear stress and surge frequency are the active ones.
        assert!(out[1].abs() < 1e-5 && out[2].abs() < 1e-5);
    }

    #[test]
    fn midpoints_evaluate() {
        for e in catalog() {
            let ev = e.spec.evaluate(&midpoint(&e));
            assert!(!ev.is_failed(), "{}", e.name);
            assert!(ev.f.is_finite() && ev.h.is_finite());
        }
    }

    #[test]
    fn vessel_lower_corner_is_infeasible() {
        let e = lookup("vessel").unwrap();
        let ev = e.spec.evaluate(&e.spec.lower);
        assert!(ev.h > 0.0);
    }

    #[test]
    fn vessel_cost_increases_with_thickness() {
        let e = lookup("vessel").unwrap();
        let x = &e.best_known_x;
        let f0 = eval_vessel(x).unwrap()[0];
        for j in 0..2 {
            let mut y = x.clone();
            y[j] += 1e-4;
            assert!(eval_vessel(&y).unwrap()[0] > f0);
        }
    }

    #[test]
    fn welded_geometric_constraint_and_length_sign() {
        let e = lookup("welded").unwrap();
        let mut x = e.best_known_x.clone();
        x[0] = 0.5;
        x[3] = 0.3;
        assert!(eval_welded(&x).unwrap()[3] > 0.0);

        let x = e.best_known_x.clone();
        let mut longer = x.clone();
        longer[1] *= 2.0;
        assert!(eval_welded(&longer).unwrap()[0] > eval_welded(&x).unwrap()[0]);
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert!(lookup("Welded").is_some());
        assert!(lookup("solar1").is_none());
    }

    #[test]
    fn wrong_arity_fails() {
        assert!(eval_tcsd(&[1.0]).is_err());
        assert!(eval_vessel(&[1.0; 3]).is_err());
        assert!(eval_welded(&[1.0; 5]).is_err());
    }
}
