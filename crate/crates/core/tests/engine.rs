use blockmads::bench::{run_solver, starting_points, SolverConfig, SolverKind};
use blockmads::mads::{Executor, Mads, MadsConfig, Phase, ScaledProblem, SearchKind};
use blockmads::problems::lookup;
use blockmads::search::SelectionMethod;
use blockmads::{EvalFailure, ProblemSpec, Score};

fn sphere(dim: usize, shift: f64) -> ScaledProblem {
    let spec = ProblemSpec::new("sphere", vec![-1.0; dim], vec![1.0; dim], 0, move |x: &[f64]| {
        Ok(vec![x.iter().map(|v| (v - shift) * (v - shift)).sum()])
    })
    .unwrap();
    ScaledProblem::new(spec)
}

/// Ask/tell loop with a budget of blocks; returns the engine and the blocks.
fn drive(problem: &ScaledProblem, start: &[f64], config: MadsConfig, blocks: usize) -> (Mads, Vec<(Phase, usize)>) {
    let exec = Executor::ambient();
    let mut engine = Mads::new(problem, start, config);
    let mut seen = Vec::new();
    for _ in 0..blocks {
        let Some(block) = engine.next_block() else { break };
        seen.push((block.phase, block.len()));
        let evals = exec.evaluate(problem, &block.points());
        engine.tell(&block, evals);
    }
    (engine, seen)
}

#[test]
fn plain_mads_converges_on_a_convex_quadratic() {
    let problem = sphere(3, 0.3);
    let (engine, _) = drive(&problem, &[-0.9, 0.8, 0.1], MadsConfig::new(6, SearchKind::None, 7), 2000);
    let best = engine.best().unwrap();
    assert!(best.f < 1e-8, "f = {}", best.f);
    for v in &best.x {
        assert!((v - 0.3).abs() < 1e-4);
    }
}

#[test]
fn surrogate_search_converges_on_a_convex_quadratic() {
    let problem = sphere(2, -0.45);
    let config = MadsConfig::new(4, SolverKind::LowessB.search(), 3);
    let (engine, seen) = drive(&problem, &[0.9, 0.9], config, 60);
    assert!(engine.best().unwrap().f < 1e-4, "f = {}", engine.best().unwrap().f);
    assert!(seen.iter().any(|(p, _)| *p == Phase::Search));
}

#[test]
fn constrained_optimum_on_the_disk() {
    // min x + y s.t. x^2 + y^2 <= 1: optimum -sqrt(2).
    let spec = ProblemSpec::new("disk", vec![-2.0; 2], vec![2.0; 2], 1, |x: &[f64]| {
        Ok(vec![x[0] + x[1], x[0] * x[0] + x[1] * x[1] - 1.0])
    })
    .unwrap();
    let problem = ScaledProblem::new(spec);
    let (engine, _) = drive(&problem, &[1.5, 1.5], MadsConfig::new(4, SearchKind::None, 11), 3000);
    let best = engine.best().unwrap();
    assert_eq!(best.h, 0.0);
    assert!((best.f + 2f64.sqrt()).abs() < 1e-3, "f = {}", best.f);
}

#[test]
fn failed_evaluations_do_not_stop_the_search() {
    let spec = ProblemSpec::new("holes", vec![0.0; 2], vec![1.0; 2], 0, |x: &[f64]| {
        if x[0] > 0.7 {
            Err(EvalFailure("simulation crashed".into()))
        } else {
            Ok(vec![(x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)])
        }
    })
    .unwrap();
    let problem = ScaledProblem::new(spec);
    let (engine, _) = drive(&problem, &[0.1, 0.9], MadsConfig::new(4, SolverKind::LowessA.search(), 5), 80);
    assert!(engine.cache().iter().any(|e| e.is_failed()));
    assert!(engine.best().unwrap().f < 1e-3);
}

#[test]
fn blocks_never_exceed_q_and_stay_in_bounds() {
    let problem = sphere(2, 0.0);
    for q in [1, 3, 4, 8] {
        for search in [SearchKind::None, SearchKind::LatinHypercube, SolverKind::LowessB.search()] {
            let exec = Executor::ambient();
            let mut engine = Mads::new(&problem, &[0.5, -0.5], MadsConfig::new(q, search.clone(), 1));
            for _ in 0..30 {
                let Some(block) = engine.next_block() else { break };
                assert!(!block.is_empty() && block.len() <= q);
                for x in block.points() {
                    assert!(x.iter().all(|v| (0.0..=1.0).contains(v)), "{x:?}");
                    assert!(!engine.cache().contains(&x));
                }
                let evals = exec.evaluate(&problem, &block.points());
                engine.tell(&block, evals);
                assert!(engine.mesh().delta_poll() >= engine.mesh().delta_mesh());
            }
        }
    }
}

#[test]
fn lowess_b_with_q_one_starts_its_cycle_with_the_distance_method() {
    let problem = sphere(2, 0.2);
    let mut engine = Mads::new(&problem, &[0.9, -0.9], MadsConfig::new(1, SolverKind::LowessB.search(), 2));
    let exec = Executor::ambient();
    let mut searches = 0;
    for _ in 0..40 {
        let Some(block) = engine.next_block() else { break };
        if block.phase == Phase::Search {
            searches += 1;
            assert_eq!(block.len(), 1);
            assert_eq!(block.candidates[0].method, Some(SelectionMethod::DistanceConstrained));
        }
        let evals = exec.evaluate(&problem, &block.points());
        engine.tell(&block, evals);
    }
    assert!(searches > 0);
}

#[test]
fn mads_polls_in_blocks_of_two_n() {
    let entry = lookup("welded").unwrap();
    let problem = ScaledProblem::new(entry.spec);
    let starts = starting_points(problem.spec(), 1, 0);
    let config = SolverConfig::new(SolverKind::Mads, 8, 9).with_budget(30);
    let rec = run_solver(&config, &problem, &starts, 0, &Executor::ambient()).unwrap();
    for row in &rec.trace[1..] {
        assert_eq!(row.phase, Phase::Poll);
        assert_eq!(row.q, 8);
    }
}

#[test]
fn multistart_evaluates_one_point_per_instance_per_block() {
    let entry = lookup("vessel").unwrap();
    let problem = ScaledProblem::new(entry.spec);
    let starts = starting_points(problem.spec(), 4, 2);
    let config = SolverConfig::new(SolverKind::Multistart, 4, 9).with_budget(25);
    let rec = run_solver(&config, &problem, &starts, 2, &Executor::ambient()).unwrap();
    assert_eq!(rec.blocks(), 25);
    assert_eq!(rec.evaluations, 100);
    assert!(rec.trace.iter().all(|r| r.q == 4));
}

#[test]
fn best_so_far_is_monotone_and_runs_are_reproducible() {
    let entry = lookup("tcsd").unwrap();
    let problem = ScaledProblem::new(entry.spec);
    let starts = starting_points(problem.spec(), 5, 0);
    for kind in SolverKind::ALL {
        let config = SolverConfig::new(kind, 4, 21).with_budget(25);
        let a = run_solver(&config, &problem, &starts, 0, &Executor::with_threads(1).unwrap()).unwrap();
        let b = run_solver(&config, &problem, &starts, 0, &Executor::with_threads(3).unwrap()).unwrap();
        assert_eq!(a.trace, b.trace, "{kind}");
        assert_eq!(a.search_records, b.search_records, "{kind}");
        for w in a.trace.windows(2) {
            let (prev, next) = (Score::new(w[0].best_h, w[0].best_f), Score::new(w[1].best_h, w[1].best_f));
            assert!(!prev.precedes(&next), "{kind}: {prev:?} then {next:?}");
        }
    }
}

#[test]
fn mismatched_starting_points_are_rejected() {
    let problem = sphere(2, 0.0);
    let config = SolverConfig::new(SolverKind::Multistart, 4, 1);
    let starts = vec![vec![0.0, 0.0]; 2];
    assert!(run_solver(&config, &problem, &starts, 0, &Executor::ambient()).is_err());
    let config = SolverConfig::new(SolverKind::Mads, 4, 1);
    assert!(run_solver(&config, &problem, &[vec![0.0; 3]], 0, &Executor::ambient()).is_err());
}
