mod common;

use common::*;
use ndarray::Array2;
use rankcorr::io::load_fixture;
use rankcorr::metrics::{mean_target, relative_residual, ResidualScale};
use rankcorr::model::{AngleMatrix, InitPolicy, SolverConfig, Termination};
use rankcorr::objective::eval_objective;
use rankcorr::optimizer::{multistart, random_angles as seeded_angles, solve};
use rankcorr::param::angles_to_corr;
use rankcorr::validate_problem;

fn published_config(name: &str, k: usize) -> SolverConfig {
    let init = load_fixture(name).unwrap().init_for(k).unwrap().clone();
    SolverConfig::default().with_init(InitPolicy::Explicit(init))
}

#[test]
fn published_solution_objective_matches_printed_residual() {
    // Printed angles are rounded to four decimals, so only the leading
    // digits of the printed residual 0.0092 are reproducible.
    let fx = load_fixture("example31").unwrap();
    let inst = fx.instance(3).unwrap();
    let alpha = AngleMatrix::new(fx.published[&3].angles.clone()).unwrap();
    let eps = ResidualScale::new(&inst).from_objective(eval_objective(&inst, &alpha));
    assert!((eps - 0.0092).abs() < 5e-5, "eps = {eps}");
}

#[test]
fn published_angles_reproduce_printed_matrix() {
    for name in ["example31", "example32"] {
        let fx = load_fixture(name).unwrap();
        for (k, p) in &fx.published {
            let alpha = AngleMatrix::new(p.angles.clone()).unwrap();
            let d = max_abs_diff(angles_to_corr(&alpha).as_array(), &p.corr);
            assert!(d < 5e-4, "{name} k={k}: {d}");
        }
    }
}

#[test]
fn mean_of_example32_targets() {
    let inst = load_fixture("example32").unwrap().instance(3).unwrap();
    let mean = mean_target(&inst);
    assert_eq!(mean.m(), 1);
    let v = mean.targets()[0][[0, 1]];
    assert!((v - 0.64708).abs() < 1e-12, "{v}");
}

#[test]
fn solve_example32_rank3_from_published_start() {
    let inst = load_fixture("example32").unwrap().instance(3).unwrap();
    let rep = solve(&inst, &published_config("example32", 3)).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!((rep.final_rel_residual() - 0.3977).abs() < 5e-3);
    assert!((relative_residual(&inst, &rep.final_corr) - rep.final_rel_residual()).abs() < 1e-12);
}

#[test]
fn converged_runs_reach_gradient_tolerance() {
    for (name, k) in [("example31", 2), ("example31", 3), ("example32", 3)] {
        let inst = load_fixture(name).unwrap().instance(k).unwrap();
        let rep = solve(&inst, &published_config(name, k)).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        let min_gn = rep.trace.iter().map(|r| r.grad_norm).fold(f64::INFINITY, f64::min);
        assert!(min_gn < 1e-4);
        assert_eq!(rep.trace.len(), rep.iterations + 1);
        assert!(rep.trace[0].step.is_none() && rep.trace[0].backtracks.is_none());
    }
}

#[test]
fn trace_is_monotone_on_random_instances() {
    let mut r = rng(31);
    for case in 0..10 {
        let n = 4 + case % 5;
        let inst = random_instance(&mut r, n, 1 + case % 3, 2 + case % (n - 2));
        let cfg = SolverConfig::default().with_init(InitPolicy::Random { seed: case as u64 });
        let rep = solve(&inst, &cfg).unwrap();
        for w in rep.trace.windows(2) {
            assert!(w[1].f < w[0].f, "case {case}: F not strictly decreasing at t={}", w[1].t);
        }
    }
}

#[test]
fn final_corr_is_image_of_final_angles() {
    let inst = load_fixture("example31").unwrap().instance(3).unwrap();
    let rep = solve(&inst, &published_config("example31", 3)).unwrap();
    assert_eq!(
        rep.final_corr.as_array(),
        angles_to_corr(&rep.final_angles).as_array()
    );
}

#[test]
fn multi_and_mean_runs_share_the_offset() {
    let mut r = rng(5);
    for case in 0..5 {
        let inst = random_instance(&mut r, 6, 3, 3);
        let mean = mean_target(&inst);
        let mf = inst.m() as f64;
        let cfg = SolverConfig::default().with_init(InitPolicy::Random { seed: case });
        let a0 = seeded_angles(6, 2, case);
        let c0 = eval_objective(&inst, &a0) - mf * eval_objective(&mean, &a0);
        for run_on in [&inst, &mean] {
            let rep = solve(run_on, &cfg).unwrap();
            let a = &rep.final_angles;
            let c = eval_objective(&inst, a) - mf * eval_objective(&mean, a);
            assert!((c - c0).abs() <= 1e-10 * c0.abs().max(1.0));
        }
    }
}

#[test]
fn seeded_init_matches_documented_fill() {
    let a = seeded_angles(4, 2, 7);
    assert!(a.as_array().iter().all(|v| (0.0..1.0).contains(v)));
    let inst = load_fixture("example31").unwrap().instance(3).unwrap();
    let cfg = SolverConfig {
        tol: 1e9,
        ..SolverConfig::default()
    }
    .with_init(InitPolicy::Random { seed: 7 });
    let rep = solve(&inst, &cfg).unwrap();
    assert_eq!(rep.final_angles.as_array(), a.as_array());
    assert_eq!(rep.seed, Some(7));
    assert_eq!(rep.trace.len(), 1);
    assert_eq!(rep.termination, Termination::Converged);
}

#[test]
fn solves_are_deterministic() {
    let inst = load_fixture("example32").unwrap().instance(2).unwrap();
    let cfg = SolverConfig::default().with_init(InitPolicy::Random { seed: 3 });
    let a = solve(&inst, &cfg).unwrap();
    let b = solve(&inst, &cfg).unwrap();
    assert_eq!(a.final_angles.as_array(), b.final_angles.as_array());
    assert_eq!(a.iterations, b.iterations);
    let fa: Vec<f64> = a.trace.iter().map(|r| r.f).collect();
    let fb: Vec<f64> = b.trace.iter().map(|r| r.f).collect();
    assert_eq!(fa, fb);
}

#[test]
fn multistart_matches_sequential_runs() {
    let inst = load_fixture("example32").unwrap().instance(2).unwrap();
    let seeds = [4u64, 9, 2];
    let ms = multistart(&inst, &SolverConfig::default(), &seeds).unwrap();
    for (run, &seed) in ms.runs.iter().zip(&seeds) {
        let single = solve(
            &inst,
            &SolverConfig::default().with_init(InitPolicy::Random { seed }),
        )
        .unwrap();
        assert_eq!(run.final_angles.as_array(), single.final_angles.as_array());
        assert_eq!(run.seed, Some(seed));
    }
    let best_f = ms.best_run().final_objective();
    assert!(ms.runs.iter().all(|r| r.final_objective() >= best_f));
}

#[test]
fn multistart_rejects_empty_seed_list() {
    let inst = load_fixture("example31").unwrap().instance(2).unwrap();
    assert!(multistart(&inst, &SolverConfig::default(), &[]).is_err());
}

#[test]
fn periodic_restart_still_descends() {
    let inst = load_fixture("example32").unwrap().instance(3).unwrap();
    let cfg = SolverConfig {
        restart_period: Some(10),
        ..published_config("example32", 3)
    };
    let rep = solve(&inst, &cfg).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!((rep.final_rel_residual() - 0.3977).abs() < 5e-3);
    for w in rep.trace.windows(2) {
        assert!(w[1].f <= w[0].f);
    }
}

#[test]
fn strict_mode_on_published_start() {
    // Without the descent safeguard and without step expansion the
    // iteration is the unmodified conjugate gradient with backtracking.
    let inst = load_fixture("example31").unwrap().instance(3).unwrap();
    let cfg = SolverConfig {
        descent_safeguard: false,
        allow_expansion: false,
        record_iterates: true,
        ..published_config("example31", 3)
    };
    let rep = solve(&inst, &cfg).unwrap();
    for rec in &rep.trace[1..] {
        assert!(rec.backtracks.unwrap() >= 0);
    }
    for w in rep.trace.windows(2) {
        assert!(w[1].f <= w[0].f);
    }
    assert_eq!(rep.termination, Termination::Converged);
    assert!((rep.final_rel_residual() - 0.0092).abs() < 1e-3);
}

#[test]
fn max_iter_is_respected() {
    let inst = load_fixture("example32").unwrap().instance(4).unwrap();
    let cfg = SolverConfig {
        max_iter: 17,
        ..SolverConfig::default()
    };
    let rep = solve(&inst, &cfg).unwrap();
    assert_eq!(rep.termination, Termination::MaxIter);
    assert_eq!(rep.iterations, 17);
    assert_eq!(rep.trace.len(), 18);
}

#[test]
fn rank_one_is_the_all_ones_matrix() {
    let inst = load_fixture("example31").unwrap().instance(1).unwrap();
    let rep = solve(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert_eq!(rep.iterations, 0);
    assert!(rep.final_corr.as_array().iter().all(|&v| v == 1.0));
}

#[test]
fn all_ones_target_is_recovered_at_rank_two() {
    let n = 5;
    let inst = validate_problem(&[Array2::ones((n, n))], 2).unwrap();
    let rep = solve(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!(rep.final_objective() < 1e-6);
}
