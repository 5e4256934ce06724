mod common;

use common::{log_uniform, random_cbp, random_lad, rel_err, uniform};
use l1admm::{
    cbp_oracle, cslad_oracle, lad_dual_update, lad_oracle, solve_cbp, solve_cslad, solve_lad,
    DenseMatrix, LpStatus, ProblemCbp, ProblemCslad, ProblemLad, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lad_random_10x4_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let prob = ProblemLad::new(uniform(&mut rng, 10, 4), uniform(&mut rng, 10, 3)).unwrap();
    let rep = solve_lad(&prob, &SolverConfig::default(), None).unwrap();
    let oracle = lad_oracle(&prob).unwrap();
    assert!(rep.converged());
    assert!(rel_err(rep.objective, oracle.objective) <= 1e-6);
}

#[test]
fn cbp_random_3x6_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let g = uniform(&mut rng, 3, 6);
    // h = G x0 with x0 ⪰ 0 keeps the instance feasible
    let x0 = DenseMatrix::from_fn(6, 2, |_, _| rng.gen_range(0.0..1.0));
    let prob = ProblemCbp::with_shared_bounds(g.clone(), g.matmul(&x0).unwrap(), &[1.0; 6], &[0.0; 6])
        .unwrap();
    let oracle = cbp_oracle(&prob).unwrap();
    assert_eq!(oracle.status, LpStatus::Optimal);
    let rep = solve_cbp(&prob, &SolverConfig::default(), None).unwrap();
    assert!(rel_err(rep.objective, oracle.objective) <= 1e-6);
}

#[test]
fn lad_dual_step_is_still_at_the_optimum() {
    let prob = ProblemLad::new(
        DenseMatrix::filled(3, 1, 1.0),
        DenseMatrix::column_vector(&[0.5, 4.0, -1.0]),
    )
    .unwrap();
    let oracle = lad_oracle(&prob).unwrap();
    let rep = solve_lad(&prob, &SolverConfig::default(), None).unwrap();
    assert!((rep.solution[(0, 0)] - oracle.solution.unwrap()[(0, 0)]).abs() <= 1e-6);
    let ax = prob.a().matmul(&rep.state.x).unwrap();
    let d_next = lad_dual_update(&rep.state.d, &ax, &rep.state.z, prob.h()).unwrap();
    let step = d_next.sub(&rep.state.d).unwrap().frobenius_norm();
    let primal = ax.sub(&rep.state.z).unwrap().sub(prob.h()).unwrap().frobenius_norm();
    assert!((step - primal).abs() <= 1e-15);
    assert!(step <= rep.epsilon);
}

#[test]
fn lad_residuals_converge_on_95_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(95);
    let cfg = SolverConfig::default();
    let trials = 200;
    let mut converged = 0;
    for _ in 0..trials {
        let prob = random_lad(&mut rng, (3, 20), (1, 8), (1, 4));
        let rep = solve_lad(&prob, &cfg, None).unwrap();
        assert!(rep.primal_history.iter().chain(&rep.dual_history).all(|v| v.is_finite()));
        converged += usize::from(rep.converged());
    }
    assert!(converged * 100 >= 95 * trials, "{converged}/{trials} converged");
}

#[test]
fn admm_never_beats_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(431);
    let cfg = SolverConfig::default();
    for _ in 0..40 {
        let prob = random_lad(&mut rng, (3, 12), (1, 5), (1, 3));
        let rep = solve_lad(&prob, &cfg, None).unwrap();
        let oracle = lad_oracle(&prob).unwrap().objective;
        assert!(oracle <= rep.objective + 1e-6 * (1.0 + oracle.abs()));
    }
}

#[test]
fn ill_scaled_lad_never_errors() {
    // Extreme balanced P can make AᵀPA numerically singular; the driver must
    // keep going with the previous P rather than fail.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let base = random_lad(&mut rng, (10, 20), (2, 6), (1, 3));
        let scale: Vec<f64> = (0..base.a().rows()).map(|_| log_uniform(&mut rng, 1e-3, 1e3)).collect();
        let prob = ProblemLad::new(base.a().scale_rows(&scale), base.h().scale_rows(&scale)).unwrap();
        let cfg = SolverConfig {
            max_iter: 2000,
            ..SolverConfig::default()
        };
        let rep = solve_lad(&prob, &cfg, None).unwrap();
        for snap in &rep.penalty_trace {
            assert!(snap.p_diag.iter().chain(&snap.rho).all(|v| (1e-6..=1e6).contains(v)));
        }
    }
}

#[test]
fn cbp_balanced_run_stays_feasible_for_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let prob = random_cbp(&mut rng, (1, 5), (2, 10), (1, 3));
        let rep = solve_cbp(&prob, &SolverConfig::default(), None).unwrap();
        assert!(rep.solution.data().iter().all(|v| *v >= 0.0));
    }
}

fn cslad(g: DenseMatrix, h: DenseMatrix, lambda: f64, gamma: f64) -> ProblemCslad {
    let (n, nn) = (g.cols(), h.cols());
    ProblemCslad::new(g, h, DenseMatrix::filled(n, nn, lambda), DenseMatrix::filled(n, nn, gamma)).unwrap()
}

#[test]
fn cslad_nonnegative_lad_example() {
    let prob = cslad(DenseMatrix::identity(2), DenseMatrix::column_vector(&[3.0, -4.0]), 0.0, 0.0);
    let rep = solve_cslad(&prob, &SolverConfig::default()).unwrap();
    assert!(rep.converged());
    assert!(rep.solution.sub(&DenseMatrix::column_vector(&[3.0, 0.0])).unwrap().max_abs() <= 1e-6);
    assert!((rep.objective - 4.0).abs() <= 1e-6);
    let oracle = cslad_oracle(&prob).unwrap();
    assert!((oracle.objective - 4.0).abs() <= 1e-9);
}

#[test]
fn cslad_heavy_weight_forces_zero() {
    let h = DenseMatrix::column_vector(&[3.0, -4.0]);
    let prob = cslad(DenseMatrix::identity(2), h.clone(), 100.0, f64::NEG_INFINITY);
    let rep = solve_cslad(&prob, &SolverConfig::default()).unwrap();
    assert!(rep.solution.max_abs() <= 1e-6);
    assert!((rep.objective - h.abs_sum()).abs() <= 1e-6);
}

#[test]
fn cslad_residual_block_tracks_the_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..10 {
        let g = uniform(&mut rng, 6, 3);
        let h = uniform(&mut rng, 6, 2);
        let prob = cslad(g.clone(), h.clone(), 0.1, -0.5);
        let rep = solve_cslad(&prob, &SolverConfig::default()).unwrap();
        if !rep.converged() {
            continue;
        }
        let r = rep.residual_block.as_ref().unwrap();
        let fit = h.sub(&g.matmul(&rep.solution).unwrap()).unwrap();
        assert!(r.sub(&fit).unwrap().frobenius_norm() <= 10.0 * rep.epsilon);
        checked += 1;
    }
    assert!(checked >= 8);
}

#[test]
fn cslad_without_extras_is_lad() {
    let mut rng = ChaCha8Rng::seed_from_u64(373);
    for _ in 0..20 {
        let lad = random_lad(&mut rng, (3, 12), (1, 5), (1, 2));
        let prob = cslad(lad.a().clone(), lad.h().clone(), 0.0, f64::NEG_INFINITY);
        let a = solve_cslad(&prob, &SolverConfig::default()).unwrap();
        let b = solve_lad(&lad, &SolverConfig::default(), None).unwrap();
        assert!(rel_err(a.objective, b.objective) <= 1e-6, "{} vs {}", a.objective, b.objective);
    }
}
