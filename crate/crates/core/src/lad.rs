//! Batch least absolute deviation: minimize `‖H - A X‖₁,₁` over `X`.
//!
//! Split as `A X - Z = H` with `Z` in residual space. The x-update is a
//! `P`-weighted least-squares solve against a cached Cholesky factor of
//! `AᵀPA`, the z-update soft-thresholds with `T[l,i] = 1 / (ρ_i P_l)`.

use crate::dense::{soft_threshold, spd_factorize, spd_solve, DenseMatrix, SpdFactorization};
use crate::error::{check_shape, Error, Result};
use crate::penalty::{balance_all, ConstraintGeometry, PenaltyState};
use crate::solver::{
    check_init, penalty_weighted, rescale_multipliers, IterateState, PenaltySnapshot,
    SolveReport, SolverConfig, Termination,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemLad {
    a: DenseMatrix,
    h: DenseMatrix,
}

impl ProblemLad {
    pub fn new(a: DenseMatrix, h: DenseMatrix) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 || h.cols() == 0 {
            return Err(Error::InvalidProblem(format!(
                "LAD needs nonempty A and H, got A {}x{} and H {}x{}",
                a.rows(),
                a.cols(),
                h.rows(),
                h.cols()
            )));
        }
        check_shape("LAD H", (a.rows(), h.cols()), h.shape())?;
        if !a.is_finite() || !h.is_finite() {
            return Err(Error::InvalidProblem("LAD data must be finite".into()));
        }
        Ok(Self { a, h })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    /// `(m, n, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.rows(), self.a.cols(), self.h.cols())
    }

    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        Ok(self.h.sub(&self.a.matmul(x)?)?.abs_sum())
    }
}

/// Cached `chol(AᵀPA)`, `AᵀP` and the threshold matrix, stamped with the
/// penalty versions they were built from.
#[derive(Debug, Clone)]
pub struct LadWorkspace {
    factor: SpdFactorization,
    atp: DenseMatrix,
    threshold: DenseMatrix,
    p_stamp: u64,
    rho_stamp: u64,
    factorizations: usize,
}

fn threshold_matrix(state: &PenaltyState) -> DenseMatrix {
    let (p, rho) = (state.p_diag(), state.rho());
    DenseMatrix::from_fn(p.len(), rho.len(), |l, i| (1.0 / rho[i]) * (1.0 / p[l]))
}

impl LadWorkspace {
    pub fn new(prob: &ProblemLad, state: &PenaltyState) -> Result<Self> {
        let (m, _, nn) = prob.dims();
        check_shape("LAD penalty", (m, nn), (state.p_diag().len(), state.rho().len()))?;
        let (factor, atp) = Self::factor(prob, state)?;
        Ok(Self {
            factor,
            atp,
            threshold: threshold_matrix(state),
            p_stamp: state.p_version(),
            rho_stamp: state.rho_version(),
            factorizations: 1,
        })
    }

    fn factor(prob: &ProblemLad, state: &PenaltyState) -> Result<(SpdFactorization, DenseMatrix)> {
        let atp = prob.a.scale_rows(state.p_diag()).transpose();
        let normal = atp.matmul(&prob.a)?;
        let factor = spd_factorize(&normal).map_err(|e| Error::Setup(Box::new(e)))?;
        Ok((factor, atp))
    }

    /// Rebuilds whatever the penalty change invalidated. A `ρ`-only change
    /// touches the thresholds alone.
    pub fn refresh(&mut self, prob: &ProblemLad, state: &PenaltyState) -> Result<()> {
        let p_changed = self.p_stamp != state.p_version();
        if p_changed {
            let (factor, atp) = Self::factor(prob, state)?;
            self.factor = factor;
            self.atp = atp;
            self.p_stamp = state.p_version();
            self.factorizations += 1;
        }
        if p_changed || self.rho_stamp != state.rho_version() {
            self.threshold = threshold_matrix(state);
            self.rho_stamp = state.rho_version();
        }
        Ok(())
    }

    pub fn threshold(&self) -> &DenseMatrix {
        &self.threshold
    }

    /// Number of times `AᵀPA` has been factored.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn check_factor(&self, state: &PenaltyState) -> Result<()> {
        if self.p_stamp != state.p_version() {
            return Err(Error::StaleCache {
                cached: self.p_stamp,
                current: state.p_version(),
            });
        }
        Ok(())
    }

    fn check_threshold(&self, state: &PenaltyState) -> Result<()> {
        self.check_factor(state)?;
        if self.rho_stamp != state.rho_version() {
            return Err(Error::StaleCache {
                cached: self.rho_stamp,
                current: state.rho_version(),
            });
        }
        Ok(())
    }
}

/// Solves `(AᵀPA) X = AᵀP (H + Z - D)`.
pub fn lad_x_update(
    ws: &LadWorkspace,
    state: &PenaltyState,
    prob: &ProblemLad,
    z: &DenseMatrix,
    d: &DenseMatrix,
) -> Result<DenseMatrix> {
    ws.check_factor(state)?;
    let target = prob.h.add(z)?.sub(d)?;
    spd_solve(&ws.factor, &ws.atp.matmul(&target)?)
}

/// `Z = soft(AX - H + D, T)`.
pub fn lad_z_update(
    ax: &DenseMatrix,
    prob: &ProblemLad,
    d: &DenseMatrix,
    ws: &LadWorkspace,
    state: &PenaltyState,
) -> Result<DenseMatrix> {
    ws.check_threshold(state)?;
    let v = ax.sub(&prob.h)?.add(d)?;
    soft_threshold(&v, &ws.threshold)
}

/// `D' = D + (AX - Z - H)`.
pub fn lad_dual_update(
    d: &DenseMatrix,
    ax: &DenseMatrix,
    z: &DenseMatrix,
    h: &DenseMatrix,
) -> Result<DenseMatrix> {
    d.add(&ax.sub(z)?.sub(h)?)
}

fn dual_residual(prob: &ProblemLad, dz: &DenseMatrix, state: &PenaltyState) -> Result<f64> {
    Ok(prob
        .a
        .tr_matmul(&penalty_weighted(dz, state))?
        .frobenius_norm())
}

pub fn solve_lad(
    prob: &ProblemLad,
    cfg: &SolverConfig,
    init: Option<&IterateState>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let (m, n, nn) = prob.dims();
    let mut state = PenaltyState::uniform(m, nn, cfg.rho0)?;
    let mut ws = LadWorkspace::new(prob, &state)?;
    let geom = ConstraintGeometry::lad(&prob.a);

    let mut it = match init {
        Some(init) => {
            check_init(init, (n, nn), (m, nn))?;
            init.clone()
        }
        None => {
            let x = spd_solve(&ws.factor, &ws.atp.matmul(&prob.h)?)?;
            let ax = prob.a.matmul(&x)?;
            let z = soft_threshold(&ax.sub(&prob.h)?, &ws.threshold)?;
            let d = lad_dual_update(&DenseMatrix::zeros(m, nn), &ax, &z, &prob.h)?;
            IterateState {
                x,
                z,
                d,
                z_prev: DenseMatrix::zeros(m, nn),
            }
        }
    };

    let epsilon = (nn * n) as f64 * cfg.eps_tol;
    let r0 = prob.a.matmul(&it.x)?.sub(&it.z)?.sub(&prob.h)?.frobenius_norm();
    let s0 = dual_residual(prob, &it.z.sub(&it.z_prev)?, &state)?;
    let mut primal_history = vec![r0];
    let mut dual_history = vec![s0];
    let mut penalty_trace = Vec::new();
    let mut rejected_p_updates = 0;

    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut k = 0;
    while k < cfg.max_iter && (r_norm > epsilon || s_norm > epsilon) {
        let x = lad_x_update(&ws, &state, prob, &it.z, &it.d)?;
        let ax = prob.a.matmul(&x)?;
        let z = lad_z_update(&ax, prob, &it.d, &ws, &state)?;
        let residual = ax.sub(&z)?.sub(&prob.h)?;
        let d = it.d.add(&residual)?;
        let dz = z.sub(&it.z)?;

        r_norm = residual.frobenius_norm();
        s_norm = dual_residual(prob, &dz, &state)?;
        primal_history.push(r_norm);
        dual_history.push(s_norm);

        let z_prev = std::mem::replace(&mut it.z, z);
        it.x = x;
        it.d = d;
        it.z_prev = z_prev;

        if let Some(bcfg) = cfg.balances_at(k) {
            let mut next = balance_all(&state, &residual, &dz, &geom, bcfg)?;
            if cfg.normalize_scale && next.version() != state.version() {
                next = next.normalized(bcfg.clamp_lo, bcfg.clamp_hi);
            }
            if let Err(err) = ws.refresh(prob, &next) {
                if !err.is_singular() {
                    return Err(err);
                }
                next = next.with_p_of(&state);
                ws.refresh(prob, &next)?;
                rejected_p_updates += 1;
            }
            if next.version() != state.version() {
                if cfg.rescale_multipliers {
                    rescale_multipliers(&mut it.d, &state, &next);
                }
                state = next;
                penalty_trace.push(PenaltySnapshot {
                    iteration: k + 1,
                    rho: state.rho().to_vec(),
                    p_diag: state.p_diag().to_vec(),
                });
            }
        }
        k += 1;
    }

    let termination = if r_norm <= epsilon && s_norm <= epsilon {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    Ok(SolveReport {
        objective: prob.objective(&it.x)?,
        solution: it.x.clone(),
        residual_block: None,
        iterations: k,
        primal_history,
        dual_history,
        penalty_trace,
        rejected_p_updates,
        penalty: state,
        termination,
        epsilon,
        state: it,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut impl Rng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn inverse3(m: &DenseMatrix) -> DenseMatrix {
        let a = |i: usize, j: usize| m[(i, j)];
        let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        DenseMatrix::from_fn(3, 3, |i, j| {
            // cofactor of (j, i)
            let rows: Vec<usize> = (0..3).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..3).filter(|&c| c != i).collect();
            let minor = a(rows[0], cols[0]) * a(rows[1], cols[1])
                - a(rows[0], cols[1]) * a(rows[1], cols[0]);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * minor / det
        })
    }

    #[test]
    fn x_update_identity_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prob = ProblemLad::new(DenseMatrix::identity(3), random(&mut rng, 3, 2)).unwrap();
        let state = PenaltyState::uniform(3, 2, 1.0).unwrap();
        let ws = LadWorkspace::new(&prob, &state).unwrap();
        let z = random(&mut rng, 3, 2);
        let d = random(&mut rng, 3, 2);
        let x = lad_x_update(&ws, &state, &prob, &z, &d).unwrap();
        let want = prob.h().add(&z).unwrap().sub(&d).unwrap();
        assert!(x.sub(&want).unwrap().max_abs() <= 1e-15);

        let zero = DenseMatrix::zeros(3, 2);
        let x = lad_x_update(&ws, &state, &prob, &zero, &zero).unwrap();
        assert_eq!(&x, prob.h());
    }

    #[test]
    fn x_update_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 6, 3);
        let h = random(&mut rng, 6, 2);
        let prob = ProblemLad::new(a.clone(), h.clone()).unwrap();
        let p: Vec<f64> = (0..6).map(|_| rng.gen_range(0.2..5.0)).collect();
        let state = PenaltyState::new(p.clone(), vec![1.0, 3.0]).unwrap();
        let ws = LadWorkspace::new(&prob, &state).unwrap();
        let z = random(&mut rng, 6, 2);
        let d = random(&mut rng, 6, 2);
        let x = lad_x_update(&ws, &state, &prob, &z, &d).unwrap();

        let atp = a.transpose().matmul(&DenseMatrix::from_diag(&p)).unwrap();
        let inv = inverse3(&atp.matmul(&a).unwrap());
        let rhs = h.add(&z).unwrap().sub(&d).unwrap();
        let want = inv.matmul(&atp).unwrap().matmul(&rhs).unwrap();
        assert!(x.sub(&want).unwrap().max_abs() <= 1e-9);

        // normal-equation residual
        let lhs = atp.matmul(&a).unwrap().matmul(&x).unwrap();
        let r = lhs.sub(&atp.matmul(&rhs).unwrap()).unwrap();
        assert!(r.frobenius_norm() <= 1e-8 * atp.matmul(&rhs).unwrap().frobenius_norm());
    }

    #[test]
    fn z_update_thresholds() {
        let prob = ProblemLad::new(DenseMatrix::identity(1), DenseMatrix::zeros(1, 1)).unwrap();
        let zero = DenseMatrix::zeros(1, 1);

        let state = PenaltyState::uniform(1, 1, 1.0).unwrap();
        let ws = LadWorkspace::new(&prob, &state).unwrap();
        let z = lad_z_update(&zero, &prob, &zero, &ws, &state).unwrap();
        assert_eq!(z[(0, 0)], 0.0);
        let z = lad_z_update(&DenseMatrix::filled(1, 1, 2.0), &prob, &zero, &ws, &state).unwrap();
        assert_eq!(z[(0, 0)], 1.0);

        let state = PenaltyState::new(vec![4.0], vec![2.0]).unwrap();
        let ws = LadWorkspace::new(&prob, &state).unwrap();
        assert_eq!(ws.threshold()[(0, 0)], 0.125);
        let z = lad_z_update(&DenseMatrix::filled(1, 1, 1.0), &prob, &zero, &ws, &state).unwrap();
        assert_eq!(z[(0, 0)], 0.875);
    }

    #[test]
    fn dual_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random(&mut rng, 4, 2);
        let z = random(&mut rng, 4, 2);
        let h = random(&mut rng, 4, 2);
        let ax = z.add(&h).unwrap();
        let next = lad_dual_update(&d, &ax, &z, &h).unwrap();
        assert!(next.sub(&d).unwrap().max_abs() <= 1e-15);

        let r = random(&mut rng, 4, 2);
        let ax = z.add(&h).unwrap().add(&r).unwrap();
        let next = lad_dual_update(&DenseMatrix::zeros(4, 2), &ax, &z, &h).unwrap();
        assert!(next.sub(&r).unwrap().max_abs() <= 1e-15);
    }

    #[test]
    fn interpolation_converges_immediately() {
        let prob = ProblemLad::new(
            DenseMatrix::identity(2),
            DenseMatrix::column_vector(&[3.0, -4.0]),
        )
        .unwrap();
        let rep = solve_lad(&prob, &SolverConfig::default(), None).unwrap();
        assert!(rep.converged());
        assert!(rep.iterations <= 2);
        assert_eq!(rep.solution, *prob.h());
        assert_eq!(rep.objective, 0.0);
        assert_eq!(rep.primal_history.len(), rep.iterations + 1);
    }

    #[test]
    fn location_problem_is_the_median() {
        let prob = ProblemLad::new(
            DenseMatrix::filled(3, 1, 1.0),
            DenseMatrix::column_vector(&[1.0, 2.0, 9.0]),
        )
        .unwrap();
        let rep = solve_lad(&prob, &SolverConfig::default(), None).unwrap();
        assert!(rep.converged(), "{:?}", rep.termination);
        assert!((rep.solution[(0, 0)] - 2.0).abs() <= 1e-6);
        assert!((rep.objective - 8.0).abs() <= 1e-6);
    }

    #[test]
    fn rank_deficient_design_is_a_setup_error() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]);
        let prob = ProblemLad::new(a, DenseMatrix::zeros(3, 1)).unwrap();
        let err = solve_lad(&prob, &SolverConfig::default(), None).unwrap_err();
        assert!(matches!(err, Error::Setup(inner) if matches!(*inner, Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prob = ProblemLad::new(random(&mut rng, 4, 2), random(&mut rng, 4, 1)).unwrap();
        let state = PenaltyState::uniform(4, 1, 1.0).unwrap();
        let mut ws = LadWorkspace::new(&prob, &state).unwrap();
        let geom = ConstraintGeometry::lad(prob.a());
        let r = DenseMatrix::filled(4, 1, 10.0);
        let dz = DenseMatrix::filled(4, 1, 1e-3);
        let next = balance_all(&state, &r, &dz, &geom, &Default::default()).unwrap();
        assert_ne!(next.version(), state.version());
        let zero = DenseMatrix::zeros(4, 1);
        assert!(matches!(
            lad_x_update(&ws, &next, &prob, &zero, &zero),
            Err(Error::StaleCache { .. })
        ));
        ws.refresh(&prob, &next).unwrap();
        assert!(lad_x_update(&ws, &next, &prob, &zero, &zero).is_ok());
    }

    #[test]
    fn rho_only_change_keeps_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prob = ProblemLad::new(random(&mut rng, 4, 2), random(&mut rng, 4, 2)).unwrap();
        let state = PenaltyState::uniform(4, 2, 1.0).unwrap();
        let mut ws = LadWorkspace::new(&prob, &state).unwrap();
        // Column 0 has a dominant primal residual, row residuals are balanced
        // against the dual side so P stays put.
        let geom = ConstraintGeometry::identity_split(4);
        let r = DenseMatrix::from_fn(4, 2, |_, i| if i == 0 { 1.0 } else { 0.0 });
        let dz = DenseMatrix::from_fn(4, 2, |_, i| if i == 0 { 0.1 } else { 0.0 });
        let next = balance_all(&state, &r, &dz, &geom, &Default::default()).unwrap();
        assert_eq!(next.p_version(), state.p_version());
        assert_ne!(next.rho_version(), state.rho_version());
        ws.refresh(&prob, &next).unwrap();
        assert_eq!(ws.factorizations(), 1);
        assert_eq!(ws.threshold()[(0, 0)], 1.0 / next.rho()[0]);
    }

    #[test]
    fn z_is_soft_threshold_of_shifted_fit_every_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let prob = ProblemLad::new(random(&mut rng, 7, 3), random(&mut rng, 7, 2)).unwrap();
        let state = PenaltyState::new(
            (0..7).map(|_| rng.gen_range(0.5..2.0)).collect(),
            vec![0.7, 1.3],
        )
        .unwrap();
        let ws = LadWorkspace::new(&prob, &state).unwrap();
        let mut z = DenseMatrix::zeros(7, 2);
        let mut d = DenseMatrix::zeros(7, 2);
        for _ in 0..20 {
            let x = lad_x_update(&ws, &state, &prob, &z, &d).unwrap();
            let ax = prob.a().matmul(&x).unwrap();
            let z_new = lad_z_update(&ax, &prob, &d, &ws, &state).unwrap();
            let v = ax.sub(prob.h()).unwrap().add(&d).unwrap();
            assert_eq!(z_new, soft_threshold(&v, ws.threshold()).unwrap());
            d = lad_dual_update(&d, &ax, &z_new, prob.h()).unwrap();
            z = z_new;
        }
    }

    #[test]
    fn row_scaling_is_absorbed_by_p_in_the_x_update() {
        // Scaling row l of A, H, Z, D by c and setting P_l = 1/c² leaves the
        // normal equations, and so the x-update, unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (m, n, nn) = (6, 3, 2);
        let a = random(&mut rng, m, n);
        let h = random(&mut rng, m, nn);
        let z = random(&mut rng, m, nn);
        let d = random(&mut rng, m, nn);
        let (row, c) = (2, 8.0);
        let scale: Vec<f64> = (0..m).map(|l| if l == row { c } else { 1.0 }).collect();
        let base = ProblemLad::new(a.clone(), h.clone()).unwrap();
        let scaled = ProblemLad::new(a.scale_rows(&scale), h.scale_rows(&scale)).unwrap();

        let s0 = PenaltyState::uniform(m, nn, 1.0).unwrap();
        let mut p = vec![1.0; m];
        p[row] = 1.0 / (c * c);
        let s1 = PenaltyState::new(p, vec![1.0; nn]).unwrap();
        let x0 = lad_x_update(&LadWorkspace::new(&base, &s0).unwrap(), &s0, &base, &z, &d).unwrap();
        let x1 = lad_x_update(
            &LadWorkspace::new(&scaled, &s1).unwrap(),
            &s1,
            &scaled,
            &z.scale_rows(&scale),
            &d.scale_rows(&scale),
        )
        .unwrap();
        assert!(x0.sub(&x1).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn warm_start_shape_is_checked() {
        let prob = ProblemLad::new(DenseMatrix::identity(2), DenseMatrix::zeros(2, 1)).unwrap();
        let bad = IterateState {
            x: DenseMatrix::zeros(3, 1),
            z: DenseMatrix::zeros(2, 1),
            d: DenseMatrix::zeros(2, 1),
            z_prev: DenseMatrix::zeros(2, 1),
        };
        assert!(matches!(
            solve_lad(&prob, &SolverConfig::default(), Some(&bad)),
            Err(Error::Dimension { .. })
        ));
    }
}
