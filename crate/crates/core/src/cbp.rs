//! Batch constrained basis pursuit:
//! minimize `‖C₁ ⊙ X‖₁,₁` subject to `G X = H` and `X ⪰ C₂`.
//!
//! Split as `X - Z = 0`. The x-update is the `P`-weighted projection onto
//! `{X : G X = H}`, which only needs the cached null-space projector
//! `I - P⁻¹Gᵀ(GP⁻¹Gᵀ)⁻¹G` and offset `P⁻¹Gᵀ(GP⁻¹Gᵀ)⁻¹H`. The z-update is the
//! exact prox of the weighted ℓ1 norm plus the bound constraint.

use crate::dense::{soft, spd_factorize, spd_solve, DenseMatrix, SpdFactorization};
use crate::error::{check_shape, Error, Result};
use crate::penalty::{balance_all, ConstraintGeometry, PenaltyState};
use crate::solver::{
    check_init, penalty_weighted, rescale_multipliers, IterateState, PenaltySnapshot,
    SolveReport, SolverConfig, Termination,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemCbp {
    g: DenseMatrix,
    h: DenseMatrix,
    c1: DenseMatrix,
    c2: DenseMatrix,
}

impl ProblemCbp {
    /// `c2` entries may be `-inf` to leave a variable unbounded below.
    pub fn new(g: DenseMatrix, h: DenseMatrix, c1: DenseMatrix, c2: DenseMatrix) -> Result<Self> {
        let (m, n) = g.shape();
        let nn = h.cols();
        if m == 0 || n == 0 || nn == 0 {
            return Err(Error::InvalidProblem(format!(
                "CBP needs nonempty G and H, got G {m}x{n} and H {}x{nn}",
                h.rows()
            )));
        }
        check_shape("CBP H", (m, nn), h.shape())?;
        check_shape("CBP C1", (n, nn), c1.shape())?;
        check_shape("CBP C2", (n, nn), c2.shape())?;
        if !g.is_finite() || !h.is_finite() {
            return Err(Error::InvalidProblem("G and H must be finite".into()));
        }
        if let Some(v) = c1.data().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "C1 weights must be finite and nonnegative, found {v}"
            )));
        }
        if let Some(v) = c2
            .data()
            .iter()
            .find(|v| !(v.is_finite() || **v == f64::NEG_INFINITY))
        {
            return Err(Error::InvalidProblem(format!(
                "C2 bounds must be finite or -inf, found {v}"
            )));
        }
        Ok(Self { g, h, c1, c2 })
    }

    /// Repeats a single weight column and bound column across all columns of `h`.
    pub fn with_shared_bounds(g: DenseMatrix, h: DenseMatrix, c1: &[f64], c2: &[f64]) -> Result<Self> {
        let nn = h.cols();
        let c1 = DenseMatrix::from_fn(c1.len(), nn, |l, _| c1[l]);
        let c2 = DenseMatrix::from_fn(c2.len(), nn, |l, _| c2[l]);
        Self::new(g, h, c1, c2)
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.g
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn c1(&self) -> &DenseMatrix {
        &self.c1
    }

    pub fn c2(&self) -> &DenseMatrix {
        &self.c2
    }

    /// `(m, n, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.g.rows(), self.g.cols(), self.h.cols())
    }

    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        Ok(self.c1.zip_with("CBP objective", x, |w, v| w * v)?.abs_sum())
    }

    /// Single-column subproblem `i`.
    pub fn column(&self, i: usize) -> ProblemCbp {
        ProblemCbp {
            g: self.g.clone(),
            h: self.h.column(i),
            c1: self.c1.column(i),
            c2: self.c2.column(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxOrder {
    /// `max(soft(v, T), C₂)`: the exact proximal map.
    #[default]
    Exact,
    /// `soft(max(v, C₂), T)`: clamp first, then shrink; agrees with `Exact`
    /// whenever `C₂ ⪯ 0`.
    BoundThenShrink,
}

#[derive(Debug, Clone)]
pub struct CbpProjectors {
    m_null: DenseMatrix,
    offset: DenseMatrix,
    // P⁻¹Gᵀ and the factor of G P⁻¹ Gᵀ, for the feasibility correction
    pinv_gt: DenseMatrix,
    gram: SpdFactorization,
    g: DenseMatrix,
    h: DenseMatrix,
    threshold: DenseMatrix,
    p_stamp: u64,
    rho_stamp: u64,
    factorizations: usize,
}

fn threshold_matrix(c1: &DenseMatrix, state: &PenaltyState) -> DenseMatrix {
    let (p, rho) = (state.p_diag(), state.rho());
    DenseMatrix::from_fn(c1.rows(), c1.cols(), |l, i| {
        c1[(l, i)] * (1.0 / p[l]) * (1.0 / rho[i])
    })
}

struct ProjectorParts {
    m_null: DenseMatrix,
    offset: DenseMatrix,
    pinv_gt: DenseMatrix,
    gram: SpdFactorization,
}

fn projector_parts(prob: &ProblemCbp, state: &PenaltyState) -> Result<ProjectorParts> {
    let n = prob.g.cols();
    let p_inv: Vec<f64> = state.p_diag().iter().map(|p| 1.0 / p).collect();
    // P⁻¹Gᵀ, n x m
    let pinv_gt = prob.g.transpose().scale_rows(&p_inv);
    let gram = prob.g.matmul(&pinv_gt)?;
    let factor = spd_factorize(&gram).map_err(|e| Error::Setup(Box::new(e)))?;
    let k = spd_solve(&factor, &prob.g)?;
    let m_null = DenseMatrix::identity(n).sub(&pinv_gt.matmul(&k)?)?;
    let offset = pinv_gt.matmul(&spd_solve(&factor, &prob.h)?)?;
    Ok(ProjectorParts {
        m_null,
        offset,
        pinv_gt,
        gram: factor,
    })
}

/// Builds the projector, offset and thresholds for the current penalties.
pub fn cbp_precompute(prob: &ProblemCbp, state: &PenaltyState) -> Result<CbpProjectors> {
    let (_, n, nn) = prob.dims();
    check_shape("CBP penalty", (n, nn), (state.p_diag().len(), state.rho().len()))?;
    let parts = projector_parts(prob, state)?;
    Ok(CbpProjectors {
        m_null: parts.m_null,
        offset: parts.offset,
        pinv_gt: parts.pinv_gt,
        gram: parts.gram,
        g: prob.g.clone(),
        h: prob.h.clone(),
        threshold: threshold_matrix(&prob.c1, state),
        p_stamp: state.p_version(),
        rho_stamp: state.rho_version(),
        factorizations: 1,
    })
}

impl CbpProjectors {
    /// A `P` change rebuilds everything; a `ρ`-only change rebuilds the thresholds.
    pub fn refresh(&mut self, prob: &ProblemCbp, state: &PenaltyState) -> Result<()> {
        let p_changed = self.p_stamp != state.p_version();
        if p_changed {
            let parts = projector_parts(prob, state)?;
            self.m_null = parts.m_null;
            self.offset = parts.offset;
            self.pinv_gt = parts.pinv_gt;
            self.gram = parts.gram;
            self.p_stamp = state.p_version();
            self.factorizations += 1;
        }
        if p_changed || self.rho_stamp != state.rho_version() {
            self.threshold = threshold_matrix(&prob.c1, state);
            self.rho_stamp = state.rho_version();
        }
        Ok(())
    }

    pub fn null_projector(&self) -> &DenseMatrix {
        &self.m_null
    }

    pub fn offset(&self) -> &DenseMatrix {
        &self.offset
    }

    pub fn threshold(&self) -> &DenseMatrix {
        &self.threshold
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn check(&self, state: &PenaltyState) -> Result<()> {
        if self.p_stamp != state.p_version() {
            return Err(Error::StaleCache {
                cached: self.p_stamp,
                current: state.p_version(),
            });
        }
        if self.rho_stamp != state.rho_version() {
            return Err(Error::StaleCache {
                cached: self.rho_stamp,
                current: state.rho_version(),
            });
        }
        Ok(())
    }
}

/// `X = M_null (Z - D) + V`, followed by one correction step
/// `X += P⁻¹Gᵀ(GP⁻¹Gᵀ)⁻¹(H - GX)` that removes the rounding left in `GX - H`.
pub fn cbp_x_update(
    proj: &CbpProjectors,
    state: &PenaltyState,
    z: &DenseMatrix,
    d: &DenseMatrix,
) -> Result<DenseMatrix> {
    proj.check(state)?;
    let x = proj.m_null.matmul(&z.sub(d)?)?.add(&proj.offset)?;
    let gap = proj.h.sub(&proj.g.matmul(&x)?)?;
    x.add(&proj.pinv_gt.matmul(&spd_solve(&proj.gram, &gap)?)?)
}

/// Prox of `T ⊙ |·|` restricted to `Z ⪰ C₂`, evaluated at `X + D`.
pub fn cbp_z_update(
    x: &DenseMatrix,
    d: &DenseMatrix,
    prob: &ProblemCbp,
    proj: &CbpProjectors,
    state: &PenaltyState,
    order: ProxOrder,
) -> Result<DenseMatrix> {
    proj.check(state)?;
    let v = x.add(d)?;
    check_shape("cbp_z_update", prob.c2.shape(), v.shape())?;
    let t = &proj.threshold;
    let c2 = &prob.c2;
    Ok(DenseMatrix::from_fn(v.rows(), v.cols(), |l, i| {
        let (vv, kk, lo) = (v[(l, i)], t[(l, i)], c2[(l, i)]);
        match order {
            ProxOrder::Exact => soft(vv, kk).max(lo),
            ProxOrder::BoundThenShrink => soft(vv.max(lo), kk),
        }
    }))
}

/// `D' = D + X - Z`.
pub fn cbp_dual_update(d: &DenseMatrix, x: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    d.add(&x.sub(z)?)
}

pub fn solve_cbp(
    prob: &ProblemCbp,
    cfg: &SolverConfig,
    init: Option<&IterateState>,
) -> Result<SolveReport> {
    cfg.validate()?;
    let (m, n, nn) = prob.dims();
    let order = cfg.prox_order;
    let mut state = PenaltyState::uniform(n, nn, cfg.rho0)?;
    let mut proj = cbp_precompute(prob, &state)?;
    let geom = ConstraintGeometry::identity_split(n);

    let mut it = match init {
        Some(init) => {
            check_init(init, (n, nn), (n, nn))?;
            init.clone()
        }
        None => {
            let x = proj.offset.clone();
            let zero = DenseMatrix::zeros(n, nn);
            let z = cbp_z_update(&x, &zero, prob, &proj, &state, order)?;
            let d = cbp_dual_update(&zero, &x, &z)?;
            IterateState {
                x,
                z,
                d,
                z_prev: zero,
            }
        }
    };

    let epsilon = (nn * m) as f64 * cfg.eps_tol;
    let mut primal_history = vec![it.x.sub(&it.z)?.frobenius_norm()];
    let mut dual_history =
        vec![penalty_weighted(&it.z.sub(&it.z_prev)?, &state).frobenius_norm()];
    let mut penalty_trace = Vec::new();
    let mut rejected_p_updates = 0;

    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut k = 0;
    while k < cfg.max_iter && (r_norm > epsilon || s_norm > epsilon) {
        let x = cbp_x_update(&proj, &state, &it.z, &it.d)?;
        let z = cbp_z_update(&x, &it.d, prob, &proj, &state, order)?;
        let residual = x.sub(&z)?;
        let d = it.d.add(&residual)?;
        let dz = z.sub(&it.z)?;

        r_norm = residual.frobenius_norm();
        s_norm = penalty_weighted(&dz, &state).frobenius_norm();
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
            if let Err(err) = proj.refresh(prob, &next) {
                if !err.is_singular() {
                    return Err(err);
                }
                next = next.with_p_of(&state);
                proj.refresh(prob, &next)?;
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
        objective: prob.objective(&it.z)?,
        solution: it.z.clone(),
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
