//! Diagonal penalty `P` with per-column scalars `ρ`, and the two-stage
//! residual-balancing update for it.
//!
//! For a constraint `A x + B z = c` with primal residual matrix `R` and a
//! change `ΔZ` in the split variable, each `ρ_i` is compared against the
//! column norm of `R` and each `P_l` against the row norm of `R`. The dual
//! magnitudes attributed to `ρ_i` and `P_l` are
//!
//! ```text
//! s_ρ[i] = ρ_i · sqrt( Σ_l P_l² (|bˡ|²·|Δz_i|²) (|aˡ|²·1) )
//! s_P[l] = P_l · sqrt( (|bˡ|²·Σ_i ρ_i²|Δz_i|²) (|aˡ|²·1) )
//! ```
//!
//! where `|·|²` squares entrywise. `ρ` is updated first and the new values
//! feed into `s_P`.

use crate::dense::DenseMatrix;
use crate::error::{check_shape, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyState {
    p_diag: Vec<f64>,
    rho: Vec<f64>,
    version: u64,
    p_version: u64,
    rho_version: u64,
}

impl PenaltyState {
    pub fn new(p_diag: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if p_diag.is_empty() || rho.is_empty() {
            return Err(Error::InvalidProblem(
                "penalty state needs at least one row and one column".into(),
            ));
        }
        if let Some(v) = p_diag
            .iter()
            .chain(&rho)
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidProblem(format!(
                "penalty entries must be finite and positive, found {v}"
            )));
        }
        Ok(Self {
            p_diag,
            rho,
            version: 0,
            p_version: 0,
            rho_version: 0,
        })
    }

    /// `P = I` and every `ρ_i = rho0`.
    pub fn uniform(p: usize, columns: usize, rho0: f64) -> Result<Self> {
        Self::new(vec![1.0; p], vec![rho0; columns])
    }

    pub fn p_diag(&self) -> &[f64] {
        &self.p_diag
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Incremented whenever any entry changes.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Incremented whenever `diag(P)` changes.
    pub fn p_version(&self) -> u64 {
        self.p_version
    }

    /// Incremented whenever `ρ` changes.
    pub fn rho_version(&self) -> u64 {
        self.rho_version
    }

    /// Moves the common scale of `P` into `ρ` so that the geometric mean of
    /// `diag(P)` is 1. Every product `ρ_i P_l` is unchanged unless a clamp binds.
    pub(crate) fn normalized(&self, clamp_lo: f64, clamp_hi: f64) -> PenaltyState {
        let log_mean = self.p_diag.iter().map(|p| p.ln()).sum::<f64>() / self.p_diag.len() as f64;
        let c = log_mean.exp();
        if c == 1.0 {
            return self.clone();
        }
        let mut next = self.clone();
        next.p_diag = self.p_diag.iter().map(|p| (p / c).clamp(clamp_lo, clamp_hi)).collect();
        next.rho = self.rho.iter().map(|r| (r * c).clamp(clamp_lo, clamp_hi)).collect();
        if next.p_diag != self.p_diag {
            next.p_version += 1;
        }
        if next.rho != self.rho {
            next.rho_version += 1;
        }
        if next.p_diag != self.p_diag || next.rho != self.rho {
            next.version += 1;
        }
        next
    }

    /// This state's `ρ` with `prev`'s `P`, for a balancing step whose `P`
    /// update has to be discarded.
    pub(crate) fn with_p_of(&self, prev: &PenaltyState) -> PenaltyState {
        let rho_changed = self.rho_version != prev.rho_version;
        PenaltyState {
            p_diag: prev.p_diag.clone(),
            rho: self.rho.clone(),
            version: prev.version + u64::from(rho_changed),
            p_version: prev.p_version,
            rho_version: self.rho_version,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceConfig {
    pub tau: f64,
    pub mu: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    /// Balance every `cadence` iterations (and once at iteration 1).
    pub cadence: usize,
    /// Residual pairs with both members at or below this are left alone.
    pub dead_zone: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            tau: 10.0,
            mu: 2.0,
            clamp_lo: 1e-6,
            clamp_hi: 1e6,
            cadence: 10,
            dead_zone: 1e-12,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return fail(format!("tau must be finite and > 1, got {}", self.tau));
        }
        if !(self.mu > 1.0) {
            return fail(format!("mu must be > 1, got {}", self.mu));
        }
        if !(self.clamp_lo > 0.0 && self.clamp_lo <= 1.0 && self.clamp_hi >= 1.0)
            || !self.clamp_hi.is_finite()
        {
            return fail(format!(
                "clamps must satisfy 0 < lo <= 1 <= hi < inf, got [{}, {}]",
                self.clamp_lo, self.clamp_hi
            ));
        }
        if self.cadence == 0 {
            return fail("cadence must be at least 1".into());
        }
        if !(self.dead_zone >= 0.0) {
            return fail(format!("dead_zone must be >= 0, got {}", self.dead_zone));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BStructure {
    /// `B = -I`, so `p` equals the dimension of `z`.
    NegIdentity,
    /// Entrywise squares of `B` (p x dim z).
    GeneralRows(DenseMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGeometry {
    /// `row_weight_a[l]` is the sum of squares of row `l` of `A`.
    pub row_weight_a: Vec<f64>,
    pub b_structure: BStructure,
}

impl ConstraintGeometry {
    /// `A x - z = h`: row weights from `A`, `B = -I`.
    pub fn lad(a: &DenseMatrix) -> Self {
        let row_weight_a = (0..a.rows())
            .map(|l| a.row(l).iter().map(|v| v * v).sum())
            .collect();
        Self {
            row_weight_a,
            b_structure: BStructure::NegIdentity,
        }
    }

    /// `x - z = 0`: `A = I`, `B = -I`.
    pub fn identity_split(n: usize) -> Self {
        Self {
            row_weight_a: vec![1.0; n],
            b_structure: BStructure::NegIdentity,
        }
    }

    pub fn general(a: &DenseMatrix, b: &DenseMatrix) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::Dimension {
                context: "ConstraintGeometry::general",
                expected: format!("B with {} rows", a.rows()),
                found: format!("{}x{}", b.rows(), b.cols()),
            });
        }
        let mut geom = Self::lad(a);
        geom.b_structure = BStructure::GeneralRows(b.map(|v| v * v));
        Ok(geom)
    }

    pub fn p(&self) -> usize {
        self.row_weight_a.len()
    }

    fn z_dim(&self) -> usize {
        match &self.b_structure {
            BStructure::NegIdentity => self.p(),
            BStructure::GeneralRows(b2) => b2.cols(),
        }
    }

    /// `q[l,i] = |bˡ|²·|Δz_i|²`.
    fn projected_dz2(&self, dz: &DenseMatrix) -> Result<DenseMatrix> {
        let dz2 = dz.map(|v| v * v);
        match &self.b_structure {
            BStructure::NegIdentity => Ok(dz2),
            BStructure::GeneralRows(b2) => b2.matmul(&dz2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMagnitudes {
    pub r_rho: Vec<f64>,
    pub s_rho: Vec<f64>,
    pub r_p: Vec<f64>,
    pub s_p: Vec<f64>,
}

fn check_dims(
    r: &DenseMatrix,
    dz: &DenseMatrix,
    geom: &ConstraintGeometry,
    state: &PenaltyState,
) -> Result<()> {
    let p = geom.p();
    let n_cols = state.rho.len();
    check_shape("penalty rows", (p, 1), (state.p_diag.len(), 1))?;
    check_shape("primal residual", (p, n_cols), r.shape())?;
    check_shape("z change", (geom.z_dim(), n_cols), dz.shape())?;
    Ok(())
}

fn s_rho(q: &DenseMatrix, geom: &ConstraintGeometry, p_diag: &[f64], rho: &[f64]) -> Vec<f64> {
    (0..q.cols())
        .map(|i| {
            let sum: f64 = q
                .col(i)
                .iter()
                .enumerate()
                .map(|(l, &ql)| p_diag[l] * p_diag[l] * ql * geom.row_weight_a[l])
                .sum();
            rho[i] * sum.sqrt()
        })
        .collect()
}

fn s_p(q: &DenseMatrix, geom: &ConstraintGeometry, p_diag: &[f64], rho: &[f64]) -> Vec<f64> {
    (0..q.rows())
        .map(|l| {
            let sum: f64 = (0..q.cols()).map(|i| rho[i] * rho[i] * q[(l, i)]).sum();
            p_diag[l] * (sum * geom.row_weight_a[l]).sqrt()
        })
        .collect()
}

/// Primal and dual magnitudes attributed to each `ρ_i` and `P_l`, all
/// evaluated at the current penalty state.
pub fn residual_magnitudes(
    r: &DenseMatrix,
    dz: &DenseMatrix,
    geom: &ConstraintGeometry,
    state: &PenaltyState,
) -> Result<ResidualMagnitudes> {
    check_dims(r, dz, geom, state)?;
    let q = geom.projected_dz2(dz)?;
    let r_rho = (0..r.cols())
        .map(|i| r.col(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let r_p = (0..r.rows())
        .map(|l| r.row(l).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Ok(ResidualMagnitudes {
        r_rho,
        s_rho: s_rho(&q, geom, &state.p_diag, &state.rho),
        r_p,
        s_p: s_p(&q, geom, &state.p_diag, &state.rho),
    })
}

/// Scales `value` up by `τ` when the primal magnitude dominates, down by `τ`
/// when the dual one does, and clamps the result.
pub fn apply_balance_rule(value: f64, r: f64, s: f64, cfg: &BalanceConfig) -> f64 {
    let next = if r <= cfg.dead_zone && s <= cfg.dead_zone {
        value
    } else if r >= cfg.mu * s {
        cfg.tau * value
    } else if s >= cfg.mu * r {
        value / cfg.tau
    } else {
        value
    };
    next.clamp(cfg.clamp_lo, cfg.clamp_hi)
}

/// One full balancing step: every `ρ_i` first, then every `P_l` using the
/// updated `ρ`.
pub fn balance_all(
    state: &PenaltyState,
    r: &DenseMatrix,
    dz: &DenseMatrix,
    geom: &ConstraintGeometry,
    cfg: &BalanceConfig,
) -> Result<PenaltyState> {
    let mags = residual_magnitudes(r, dz, geom, state)?;
    let q = geom.projected_dz2(dz)?;

    let rho: Vec<f64> = state
        .rho
        .iter()
        .zip(mags.r_rho.iter().zip(&mags.s_rho))
        .map(|(&v, (&r, &s))| apply_balance_rule(v, r, s, cfg))
        .collect();
    let s_p_new = s_p(&q, geom, &state.p_diag, &rho);
    let p_diag: Vec<f64> = state
        .p_diag
        .iter()
        .zip(mags.r_p.iter().zip(&s_p_new))
        .map(|(&v, (&r, &s))| apply_balance_rule(v, r, s, cfg))
        .collect();

    let rho_changed = rho != state.rho;
    let p_changed = p_diag != state.p_diag;
    let mut next = state.clone();
    if rho_changed {
        next.rho = rho;
        next.rho_version += 1;
    }
    if p_changed {
        next.p_diag = p_diag;
        next.p_version += 1;
    }
    if rho_changed || p_changed {
        next.version += 1;
    }
    Ok(next)
}
