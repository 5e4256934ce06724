//! Configuration, iterate state and reports shared by the LAD and CBP drivers.

use crate::cbp::ProxOrder;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::penalty::{BalanceConfig, PenaltyState};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Per-entry tolerance; the stopping threshold is this scaled by the problem size.
    pub eps_tol: f64,
    pub max_iter: usize,
    /// `None` runs with fixed penalties.
    pub balance: Option<BalanceConfig>,
    /// Balancing stops once this many iterations have run. Defaults to `max_iter / 2`.
    pub freeze_after: Option<usize>,
    /// Initial value of every per-column ρ.
    pub rho0: f64,
    /// Keep the unscaled multipliers fixed across a penalty change by rescaling `D`.
    pub rescale_multipliers: bool,
    /// CBP only: how the z-update combines the shrinkage and the lower bound.
    pub prox_order: ProxOrder,
    /// After each balancing step, move the common scale of `P` into `ρ`
    /// (geometric mean of `diag(P)` = 1). The balancing rule only sees the
    /// products `ρ_i P_l`, so this just keeps both factors away from the clamps.
    pub normalize_scale: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_tol: 1e-8,
            max_iter: 20_000,
            balance: Some(BalanceConfig::default()),
            freeze_after: None,
            rho0: 1.0,
            rescale_multipliers: true,
            prox_order: ProxOrder::Exact,
            normalize_scale: true,
        }
    }
}

impl SolverConfig {
    pub fn fixed_penalty() -> Self {
        Self {
            balance: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_tol >= 0.0) || !self.eps_tol.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eps_tol must be finite and nonnegative, got {}",
                self.eps_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "rho0 must be finite and positive, got {}",
                self.rho0
            )));
        }
        if let Some(b) = &self.balance {
            b.validate()?;
        }
        Ok(())
    }

    pub(crate) fn balances_at(&self, k: usize) -> Option<&BalanceConfig> {
        let cfg = self.balance.as_ref()?;
        let freeze = self.freeze_after.unwrap_or(self.max_iter / 2);
        if k >= freeze {
            return None;
        }
        (k.is_multiple_of(cfg.cadence) || k == 1).then_some(cfg)
    }
}

/// Current iterate: primal `x`, split variable `z`, scaled multipliers `d`,
/// and the previous `z` for the dual residual.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: DenseMatrix,
    pub z: DenseMatrix,
    pub d: DenseMatrix,
    pub z_prev: DenseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Penalty values right after a balancing step that changed something.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySnapshot {
    pub iteration: usize,
    pub rho: Vec<f64>,
    pub p_diag: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: DenseMatrix,
    /// Residual block `H - G X` for CSLAD, absent for the other problems.
    pub residual_block: Option<DenseMatrix>,
    pub objective: f64,
    pub iterations: usize,
    /// `primal_history[0]` is measured at the initial iterate.
    pub primal_history: Vec<f64>,
    pub dual_history: Vec<f64>,
    pub penalty_trace: Vec<PenaltySnapshot>,
    /// Balancing steps whose `P` update was discarded because the weighted
    /// system became numerically singular.
    pub rejected_p_updates: usize,
    pub penalty: PenaltyState,
    pub termination: Termination,
    pub epsilon: f64,
    pub state: IterateState,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Rescales `d` so that the unscaled multiplier `ρ_i P_l d_li` is unchanged
/// when moving from `old` to `new` penalties.
pub(crate) fn rescale_multipliers(d: &mut DenseMatrix, old: &PenaltyState, new: &PenaltyState) {
    for i in 0..d.cols() {
        let col_ratio = old.rho()[i] / new.rho()[i];
        for (l, v) in d.col_mut(i).iter_mut().enumerate() {
            *v *= col_ratio * (old.p_diag()[l] / new.p_diag()[l]);
        }
    }
}

/// `(diag(P) ρᵀ) ⊙ M`.
pub(crate) fn penalty_weighted(m: &DenseMatrix, penalty: &PenaltyState) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |l, i| {
        penalty.p_diag()[l] * penalty.rho()[i] * m[(l, i)]
    })
}

pub(crate) fn check_init(
    init: &IterateState,
    x_shape: (usize, usize),
    z_shape: (usize, usize),
) -> Result<()> {
    use crate::error::check_shape;
    check_shape("initial x", x_shape, init.x.shape())?;
    check_shape("initial z", z_shape, init.z.shape())?;
    check_shape("initial d", z_shape, init.d.shape())?;
    check_shape("initial z_prev", z_shape, init.z_prev.shape())?;
    if !(init.x.is_finite() && init.z.is_finite() && init.d.is_finite() && init.z_prev.is_finite())
    {
        return Err(Error::InvalidProblem(
            "initial iterate contains non-finite entries".into(),
        ));
    }
    Ok(())
}
