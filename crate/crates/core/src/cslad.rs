//! Constrained sparse LAD,
//! minimize `‖H - G X‖₁,₁ + ‖Λ ⊙ X‖₁,₁` subject to `X ⪰ Γ`,
//! solved by stacking the residual `R = H - G X` under `X` and handing the
//! result to the CBP solver: `Ĝ = [G I]`, `Ĉ₁ = [Λ; 1]`, `Ĉ₂ = [Γ; -inf]`.

use crate::cbp::{solve_cbp, ProblemCbp};
use crate::dense::DenseMatrix;
use crate::error::{check_shape, Error, Result};
use crate::solver::{SolveReport, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemCslad {
    g: DenseMatrix,
    h: DenseMatrix,
    lambda: DenseMatrix,
    gamma: DenseMatrix,
}

impl ProblemCslad {
    pub fn new(
        g: DenseMatrix,
        h: DenseMatrix,
        lambda: DenseMatrix,
        gamma: DenseMatrix,
    ) -> Result<Self> {
        let (m, n) = g.shape();
        let nn = h.cols();
        if m == 0 || n == 0 || nn == 0 {
            return Err(Error::InvalidProblem(format!(
                "CSLAD needs nonempty G and H, got G {m}x{n} and H {}x{nn}",
                h.rows()
            )));
        }
        check_shape("CSLAD H", (m, nn), h.shape())?;
        check_shape("CSLAD Lambda", (n, nn), lambda.shape())?;
        check_shape("CSLAD Gamma", (n, nn), gamma.shape())?;
        // Remaining value checks are shared with CBP.
        let prob = Self { g, h, lambda, gamma };
        cslad_to_cbp(&prob)?;
        Ok(prob)
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.g
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn lambda(&self) -> &DenseMatrix {
        &self.lambda
    }

    pub fn gamma(&self) -> &DenseMatrix {
        &self.gamma
    }

    /// `(m, n, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.g.rows(), self.g.cols(), self.h.cols())
    }

    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        let fit = self.h.sub(&self.g.matmul(x)?)?.abs_sum();
        let sparsity = self
            .lambda
            .zip_with("CSLAD objective", x, |w, v| w * v)?
            .abs_sum();
        Ok(fit + sparsity)
    }
}

pub fn cslad_to_cbp(prob: &ProblemCslad) -> Result<ProblemCbp> {
    let (m, _, nn) = prob.dims();
    let g_hat = prob.g.hstack(&DenseMatrix::identity(m))?;
    let c1_hat = prob.lambda.vstack(&DenseMatrix::filled(m, nn, 1.0))?;
    let c2_hat = prob
        .gamma
        .vstack(&DenseMatrix::filled(m, nn, f64::NEG_INFINITY))?;
    ProblemCbp::new(g_hat, prob.h.clone(), c1_hat, c2_hat)
}

/// Runs the CBP solver on the stacked problem. The report's solution is the
/// top `n` rows of the stacked iterate and `residual_block` the bottom `m`.
pub fn solve_cslad(prob: &ProblemCslad, cfg: &SolverConfig) -> Result<SolveReport> {
    let (m, n, _) = prob.dims();
    let cbp = cslad_to_cbp(prob)?;
    let mut report = solve_cbp(&cbp, cfg, None)?;
    let x = report.solution.row_block(0, n);
    let r = report.solution.row_block(n, n + m);
    report.objective = r.abs_sum()
        + prob
            .lambda
            .zip_with("CSLAD objective", &x, |w, v| w * v)?
            .abs_sum();
    report.solution = x;
    report.residual_block = Some(r);
    Ok(report)
}
