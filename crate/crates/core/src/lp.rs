//! Dense two-phase tableau simplex (Bland's rule) and LP reformulations of
//! the LAD, CBP and CSLAD problems, used as an exact reference for the
//! ADMM solvers.
//!
//! Sizes are meant to stay tiny (a few dozen variables); nothing here is
//! tuned for speed.

use crate::cbp::ProblemCbp;
use crate::cslad::{cslad_to_cbp, ProblemCslad};
use crate::dense::DenseMatrix;
use crate::error::{check_shape, Error, Result};
use crate::lad::ProblemLad;

/// Largest per-column LP (in variables) the CLI will hand to the oracle.
pub const ORACLE_MAX_VARIABLES: usize = 60;

const PIVOT_TOL: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

/// `minimize cᵀx + offset` subject to `A x = b`, `x ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    pub c: Vec<f64>,
    pub a_eq: DenseMatrix,
    pub b_eq: Vec<f64>,
    pub offset: f64,
}

impl StandardLp {
    pub fn new(c: Vec<f64>, a_eq: DenseMatrix, b_eq: Vec<f64>) -> Result<Self> {
        check_shape("StandardLp", (b_eq.len(), c.len()), a_eq.shape())?;
        if !a_eq.is_finite() || c.iter().chain(&b_eq).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("LP data must be finite".into()));
        }
        Ok(Self {
            c,
            a_eq,
            b_eq,
            offset: 0.0,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b_eq.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is `Optimal`.
    pub x: Vec<f64>,
    /// Includes the LP offset. `NaN` unless `status` is `Optimal`.
    pub objective: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
        }
    }
}

struct Tableau {
    // rows x (cols + 1); last entry of each row is the right-hand side
    rows: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        *self.rows[i].last().unwrap()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Bland's rule over columns `0..allowed`.
    fn run(&mut self, allowed: usize) -> Result<Step> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::InvalidProblem(
                    "simplex exceeded its pivot budget".into(),
                ));
            }
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -PIVOT_TOL) else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(Step::Unbounded),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Solves `B y = b` by Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for j in c..n {
                    a[r][j] -= f * a[c][j];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

pub fn simplex_solve(lp: &StandardLp) -> Result<LpSolution> {
    check_shape("simplex_solve", (lp.num_rows(), lp.num_vars()), lp.a_eq.shape())?;
    let (k, q) = (lp.num_rows(), lp.num_vars());

    // Phase I: artificial identity on rows with b >= 0.
    let mut rows = Vec::with_capacity(k);
    for i in 0..k {
        let sign = if lp.b_eq[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; q + k + 1];
        for j in 0..q {
            row[j] = sign * lp.a_eq[(i, j)];
        }
        row[q + i] = 1.0;
        row[q + k] = sign * lp.b_eq[i];
        rows.push(row);
    }
    let mut cost = vec![0.0; q + k + 1];
    for row in &rows {
        for j in 0..q {
            cost[j] -= row[j];
        }
        cost[q + k] -= row[q + k];
    }
    let mut t = Tableau {
        rows,
        cost,
        basis: (q..q + k).collect(),
        pivots: 0,
    };
    t.run(q + k)?;
    let b_scale = lp.b_eq.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let infeasibility = -t.cost[q + k];
    if infeasibility > PHASE_ONE_TOL * b_scale {
        return Ok(LpSolution::without_point(LpStatus::Infeasible));
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and dropped.
    let mut keep = vec![true; k];
    for i in 0..k {
        if t.basis[i] >= q {
            let col = (0..q).find(|&j| t.rows[i][j].abs() > 1e-9);
            match col {
                Some(j) => t.pivot(i, j),
                None => keep[i] = false,
            }
        }
    }
    let kept: Vec<usize> = (0..k).filter(|&i| keep[i]).collect();
    t.rows = kept.iter().map(|&i| t.rows[i].clone()).collect();
    t.basis = kept.iter().map(|&i| t.basis[i]).collect();

    // Phase II reduced costs.
    let mut cost = vec![0.0; q + k + 1];
    cost[..q].copy_from_slice(&lp.c);
    for (i, &bv) in t.basis.iter().enumerate() {
        let cb = lp.c[bv];
        if cb != 0.0 {
            for (v, a) in cost.iter_mut().zip(&t.rows[i]) {
                *v -= cb * a;
            }
        }
    }
    t.cost = cost;
    if let Step::Unbounded = t.run(q)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    // Re-solve the final basis against the original data for accuracy.
    let mut x = vec![0.0; q];
    let basis_matrix: Vec<Vec<f64>> = kept
        .iter()
        .map(|&i| t.basis.iter().map(|&j| lp.a_eq[(i, j)]).collect())
        .collect();
    let rhs: Vec<f64> = kept.iter().map(|&i| lp.b_eq[i]).collect();
    match dense_solve(basis_matrix, rhs) {
        Some(xb) => {
            for (&j, v) in t.basis.iter().zip(xb) {
                x[j] = v;
            }
        }
        None => {
            for (i, &j) in t.basis.iter().enumerate() {
                x[j] = t.rhs(i);
            }
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + lp.offset;
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

/// How an original variable is recovered from LP variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarMap {
    /// `x = y[col] + shift`.
    Shifted { col: usize, shift: f64 },
    /// `x = y[pos] - y[neg]`.
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpReduction {
    pub lp: StandardLp,
    pub map: Vec<VarMap>,
}

impl LpReduction {
    pub fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|m| match *m {
                VarMap::Shifted { col, shift } => y[col] + shift,
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

/// `min ‖h - Ax‖₁` as `A x⁺ - A x⁻ + u - v = h` minimizing `Σu + Σv`.
pub fn lad_as_lp(a: &DenseMatrix, h: &[f64]) -> Result<LpReduction> {
    let (m, n) = a.shape();
    check_shape("lad_as_lp", (m, 1), (h.len(), 1))?;
    let q = 2 * n + 2 * m;
    let mut a_eq = DenseMatrix::zeros(m, q);
    for i in 0..m {
        for j in 0..n {
            a_eq[(i, j)] = a[(i, j)];
            a_eq[(i, n + j)] = -a[(i, j)];
        }
        a_eq[(i, 2 * n + i)] = 1.0;
        a_eq[(i, 2 * n + m + i)] = -1.0;
    }
    let mut c = vec![0.0; q];
    c[2 * n..].iter_mut().for_each(|v| *v = 1.0);
    let map = (0..n).map(|j| VarMap::Split { pos: j, neg: n + j }).collect();
    Ok(LpReduction {
        lp: StandardLp::new(c, a_eq, h.to_vec())?,
        map,
    })
}

/// Single-column CBP as a standard-form LP. Variables with a nonnegative
/// bound are shifted onto the bound; the rest are split into a difference of
/// nonnegative parts, with an extra row capping the negative part when the
/// bound is finite.
pub fn cbp_as_lp(g: &DenseMatrix, h: &[f64], c1: &[f64], c2: &[f64]) -> Result<LpReduction> {
    let (m, n) = g.shape();
    check_shape("cbp_as_lp h", (m, 1), (h.len(), 1))?;
    check_shape("cbp_as_lp c1", (n, 1), (c1.len(), 1))?;
    check_shape("cbp_as_lp c2", (n, 1), (c2.len(), 1))?;

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut cost = Vec::new();
    let mut map = Vec::with_capacity(n);
    let mut rhs = h.to_vec();
    let mut offset = 0.0;
    // (negative-part column, cap) for finite negative bounds
    let mut caps: Vec<(usize, f64)> = Vec::new();

    for l in 0..n {
        let gcol = g.col(l);
        let bound = c2[l];
        if bound.is_finite() && bound >= 0.0 {
            columns.push(gcol.to_vec());
            cost.push(c1[l]);
            map.push(VarMap::Shifted {
                col: columns.len() - 1,
                shift: bound,
            });
            offset += c1[l] * bound;
            for (r, gv) in rhs.iter_mut().zip(gcol) {
                *r -= gv * bound;
            }
        } else {
            columns.push(gcol.to_vec());
            cost.push(c1[l]);
            let pos = columns.len() - 1;
            columns.push(gcol.iter().map(|v| -v).collect());
            cost.push(c1[l]);
            let neg = columns.len() - 1;
            map.push(VarMap::Split { pos, neg });
            if bound.is_finite() {
                caps.push((neg, -bound));
            }
        }
    }
    let first_slack = columns.len();
    let q = first_slack + caps.len();
    let k = m + caps.len();
    let mut a_eq = DenseMatrix::zeros(k, q);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            a_eq[(i, j)] = v;
        }
    }
    for (r, &(neg, cap)) in caps.iter().enumerate() {
        a_eq[(m + r, neg)] = 1.0;
        a_eq[(m + r, first_slack + r)] = 1.0;
        rhs.push(cap);
    }
    cost.resize(q, 0.0);
    let mut lp = StandardLp::new(cost, a_eq, rhs)?;
    lp.offset = offset;
    Ok(LpReduction { lp, map })
}

/// Column-by-column oracle result for a batch problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub status: LpStatus,
    /// Mapped back to the original variables, one column per problem column.
    pub solution: Option<DenseMatrix>,
    /// Sum of the per-column optima.
    pub objective: f64,
}

fn solve_columns(
    columns: usize,
    rows: usize,
    reduce: impl Fn(usize) -> Result<LpReduction>,
) -> Result<OracleSolution> {
    let mut sol = DenseMatrix::zeros(rows, columns);
    let mut objective = 0.0;
    for i in 0..columns {
        let red = reduce(i)?;
        let lp_sol = simplex_solve(&red.lp)?;
        if lp_sol.status != LpStatus::Optimal {
            return Ok(OracleSolution {
                status: lp_sol.status,
                solution: None,
                objective: f64::NAN,
            });
        }
        sol.col_mut(i).copy_from_slice(&red.recover(&lp_sol.x));
        objective += lp_sol.objective;
    }
    Ok(OracleSolution {
        status: LpStatus::Optimal,
        solution: Some(sol),
        objective,
    })
}

pub fn lad_oracle(prob: &ProblemLad) -> Result<OracleSolution> {
    let (_, n, nn) = prob.dims();
    solve_columns(nn, n, |i| lad_as_lp(prob.a(), prob.h().col(i)))
}

pub fn cbp_oracle(prob: &ProblemCbp) -> Result<OracleSolution> {
    let (_, n, nn) = prob.dims();
    solve_columns(nn, n, |i| {
        cbp_as_lp(prob.g(), prob.h().col(i), prob.c1().col(i), prob.c2().col(i))
    })
}

/// Oracle for CSLAD through the stacked CBP form. The solution holds the
/// stacked `[X; R]`.
pub fn cslad_oracle(prob: &ProblemCslad) -> Result<OracleSolution> {
    cbp_oracle(&cslad_to_cbp(prob)?)
}
