#![allow(dead_code)]

use l1admm::{DenseMatrix, ProblemCbp, ProblemCslad, ProblemLad};
use rand::Rng;

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo.log10()..hi.log10()))
}

/// Tall dense LAD instance; `m` is drawn at least `n` so `A` has full column rank.
pub fn random_lad(rng: &mut impl Rng, m: (usize, usize), n: (usize, usize), nn: (usize, usize)) -> ProblemLad {
    let n = rng.gen_range(n.0..=n.1);
    let m = rng.gen_range(m.0.max(n)..=m.1);
    let nn = rng.gen_range(nn.0..=nn.1);
    ProblemLad::new(uniform(rng, m, n), uniform(rng, m, nn)).unwrap()
}

/// Nonnegative CBP instance with `C1` uniform in `[0, 1)`. Might be infeasible.
pub fn random_cbp(rng: &mut impl Rng, m: (usize, usize), n: (usize, usize), nn: (usize, usize)) -> ProblemCbp {
    let n = rng.gen_range(n.0..=n.1);
    let m = rng.gen_range(m.0..=m.1.min(n));
    let nn = rng.gen_range(nn.0..=nn.1);
    let c1 = DenseMatrix::from_fn(n, nn, |_, _| rng.gen_range(0.0..1.0));
    ProblemCbp::new(uniform(rng, m, n), uniform(rng, m, nn), c1, DenseMatrix::zeros(n, nn)).unwrap()
}

/// CSLAD instance mixing unbounded, nonnegative and negative-bounded variables.
pub fn random_cslad(rng: &mut impl Rng) -> ProblemCslad {
    let m = rng.gen_range(2..=8);
    let n = rng.gen_range(1..=5);
    let nn = rng.gen_range(1..=3);
    let lambda = DenseMatrix::from_fn(n, nn, |_, _| rng.gen_range(0.0..1.0));
    let gamma = DenseMatrix::from_fn(n, nn, |_, _| match rng.gen_range(0..3) {
        0 => f64::NEG_INFINITY,
        1 => 0.0,
        _ => rng.gen_range(-1.0..0.0),
    });
    ProblemCslad::new(uniform(rng, m, n), uniform(rng, m, nn), lambda, gamma).unwrap()
}

pub fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / (1.0 + reference.abs())
}

pub fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2] as f64
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2]) as f64
    }
}
