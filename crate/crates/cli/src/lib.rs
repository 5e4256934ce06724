//! Command-line front end: reads CSV matrices, runs one batch solve and
//! writes `<out>.csv` plus a JSON convergence report `<out>.report.json`.

pub mod matrix_io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use l1admm::lp::ORACLE_MAX_VARIABLES;
use l1admm::{
    cbp_as_lp, cbp_oracle, cslad_oracle, cslad_to_cbp, lad_as_lp, lad_oracle, solve_cbp,
    solve_cslad, solve_lad, BalanceConfig, DenseMatrix, LpStatus, OracleSolution, ProblemCbp,
    ProblemCslad, ProblemLad, SolveReport, SolverConfig,
};
use serde::{Deserialize, Serialize};

pub use matrix_io::{format_matrix, parse_matrix, read_matrix, write_matrix, MatrixReadError};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "l1admm", version, about = "Batch ADMM solvers for LAD, constrained basis pursuit and constrained sparse LAD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// min ‖H - A X‖₁
    Lad {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[command(flatten)]
        run: RunConfig,
    },
    /// min ‖C1 ⊙ X‖₁ subject to G X = H, X ⪰ C2
    Cbp {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        /// Weights, n x N or n x 1 (default: all ones).
        #[arg(long)]
        c1: Option<PathBuf>,
        /// Lower bounds, n x N or n x 1; `-inf` allowed (default: unbounded).
        #[arg(long)]
        c2: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
    /// min ‖H - G X‖₁ + ‖Λ ⊙ X‖₁ subject to X ⪰ Γ
    Cslad {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        /// Sparsity weights, n x N or n x 1 (default: zero).
        #[arg(long)]
        lambda: Option<PathBuf>,
        /// Lower bounds, n x N or n x 1; `-inf` allowed (default: unbounded).
        #[arg(long)]
        gamma: Option<PathBuf>,
        #[command(flatten)]
        run: RunConfig,
    },
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Output prefix; writes <out>.csv and <out>.report.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 2.0)]
    pub mu: f64,
    /// Balance every this many iterations (and once at the second iteration).
    #[arg(long, default_value_t = 10)]
    pub cadence: usize,
    /// Keep P = I and ρ = ρ₀ throughout.
    #[arg(long)]
    pub no_balance: bool,
    #[arg(long, default_value_t = 1.0)]
    pub rho0: f64,
    /// Also solve with the exact LP oracle and record its objective.
    #[arg(long)]
    pub verify: bool,
}

impl RunConfig {
    pub fn solver_config(&self) -> anyhow::Result<SolverConfig> {
        if !(self.tau > 1.0) {
            bail!("--tau must be greater than 1, got {}", self.tau);
        }
        if !(self.mu > 1.0) {
            bail!("--mu must be greater than 1, got {}", self.mu);
        }
        if !(self.eps_tol > 0.0 && self.eps_tol.is_finite()) {
            bail!("--eps-tol must be positive, got {}", self.eps_tol);
        }
        if self.max_iter == 0 {
            bail!("--max-iter must be at least 1");
        }
        let balance = (!self.no_balance).then(|| BalanceConfig {
            tau: self.tau,
            mu: self.mu,
            cadence: self.cadence,
            ..BalanceConfig::default()
        });
        let cfg = SolverConfig {
            eps_tol: self.eps_tol,
            max_iter: self.max_iter,
            balance,
            rho0: self.rho0,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Contents of `<out>.report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub iterations: usize,
    pub converged: bool,
    pub primal_history: Vec<f64>,
    pub dual_history: Vec<f64>,
    pub rho_final: Vec<f64>,
    pub p_final: Vec<f64>,
    pub objective: f64,
    pub oracle_objective: Option<f64>,
}

impl Report {
    fn new(rep: &SolveReport, oracle_objective: Option<f64>) -> Self {
        Self {
            iterations: rep.iterations,
            converged: rep.converged(),
            primal_history: rep.primal_history.clone(),
            dual_history: rep.dual_history.clone(),
            rho_final: rep.penalty.rho().to_vec(),
            p_final: rep.penalty.p_diag().to_vec(),
            objective: rep.objective,
            oracle_objective,
        }
    }
}

fn load(path: &Path, allow_inf: bool) -> anyhow::Result<DenseMatrix> {
    read_matrix(path, allow_inf).with_context(|| format!("reading {}", path.display()))
}

fn shape(m: &DenseMatrix) -> String {
    format!("{}x{}", m.rows(), m.cols())
}

fn check_rows(what: &str, path: &Path, m: &DenseMatrix, other: &str, other_path: &Path, o: &DenseMatrix) -> anyhow::Result<()> {
    if m.rows() != o.rows() {
        bail!(
            "{what} ({}) is {} but {other} ({}) is {}: row counts must match",
            path.display(),
            shape(m),
            other_path.display(),
            shape(o)
        );
    }
    Ok(())
}

/// Loads a per-variable parameter, n x N or a broadcast n x 1 column.
fn load_param(
    what: &str,
    path: Option<&Path>,
    default: f64,
    (n, nn): (usize, usize),
    allow_inf: bool,
) -> anyhow::Result<DenseMatrix> {
    let Some(path) = path else {
        return Ok(DenseMatrix::filled(n, nn, default));
    };
    let m = load(path, allow_inf)?;
    match m.shape() {
        s if s == (n, nn) => Ok(m),
        (r, 1) if r == n => Ok(DenseMatrix::from_fn(n, nn, |l, _| m[(l, 0)])),
        _ => bail!(
            "{what} ({}) is {} but the problem needs {n}x{nn} or {n}x1",
            path.display(),
            shape(&m)
        ),
    }
}

fn check_oracle_size(vars: impl Iterator<Item = anyhow::Result<usize>>) -> anyhow::Result<()> {
    for q in vars {
        let q = q?;
        if q > ORACLE_MAX_VARIABLES {
            bail!(
                "--verify supports at most {ORACLE_MAX_VARIABLES} LP variables per column, this problem needs {q}"
            );
        }
    }
    Ok(())
}

fn oracle_value(sol: OracleSolution) -> Option<f64> {
    if sol.status == LpStatus::Optimal {
        Some(sol.objective)
    } else {
        eprintln!("warning: LP oracle reports the problem {:?}", sol.status);
        None
    }
}

fn dispatch(cmd: &Command) -> anyhow::Result<(SolveReport, Option<f64>, &RunConfig)> {
    match cmd {
        Command::Lad { a, h, run } => {
            let cfg = run.solver_config()?;
            let am = load(a, false)?;
            let hm = load(h, false)?;
            check_rows("H", h, &hm, "A", a, &am)?;
            let prob = ProblemLad::new(am, hm)?;
            let oracle = if run.verify {
                let nn = prob.dims().2;
                check_oracle_size(
                    (0..nn).map(|i| Ok(lad_as_lp(prob.a(), prob.h().col(i))?.lp.num_vars())),
                )?;
                oracle_value(lad_oracle(&prob)?)
            } else {
                None
            };
            Ok((solve_lad(&prob, &cfg, None)?, oracle, run))
        }
        Command::Cbp { g, h, c1, c2, run } => {
            let cfg = run.solver_config()?;
            let gm = load(g, false)?;
            let hm = load(h, false)?;
            check_rows("H", h, &hm, "G", g, &gm)?;
            let dims = (gm.cols(), hm.cols());
            let c1m = load_param("C1", c1.as_deref(), 1.0, dims, false)?;
            let c2m = load_param("C2", c2.as_deref(), f64::NEG_INFINITY, dims, true)?;
            let prob = ProblemCbp::new(gm, hm, c1m, c2m)?;
            let oracle = if run.verify {
                check_oracle_size((0..dims.1).map(|i| {
                    let p = prob.column(i);
                    Ok(cbp_as_lp(p.g(), p.h().col(0), p.c1().col(0), p.c2().col(0))?.lp.num_vars())
                }))?;
                oracle_value(cbp_oracle(&prob)?)
            } else {
                None
            };
            Ok((solve_cbp(&prob, &cfg, None)?, oracle, run))
        }
        Command::Cslad { g, h, lambda, gamma, run } => {
            let cfg = run.solver_config()?;
            let gm = load(g, false)?;
            let hm = load(h, false)?;
            check_rows("H", h, &hm, "G", g, &gm)?;
            let dims = (gm.cols(), hm.cols());
            let lm = load_param("Lambda", lambda.as_deref(), 0.0, dims, false)?;
            let gam = load_param("Gamma", gamma.as_deref(), f64::NEG_INFINITY, dims, true)?;
            let prob = ProblemCslad::new(gm, hm, lm, gam)?;
            let oracle = if run.verify {
                let cbp = cslad_to_cbp(&prob)?;
                check_oracle_size((0..dims.1).map(|i| {
                    let p = cbp.column(i);
                    Ok(cbp_as_lp(p.g(), p.h().col(0), p.c1().col(0), p.c2().col(0))?.lp.num_vars())
                }))?;
                oracle_value(cslad_oracle(&prob)?)
            } else {
                None
            };
            Ok((solve_cslad(&prob, &cfg)?, oracle, run))
        }
    }
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn execute(cli: &Cli) -> anyhow::Result<i32> {
    let (rep, oracle, run) = dispatch(&cli.command)?;
    let csv_path = with_suffix(&run.out, ".csv");
    write_matrix(&csv_path, &rep.solution).with_context(|| format!("writing {}", csv_path.display()))?;
    let json_path = with_suffix(&run.out, ".report.json");
    let json = serde_json::to_string_pretty(&Report::new(&rep, oracle))?;
    std::fs::write(&json_path, json + "\n").with_context(|| format!("writing {}", json_path.display()))?;

    if rep.converged() {
        println!("converged after {} iterations, objective {}", rep.iterations, rep.objective);
        Ok(EXIT_CONVERGED)
    } else {
        println!(
            "stopped at the iteration limit ({}), objective {}",
            rep.iterations, rep.objective
        );
        Ok(EXIT_MAX_ITERATIONS)
    }
}

/// Runs the command line `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT_ERROR
        }
    }
}
