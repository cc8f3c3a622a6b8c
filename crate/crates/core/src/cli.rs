//! The `coopt` command line.
//!
//! Exit codes: 0 on success, 1 when a solver stops without converging,
//! 2 on bad input (unreadable files, bad flags, stability violations).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::continuous::{solve_ground, suggest_dt, Grid1D, GridField, GroundConfig, Integrator, KernelShape};
use crate::discrete::{solve_discrete_from, BoundProfile, CoopConfig, Variant};
use crate::error::{Error, Result};
use crate::oracle;
use crate::par;
use crate::problem::{self, UnaryPotential};
use crate::report::{
    compare, write_csv, DiscreteSummary, EigenSummary, EnumerationSummary, GroundSummary, PsiRow, RunReport,
    SoftSummary, WaveRow,
};
use crate::soft::{solve_soft, SoftConfig, SoftMode};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0x5eed;
/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "COOPT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "coopt",
    version,
    about = "Cooperative optimization solvers and reference oracles"
)]
pub struct Cli {
    /// Directory receiving result.json and the CSV files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Min-sum lower-bound iteration with an optimality certificate.
    SolveDiscrete(DiscreteArgs),
    /// Exponentiated soft-assignment iteration.
    SolveSoft(SoftArgs),
    /// Grid ground state of a continuous problem.
    SolveGround(GroundArgs),
    /// Reference solutions.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Differences between two result.json files.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    General,
    Pairwise,
    Alpha,
    Offset,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::General => Variant::General,
            VariantArg::Pairwise => Variant::Pairwise,
            VariantArg::Alpha => Variant::Alpha,
            VariantArg::Offset => Variant::Offset,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    /// All-zero tables; the bound certificate applies.
    Zero,
    /// Uniform random tables in `[0, --init-max]` drawn from `--seed`.
    Random,
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    #[arg(long, value_enum, default_value = "pairwise")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Strength of the alpha and offset variants [default: lambda/(n-1)].
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "zero")]
    pub init: InitArg,
    #[arg(long, default_value_t = 10.0)]
    pub init_max: f64,
    pub problem: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Maxprod,
    Sumprod,
}

#[derive(Debug, Args)]
pub struct SoftArgs {
    #[arg(long, value_enum, default_value = "sumprod")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    /// Max-product exponent [default: 0.5/(n-1)].
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    pub problem: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IntegratorArg {
    Kernel,
    Euler,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Discrete,
    Sampled,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    /// Grid as MIN:MAX:N.
    #[arg(long, default_value = "-8:8:401", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    /// Time step [default: half the stability limit].
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "euler")]
    pub integrator: IntegratorArg,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,
    /// Diffusion scale for every particle [default: hbar/m].
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, value_enum, default_value = "discrete")]
    pub shape: ShapeArg,
    pub problem: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exhaustive minimum of a discrete problem.
    Enumerate { problem: PathBuf },
    /// Lowest eigenpair of a 1-D Hamiltonian.
    Eig(EigArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PotentialArg {
    Harmonic,
    Quartic,
    Box,
}

#[derive(Debug, Args)]
pub struct EigArgs {
    #[arg(long, default_value = "-8:8:401", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, value_enum, default_value = "harmonic")]
    pub potential: PotentialArg,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hbar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub center: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        par::init_threads(threads);
    }
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs a parsed command; `Ok(false)` means the solver did not converge.
pub fn execute(cli: &Cli) -> Result<bool> {
    fs::create_dir_all(&cli.out).map_err(|source| Error::Io {
        path: cli.out.clone(),
        source,
    })?;
    match &cli.command {
        Command::SolveDiscrete(a) => run_discrete(a, &cli.out),
        Command::SolveSoft(a) => run_soft(a, &cli.out),
        Command::SolveGround(a) => run_ground(a, &cli.out),
        Command::Oracle(OracleCommand::Enumerate { problem }) => run_enumerate(problem, &cli.out),
        Command::Oracle(OracleCommand::Eig(a)) => run_eig(a, &cli.out),
        Command::Compare(a) => run_compare(a, &cli.out),
    }
}

fn finish(report: RunReport, out: &Path) -> Result<()> {
    report.write(&out.join("result.json"))
}

fn run_discrete(a: &DiscreteArgs, out: &Path) -> Result<bool> {
    let model = problem::load_discrete(&a.problem)?;
    let config = CoopConfig {
        variant: a.variant.into(),
        lambda: a.lambda,
        weights: None,
        alpha: a.alpha,
        max_iters: a.max_iters,
        tol: a.tol,
    };
    config.validate(model.n())?;
    if !(a.init_max >= 0.0 && a.init_max.is_finite()) {
        return Err(Error::param("init-max must be finite and nonnegative"));
    }
    let start = Instant::now();
    let init = match a.init {
        InitArg::Zero => BoundProfile::zeros(&model, config.variant),
        InitArg::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            BoundProfile::random(&model, config.variant, a.init_max, &mut rng)
        }
    };
    let r = solve_discrete_from(&model, &config, init)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    write_csv(&out.join("trace.csv"), &r.trace)?;
    println!(
        "{} after {} iterations: E = {}, lower bound = {}, certified = {}",
        if r.converged { "converged" } else { "not converged" },
        r.iterations,
        r.energy,
        r.certificate.lower_bound,
        r.certificate.certified
    );
    let converged = r.converged;
    finish(
        RunReport::Discrete(DiscreteSummary {
            config: r.config,
            init: match a.init {
                InitArg::Zero => "zero".into(),
                InitArg::Random => "random".into(),
            },
            seed: a.seed,
            iterations: r.iterations,
            converged,
            certified: r.certificate.certified,
            bound_valid: r.certificate.bound_valid,
            lower_bound: r.certificate.lower_bound,
            upper_bound: r.certificate.upper_bound,
            assignment: r.assignment,
            labels: r.labels,
            energy: r.energy,
            tables: r.profile.tables,
            wall_time_s,
        }),
        out,
    )?;
    Ok(converged)
}

fn run_soft(a: &SoftArgs, out: &Path) -> Result<bool> {
    let model = problem::load_discrete(&a.problem)?;
    let config = SoftConfig {
        mode: match a.mode {
            ModeArg::Maxprod => SoftMode::MaxProduct,
            ModeArg::Sumprod => SoftMode::SumProduct,
        },
        hbar: a.hbar,
        alpha: a.alpha,
        tol: a.tol,
        max_iters: a.max_iters,
    };
    let start = Instant::now();
    let r = solve_soft(&model, &config)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    write_csv(&out.join("trace.csv"), &r.trace)?;
    let rows = r.state.tables.iter().enumerate().flat_map(|(i, t)| {
        let labels = model.domains()[i].labels();
        t.iter().zip(labels).map(move |(&psi, label)| PsiRow {
            variable: i,
            label,
            psi,
        })
    });
    write_csv(&out.join("psi.csv"), rows)?;
    println!(
        "{} after {} iterations: decision {:?}, E = {}",
        if r.converged { "converged" } else { "not converged" },
        r.iterations,
        r.labels,
        r.energy
    );
    let converged = r.converged;
    finish(
        RunReport::Soft(SoftSummary {
            alpha: config.alpha_for(model.n()),
            config: r.config,
            iterations: r.iterations,
            converged,
            assignment: r.assignment,
            labels: r.labels,
            energy: r.energy,
            psi: r.state.tables,
            log_z: r.state.log_z,
            wall_time_s,
        }),
        out,
    )?;
    Ok(converged)
}

fn run_ground(a: &GroundArgs, out: &Path) -> Result<bool> {
    let grid = Grid1D::parse(&a.grid)?;
    let (problem, names) = problem::load_continuous(&a.problem, a.hbar)?;
    let integrator = match a.integrator {
        IntegratorArg::Kernel => Integrator::Kernel,
        IntegratorArg::Euler => Integrator::Euler,
    };
    let sigma2 = a.sigma2.map(|s| vec![s; problem.particles()]);
    let dt = match a.dt {
        Some(dt) => dt,
        None => {
            let gp = problem.discretize(&grid)?;
            suggest_dt(&gp, sigma2.as_deref().unwrap_or(&gp.default_sigma2()), integrator)?
        }
    };
    let config = GroundConfig {
        dt,
        tol: a.tol,
        max_iters: a.max_iters,
        integrator,
        sigma2,
        shape: match a.shape {
            ShapeArg::Discrete => KernelShape::Discrete,
            ShapeArg::Sampled => KernelShape::Sampled,
        },
    };
    let start = Instant::now();
    let r = solve_ground(&problem, &grid, &config)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    write_csv(&out.join("trace.csv"), &r.trace)?;
    write_wavefunction(&out.join("wavefunction.csv"), &grid, &names, &r.field)?;
    println!(
        "{} after {} steps (t = {:.4}): E = {:?}, residual = {:?}",
        if r.result.converged {
            "converged"
        } else {
            "not converged"
        },
        r.result.iterations,
        r.field.t,
        r.result.energies,
        r.result.residuals
    );
    let converged = r.result.converged;
    finish(
        RunReport::Ground(GroundSummary {
            normalization_error: r.field.normalization_error(&grid),
            config: r.config,
            grid,
            hbar: r.hbar,
            sigma2: r.sigma2,
            particles: names,
            energies: r.result.energies,
            residuals: r.result.residuals,
            converged,
            iterations: r.result.iterations,
            final_time: r.field.t,
            psi: r.field.psi,
            wall_time_s,
        }),
        out,
    )?;
    Ok(converged)
}

fn write_wavefunction(path: &Path, grid: &Grid1D, names: &[String], field: &GridField) -> Result<()> {
    let rows = field.psi.iter().zip(names).flat_map(|(psi, name)| {
        psi.iter().enumerate().map(move |(k, &v)| WaveRow {
            particle: name,
            x: grid.x(k),
            psi: v,
        })
    });
    write_csv(path, rows)
}

fn run_enumerate(path: &Path, out: &Path) -> Result<bool> {
    let model = problem::load_discrete(path)?;
    let start = Instant::now();
    let r = oracle::enumerate(&model)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let labels = model.labels_of(&r.optimum);
    println!("minimum {} at {:?} ({} assignments)", r.energy, labels, r.visited);
    finish(
        RunReport::Enumeration(EnumerationSummary {
            assignment: r.optimum,
            labels,
            energy: r.energy,
            visited: r.visited,
            wall_time_s,
        }),
        out,
    )?;
    Ok(true)
}

fn run_eig(a: &EigArgs, out: &Path) -> Result<bool> {
    let grid = Grid1D::parse(&a.grid)?;
    let (potential, name) = match a.potential {
        PotentialArg::Harmonic => (
            UnaryPotential::Harmonic {
                m: Some(a.m),
                omega: a.omega,
                center: a.center,
            },
            "harmonic",
        ),
        PotentialArg::Quartic => (UnaryPotential::Quartic { k: a.k }, "quartic"),
        PotentialArg::Box => (UnaryPotential::Box {}, "box"),
    };
    potential.check()?;
    let f = potential.function(a.m);
    let v: Vec<f64> = grid.points().map(f).collect();
    let start = Instant::now();
    let r = oracle::ground_eig(&v, &grid, a.m, a.hbar)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    write_wavefunction(
        &out.join("wavefunction.csv"),
        &grid,
        &["ground".to_string()],
        &GridField {
            psi: vec![r.eigenvector.clone()],
            t: 0.0,
            norm_factor: vec![1.0],
        },
    )?;
    println!("lowest eigenvalue {} (residual {:.2e})", r.eigenvalue, r.residual);
    finish(
        RunReport::Eigen(EigenSummary {
            grid,
            potential: name.into(),
            mass: a.m,
            hbar: a.hbar,
            eigenvalue: r.eigenvalue,
            residual: r.residual,
            iterations: r.iterations,
            eigenvector: r.eigenvector,
            wall_time_s,
        }),
        out,
    )?;
    Ok(true)
}

fn run_compare(a: &CompareArgs, out: &Path) -> Result<bool> {
    let ra = RunReport::read(&a.a)?;
    let rb = RunReport::read(&a.b)?;
    let c = compare(&ra, &rb)?;
    println!("{}", serde_json::to_string(&c).expect("comparison serializes"));
    finish(RunReport::Comparison(c), out)?;
    Ok(true)
}
