use serde::{Deserialize, Serialize};

use super::dynamics::{
    build_potential, euler_step, kernel_step, time_step, EffectivePotential, EULER_DIFFUSION_LIMIT,
    EULER_POTENTIAL_LIMIT, KERNEL_SPLIT_LIMIT,
};
use super::{ContinuousProblem, Grid1D, GridField, GridProblem, Kernel, KernelShape};
use crate::discrete::STABLE_SWEEPS;
use crate::error::{Error, Result};
use crate::oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Boltzmann factor followed by Gaussian smoothing.
    Kernel,
    /// Explicit Euler on the diffusion equation with the mean-field potential.
    #[default]
    Euler,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Kernel => "kernel",
            Integrator::Euler => "euler",
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Integrator::Kernel),
            "euler" => Ok(Integrator::Euler),
            _ => Err(Error::param(format!("unknown integrator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundConfig {
    pub dt: f64,
    /// Stop once the sup-norm change per step stays at or below `tol · dt`.
    pub tol: f64,
    pub max_iters: usize,
    pub integrator: Integrator,
    /// Per-particle diffusion scales; `ħ / m_i` when absent.
    pub sigma2: Option<Vec<f64>>,
    pub shape: KernelShape,
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            tol: 1e-8,
            max_iters: 200_000,
            integrator: Integrator::Euler,
            sigma2: None,
            shape: KernelShape::Discrete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTraceRow {
    pub iter: usize,
    pub time: f64,
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryResult {
    /// Rayleigh quotients `⟨ψ, Hψ⟩ / ⟨ψ, ψ⟩`.
    pub energies: Vec<f64>,
    /// `‖Hψ - Eψ‖ · h^{1/2}`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundReport {
    pub config: GroundConfig,
    pub grid: Grid1D,
    pub hbar: f64,
    pub sigma2: Vec<f64>,
    pub field: GridField,
    pub potential: EffectivePotential,
    pub result: StationaryResult,
    pub trace: Vec<GroundTraceRow>,
}

/// `Hψ = -(ħσ²/2) D2 ψ + V ψ` on the interior, zero on the boundary nodes.
pub fn hamiltonian_apply(psi: &[f64], v: &[f64], sigma2: f64, hbar: f64, h: f64) -> Vec<f64> {
    let n = psi.len();
    let c = hbar * sigma2 / (2.0 * h * h);
    let mut out = vec![0.0; n];
    for k in 1..n - 1 {
        out[k] = -c * (psi[k - 1] - 2.0 * psi[k] + psi[k + 1]) + v[k] * psi[k];
    }
    out
}

/// Energies and eigen-residuals of each field under its own Hamiltonian.
pub fn stationary_result(
    field: &GridField,
    potential: &EffectivePotential,
    problem: &GridProblem,
    sigma2: &[f64],
) -> StationaryResult {
    let grid = problem.grid();
    let h = grid.spacing();
    let mut energies = Vec::with_capacity(field.particles());
    let mut residuals = Vec::with_capacity(field.particles());
    for (i, psi) in field.psi.iter().enumerate() {
        let hpsi = hamiltonian_apply(psi, &potential.v[i], sigma2[i], problem.hbar(), h);
        let e = grid.inner(psi, &hpsi) / grid.inner(psi, psi);
        let r: f64 = hpsi.iter().zip(psi).map(|(a, b)| (a - e * b).powi(2)).sum();
        energies.push(e);
        residuals.push((r * h).sqrt());
    }
    StationaryResult {
        energies,
        residuals,
        converged: false,
        iterations: 0,
    }
}

/// `|⟨a, b⟩| / (‖a‖ ‖b‖)` under the quadrature inner product.
pub fn overlap(a: &[f64], b: &[f64], grid: &Grid1D) -> f64 {
    grid.inner(a, b).abs() / (grid.inner(a, a) * grid.inner(b, b)).sqrt()
}

pub fn solve_ground(problem: &ContinuousProblem, grid: &Grid1D, config: &GroundConfig) -> Result<GroundReport> {
    solve_ground_from(problem, grid, config, GridField::uniform(grid, problem.particles()))
}

/// Steps the chosen integrator from `init` until the field stops moving.
pub fn solve_ground_from(
    problem: &ContinuousProblem,
    grid: &Grid1D,
    config: &GroundConfig,
    init: GridField,
) -> Result<GroundReport> {
    if !(config.tol >= 0.0 && config.tol.is_finite()) {
        return Err(Error::param("tol must be finite and nonnegative"));
    }
    let gp = problem.discretize(grid)?;
    let sigma2 = config.sigma2.clone().unwrap_or_else(|| problem.default_sigma2());
    let kernel = Kernel::new(&gp, &sigma2, config.dt, config.shape)?;
    let mut field = init;
    field.normalize(grid)?;
    let mut trace = Vec::new();
    let mut calm = 0;
    let mut converged = false;
    for iter in 1..=config.max_iters {
        let next = match config.integrator {
            Integrator::Kernel => kernel_step(&field, &gp, &kernel)?,
            Integrator::Euler => {
                let v = build_potential(&field, &gp)?;
                euler_step(&field, &v, &gp, &kernel)?
            }
        };
        let max_change = next.sup_distance(&field);
        field = next;
        trace.push(GroundTraceRow {
            iter,
            time: field.t,
            max_change,
        });
        calm = if max_change <= config.tol * config.dt {
            calm + 1
        } else {
            0
        };
        if calm >= STABLE_SWEEPS {
            converged = true;
            break;
        }
    }
    let potential = build_potential(&field, &gp)?;
    let mut result = stationary_result(&field, &potential, &gp, &sigma2);
    result.converged = converged;
    result.iterations = trace.len();
    Ok(GroundReport {
        config: config.clone(),
        grid: *grid,
        hbar: gp.hbar(),
        sigma2,
        field,
        potential,
        result,
        trace,
    })
}

/// Half of the largest step the stability checks accept for the chosen
/// integrator, measured on the potential of a uniform start.
pub fn suggest_dt(problem: &GridProblem, sigma2: &[f64], integrator: Integrator) -> Result<f64> {
    let field = GridField::uniform(problem.grid(), problem.particles());
    let v = build_potential(&field, problem)?;
    let hbar = problem.hbar();
    let h = problem.grid().spacing();
    let s2 = sigma2.iter().copied().fold(0.0, f64::max);
    let bound = match integrator {
        // the kernel has no diffusion limit; one node of spread per step keeps it accurate
        Integrator::Kernel => (0..problem.particles())
            .map(|i| KERNEL_SPLIT_LIMIT * hbar / v.max_abs(i))
            .fold(h * h / s2, f64::min),
        Integrator::Euler => {
            let vmax = v.v.iter().flatten().copied().fold(0.0, f64::max);
            (EULER_DIFFUSION_LIMIT * h * h / s2).min(EULER_POTENTIAL_LIMIT * hbar / vmax)
        }
    };
    if bound.is_finite() {
        Ok(0.5 * bound)
    } else {
        Err(Error::param("no finite stability bound; give dt explicitly"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTrapConfig {
    /// Where each particle's delta sits.
    pub positions: Vec<f64>,
    /// Unsmoothed steps used to check the trap.
    pub trap_steps: usize,
    /// Step size; picked from the potential range when absent.
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DeltaTrapConfig {
    fn default() -> Self {
        Self {
            positions: vec![3.0],
            trap_steps: 100,
            dt: None,
            tol: 1e-8,
            max_iters: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTrapReport {
    pub dt: f64,
    /// Largest sup-norm change over the unsmoothed steps.
    pub trap_max_change: f64,
    pub trapped: bool,
    /// Overlap of each smoothed result with the eigensolver ground state of
    /// its final effective potential.
    pub escape_overlaps: Vec<f64>,
    pub escaped: bool,
    pub escape_iterations: usize,
    pub escape_converged: bool,
    pub energies: Vec<f64>,
    pub oracle_energies: Vec<f64>,
}

/// Starts every particle from a grid delta. Without smoothing the delta
/// never moves; with kernel smoothing it spreads into the ground state.
pub fn delta_trap_demo(
    problem: &ContinuousProblem,
    grid: &Grid1D,
    config: &DeltaTrapConfig,
) -> Result<DeltaTrapReport> {
    if config.positions.len() != problem.particles() {
        return Err(Error::Shape(format!(
            "{} delta positions for {} particles",
            config.positions.len(),
            problem.particles()
        )));
    }
    let gp = problem.discretize(grid)?;
    let dt = match config.dt {
        Some(dt) => dt,
        None => {
            let vmax = (0..gp.particles())
                .map(|i| {
                    let pair: f64 = gp
                        .pairs_of(i)
                        .iter()
                        .map(|(_, m)| m.iter().fold(0.0, |a: f64, b| a.max(b.abs())))
                        .sum();
                    gp.unary(i).iter().fold(0.0, |a: f64, b| a.max(b.abs())) + pair
                })
                .fold(0.0, f64::max);
            if vmax > 0.0 {
                0.05 * gp.hbar() / vmax
            } else {
                1e-3
            }
        }
    };
    let sigma2 = gp.default_sigma2();
    let kernel = Kernel::new(&gp, &sigma2, dt, KernelShape::Discrete)?;
    let start = GridField::one_hot(grid, &config.positions);

    let mut field = start.clone();
    let mut trap_max_change: f64 = 0.0;
    for _ in 0..config.trap_steps {
        let next = time_step(&field, &gp, &kernel)?;
        trap_max_change = trap_max_change.max(next.sup_distance(&field));
        field = next;
    }

    let escape = solve_ground_from(
        problem,
        grid,
        &GroundConfig {
            dt,
            tol: config.tol,
            max_iters: config.max_iters,
            integrator: Integrator::Kernel,
            sigma2: Some(sigma2),
            shape: KernelShape::Discrete,
        },
        start,
    )?;
    let mut escape_overlaps = Vec::new();
    let mut oracle_energies = Vec::new();
    for i in 0..gp.particles() {
        let eig = oracle::ground_eig(&escape.potential.v[i], grid, gp.mass(i), gp.hbar())?;
        escape_overlaps.push(overlap(&escape.field.psi[i], &eig.eigenvector, grid));
        oracle_energies.push(eig.eigenvalue);
    }
    Ok(DeltaTrapReport {
        dt,
        trap_max_change,
        trapped: trap_max_change <= 1e-12,
        escaped: escape_overlaps.iter().all(|o| *o >= 0.99),
        escape_overlaps,
        escape_iterations: escape.result.iterations,
        escape_converged: escape.result.converged,
        energies: escape.result.energies,
        oracle_energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(hbar: f64) -> ContinuousProblem {
        ContinuousProblem::new(hbar)
            .unwrap()
            .with_particle(1.0, |x| 0.5 * x * x)
            .unwrap()
    }

    #[test]
    fn hamiltonian_of_sine_mode() {
        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        let psi: Vec<f64> = g.points().map(|x| (std::f64::consts::PI * x).sin()).collect();
        let hpsi = hamiltonian_apply(&psi, &vec![0.0; 101], 1.0, 1.0, g.spacing());
        // discrete eigenvalue (2/h²)(1 - cos(πh)) / 2
        let h = g.spacing();
        let lam = (1.0 - (std::f64::consts::PI * h).cos()) / (h * h);
        for k in 1..100 {
            assert!((hpsi[k] - lam * psi[k]).abs() < 1e-10);
        }
        assert_eq!(hpsi[0], 0.0);
    }

    #[test]
    fn overlap_is_scale_free() {
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let a: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v).collect();
        assert!((overlap(&a, &b, &g) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn euler_ground_state_of_oscillator() {
        let g = Grid1D::new(-6.0, 6.0, 121).unwrap();
        let cfg = GroundConfig {
            dt: 2e-3,
            tol: 1e-7,
            ..GroundConfig::default()
        };
        let r = solve_ground(&oscillator(1.0), &g, &cfg).unwrap();
        assert!(r.result.converged);
        assert!((r.result.energies[0] - 0.5).abs() < 5e-3);
        assert!(r.result.residuals[0] < 1e-5);
        assert!(r.field.normalization_error(&g) < 1e-9);
    }

    #[test]
    fn rejects_unstable_dt() {
        let g = Grid1D::new(-6.0, 6.0, 121).unwrap();
        let cfg = GroundConfig {
            dt: 0.1,
            ..GroundConfig::default()
        };
        assert!(matches!(
            solve_ground(&oscillator(1.0), &g, &cfg),
            Err(Error::Stability(_))
        ));
    }

    #[test]
    fn integrator_names_round_trip() {
        for i in [Integrator::Kernel, Integrator::Euler] {
            assert_eq!(i.name().parse::<Integrator>().unwrap(), i);
        }
        assert!("rk4".parse::<Integrator>().is_err());
    }
}
