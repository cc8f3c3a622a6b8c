//! Continuous-variable dynamics on a uniform 1-D grid.
//!
//! Every particle carries a nonnegative field `ψ_i` sampled on the same
//! grid. The boundary nodes are held at zero (homogeneous Dirichlet), all
//! integrals use the rectangle rule with weight `h`, and every update ends
//! with quadrature normalization `h Σ ψ² = 1`.

mod dynamics;
mod grid;
mod ground;
mod kernel;

use std::fmt;
use std::sync::Arc;

pub use dynamics::{
    build_potential, euler_step, integral_update, kernel_step, time_step, EffectivePotential, EULER_DIFFUSION_LIMIT,
    EULER_POTENTIAL_LIMIT, KERNEL_SPLIT_LIMIT,
};
pub use grid::{Grid1D, GridField};
pub use ground::{
    delta_trap_demo, hamiltonian_apply, overlap, solve_ground, solve_ground_from, stationary_result, suggest_dt,
    DeltaTrapConfig, DeltaTrapReport, GroundConfig, GroundReport, GroundTraceRow, Integrator, StationaryResult,
};
pub use kernel::{Kernel, KernelShape};

use crate::error::{Error, Result};

pub type UnaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PairFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Particles with masses, unary potentials `e_i(x)` and ordered pairwise
/// potentials `e_ij(x_i, x_j)` owned by `i`.
#[derive(Clone)]
pub struct ContinuousProblem {
    masses: Vec<f64>,
    unary: Vec<UnaryFn>,
    pairs: Vec<(usize, usize, PairFn)>,
    hbar: f64,
}

impl fmt::Debug for ContinuousProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousProblem")
            .field("masses", &self.masses)
            .field(
                "pairs",
                &self.pairs.iter().map(|(i, j, _)| (*i, *j)).collect::<Vec<_>>(),
            )
            .field("hbar", &self.hbar)
            .finish()
    }
}

impl ContinuousProblem {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::param(format!("hbar {hbar} must be positive")));
        }
        Ok(Self {
            masses: Vec::new(),
            unary: Vec::new(),
            pairs: Vec::new(),
            hbar,
        })
    }

    pub fn with_particle(mut self, mass: f64, potential: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param(format!("mass {mass} must be positive")));
        }
        self.masses.push(mass);
        self.unary.push(Arc::new(potential));
        Ok(self)
    }

    pub fn with_pair(
        mut self,
        i: usize,
        j: usize,
        potential: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = self.masses.len();
        if i == j {
            return Err(Error::SelfPair(i));
        }
        if i >= n || j >= n {
            return Err(Error::Shape(format!("pair ({i},{j}) out of range for {n} particles")));
        }
        if self.pairs.iter().any(|(a, b, _)| (*a, *b) == (i, j)) {
            return Err(Error::Shape(format!("pair ({i},{j}) given twice")));
        }
        self.pairs.push((i, j, Arc::new(potential)));
        Ok(self)
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::param(format!("hbar {hbar} must be positive")));
        }
        self.hbar = hbar;
        Ok(self)
    }

    /// Default diffusion scales `σ_i² = ħ / m_i`.
    pub fn default_sigma2(&self) -> Vec<f64> {
        self.masses.iter().map(|m| self.hbar / m).collect()
    }

    /// Samples every potential on the grid.
    pub fn discretize(&self, grid: &Grid1D) -> Result<GridProblem> {
        if self.masses.is_empty() {
            return Err(Error::Shape("problem has no particles".into()));
        }
        let xs: Vec<f64> = grid.points().collect();
        let unary: Vec<Vec<f64>> = self.unary.iter().map(|f| xs.iter().map(|&x| f(x)).collect()).collect();
        for (i, u) in unary.iter().enumerate() {
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("potential of particle {i} on the grid")));
            }
        }
        let mut pairs: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); self.particles()];
        for (i, j, f) in &self.pairs {
            let mat: Vec<f64> = xs
                .iter()
                .flat_map(|&a| xs.iter().map(move |&b| (a, b)))
                .map(|(a, b)| f(a, b))
                .collect();
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("pair potential ({i},{j}) on the grid")));
            }
            pairs[*i].push((*j, mat));
        }
        for p in &mut pairs {
            p.sort_by_key(|(j, _)| *j);
        }
        Ok(GridProblem {
            grid: *grid,
            masses: self.masses.clone(),
            hbar: self.hbar,
            unary,
            pairs,
        })
    }
}

/// A [`ContinuousProblem`] sampled on a grid. Pair matrices are row-major,
/// `mat[k * N + m] = e_ij(x_k, x_m)`.
#[derive(Debug, Clone)]
pub struct GridProblem {
    grid: Grid1D,
    masses: Vec<f64>,
    hbar: f64,
    unary: Vec<Vec<f64>>,
    pairs: Vec<Vec<(usize, Vec<f64>)>>,
}

impl GridProblem {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn unary(&self, i: usize) -> &[f64] {
        &self.unary[i]
    }

    pub fn pairs_of(&self, i: usize) -> &[(usize, Vec<f64>)] {
        &self.pairs[i]
    }

    pub fn default_sigma2(&self) -> Vec<f64> {
        self.masses.iter().map(|m| self.hbar / m).collect()
    }

    fn check_field(&self, field: &GridField) -> Result<()> {
        if field.particles() != self.particles() || field.psi.iter().any(|p| p.len() != self.grid.len()) {
            return Err(Error::Shape(format!(
                "field has {} particles on {} points, problem has {} on {}",
                field.particles(),
                field.psi.first().map_or(0, Vec::len),
                self.particles(),
                self.grid.len()
            )));
        }
        Ok(())
    }
}
