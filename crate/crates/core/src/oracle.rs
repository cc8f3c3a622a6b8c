//! Reference engines used to check the solvers.
//!
//! Nothing here calls into the solver modules: energies are recomputed from
//! the raw tables and the Schrödinger reference is a dense-free tridiagonal
//! inverse iteration with its own linear algebra.

use serde::{Deserialize, Serialize};

use crate::continuous::Grid1D;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};

/// Largest state space `enumerate` will walk.
pub const MAX_STATES: u128 = 10_000_000;
/// Landscapes are kept only for tiny instances.
pub const LANDSCAPE_MAX_VARS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub optimum: Vec<usize>,
    pub energy: f64,
    /// Number of assignments visited; always the full product of domain sizes.
    pub visited: u64,
    /// Energies in lexicographic order (last variable fastest), for n ≤ 4.
    pub landscape: Option<Vec<f64>>,
}

/// Lexicographic odometer over all assignments.
struct Odometer {
    sizes: Vec<usize>,
    x: Vec<usize>,
    done: bool,
}

impl Odometer {
    fn new(sizes: Vec<usize>) -> Self {
        let n = sizes.len();
        Self {
            done: sizes.contains(&0),
            sizes,
            x: vec![0; n],
        }
    }

    /// Advances and returns the lowest position that changed, or `None` at the end.
    fn advance(&mut self) -> Option<usize> {
        for pos in (0..self.x.len()).rev() {
            self.x[pos] += 1;
            if self.x[pos] < self.sizes[pos] {
                return Some(pos);
            }
            self.x[pos] = 0;
        }
        self.done = true;
        None
    }
}

fn energy_of(model: &EnergyModel, x: &[usize]) -> f64 {
    let mut e = model.shift();
    for (i, &xi) in x.iter().enumerate() {
        e += model.unary(i)[xi];
        for (j, t) in model.pairs_of(i) {
            e += t.row(xi)[x[*j]];
        }
    }
    e
}

fn check_size(model: &EnergyModel) -> Result<()> {
    let states = model.state_space();
    if states > MAX_STATES {
        return Err(Error::TooLarge(format!(
            "{states} assignments exceed the enumeration limit of {MAX_STATES}"
        )));
    }
    Ok(())
}

/// Exact global minimum by exhaustive search; ties go to the
/// lexicographically first assignment.
pub fn enumerate(model: &EnergyModel) -> Result<EnumerationResult> {
    check_size(model)?;
    let sizes: Vec<usize> = (0..model.n()).map(|i| model.domain_size(i)).collect();
    let keep = model.n() <= LANDSCAPE_MAX_VARS;
    let mut landscape = keep.then(Vec::new);
    let mut odo = Odometer::new(sizes);
    let mut best = f64::INFINITY;
    let mut optimum = odo.x.clone();
    let mut visited = 0u64;
    while !odo.done {
        let e = energy_of(model, &odo.x);
        visited += 1;
        if let Some(l) = landscape.as_mut() {
            l.push(e);
        }
        if e < best {
            best = e;
            optimum.clone_from(&odo.x);
        }
        odo.advance();
    }
    Ok(EnumerationResult {
        optimum,
        energy: best,
        visited,
        landscape,
    })
}

/// Every assignment's energy, lexicographic order.
pub fn energy_table(model: &EnergyModel) -> Result<Vec<f64>> {
    check_size(model)?;
    let sizes: Vec<usize> = (0..model.n()).map(|i| model.domain_size(i)).collect();
    let mut odo = Odometer::new(sizes);
    let mut out = Vec::with_capacity(model.state_space() as usize);
    while !odo.done {
        out.push(energy_of(model, &odo.x));
        odo.advance();
    }
    Ok(out)
}

/// `max_x [Σ_i tables[i][x_i] + offset - E(x)]` over all assignments, given
/// the output of [`energy_table`]. A value ≤ 0 means the separable function
/// is a lower bound of `E` everywhere.
pub fn bound_excess(energies: &[f64], tables: &[Vec<f64>], offset: f64) -> f64 {
    let sizes: Vec<usize> = tables.iter().map(Vec::len).collect();
    let n = sizes.len();
    let mut odo = Odometer::new(sizes);
    // prefix[k] = offset + Σ_{i<k} tables[i][x_i]
    let mut prefix = vec![offset; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + tables[k][0];
    }
    let mut worst = f64::NEG_INFINITY;
    let mut idx = 0;
    while !odo.done {
        worst = worst.max(prefix[n] - energies[idx]);
        idx += 1;
        if let Some(pos) = odo.advance() {
            for k in pos..n {
                prefix[k + 1] = prefix[k] + tables[k][odo.x[k]];
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// Quadrature-normalized, nonnegative, zero on the boundary nodes.
    pub eigenvector: Vec<f64>,
    /// `‖H v - λ v‖ · h^{1/2}`.
    pub residual: f64,
    pub iterations: usize,
}

pub const EIG_MAX_POINTS: usize = 2000;
const EIG_MAX_ITERS: usize = 200_000;
const EIG_VALUE_TOL: f64 = 1e-10;
const EIG_RESIDUAL_TOL: f64 = 5e-9;

/// Lowest eigenpair of `H = -(ħ²/2m) D2 + diag(V)` on the interior grid
/// nodes with homogeneous Dirichlet conditions at both ends.
///
/// Inverse iteration with a Gershgorin shift; each sweep is one Thomas solve.
pub fn ground_eig(potential: &[f64], grid: &Grid1D, mass: f64, hbar: f64) -> Result<EigenResult> {
    let n_pts = grid.len();
    if potential.len() != n_pts {
        return Err(Error::Shape(format!(
            "potential has {} values, grid has {n_pts}",
            potential.len()
        )));
    }
    if n_pts > EIG_MAX_POINTS {
        return Err(Error::TooLarge(format!("{n_pts} grid points exceed {EIG_MAX_POINTS}")));
    }
    if !(mass > 0.0 && mass.is_finite()) || !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::param("mass and hbar must be positive"));
    }
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("potential".into()));
    }
    let h = grid.spacing();
    let m = n_pts - 2;
    let kin = hbar * hbar / (2.0 * mass * h * h);
    let diag: Vec<f64> = potential[1..n_pts - 1].iter().map(|v| 2.0 * kin + v).collect();
    let off = -kin;

    let gersh = (0..m)
        .map(|k| {
            let deg = usize::from(k > 0) + usize::from(k + 1 < m);
            diag[k] - off.abs() * deg as f64
        })
        .fold(f64::INFINITY, f64::min);
    let shift = gersh - 1e-9 * gersh.abs().max(1.0);

    let apply = |v: &[f64], out: &mut [f64]| {
        for k in 0..m {
            let mut s = diag[k] * v[k];
            if k > 0 {
                s += off * v[k - 1];
            }
            if k + 1 < m {
                s += off * v[k + 1];
            }
            out[k] = s;
        }
    };

    let mut v = vec![1.0; m];
    normalize_quadrature(&mut v, h);
    let mut hv = vec![0.0; m];
    let mut lambda = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut scratch_c = vec![0.0; m];
    for it in 1..=EIG_MAX_ITERS {
        thomas_solve_constant_off(&diag, off, shift, &mut v, &mut scratch_c);
        let sum: f64 = v.iter().sum();
        if sum < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        normalize_quadrature(&mut v, h);
        apply(&v, &mut hv);
        let num: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        let next = num / den;
        residual = (hv.iter().zip(&v).map(|(a, b)| (a - next * b).powi(2)).sum::<f64>() * h).sqrt();
        let delta = (next - lambda).abs();
        lambda = next;
        if delta <= EIG_VALUE_TOL * lambda.abs().max(1.0) && residual <= EIG_RESIDUAL_TOL {
            let mut eigenvector = Vec::with_capacity(n_pts);
            eigenvector.push(0.0);
            eigenvector.extend(v.iter().map(|x| x.max(0.0)));
            eigenvector.push(0.0);
            return Ok(EigenResult {
                eigenvalue: lambda,
                eigenvector,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::InvalidParameter(format!(
        "inverse iteration did not converge in {EIG_MAX_ITERS} sweeps (λ≈{lambda}, residual {residual:e})"
    )))
}

fn normalize_quadrature(v: &mut [f64], h: f64) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Solves `(T - shift I) y = rhs` in place, `T` symmetric tridiagonal with
/// constant off-diagonal.
fn thomas_solve_constant_off(diag: &[f64], off: f64, shift: f64, rhs: &mut [f64], c: &mut [f64]) {
    let m = diag.len();
    let mut denom = diag[0] - shift;
    c[0] = off / denom;
    rhs[0] /= denom;
    for k in 1..m {
        denom = diag[k] - shift - off * c[k - 1];
        c[k] = off / denom;
        rhs[k] = (rhs[k] - off * rhs[k - 1]) / denom;
    }
    for k in (0..m - 1).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
}
