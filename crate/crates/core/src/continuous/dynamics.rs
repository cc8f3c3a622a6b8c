use serde::{Deserialize, Serialize};

use super::kernel::convolve_dirichlet;
use super::{GridField, GridProblem, Kernel};
use crate::error::{Error, Result};
use crate::par;

/// Kernel steps must keep `Δt · max|V| / ħ` at or below this.
pub const KERNEL_SPLIT_LIMIT: f64 = 0.1;
/// Euler steps must keep `Δt σ² / h²` at or below this.
pub const EULER_DIFFUSION_LIMIT: f64 = 0.25;
/// Euler steps must keep `Δt · max V / ħ` at or below this so that the
/// update coefficients stay nonnegative.
pub const EULER_POTENTIAL_LIMIT: f64 = 0.75;

/// Mean-field potentials `V_i = e_i + Σ_j ∫ e_ij(·, y) ψ_j(y)² dy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivePotential {
    pub v: Vec<Vec<f64>>,
}

impl EffectivePotential {
    pub fn max_abs(&self, i: usize) -> f64 {
        self.v[i].iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `h Σ_m mat[k, m] ψ(m)²` for every node `k`.
fn weighted_squares(mat: &[f64], psi: &[f64], h: f64) -> Vec<f64> {
    let n = psi.len();
    let sq: Vec<f64> = psi.iter().map(|p| p * p).collect();
    mat.chunks_exact(n)
        .map(|row| h * row.iter().zip(&sq).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn collect_fields(results: Vec<Result<(Vec<f64>, f64)>>, t: f64) -> Result<GridField> {
    let mut psi = Vec::with_capacity(results.len());
    let mut norm_factor = Vec::with_capacity(results.len());
    for r in results {
        let (p, z) = r?;
        psi.push(p);
        norm_factor.push(z);
    }
    Ok(GridField { psi, t, norm_factor })
}

/// Zeroes the boundary nodes and rescales to `h Σ ψ² = 1`, returning the
/// norm that was divided out.
fn finish(i: usize, mut p: Vec<f64>, h: f64) -> Result<(Vec<f64>, f64)> {
    let n = p.len();
    p[0] = 0.0;
    p[n - 1] = 0.0;
    let norm = (h * p.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::AllZero(i));
    }
    p.iter_mut().for_each(|v| *v /= norm);
    Ok((p, norm))
}

pub fn build_potential(field: &GridField, problem: &GridProblem) -> Result<EffectivePotential> {
    problem.check_field(field)?;
    let h = problem.grid().spacing();
    let v = par::map_range(problem.particles(), |i| {
        let mut v = problem.unary(i).to_vec();
        for (j, mat) in problem.pairs_of(i) {
            for (a, b) in v.iter_mut().zip(weighted_squares(mat, &field.psi[*j], h)) {
                *a += b;
            }
        }
        v
    });
    Ok(EffectivePotential { v })
}

/// Full integral update `ψ_i ∝ exp(-e_i/ħ) Π_j ∫ exp(-e_ij/ħ) ψ_j²`,
/// evaluated on logarithms so that deep wells do not underflow.
pub fn integral_update(field: &GridField, problem: &GridProblem) -> Result<GridField> {
    problem.check_field(field)?;
    let h = problem.grid().spacing();
    let hbar = problem.hbar();
    let n = problem.grid().len();
    let log_sq: Vec<Vec<f64>> = field
        .psi
        .iter()
        .map(|p| p.iter().map(|v| 2.0 * v.ln()).collect())
        .collect();
    let results = par::map_range(problem.particles(), |i| {
        let mut logs: Vec<f64> = problem.unary(i).iter().map(|e| -e / hbar).collect();
        for (j, mat) in problem.pairs_of(i) {
            for (k, l) in logs.iter_mut().enumerate() {
                let row = &mat[k * n..(k + 1) * n];
                let terms = row.iter().zip(&log_sq[*j]).map(|(e, s)| -e / hbar + s);
                let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
                *l += if m == f64::NEG_INFINITY {
                    m
                } else {
                    m + (h * terms.map(|x| (x - m).exp()).sum::<f64>()).ln()
                };
            }
        }
        let top = logs[1..n - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY || top.is_nan() {
            return Err(Error::AllZero(i));
        }
        let p = logs.iter().map(|l| (l - top).exp()).collect();
        finish(i, p, h)
    });
    collect_fields(results, field.t)
}

/// `ψ_i · exp(-Δt e_i/ħ) · Π_j h Σ_m exp(-Δt e_ij/ħ) ψ_j²` at every node.
fn boltzmann_product(field: &GridField, kernel: &Kernel, i: usize, h: f64) -> Vec<f64> {
    let mut p: Vec<f64> = field.psi[i]
        .iter()
        .zip(&kernel.unary_factor[i])
        .map(|(a, b)| a * b)
        .collect();
    for (j, mat) in &kernel.pair_factor[i] {
        for (a, b) in p.iter_mut().zip(weighted_squares(mat, &field.psi[*j], h)) {
            *a *= b;
        }
    }
    p
}

fn check_kernel(problem: &GridProblem, kernel: &Kernel) -> Result<()> {
    if kernel.taps.len() != problem.particles() || kernel.unary_factor.iter().any(|u| u.len() != problem.grid().len()) {
        return Err(Error::Shape("kernel was built for a different problem".into()));
    }
    Ok(())
}

/// Time-stepped update without smoothing. Multiplying by a positive factor
/// never moves support, so a grid delta is a fixed point.
pub fn time_step(field: &GridField, problem: &GridProblem, kernel: &Kernel) -> Result<GridField> {
    problem.check_field(field)?;
    check_kernel(problem, kernel)?;
    let h = problem.grid().spacing();
    let results = par::map_range(problem.particles(), |i| {
        finish(i, boltzmann_product(field, kernel, i, h), h)
    });
    collect_fields(results, field.t + kernel.dt)
}

/// Smoothed time step: the Boltzmann product convolved with the kernel
/// taps, then normalized. Fails before stepping when
/// `Δt · max|V_i| / ħ` exceeds [`KERNEL_SPLIT_LIMIT`].
pub fn kernel_step(field: &GridField, problem: &GridProblem, kernel: &Kernel) -> Result<GridField> {
    problem.check_field(field)?;
    check_kernel(problem, kernel)?;
    let potential = build_potential(field, problem)?;
    check_kernel_stability(&potential, problem, kernel)?;
    let h = problem.grid().spacing();
    let n = problem.grid().len();
    let results = par::map_range(problem.particles(), |i| {
        let p = boltzmann_product(field, kernel, i, h);
        let mut out = vec![0.0; n];
        convolve_dirichlet(&kernel.taps[i], &p, &mut out);
        finish(i, out, h)
    });
    collect_fields(results, field.t + kernel.dt)
}

pub(crate) fn check_kernel_stability(
    potential: &EffectivePotential,
    problem: &GridProblem,
    kernel: &Kernel,
) -> Result<()> {
    for i in 0..problem.particles() {
        let ratio = kernel.dt * potential.max_abs(i) / problem.hbar();
        if ratio > KERNEL_SPLIT_LIMIT {
            return Err(Error::Stability(format!(
                "particle {i}: dt·max|V|/hbar = {ratio:.4} exceeds {KERNEL_SPLIT_LIMIT} (dt ≤ {:.3e})",
                KERNEL_SPLIT_LIMIT * problem.hbar() / potential.max_abs(i)
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_euler_stability(
    potential: &EffectivePotential,
    problem: &GridProblem,
    kernel: &Kernel,
) -> Result<()> {
    let h = problem.grid().spacing();
    let s2 = kernel.sigma2.iter().copied().fold(0.0, f64::max);
    let limit = EULER_DIFFUSION_LIMIT * h * h / s2;
    if kernel.dt > limit {
        return Err(Error::Stability(format!(
            "dt = {:.3e} exceeds the explicit diffusion bound 0.25·h²/σ² = {limit:.3e}",
            kernel.dt
        )));
    }
    for i in 0..problem.particles() {
        let vmax = potential.v[i].iter().copied().fold(0.0, f64::max);
        let ratio = kernel.dt * vmax / problem.hbar();
        if ratio > EULER_POTENTIAL_LIMIT {
            return Err(Error::Stability(format!(
                "particle {i}: dt·max V/hbar = {ratio:.4} exceeds {EULER_POTENTIAL_LIMIT}"
            )));
        }
    }
    Ok(())
}

/// Explicit step of `∂ψ/∂t = (σ²/2) ∂²ψ - (V/ħ) ψ`, then normalized.
pub fn euler_step(
    field: &GridField,
    potential: &EffectivePotential,
    problem: &GridProblem,
    kernel: &Kernel,
) -> Result<GridField> {
    problem.check_field(field)?;
    check_kernel(problem, kernel)?;
    if potential.v.len() != problem.particles() {
        return Err(Error::Shape("potential does not match the particle count".into()));
    }
    check_euler_stability(potential, problem, kernel)?;
    let h = problem.grid().spacing();
    let n = problem.grid().len();
    let dt = kernel.dt;
    let hbar = problem.hbar();
    let results = par::map_range(problem.particles(), |i| {
        let psi = &field.psi[i];
        let v = &potential.v[i];
        let c = 0.5 * kernel.sigma2[i] / (h * h);
        let mut out = vec![0.0; n];
        for k in 1..n - 1 {
            let lap = psi[k - 1] - 2.0 * psi[k] + psi[k + 1];
            out[k] = psi[k] + dt * (c * lap - v[k] / hbar * psi[k]);
        }
        finish(i, out, h)
    });
    collect_fields(results, field.t + dt)
}
