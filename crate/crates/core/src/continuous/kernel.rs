use serde::{Deserialize, Serialize};

use super::GridProblem;
use crate::error::{Error, Result};

/// How the Gaussian of variance `σ² Δt` is placed on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    /// Discrete Gaussian `e^{-s} I_n(s)`, `s = σ²Δt/h²`. Its variance is
    /// exactly `σ²Δt` and it is the heat kernel of the central second
    /// difference, so it stays accurate when `σ√Δt` is below the spacing.
    #[default]
    Discrete,
    /// Point samples of the continuous Gaussian. Accurate only when
    /// `σ√Δt` is comparable to or larger than `h`.
    Sampled,
}

/// Smoothing taps plus the per-step Boltzmann factors they multiply.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub sigma2: Vec<f64>,
    pub dt: f64,
    pub shape: KernelShape,
    /// Centered, odd-length, summing to one.
    pub taps: Vec<Vec<f64>>,
    /// `exp(-Δt e_i / ħ)` on the grid.
    pub(crate) unary_factor: Vec<Vec<f64>>,
    /// `exp(-Δt e_ij / ħ)`, row-major like the pair potentials.
    pub(crate) pair_factor: Vec<Vec<(usize, Vec<f64>)>>,
}

/// Minimum half-width of the tap vector in nodes.
const MIN_HALF_WIDTH: usize = 3;

impl Kernel {
    pub fn new(problem: &GridProblem, sigma2: &[f64], dt: f64, shape: KernelShape) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt {dt} must be positive")));
        }
        if sigma2.len() != problem.particles() {
            return Err(Error::Shape(format!(
                "{} diffusion scales for {} particles",
                sigma2.len(),
                problem.particles()
            )));
        }
        if sigma2.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::param("sigma² must be finite and nonnegative"));
        }
        let h = problem.grid().spacing();
        let hbar = problem.hbar();
        let taps = sigma2
            .iter()
            .map(|s2| gaussian_taps(s2 * dt / (h * h), shape))
            .collect();
        let unary_factor = (0..problem.particles())
            .map(|i| problem.unary(i).iter().map(|e| (-dt * e / hbar).exp()).collect())
            .collect();
        let pair_factor = (0..problem.particles())
            .map(|i| {
                problem
                    .pairs_of(i)
                    .iter()
                    .map(|(j, mat)| (*j, mat.iter().map(|e| (-dt * e / hbar).exp()).collect()))
                    .collect()
            })
            .collect();
        Ok(Self {
            sigma2: sigma2.to_vec(),
            dt,
            shape,
            taps,
            unary_factor,
            pair_factor,
        })
    }

    pub fn half_width(&self, i: usize) -> usize {
        self.taps[i].len() / 2
    }
}

/// Taps for a Gaussian of variance `var` measured in grid units, truncated
/// at six standard deviations and renormalized.
pub(crate) fn gaussian_taps(var: f64, shape: KernelShape) -> Vec<f64> {
    if var == 0.0 {
        return vec![1.0];
    }
    let w = ((6.0 * var.sqrt()).ceil() as usize).max(MIN_HALF_WIDTH);
    let half: Vec<f64> = match shape {
        KernelShape::Sampled => (0..=w).map(|k| (-((k * k) as f64) / (2.0 * var)).exp()).collect(),
        KernelShape::Discrete => {
            // past six deviations, keep going until the tail no longer moves the variance
            let mut half: Vec<f64> = (0..=w).map(|k| scaled_bessel_i(k, var)).collect();
            while *half.last().unwrap() > 1e-18 * half[0] {
                half.push(scaled_bessel_i(half.len(), var));
            }
            half
        }
    };
    let mut taps: Vec<f64> = half.iter().rev().chain(half.iter().skip(1)).copied().collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// `e^{-s} I_n(s)` from the power series, summed in log space.
fn scaled_bessel_i(n: usize, s: f64) -> f64 {
    let half_log = (s / 2.0).ln();
    let terms = (s + 20.0 * s.sqrt() + 50.0) as usize;
    let mut ln_fact_k = 0.0; // ln k!
    let mut ln_fact_kn: f64 = (1..=n).map(|v| (v as f64).ln()).sum(); // ln (k+n)!
    let mut acc = 0.0;
    for k in 0..terms {
        if k > 0 {
            ln_fact_k += (k as f64).ln();
            ln_fact_kn += ((k + n) as f64).ln();
        }
        let ln_term = (2 * k + n) as f64 * half_log - ln_fact_k - ln_fact_kn - s;
        acc += ln_term.exp();
    }
    acc
}

/// `out[k] = Σ_d taps[d] in[k - d]` with zeros outside the grid and on the
/// boundary nodes.
pub(crate) fn convolve_dirichlet(taps: &[f64], input: &[f64], out: &mut [f64]) {
    let n = input.len();
    let w = taps.len() / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for (k, o) in out.iter_mut().enumerate().take(n - 1).skip(1) {
        let lo = k.saturating_sub(w).max(1);
        let hi = (k + w).min(n - 2);
        let mut s = 0.0;
        for m in lo..=hi {
            s += taps[w + m - k] * input[m];
        }
        *o = s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(taps: &[f64]) -> (f64, f64) {
        let w = (taps.len() / 2) as f64;
        let mass: f64 = taps.iter().sum();
        let var: f64 = taps.iter().enumerate().map(|(k, t)| t * (k as f64 - w).powi(2)).sum();
        (mass, var)
    }

    #[test]
    fn taps_sum_to_one() {
        for shape in [KernelShape::Discrete, KernelShape::Sampled] {
            for var in [1e-4, 0.05, 0.7, 4.0, 90.0] {
                let t = gaussian_taps(var, shape);
                let (mass, _) = moments(&t);
                assert!((mass - 1.0).abs() <= 1e-12);
                assert!(t.iter().all(|&v| v >= 0.0));
                assert_eq!(t.len() % 2, 1);
            }
        }
    }

    #[test]
    fn discrete_taps_have_exact_variance() {
        for var in [1e-3, 0.1, 0.5, 2.0, 30.0] {
            let (_, v) = moments(&gaussian_taps(var, KernelShape::Discrete));
            assert!((v - var).abs() <= 1e-10 * var.max(1.0), "{var} -> {v}");
        }
    }

    #[test]
    fn sampled_taps_variance_when_resolved() {
        // the 6σ cut drops a few parts per million of the variance
        let (_, v) = moments(&gaussian_taps(4.0, KernelShape::Sampled));
        assert!((v - 4.0).abs() < 1e-5);
    }

    #[test]
    fn bessel_series_matches_known_values() {
        // e^{-1} I_0(1) and e^{-1} I_1(1)
        assert!((scaled_bessel_i(0, 1.0) - 0.465_759_607_593_640_4).abs() < 1e-14);
        assert!((scaled_bessel_i(1, 1.0) - 0.207_910_415_349_708_4).abs() < 1e-14);
    }

    #[test]
    fn convolution_keeps_boundary_zero() {
        let taps = gaussian_taps(1.0, KernelShape::Discrete);
        let input = vec![0.0, 1.0, 1.0, 1.0, 1.0, 0.0];
        let mut out = vec![0.0; 6];
        convolve_dirichlet(&taps, &input, &mut out);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[5], 0.0);
        assert!(out[1] < 1.0 && out[2] > out[1]);
    }
}
