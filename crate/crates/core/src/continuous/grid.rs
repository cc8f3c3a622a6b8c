use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` equally spaced nodes from `x_min` to `x_max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::param(format!("grid needs at least 3 points, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::param(format!(
                "grid bounds [{x_min}, {x_max}] are not increasing"
            )));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Parses `MIN:MAX:N`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::param(format!("grid spec {spec:?} is not MIN:MAX:N"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Self::new(lo, hi, n)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.x(k))
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.spacing()).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// `h Σ f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.spacing() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// One field per particle, all on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub psi: Vec<Vec<f64>>,
    /// Simulated time.
    pub t: f64,
    /// Quadrature norm `(h Σ ψ²)^{1/2}` of each field just before the last
    /// normalization; `ln` of it over `Δt` is the instantaneous decay rate.
    pub norm_factor: Vec<f64>,
}

impl GridField {
    /// Constant on the interior nodes, zero on the boundary, normalized.
    pub fn uniform(grid: &Grid1D, particles: usize) -> Self {
        let mut psi = vec![1.0; grid.len()];
        psi[0] = 0.0;
        psi[grid.len() - 1] = 0.0;
        let mut f = Self {
            psi: vec![psi; particles],
            t: 0.0,
            norm_factor: vec![1.0; particles],
        };
        f.normalize(grid).expect("interior is nonzero");
        f
    }

    /// A normalized grid delta at the node nearest each position.
    pub fn one_hot(grid: &Grid1D, positions: &[f64]) -> Self {
        let h = grid.spacing();
        let psi = positions
            .iter()
            .map(|&a| {
                let mut v = vec![0.0; grid.len()];
                v[grid.nearest(a)] = 1.0 / h.sqrt();
                v
            })
            .collect();
        Self {
            psi,
            t: 0.0,
            norm_factor: vec![1.0; positions.len()],
        }
    }

    /// Samples `f(i, x)` on the grid (boundary forced to zero) and normalizes.
    pub fn from_fn(grid: &Grid1D, particles: usize, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let n = grid.len();
        let psi = (0..particles)
            .map(|i| {
                (0..n)
                    .map(|k| if k == 0 || k == n - 1 { 0.0 } else { f(i, grid.x(k)) })
                    .collect()
            })
            .collect();
        let mut field = Self {
            psi,
            t: 0.0,
            norm_factor: vec![1.0; particles],
        };
        field.normalize(grid)?;
        Ok(field)
    }

    pub fn particles(&self) -> usize {
        self.psi.len()
    }

    /// `max_i |h Σ ψ_i² - 1|`.
    pub fn normalization_error(&self, grid: &Grid1D) -> f64 {
        self.psi
            .iter()
            .map(|p| (grid.inner(p, p) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &GridField) -> f64 {
        self.psi
            .iter()
            .zip(&other.psi)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub(crate) fn normalize(&mut self, grid: &Grid1D) -> Result<()> {
        for (i, p) in self.psi.iter_mut().enumerate() {
            let norm = grid.inner(p, p).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::AllZero(i));
            }
            p.iter_mut().for_each(|v| *v /= norm);
            self.norm_factor[i] = norm;
        }
        Ok(())
    }
}
