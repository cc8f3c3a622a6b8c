//! Soft-assignment dynamics.
//!
//! A soft assignment `ψ_i(x_i) ≥ 0` is the exponentiated negative bound
//! table, `ψ = exp(-Ψ''/ħ)`. The max-product sweep is the exact image of the
//! offset min-sum sweep; the sum-product sweep replaces each max by a sum
//! and weights partners by `ψ_j²`.

use serde::{Deserialize, Serialize};

use crate::discrete::STABLE_SWEEPS;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::par;

/// Below this ħ the sum-product sweep runs on logarithms.
pub const LOG_DOMAIN_HBAR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftAssignment {
    pub tables: Vec<Vec<f64>>,
    pub hbar: f64,
    pub t: usize,
    /// `ln Z_i` of the most recent normalization.
    pub log_z: Vec<f64>,
}

impl SoftAssignment {
    /// All-ones tables, the max-normalized uniform state.
    pub fn ones(model: &EnergyModel, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        let n = model.n();
        Ok(Self {
            tables: (0..n).map(|i| vec![1.0; model.domain_size(i)]).collect(),
            hbar,
            t: 0,
            log_z: vec![0.0; n],
        })
    }

    /// Uniform tables with `Σ ψ² = 1`.
    pub fn uniform(model: &EnergyModel, hbar: f64) -> Result<Self> {
        let mut s = Self::ones(model, hbar)?;
        for t in &mut s.tables {
            let v = 1.0 / (t.len() as f64).sqrt();
            t.iter_mut().for_each(|x| *x = v);
        }
        Ok(s)
    }

    /// `exp(-Ψ''/ħ)` for bound tables `Ψ''`.
    pub fn from_bounds(tables: &[Vec<f64>], hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        Ok(Self {
            tables: tables
                .iter()
                .map(|t| t.iter().map(|v| (-v / hbar).exp()).collect())
                .collect(),
            hbar,
            t: 0,
            log_z: vec![0.0; tables.len()],
        })
    }

    /// `-ħ ln ψ`, the bound tables this assignment encodes.
    pub fn to_bounds(&self) -> Vec<Vec<f64>> {
        self.tables
            .iter()
            .map(|t| t.iter().map(|v| -self.hbar * v.ln()).collect())
            .collect()
    }

    pub fn z(&self, i: usize) -> f64 {
        self.log_z[i].exp()
    }

    pub fn n(&self) -> usize {
        self.tables.len()
    }

    pub fn max_change(&self, other: &SoftAssignment) -> f64 {
        self.tables
            .iter()
            .zip(&other.tables)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    fn check(&self, model: &EnergyModel) -> Result<()> {
        check_hbar(self.hbar)?;
        let ok = self.n() == model.n()
            && self
                .tables
                .iter()
                .enumerate()
                .all(|(i, t)| t.len() == model.domain_size(i));
        if !ok {
            return Err(Error::Shape("soft tables do not match the model domains".into()));
        }
        for (i, t) in self.tables.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::param(format!("table {i} has negative or non-finite entries")));
            }
            if t.iter().all(|&v| v == 0.0) {
                return Err(Error::AllZero(i));
            }
        }
        Ok(())
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar > 0.0 && hbar.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("hbar {hbar} must be positive")))
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Turns a table of logarithms into `(ψ, ln Z)` with `Σ ψ² = 1`.
fn normalize_logs(i: usize, logs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return Err(Error::AllZero(i));
    }
    let raw: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let sq: f64 = raw.iter().map(|v| v * v).sum();
    let norm = sq.sqrt();
    Ok((raw.iter().map(|v| v / norm).collect(), 2.0 * m + sq.ln()))
}

/// `ψ_i ← exp(-e_i/ħ) Π_{j≠i} max_{x_j} [exp(-e_ij/ħ) ψ_j^α]`, scaled so
/// that `max ψ_i = 1`. Computed on logarithms throughout.
pub fn maxproduct_update(sa: &SoftAssignment, model: &EnergyModel, alpha: f64) -> Result<SoftAssignment> {
    sa.check(model)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::param(format!("alpha {alpha} must be finite and nonnegative")));
    }
    let hbar = sa.hbar;
    let n = model.n();
    let logs: Vec<Vec<f64>> = sa
        .tables
        .iter()
        .map(|t| {
            t.iter()
                .map(|v| if alpha == 0.0 { 0.0 } else { alpha * v.ln() })
                .collect()
        })
        .collect();
    let results = par::map_range(n, |i| {
        let mut out: Vec<f64> = model.unary(i).iter().map(|e| -e / hbar).collect();
        let mut owned = model.pairs_of(i).iter().peekable();
        for j in (0..n).filter(|&j| j != i) {
            match owned.peek() {
                Some((k, t)) if *k == j => {
                    for (xi, o) in out.iter_mut().enumerate() {
                        *o += t
                            .row(xi)
                            .iter()
                            .zip(&logs[j])
                            .map(|(e, l)| -e / hbar + l)
                            .fold(f64::NEG_INFINITY, f64::max);
                    }
                    owned.next();
                }
                _ => {
                    let m = logs[j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    out.iter_mut().for_each(|o| *o += m);
                }
            }
        }
        let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY || top.is_nan() {
            return Err(Error::AllZero(i));
        }
        Ok((out.iter().map(|l| (l - top).exp()).collect::<Vec<_>>(), top))
    });
    let mut tables = Vec::with_capacity(n);
    let mut log_z = Vec::with_capacity(n);
    for r in results {
        let (t, top) = r?;
        tables.push(t);
        log_z.push(top);
    }
    Ok(SoftAssignment {
        tables,
        hbar,
        t: sa.t + 1,
        log_z,
    })
}

/// `ψ_i ← Z_i⁻¹ exp(-e_i/ħ) Π_{j≠i} Σ_{x_j} exp(-e_ij/ħ) ψ_j²` with
/// `Z_i` chosen so that `Σ ψ_i² = 1`.
pub fn sumproduct_update(sa: &SoftAssignment, model: &EnergyModel) -> Result<SoftAssignment> {
    sa.check(model)?;
    let results = if sa.hbar < LOG_DOMAIN_HBAR {
        sumproduct_logs(sa, model)
    } else {
        sumproduct_direct(sa, model)
    };
    let mut tables = Vec::with_capacity(model.n());
    let mut log_z = Vec::with_capacity(model.n());
    for r in results {
        let (t, lz) = r?;
        tables.push(t);
        log_z.push(lz);
    }
    Ok(SoftAssignment {
        tables,
        hbar: sa.hbar,
        t: sa.t + 1,
        log_z,
    })
}

fn sumproduct_direct(sa: &SoftAssignment, model: &EnergyModel) -> Vec<Result<(Vec<f64>, f64)>> {
    let hbar = sa.hbar;
    let n = model.n();
    let sq: Vec<Vec<f64>> = sa.tables.iter().map(|t| t.iter().map(|v| v * v).collect()).collect();
    par::map_range(n, |i| {
        let mut out: Vec<f64> = model.unary(i).iter().map(|e| (-e / hbar).exp()).collect();
        let mut owned = model.pairs_of(i).iter().peekable();
        for j in (0..n).filter(|&j| j != i) {
            match owned.peek() {
                Some((k, t)) if *k == j => {
                    for (xi, o) in out.iter_mut().enumerate() {
                        *o *= t
                            .row(xi)
                            .iter()
                            .zip(&sq[j])
                            .map(|(e, p)| (-e / hbar).exp() * p)
                            .sum::<f64>();
                    }
                    owned.next();
                }
                _ => {
                    let s: f64 = sq[j].iter().sum();
                    out.iter_mut().for_each(|o| *o *= s);
                }
            }
        }
        let z: f64 = out.iter().map(|v| v * v).sum();
        if !z.is_finite() || z <= 0.0 {
            // fall back to logarithms when the direct product under/overflows
            return Err(Error::AllZero(i));
        }
        let norm = z.sqrt();
        Ok((out.iter().map(|v| v / norm).collect(), z.ln()))
    })
    .into_iter()
    .enumerate()
    .map(|(i, r)| match r {
        Err(Error::AllZero(_)) => sumproduct_logs_one(sa, model, i),
        other => other,
    })
    .collect()
}

fn sumproduct_logs(sa: &SoftAssignment, model: &EnergyModel) -> Vec<Result<(Vec<f64>, f64)>> {
    par::map_range(model.n(), |i| sumproduct_logs_one(sa, model, i))
}

fn sumproduct_logs_one(sa: &SoftAssignment, model: &EnergyModel, i: usize) -> Result<(Vec<f64>, f64)> {
    let hbar = sa.hbar;
    let n = model.n();
    let mut out: Vec<f64> = model.unary(i).iter().map(|e| -e / hbar).collect();
    let mut owned = model.pairs_of(i).iter().peekable();
    for j in (0..n).filter(|&j| j != i) {
        let log_sq: Vec<f64> = sa.tables[j].iter().map(|v| 2.0 * v.ln()).collect();
        match owned.peek() {
            Some((k, t)) if *k == j => {
                for (xi, o) in out.iter_mut().enumerate() {
                    *o += log_sum_exp(t.row(xi).iter().zip(&log_sq).map(|(e, l)| -e / hbar + l));
                }
                owned.next();
            }
            _ => {
                let s = log_sum_exp(log_sq.iter().copied());
                out.iter_mut().for_each(|o| *o += s);
            }
        }
    }
    normalize_logs(i, &out)
}

/// Scales each table to `Σ ψ² = 1`, recording `Z_i = Σ ψ²` beforehand.
pub fn normalize(sa: &SoftAssignment) -> Result<SoftAssignment> {
    let mut out = sa.clone();
    for (i, t) in out.tables.iter_mut().enumerate() {
        let z: f64 = t.iter().map(|v| v * v).sum();
        if !z.is_finite() || z <= 0.0 {
            return Err(Error::AllZero(i));
        }
        let norm = z.sqrt();
        t.iter_mut().for_each(|v| *v /= norm);
        out.log_z[i] = z.ln();
    }
    Ok(out)
}

/// `x*_i = argmax ψ_i²`, lowest label index on ties.
pub fn extract_decision(sa: &SoftAssignment) -> Vec<usize> {
    sa.tables
        .iter()
        .map(|t| {
            let mut best = 0;
            for (k, &v) in t.iter().enumerate().skip(1) {
                if v * v > t[best] * t[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SoftMode {
    #[serde(rename = "maxprod")]
    MaxProduct,
    #[default]
    #[serde(rename = "sumprod")]
    SumProduct,
}

impl std::str::FromStr for SoftMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxprod" => Ok(SoftMode::MaxProduct),
            "sumprod" => Ok(SoftMode::SumProduct),
            _ => Err(Error::param(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftConfig {
    pub mode: SoftMode,
    pub hbar: f64,
    /// Max-product strength; defaults to `0.5 / (n - 1)`, the discrete default.
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SoftConfig {
    fn default() -> Self {
        Self {
            mode: SoftMode::SumProduct,
            hbar: 1.0,
            alpha: None,
            tol: 1e-10,
            max_iters: 1000,
        }
    }
}

impl SoftConfig {
    pub fn alpha_for(&self, n: usize) -> f64 {
        self.alpha.unwrap_or(if n > 1 { 0.5 / (n - 1) as f64 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTraceRow {
    pub iter: usize,
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftReport {
    pub config: SoftConfig,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<SoftTraceRow>,
    pub assignment: Vec<usize>,
    pub labels: Vec<String>,
    pub energy: f64,
    pub state: SoftAssignment,
}

/// Iterates from the uniform state until the largest entry change stays at
/// or below `tol` for three sweeps.
pub fn solve_soft(model: &EnergyModel, config: &SoftConfig) -> Result<SoftReport> {
    if !(config.tol >= 0.0 && config.tol.is_finite()) {
        return Err(Error::param("tol must be finite and nonnegative"));
    }
    let alpha = config.alpha_for(model.n());
    let mut state = match config.mode {
        SoftMode::MaxProduct => SoftAssignment::ones(model, config.hbar)?,
        SoftMode::SumProduct => SoftAssignment::uniform(model, config.hbar)?,
    };
    let mut trace = Vec::new();
    let mut calm = 0;
    let mut converged = false;
    for iter in 1..=config.max_iters {
        let next = match config.mode {
            SoftMode::MaxProduct => maxproduct_update(&state, model, alpha)?,
            SoftMode::SumProduct => sumproduct_update(&state, model)?,
        };
        let max_change = next.max_change(&state);
        state = next;
        trace.push(SoftTraceRow { iter, max_change });
        calm = if max_change <= config.tol { calm + 1 } else { 0 };
        if calm >= STABLE_SWEEPS {
            converged = true;
            break;
        }
    }
    let assignment = extract_decision(&state);
    Ok(SoftReport {
        config: config.clone(),
        iterations: trace.len(),
        converged,
        labels: model.labels_of(&assignment),
        energy: model.evaluate_unchecked(&assignment),
        assignment,
        trace,
        state,
    })
}
