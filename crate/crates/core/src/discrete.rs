//! Hard-decision cooperative optimization.
//!
//! Each variable keeps a table `Ψ_i(x_i)`; the separable sum `Σ_i Ψ_i(x_i)`
//! is a lower bound of the energy that tightens with every synchronous
//! sweep. Four update rules are provided:
//!
//! * [`general_update`]: minimization of the blended sub-energy over the
//!   joint settings of the owner's neighborhood,
//! * [`pairwise_update`]: the same rule factorized over pairwise terms,
//! * [`alpha_update`]: the rescaled form `Ψ' = Ψ / (1 - λ)` driven by a
//!   single strength `α`,
//! * [`offset_update`]: the α form with every table shifted to minimum zero.
//!
//! All sweeps are Jacobi style: every table at `t + 1` reads the snapshot at `t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyModel, SubEnergy};
use crate::error::{Error, Result};
use crate::par;

/// Absolute slack used when comparing the bound with the incumbent.
pub const CERT_EPS: f64 = 1e-9;
/// Number of consecutive sub-tolerance sweeps that count as convergence.
pub const STABLE_SWEEPS: usize = 3;
/// Upper limit on joint neighborhood settings enumerated per label by [`general_update`].
pub const GENERAL_MAX_JOINT: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    General,
    #[default]
    Pairwise,
    Alpha,
    Offset,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::General => "general",
            Variant::Pairwise => "pairwise",
            Variant::Alpha => "alpha",
            Variant::Offset => "offset",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(Variant::General),
            "pairwise" => Ok(Variant::Pairwise),
            "alpha" => Ok(Variant::Alpha),
            "offset" => Ok(Variant::Offset),
            _ => Err(Error::param(format!("unknown variant {s:?}"))),
        }
    }
}

/// Propagation weights, `get(i, j) = w_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    n: usize,
    data: Vec<f64>,
}

impl Weights {
    /// `w_ii = 0`, `w_ij = 1/(n-1)`; the single-variable case uses `w_11 = 1`.
    pub fn uniform(n: usize) -> Self {
        if n == 1 {
            return Self { n, data: vec![1.0] };
        }
        let a = 1.0 / (n - 1) as f64;
        let data = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { a }).collect();
        Self { n, data }
    }

    /// `w_ii = self_weight`, `w_ij = other` for every `i ≠ j`.
    pub fn constant(n: usize, self_weight: f64, other: f64) -> Self {
        let data = (0..n * n)
            .map(|k| if k / n == k % n { self_weight } else { other })
            .collect();
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("weight matrix must be square".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("weights must be finite and nonnegative"));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `Σ_i w_ij = 1` for every column within 1e-12.
    pub fn is_column_stochastic(&self) -> bool {
        (0..self.n).all(|j| {
            let s: f64 = (0..self.n).map(|i| self.get(i, j)).sum();
            (s - 1.0).abs() <= 1e-12
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopConfig {
    pub variant: Variant,
    /// Cooperation strength, `0 ≤ λ < 1`.
    pub lambda: f64,
    /// Defaults to [`Weights::uniform`].
    pub weights: Option<Weights>,
    /// Strength of the α/offset forms; defaults to `λ / (n - 1)`, the value
    /// matching the uniform weights.
    pub alpha: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for CoopConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Pairwise,
            lambda: 0.5,
            weights: None,
            alpha: None,
            max_iters: 1000,
            tol: 1e-10,
        }
    }
}

impl CoopConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::param(format!("lambda {} outside [0, 1)", self.lambda)));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::param("tol must be finite and nonnegative"));
        }
        if let Some(w) = &self.weights {
            if w.n() != n {
                return Err(Error::Shape(format!("weights are {0}x{0} for {n} variables", w.n())));
            }
            if self.variant == Variant::General && !w.is_column_stochastic() {
                return Err(Error::param("general variant needs column sums Σ_i w_ij = 1"));
            }
        }
        check_alpha(self.alpha_for(n))
    }

    pub fn weights_for(&self, n: usize) -> Weights {
        self.weights.clone().unwrap_or_else(|| Weights::uniform(n))
    }

    pub fn alpha_for(&self, n: usize) -> f64 {
        self.alpha
            .unwrap_or_else(|| if n > 1 { self.lambda / (n - 1) as f64 } else { 0.0 })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha {alpha} must be finite and nonnegative")))
    }
}

/// The evolving lower-bound tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundProfile {
    pub tables: Vec<Vec<f64>>,
    pub t: usize,
    pub variant: Variant,
    /// Offset variant: the exact amount by which each table lags the
    /// un-offset α trajectory, so that `Ψ' = Ψ'' + z_acc`.
    pub z_acc: Vec<f64>,
    /// True when the run started from a valid bound (all-zero tables).
    pub anchored: bool,
}

impl BoundProfile {
    pub fn zeros(model: &EnergyModel, variant: Variant) -> Self {
        let n = model.n();
        Self {
            tables: (0..n).map(|i| vec![0.0; model.domain_size(i)]).collect(),
            t: 0,
            variant,
            z_acc: vec![0.0; n],
            anchored: true,
        }
    }

    /// Tables drawn uniformly from `[0, max)`.
    pub fn random<R: Rng>(model: &EnergyModel, variant: Variant, max: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(model, variant);
        for t in &mut p.tables {
            t.iter_mut().for_each(|v| *v = rng.gen::<f64>() * max);
        }
        p.anchored = false;
        p
    }

    pub fn n(&self) -> usize {
        self.tables.len()
    }

    /// `max_{i, x_i} |Ψ_i(x_i) - other_i(x_i)|`.
    pub fn sup_distance(&self, other: &BoundProfile) -> f64 {
        self.tables
            .iter()
            .zip(&other.tables)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    fn expect(&self, v: Variant) -> Result<()> {
        if self.variant == v {
            Ok(())
        } else {
            Err(Error::VariantMismatch {
                expected: v.name(),
                found: self.variant.name(),
            })
        }
    }

    fn successor(&self, tables: Vec<Vec<f64>>) -> Self {
        Self {
            tables,
            t: self.t + 1,
            variant: self.variant,
            z_acc: self.z_acc.clone(),
            anchored: self.anchored,
        }
    }
}

fn table_min(t: &[f64]) -> f64 {
    t.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Lowest index of the minimum entry.
fn argmin(t: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in t.iter().enumerate().skip(1) {
        if v < t[best] {
            best = k;
        }
    }
    best
}

/// One sweep of the general rule:
/// `Ψ_i(x_i) ← min_{x_{X_i \ i}} [(1-λ) E_i(x) + λ Σ_j w_ij Ψ_j(x_j)]`.
///
/// Partners outside `X_i` do not interact with `E_i`, so their terms are
/// minimized independently.
pub fn general_update(profile: &BoundProfile, subs: &[SubEnergy<'_>], config: &CoopConfig) -> Result<BoundProfile> {
    profile.expect(Variant::General)?;
    let n = profile.n();
    if subs.len() != n {
        return Err(Error::Shape(format!("{} sub-energies for {n} tables", subs.len())));
    }
    config.validate(n)?;
    let w = config.weights_for(n);
    if !w.is_column_stochastic() {
        return Err(Error::param("general variant needs column sums Σ_i w_ij = 1"));
    }
    let lambda = config.lambda;
    let sizes: Vec<usize> = profile.tables.iter().map(Vec::len).collect();
    for s in subs {
        let joint = s
            .neighborhood()
            .iter()
            .filter(|&&j| j != s.owner())
            .fold(1u128, |acc, &j| acc.saturating_mul(sizes[j] as u128));
        if joint > GENERAL_MAX_JOINT {
            return Err(Error::TooLarge(format!(
                "neighborhood of variable {} has {joint} joint settings",
                s.owner()
            )));
        }
    }
    let mins: Vec<f64> = profile.tables.iter().map(|t| table_min(t)).collect();

    let tables = par::map_range(n, |i| {
        let sub = &subs[i];
        let hood = sub.neighborhood();
        let others: Vec<usize> = hood.iter().copied().filter(|&j| j != i).collect();
        let detached: f64 = (0..n)
            .filter(|j| hood.binary_search(j).is_err())
            .map(|j| lambda * w.get(i, j) * mins[j])
            .sum();
        let mut x = vec![0usize; n];
        (0..sizes[i])
            .map(|xi| {
                x[i] = xi;
                others.iter().for_each(|&j| x[j] = 0);
                let mut best = f64::INFINITY;
                loop {
                    let mut v = (1.0 - lambda) * sub.evaluate(&x);
                    for &j in hood {
                        v += lambda * w.get(i, j) * profile.tables[j][x[j]];
                    }
                    best = best.min(v);
                    // odometer over the other neighborhood variables
                    let mut pos = others.len();
                    loop {
                        if pos == 0 {
                            return best + detached;
                        }
                        pos -= 1;
                        let j = others[pos];
                        x[j] += 1;
                        if x[j] < sizes[j] {
                            break;
                        }
                        x[j] = 0;
                    }
                }
            })
            .collect()
    });
    Ok(profile.successor(tables))
}

fn pairwise_sweep(profile: &BoundProfile, model: &EnergyModel, lambda: f64, w: &Weights) -> Vec<Vec<f64>> {
    let n = profile.n();
    let tables = &profile.tables;
    par::map_range(n, |i| {
        let mut out: Vec<f64> = model
            .unary(i)
            .iter()
            .zip(&tables[i])
            .map(|(e, psi)| (1.0 - lambda) * e + lambda * w.get(i, i) * psi)
            .collect();
        let mut owned = model.pairs_of(i).iter().peekable();
        for j in (0..n).filter(|&j| j != i) {
            let wij = lambda * w.get(i, j);
            let pair = match owned.peek() {
                Some((k, t)) if *k == j => {
                    owned.next();
                    Some(t)
                }
                _ => None,
            };
            match pair {
                Some(t) => {
                    for (xi, o) in out.iter_mut().enumerate() {
                        *o += t
                            .row(xi)
                            .iter()
                            .zip(&tables[j])
                            .map(|(e, psi)| (1.0 - lambda) * e + wij * psi)
                            .fold(f64::INFINITY, f64::min);
                    }
                }
                None => {
                    let m = wij * table_min(&tables[j]);
                    out.iter_mut().for_each(|o| *o += m);
                }
            }
        }
        out
    })
}

/// `Ψ_i(x_i) ← (1-λ) e_i + λ w_ii Ψ_i + Σ_{j≠i} min_{x_j} [(1-λ) e_ij + λ w_ij Ψ_j]`.
pub fn pairwise_update(profile: &BoundProfile, model: &EnergyModel, config: &CoopConfig) -> Result<BoundProfile> {
    profile.expect(Variant::Pairwise)?;
    config.validate(model.n())?;
    check_shapes(profile, model)?;
    let w = config.weights_for(model.n());
    Ok(profile.successor(pairwise_sweep(profile, model, config.lambda, &w)))
}

fn alpha_sweep(tables: &[Vec<f64>], model: &EnergyModel, alpha: f64) -> Vec<Vec<f64>> {
    let n = model.n();
    par::map_range(n, |i| {
        let mut out = model.unary(i).to_vec();
        let mut owned = model.pairs_of(i).iter().peekable();
        for j in (0..n).filter(|&j| j != i) {
            match owned.peek() {
                Some((k, t)) if *k == j => {
                    for (xi, o) in out.iter_mut().enumerate() {
                        *o += t
                            .row(xi)
                            .iter()
                            .zip(&tables[j])
                            .map(|(e, psi)| e + alpha * psi)
                            .fold(f64::INFINITY, f64::min);
                    }
                    owned.next();
                }
                _ => {
                    let m = alpha * table_min(&tables[j]);
                    out.iter_mut().for_each(|o| *o += m);
                }
            }
        }
        out
    })
}

fn check_shapes(profile: &BoundProfile, model: &EnergyModel) -> Result<()> {
    let ok = profile.n() == model.n()
        && profile
            .tables
            .iter()
            .enumerate()
            .all(|(i, t)| t.len() == model.domain_size(i));
    if ok {
        Ok(())
    } else {
        Err(Error::Shape("bound tables do not match the model domains".into()))
    }
}

/// `Ψ'_i(x_i) ← e_i(x_i) + Σ_{j≠i} min_{x_j} [e_ij(x_i, x_j) + α Ψ'_j(x_j)]`.
pub fn alpha_update(profile: &BoundProfile, model: &EnergyModel, alpha: f64) -> Result<BoundProfile> {
    profile.expect(Variant::Alpha)?;
    check_alpha(alpha)?;
    check_shapes(profile, model)?;
    Ok(profile.successor(alpha_sweep(&profile.tables, model, alpha)))
}

/// The α sweep followed by `Ψ''_i ← Ψ''_i - z_i` with `z_i = min Ψ''_i`.
pub fn offset_update(profile: &BoundProfile, model: &EnergyModel, alpha: f64) -> Result<BoundProfile> {
    profile.expect(Variant::Offset)?;
    check_alpha(alpha)?;
    check_shapes(profile, model)?;
    let mut tables = alpha_sweep(&profile.tables, model, alpha);
    let n = model.n();
    let total: f64 = profile.z_acc.iter().sum();
    let mut z_acc = Vec::with_capacity(n);
    for (i, t) in tables.iter_mut().enumerate() {
        let z = table_min(t);
        t.iter_mut().for_each(|v| *v -= z);
        z_acc.push(z + alpha * (total - profile.z_acc[i]));
    }
    let mut next = profile.successor(tables);
    next.z_acc = z_acc;
    Ok(next)
}

/// Applies the update matching the profile's variant.
pub fn step(
    profile: &BoundProfile,
    model: &EnergyModel,
    subs: &[SubEnergy<'_>],
    config: &CoopConfig,
) -> Result<BoundProfile> {
    let alpha = config.alpha_for(model.n());
    match profile.variant {
        Variant::General => general_update(profile, subs, config),
        Variant::Pairwise => pairwise_update(profile, model, config),
        Variant::Alpha => alpha_update(profile, model, alpha),
        Variant::Offset => offset_update(profile, model, alpha),
    }
}

/// `x*_i = argmin Ψ_i`, lowest label index on ties.
pub fn extract_assignment(profile: &BoundProfile) -> Vec<usize> {
    profile.tables.iter().map(|t| argmin(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lower_bound: f64,
    pub assignment: Vec<usize>,
    pub upper_bound: f64,
    pub certified: bool,
    /// False when the tables carry no bound guarantee (random start,
    /// non-stochastic weights, or an α form without an equivalent λ < 1);
    /// the lower bound then falls back to the shift.
    pub bound_valid: bool,
}

/// Bound tables in the unscaled `Ψ` convention, when they are a valid bound.
pub fn lower_bound_tables(profile: &BoundProfile, model: &EnergyModel, config: &CoopConfig) -> Option<Vec<Vec<f64>>> {
    if !profile.anchored {
        return None;
    }
    let n = model.n();
    match profile.variant {
        Variant::General | Variant::Pairwise => config
            .weights_for(n)
            .is_column_stochastic()
            .then(|| profile.tables.clone()),
        Variant::Alpha | Variant::Offset => {
            // α = λ a with a = 1/(n-1) is the only column-stochastic choice of
            // w_ii = 0, w_ij = a, so the equivalent cooperation strength is:
            let lambda = config.alpha_for(n) * (n.max(1) - 1) as f64;
            if lambda >= 1.0 || profile.z_acc.iter().any(|z| !z.is_finite()) {
                return None;
            }
            Some(
                profile
                    .tables
                    .iter()
                    .zip(&profile.z_acc)
                    .map(|(t, z)| t.iter().map(|v| (1.0 - lambda) * (v + z)).collect())
                    .collect(),
            )
        }
    }
}

/// Compares the separable lower bound against the energy of the extracted assignment.
pub fn certify(profile: &BoundProfile, model: &EnergyModel, config: &CoopConfig) -> Certificate {
    let assignment = extract_assignment(profile);
    let upper_bound = model.evaluate_unchecked(&assignment);
    let tables = lower_bound_tables(profile, model, config);
    let bound_valid = tables.is_some();
    let lower_bound = match tables {
        Some(t) => t.iter().map(|t| table_min(t)).sum::<f64>() + model.shift(),
        None => model.shift(),
    };
    Certificate {
        certified: upper_bound - lower_bound <= CERT_EPS,
        lower_bound,
        assignment,
        upper_bound,
        bound_valid,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTraceRow {
    pub iter: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteReport {
    pub config: CoopConfig,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<BoundTraceRow>,
    pub certificate: Certificate,
    pub assignment: Vec<usize>,
    pub labels: Vec<String>,
    pub energy: f64,
    pub profile: BoundProfile,
}

/// Runs the configured variant from all-zero tables.
pub fn solve_discrete(model: &EnergyModel, config: &CoopConfig) -> Result<DiscreteReport> {
    solve_discrete_from(model, config, BoundProfile::zeros(model, config.variant))
}

/// Runs from a given starting profile until the sup-norm change stays at or
/// below `tol` for [`STABLE_SWEEPS`] sweeps, or `max_iters` is reached.
pub fn solve_discrete_from(model: &EnergyModel, config: &CoopConfig, init: BoundProfile) -> Result<DiscreteReport> {
    config.validate(model.n())?;
    check_shapes(&init, model)?;
    if init.variant != config.variant {
        return Err(Error::VariantMismatch {
            expected: config.variant.name(),
            found: init.variant.name(),
        });
    }
    let subs = model.decompose();
    let mut profile = init;
    let mut trace = Vec::new();
    let mut calm = 0;
    let mut converged = false;
    for iter in 1..=config.max_iters {
        let next = step(&profile, model, &subs, config)?;
        let delta = next.sup_distance(&profile);
        profile = next;
        let cert = certify(&profile, model, config);
        trace.push(BoundTraceRow {
            iter,
            lower_bound: cert.lower_bound,
            upper_bound: cert.upper_bound,
            delta,
        });
        calm = if delta <= config.tol { calm + 1 } else { 0 };
        if calm >= STABLE_SWEEPS {
            converged = true;
            break;
        }
        if !delta.is_finite() {
            break;
        }
    }
    let certificate = certify(&profile, model, config);
    let assignment = certificate.assignment.clone();
    Ok(DiscreteReport {
        config: config.clone(),
        iterations: trace.len(),
        converged,
        labels: model.labels_of(&assignment),
        energy: certificate.upper_bound,
        assignment,
        certificate,
        trace,
        profile,
    })
}
