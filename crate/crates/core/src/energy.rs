//! Pairwise-decomposable energy functions over finite domains.
//!
//! An [`EnergyModel`] stores `E(x) = Σ_i e_i(x_i) + Σ_i Σ_{j≠i} e_ij(x_i, x_j) + shift`
//! with every stored table nonnegative. Pairwise terms are keyed by ordered
//! pairs; the term `(i, j)` belongs to variable `i` when the energy is split
//! into per-variable sub-energies.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, duplicate-free list of labels a variable may take.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteDomain {
    labels: Vec<String>,
}

impl DiscreteDomain {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Shape("domain must have at least one label".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Shape(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Domain `{"0", "1", ..., "m-1"}`.
    pub fn indexed(m: usize) -> Result<Self> {
        Self::new((0..m).map(|k| k.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }
}

/// Dense `rows × cols` table for one ordered pair, row index = owner's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PairTable {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::Shape("empty pairwise table".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged pairwise table".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row `a`, i.e. `e_ij(a, ·)`.
    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.cols..(a + 1) * self.cols]
    }

    fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Raw pairwise input: `table[a][b] = e_ij(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub table: Vec<Vec<f64>>,
}

impl PairTerm {
    pub fn new(i: usize, j: usize, table: Vec<Vec<f64>>) -> Self {
        Self { i, j, table }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    domains: Vec<DiscreteDomain>,
    unary: Vec<Vec<f64>>,
    /// `pairs[i]` holds `(j, e_ij)` sorted by `j`.
    pairs: Vec<Vec<(usize, PairTable)>>,
    shift: f64,
}

impl EnergyModel {
    /// Builds a model with index labels taken from the unary table lengths.
    pub fn from_tables(unary: Vec<Vec<f64>>, pairwise: Vec<PairTerm>) -> Result<Self> {
        let domains = unary
            .iter()
            .map(|u| DiscreteDomain::indexed(u.len()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(domains, unary, pairwise)
    }

    /// Validates the tables and moves every negative table minimum into `shift`.
    pub fn new(domains: Vec<DiscreteDomain>, mut unary: Vec<Vec<f64>>, pairwise: Vec<PairTerm>) -> Result<Self> {
        let n = domains.len();
        if unary.len() != n {
            return Err(Error::Shape(format!("{} unary tables for {n} variables", unary.len())));
        }
        for (i, (u, d)) in unary.iter().zip(&domains).enumerate() {
            if u.len() != d.len() {
                return Err(Error::Shape(format!(
                    "unary table {i} has {} entries, domain has {}",
                    u.len(),
                    d.len()
                )));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("unary table {i}")));
            }
        }

        let mut shift = 0.0;
        for u in &mut unary {
            let m = u.iter().copied().fold(f64::INFINITY, f64::min);
            if m < 0.0 {
                u.iter_mut().for_each(|v| *v -= m);
                shift += m;
            }
        }

        let mut pairs: Vec<Vec<(usize, PairTable)>> = vec![Vec::new(); n];
        for term in pairwise {
            let PairTerm { i, j, table } = term;
            if i >= n || j >= n {
                return Err(Error::Shape(format!("pair ({i},{j}) out of range for {n} variables")));
            }
            if i == j {
                return Err(Error::SelfPair(i));
            }
            let mut t = PairTable::from_rows(&table).map_err(|e| Error::Shape(format!("pair ({i},{j}): {e}")))?;
            if t.rows != domains[i].len() || t.cols != domains[j].len() {
                return Err(Error::Shape(format!(
                    "pair ({i},{j}) table is {}x{}, expected {}x{}",
                    t.rows,
                    t.cols,
                    domains[i].len(),
                    domains[j].len()
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("pair ({i},{j})")));
            }
            if pairs[i].iter().any(|(k, _)| *k == j) {
                return Err(Error::Shape(format!("pair ({i},{j}) given twice")));
            }
            let m = t.min();
            if m < 0.0 {
                t.data.iter_mut().for_each(|v| *v -= m);
                shift += m;
            }
            pairs[i].push((j, t));
        }
        for p in &mut pairs {
            p.sort_by_key(|(j, _)| *j);
        }

        Ok(Self {
            domains,
            unary,
            pairs,
            shift,
        })
    }

    pub fn n(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[DiscreteDomain] {
        &self.domains
    }

    pub fn domain_size(&self, i: usize) -> usize {
        self.domains[i].len()
    }

    pub fn unary(&self, i: usize) -> &[f64] {
        &self.unary[i]
    }

    /// Pairwise terms owned by variable `i`, sorted by partner index.
    pub fn pairs_of(&self, i: usize) -> &[(usize, PairTable)] {
        &self.pairs[i]
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairTable> {
        self.pairs[i].iter().find_map(|(k, t)| (*k == j).then_some(t))
    }

    /// Sum of the table minima removed at construction.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Number of joint assignments, saturating at `u128::MAX`.
    pub fn state_space(&self) -> u128 {
        self.domains
            .iter()
            .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    pub fn check_assignment(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Shape(format!(
                "assignment has {} entries for {} variables",
                x.len(),
                self.n()
            )));
        }
        for (i, (&xi, d)) in x.iter().zip(&self.domains).enumerate() {
            if xi >= d.len() {
                return Err(Error::OutOfDomain {
                    variable: i,
                    label: xi,
                    size: d.len(),
                });
            }
        }
        Ok(())
    }

    /// `E(x)` including the shift.
    pub fn evaluate(&self, x: &[usize]) -> Result<f64> {
        self.check_assignment(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[usize]) -> f64 {
        let mut e = self.shift;
        for i in 0..self.n() {
            e += self.unary[i][x[i]];
            for (j, t) in &self.pairs[i] {
                e += t.get(x[i], x[*j]);
            }
        }
        e
    }

    /// Per-variable sub-energies `E_i`; their sum is `E - shift`.
    pub fn decompose(&self) -> Vec<SubEnergy<'_>> {
        (0..self.n())
            .map(|i| {
                let mut hood: Vec<usize> = self.pairs[i].iter().map(|(j, _)| *j).collect();
                hood.push(i);
                hood.sort_unstable();
                hood.dedup();
                SubEnergy {
                    owner: i,
                    neighborhood: hood,
                    model: self,
                }
            })
            .collect()
    }

    /// Labels for an assignment given as label indices.
    pub fn labels_of(&self, x: &[usize]) -> Vec<String> {
        x.iter()
            .zip(&self.domains)
            .map(|(&k, d)| d.label(k).to_owned())
            .collect()
    }
}

/// `E_i(x) = e_i(x_i) + Σ_{j≠i} e_ij(x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct SubEnergy<'a> {
    owner: usize,
    neighborhood: Vec<usize>,
    model: &'a EnergyModel,
}

impl SubEnergy<'_> {
    pub fn owner(&self) -> usize {
        self.owner
    }

    /// `X_i`: the owner plus every partner of an owned pairwise term.
    pub fn neighborhood(&self) -> &[usize] {
        &self.neighborhood
    }

    /// Evaluates on a full assignment; entries outside the neighborhood are ignored.
    pub fn evaluate(&self, x: &[usize]) -> f64 {
        let i = self.owner;
        let mut e = self.model.unary[i][x[i]];
        for (j, t) in &self.model.pairs[i] {
            e += t.get(x[i], x[*j]);
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn potts(m: usize, c: f64) -> Vec<Vec<f64>> {
        (0..m)
            .map(|a| (0..m).map(|b| if a == b { 0.0 } else { c }).collect())
            .collect()
    }

    pub(crate) fn two_var() -> EnergyModel {
        EnergyModel::from_tables(
            vec![vec![0.0, 1.0], vec![0.0, 2.0]],
            vec![PairTerm::new(0, 1, potts(2, 3.0)), PairTerm::new(1, 0, potts(2, 3.0))],
        )
        .unwrap()
    }

    #[test]
    fn two_variable_energies() {
        let m = two_var();
        assert_eq!(m.evaluate(&[0, 0]).unwrap(), 0.0);
        assert_eq!(m.evaluate(&[1, 1]).unwrap(), 3.0);
        assert_eq!(m.evaluate(&[0, 1]).unwrap(), 8.0);
        assert_eq!(m.evaluate(&[1, 0]).unwrap(), 7.0);
    }

    #[test]
    fn zero_model() {
        let m = EnergyModel::from_tables(
            vec![vec![0.0; 3], vec![0.0; 2]],
            vec![PairTerm::new(0, 1, vec![vec![0.0; 2]; 3])],
        )
        .unwrap();
        assert_eq!(m.shift(), 0.0);
        for a in 0..3 {
            for b in 0..2 {
                assert_eq!(m.evaluate(&[a, b]).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn negative_unary_moves_into_shift() {
        let m = EnergyModel::from_tables(vec![vec![-2.0, 0.0]], vec![]).unwrap();
        assert_eq!(m.unary(0), &[0.0, 2.0]);
        assert_eq!(m.shift(), -2.0);
        assert_eq!(m.evaluate(&[0]).unwrap(), -2.0);
        assert_eq!(m.evaluate(&[1]).unwrap(), 0.0);
    }

    #[test]
    fn negative_pair_moves_into_shift() {
        let m = EnergyModel::from_tables(
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![PairTerm::new(0, 1, vec![vec![-1.0, 2.0], vec![0.5, -3.0]])],
        )
        .unwrap();
        assert_eq!(m.shift(), -3.0);
        assert_eq!(m.pair(0, 1).unwrap().get(1, 1), 0.0);
        assert_eq!(m.evaluate(&[0, 0]).unwrap(), -1.0);
        assert_eq!(m.evaluate(&[1, 1]).unwrap(), -3.0);
    }

    #[test]
    fn single_variable_evaluates_unary_plus_shift() {
        let m = EnergyModel::from_tables(vec![vec![1.5, -0.5, 4.0]], vec![]).unwrap();
        for k in 0..3 {
            assert_eq!(m.evaluate(&[k]).unwrap(), m.unary(0)[k] + m.shift());
        }
        assert_eq!(m.evaluate(&[2]).unwrap(), 4.0);
    }

    #[test]
    fn construction_errors() {
        let bad_shape = EnergyModel::from_tables(
            vec![vec![0.0, 0.0], vec![0.0]],
            vec![PairTerm::new(0, 1, vec![vec![0.0, 0.0]; 2])],
        );
        assert!(matches!(bad_shape, Err(Error::Shape(_))));

        let nan = EnergyModel::from_tables(vec![vec![0.0, f64::NAN]], vec![]);
        assert!(matches!(nan, Err(Error::NonFinite(_))));

        let inf_pair = EnergyModel::from_tables(
            vec![vec![0.0], vec![0.0]],
            vec![PairTerm::new(0, 1, vec![vec![f64::INFINITY]])],
        );
        assert!(matches!(inf_pair, Err(Error::NonFinite(_))));

        let self_pair =
            EnergyModel::from_tables(vec![vec![0.0, 1.0]], vec![PairTerm::new(0, 0, vec![vec![0.0; 2]; 2])]);
        assert!(matches!(self_pair, Err(Error::SelfPair(0))));

        let dup = DiscreteDomain::new(vec!["a".into(), "a".into()]);
        assert!(dup.is_err());
        assert!(DiscreteDomain::new(vec![]).is_err());
    }

    #[test]
    fn out_of_domain_label() {
        let m = two_var();
        assert!(matches!(
            m.evaluate(&[0, 2]),
            Err(Error::OutOfDomain {
                variable: 1,
                label: 2,
                size: 2
            })
        ));
        assert!(matches!(m.evaluate(&[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn decomposition_of_two_variable_model() {
        let m = two_var();
        let subs = m.decompose();
        assert_eq!(subs.len(), 2);
        for a in 0..2 {
            for b in 0..2 {
                let x = [a, b];
                let e1 = m.unary(0)[a] + m.pair(0, 1).unwrap().get(a, b);
                let e2 = m.unary(1)[b] + m.pair(1, 0).unwrap().get(b, a);
                assert_eq!(subs[0].evaluate(&x), e1);
                assert_eq!(subs[1].evaluate(&x), e2);
                assert_eq!(e1 + e2 + m.shift(), m.evaluate(&x).unwrap());
            }
        }
    }

    #[test]
    fn separable_decomposition() {
        let m = EnergyModel::from_tables(vec![vec![1.0, 0.0], vec![3.0, 2.0, 1.0]], vec![]).unwrap();
        let subs = m.decompose();
        assert_eq!(subs[0].neighborhood(), &[0]);
        assert_eq!(subs[1].neighborhood(), &[1]);
        assert_eq!(subs[1].evaluate(&[0, 2]), 1.0);
    }

    #[test]
    fn chain_neighborhoods() {
        let t = vec![vec![0.0; 2]; 2];
        let m = EnergyModel::from_tables(
            vec![vec![0.0; 2]; 3],
            vec![
                PairTerm::new(0, 1, t.clone()),
                PairTerm::new(1, 0, t.clone()),
                PairTerm::new(1, 2, t.clone()),
                PairTerm::new(2, 1, t),
            ],
        )
        .unwrap();
        let subs = m.decompose();
        assert_eq!(subs[0].neighborhood(), &[0, 1]);
        assert_eq!(subs[1].neighborhood(), &[0, 1, 2]);
        assert_eq!(subs[2].neighborhood(), &[1, 2]);
    }
}
