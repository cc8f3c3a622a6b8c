//! Seeded random instances for tests, benches and the CLI.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{EnergyModel, PairTerm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub min_vars: usize,
    pub max_vars: usize,
    pub min_domain: usize,
    pub max_domain: usize,
    /// Entries are drawn uniformly from `[0, max_energy]`.
    pub max_energy: f64,
    /// Chance that an unordered pair is coupled; coupled pairs get an
    /// independent table in each direction.
    pub pair_prob: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            min_vars: 2,
            max_vars: 8,
            min_domain: 2,
            max_domain: 5,
            max_energy: 10.0,
            pair_prob: 0.5,
        }
    }
}

pub fn random_model<R: Rng>(spec: &InstanceSpec, rng: &mut R) -> EnergyModel {
    let n = rng.gen_range(spec.min_vars..=spec.max_vars);
    let sizes: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(spec.min_domain..=spec.max_domain))
        .collect();
    let draw =
        |len: usize, rng: &mut R| -> Vec<f64> { (0..len).map(|_| rng.gen_range(0.0..=spec.max_energy)).collect() };
    let unary: Vec<Vec<f64>> = sizes.iter().map(|&m| draw(m, rng)).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(spec.pair_prob) {
                for (a, b) in [(i, j), (j, i)] {
                    let table = (0..sizes[a]).map(|_| draw(sizes[b], rng)).collect();
                    pairs.push(PairTerm::new(a, b, table));
                }
            }
        }
    }
    EnergyModel::from_tables(unary, pairs).expect("generated tables are well formed")
}

/// Instance `index` of the family seeded by `seed`; each instance has its
/// own stream so the list can be generated in any order.
pub fn seeded_model(spec: &InstanceSpec, seed: u64, index: u64) -> EnergyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    random_model(spec, &mut rng)
}
