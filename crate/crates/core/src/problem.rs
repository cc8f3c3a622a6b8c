//! JSON problem files.
//!
//! Discrete problems list variables with their labels, one unary table per
//! variable and ordered pairwise tables:
//!
//! ```json
//! {
//!   "variables": [{"name": "a", "values": [0, 1]}, {"name": "b", "values": ["lo", "hi"]}],
//!   "unary": [[0, 1], [0, 2]],
//!   "pairwise": [{"i": 0, "j": 1, "table": [[0, 3], [3, 0]]}]
//! }
//! ```
//!
//! Continuous problems name built-in potentials only:
//!
//! ```json
//! {
//!   "particles": [{"name": "p", "mass": 1.0, "potential": {"type": "harmonic", "omega": 1.0}}],
//!   "pairwise": [{"i": 0, "j": 1, "potential": {"type": "pair_harmonic", "k": 1.0}}]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::continuous::ContinuousProblem;
use crate::energy::{DiscreteDomain, EnergyModel, PairTerm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub i: usize,
    pub j: usize,
    pub table: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteProblemFile {
    pub variables: Vec<VariableSpec>,
    pub unary: Vec<Vec<f64>>,
    #[serde(default)]
    pub pairwise: Vec<PairSpec>,
}

fn label_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

impl DiscreteProblemFile {
    pub fn build(&self) -> Result<EnergyModel> {
        if self.variables.len() != self.unary.len() {
            return Err(Error::Shape(format!(
                "{} variables but {} unary tables",
                self.variables.len(),
                self.unary.len()
            )));
        }
        let domains = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let labels = v
                    .values
                    .iter()
                    .map(|l| {
                        label_text(l)
                            .ok_or_else(|| Error::Shape(format!("variables[{i}].values: label {l} is not a scalar")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DiscreteDomain::new(labels).map_err(|e| Error::Shape(format!("variables[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let pairs = self
            .pairwise
            .iter()
            .map(|p| PairTerm::new(p.i, p.j, p.table.clone()))
            .collect();
        EnergyModel::new(domains, self.unary.clone(), pairs)
    }

    /// Writes a model back out. A nonzero shift is folded into the first
    /// unary table, which adds the same constant to every assignment.
    pub fn from_model(model: &EnergyModel) -> Self {
        let variables = model
            .domains()
            .iter()
            .enumerate()
            .map(|(i, d)| VariableSpec {
                name: Some(format!("x{i}")),
                values: d.labels().iter().map(|l| Value::String(l.clone())).collect(),
            })
            .collect();
        let mut unary: Vec<Vec<f64>> = (0..model.n()).map(|i| model.unary(i).to_vec()).collect();
        if model.shift() != 0.0 {
            unary[0].iter_mut().for_each(|v| *v += model.shift());
        }
        let mut pairwise = Vec::new();
        for i in 0..model.n() {
            for (j, t) in model.pairs_of(i) {
                pairwise.push(PairSpec {
                    i,
                    j: *j,
                    table: (0..t.rows()).map(|a| t.row(a).to_vec()).collect(),
                });
            }
        }
        Self {
            variables,
            unary,
            pairwise,
        }
    }
}

/// Built-in potentials. Parameters default to 1 (`center` to 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnaryPotential {
    /// `½ m ω² (x - center)²`; `m` defaults to the particle mass.
    Harmonic {
        #[serde(default)]
        m: Option<f64>,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        center: f64,
    },
    /// `k x⁴`.
    Quartic {
        #[serde(default = "one")]
        k: f64,
    },
    /// Zero inside the grid; the walls are the grid ends.
    Box {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairPotential {
    /// `½ k (x - y)²`.
    PairHarmonic {
        #[serde(default = "one")]
        k: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl UnaryPotential {
    pub fn check(&self) -> Result<()> {
        let ok = match self {
            UnaryPotential::Harmonic { m, omega, center } => {
                m.is_none_or(|m| m > 0.0 && m.is_finite()) && omega.is_finite() && center.is_finite()
            }
            UnaryPotential::Quartic { k } => k.is_finite(),
            UnaryPotential::Box {} => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("bad potential parameters {self:?}")))
        }
    }

    pub fn function(&self, mass: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let (a, c, quartic) = match *self {
            UnaryPotential::Harmonic { m, omega, center } => (0.5 * m.unwrap_or(mass) * omega * omega, center, false),
            UnaryPotential::Quartic { k } => (k, 0.0, true),
            UnaryPotential::Box {} => (0.0, 0.0, false),
        };
        move |x| {
            let d = x - c;
            if quartic {
                a * d.powi(4)
            } else {
                a * d * d
            }
        }
    }
}

impl PairPotential {
    pub fn function(&self) -> impl Fn(f64, f64) -> f64 + Send + Sync + 'static {
        let PairPotential::PairHarmonic { k } = *self;
        move |x, y| 0.5 * k * (x - y) * (x - y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub mass: f64,
    pub potential: UnaryPotential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairPotentialSpec {
    pub i: usize,
    pub j: usize,
    pub potential: PairPotential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousProblemFile {
    pub particles: Vec<ParticleSpec>,
    #[serde(default)]
    pub pairwise: Vec<PairPotentialSpec>,
}

impl ContinuousProblemFile {
    pub fn build(&self, hbar: f64) -> Result<ContinuousProblem> {
        if self.particles.is_empty() {
            return Err(Error::Shape("particles: at least one particle is required".into()));
        }
        let mut problem = ContinuousProblem::new(hbar)?;
        for (i, p) in self.particles.iter().enumerate() {
            p.potential
                .check()
                .map_err(|e| Error::param(format!("particles[{i}].potential: {e}")))?;
            problem = problem
                .with_particle(p.mass, p.potential.function(p.mass))
                .map_err(|e| Error::param(format!("particles[{i}].mass: {e}")))?;
        }
        for (k, p) in self.pairwise.iter().enumerate() {
            problem = problem
                .with_pair(p.i, p.j, p.potential.function())
                .map_err(|e| Error::Shape(format!("pairwise[{k}]: {e}")))?;
        }
        Ok(problem)
    }

    pub fn names(&self) -> Vec<String> {
        self.particles
            .iter()
            .enumerate()
            .map(|(i, p)| p.name.clone().unwrap_or_else(|| format!("p{i}")))
            .collect()
    }
}

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a discrete problem; model errors are reported against the file.
pub fn load_discrete(path: &Path) -> Result<EnergyModel> {
    let file: DiscreteProblemFile = read_json(path)?;
    file.build().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_continuous(path: &Path, hbar: f64) -> Result<(ContinuousProblem, Vec<String>)> {
    let file: ContinuousProblemFile = read_json(path)?;
    let problem = file.build(hbar).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((problem, file.names()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_VAR: &str = r#"{
        "variables": [{"name": "a", "values": [0, 1]}, {"name": "b", "values": ["lo", "hi"]}],
        "unary": [[0, 1], [0, 2]],
        "pairwise": [{"i": 0, "j": 1, "table": [[0, 3], [3, 0]]},
                     {"i": 1, "j": 0, "table": [[0, 3], [3, 0]]}]
    }"#;

    #[test]
    fn parses_discrete_file() {
        let f: DiscreteProblemFile = serde_json::from_str(TWO_VAR).unwrap();
        let m = f.build().unwrap();
        assert_eq!(m.evaluate(&[0, 1]).unwrap(), 8.0);
        assert_eq!(m.domains()[1].label(1), "hi");
        assert_eq!(m.domains()[0].label(0), "0");
    }

    #[test]
    fn round_trips_through_file_form() {
        let f: DiscreteProblemFile = serde_json::from_str(TWO_VAR).unwrap();
        let m = f.build().unwrap();
        let back = DiscreteProblemFile::from_model(&m).build().unwrap();
        for x in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(m.evaluate(&x).unwrap(), back.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn negative_tables_round_trip() {
        let m = EnergyModel::from_tables(vec![vec![-2.0, 0.0], vec![1.0, 0.5]], vec![]).unwrap();
        let back = DiscreteProblemFile::from_model(&m).build().unwrap();
        for x in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(m.evaluate(&x).unwrap(), back.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        assert!(serde_json::from_str::<DiscreteProblemFile>(r#"{"variables":[],"unary":[],"extra":1}"#).is_err());
        let f: DiscreteProblemFile =
            serde_json::from_str(r#"{"variables":[{"values":[0,1]}],"unary":[[0,1,2]]}"#).unwrap();
        assert!(f.build().is_err());
        let f: DiscreteProblemFile =
            serde_json::from_str(r#"{"variables":[{"values":[0,0]}],"unary":[[0,1]]}"#).unwrap();
        assert!(f.build().is_err());
    }

    #[test]
    fn parses_continuous_file() {
        let text = r#"{
            "particles": [
                {"name": "a", "mass": 2.0, "potential": {"type": "harmonic", "omega": 3.0, "center": 1.0}},
                {"potential": {"type": "quartic", "k": 0.5}},
                {"potential": {"type": "box"}}
            ],
            "pairwise": [{"i": 0, "j": 1, "potential": {"type": "pair_harmonic", "k": 2.0}}]
        }"#;
        let f: ContinuousProblemFile = serde_json::from_str(text).unwrap();
        let p = f.build(1.0).unwrap();
        assert_eq!(p.particles(), 3);
        assert_eq!(f.names(), vec!["a", "p1", "p2"]);
        let h = f.particles[0].potential.function(2.0);
        assert!((h(2.0) - 0.5 * 2.0 * 9.0).abs() < 1e-12);
        assert_eq!(f.particles[1].potential.function(1.0)(2.0), 8.0);
        assert_eq!(f.particles[2].potential.function(1.0)(5.0), 0.0);
        assert_eq!(f.pairwise[0].potential.function()(1.0, 3.0), 4.0);
    }

    #[test]
    fn rejects_code_like_potentials() {
        let text = r#"{"particles": [{"potential": {"type": "expr", "f": "x*x"}}]}"#;
        assert!(serde_json::from_str::<ContinuousProblemFile>(text).is_err());
    }

    #[test]
    fn parse_errors_name_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\n  \"variables\": [,\n}").unwrap();
        let err = load_discrete(&path).unwrap_err().to_string();
        assert!(err.contains("bad.json") && err.contains("line 2"), "{err}");
        let missing = load_discrete(&dir.path().join("nope.json")).unwrap_err().to_string();
        assert!(missing.contains("nope.json"));
    }
}
