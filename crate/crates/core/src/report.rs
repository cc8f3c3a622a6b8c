//! Serializable run reports, CSV writers and report comparison.
//!
//! Every `result.json` is one [`RunReport`], tagged by `kind`. Apart from
//! `wall_time_s`, a report depends only on its inputs.
//!
//! CSV columns:
//!
//! | file               | columns                                  |
//! |--------------------|------------------------------------------|
//! | `trace.csv`        | `iter,lower_bound,upper_bound,delta` (discrete), `iter,max_change` (soft), `iter,time,max_change` (ground) |
//! | `psi.csv`          | `variable,label,psi`                     |
//! | `wavefunction.csv` | `particle,x,psi`                         |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::continuous::{overlap, Grid1D, GroundConfig};
use crate::discrete::CoopConfig;
use crate::error::{Error, Result};
use crate::soft::SoftConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSummary {
    pub config: CoopConfig,
    pub init: String,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
    pub bound_valid: bool,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub assignment: Vec<usize>,
    pub labels: Vec<String>,
    pub energy: f64,
    /// Final tables in the variant's own representation.
    pub tables: Vec<Vec<f64>>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftSummary {
    pub config: SoftConfig,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    pub assignment: Vec<usize>,
    pub labels: Vec<String>,
    pub energy: f64,
    pub psi: Vec<Vec<f64>>,
    pub log_z: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundSummary {
    pub config: GroundConfig,
    pub grid: Grid1D,
    pub hbar: f64,
    pub sigma2: Vec<f64>,
    pub particles: Vec<String>,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_time: f64,
    pub normalization_error: f64,
    pub psi: Vec<Vec<f64>>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationSummary {
    pub assignment: Vec<usize>,
    pub labels: Vec<String>,
    pub energy: f64,
    pub visited: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub grid: Grid1D,
    pub potential: String,
    pub mass: f64,
    pub hbar: f64,
    pub eigenvalue: f64,
    pub residual: f64,
    pub iterations: usize,
    pub eigenvector: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub kind_a: String,
    pub kind_b: String,
    /// Present when both sides carry a discrete assignment.
    pub assignment_match: Option<bool>,
    /// `E_a - E_b`, per particle for fields.
    pub energy_deltas: Vec<f64>,
    /// Per-particle field overlaps, empty for discrete reports.
    pub overlaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunReport {
    Discrete(DiscreteSummary),
    Soft(SoftSummary),
    Ground(GroundSummary),
    Enumeration(EnumerationSummary),
    Eigen(EigenSummary),
    Comparison(Comparison),
}

type Fields<'a> = (Grid1D, Vec<&'a [f64]>, Vec<f64>);

impl RunReport {
    pub fn kind(&self) -> &'static str {
        match self {
            RunReport::Discrete(_) => "discrete",
            RunReport::Soft(_) => "soft",
            RunReport::Ground(_) => "ground",
            RunReport::Enumeration(_) => "enumeration",
            RunReport::Eigen(_) => "eigen",
            RunReport::Comparison(_) => "comparison",
        }
    }

    fn assignment(&self) -> Option<(&[usize], f64)> {
        match self {
            RunReport::Discrete(r) => Some((&r.assignment, r.energy)),
            RunReport::Soft(r) => Some((&r.assignment, r.energy)),
            RunReport::Enumeration(r) => Some((&r.assignment, r.energy)),
            _ => None,
        }
    }

    /// Grid, one field per particle, and the matching energies.
    fn fields(&self) -> Option<Fields<'_>> {
        match self {
            RunReport::Ground(r) => Some((r.grid, r.psi.iter().map(Vec::as_slice).collect(), r.energies.clone())),
            RunReport::Eigen(r) => Some((r.grid, vec![r.eigenvector.as_slice()], vec![r.eigenvalue])),
            _ => None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("reports serialize");
        fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        crate::problem::read_json(path)
    }
}

/// Differences between two reports of compatible kinds. An eigen report
/// compares against every particle of a ground report.
pub fn compare(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    let mut out = Comparison {
        kind_a: a.kind().into(),
        kind_b: b.kind().into(),
        assignment_match: None,
        energy_deltas: Vec::new(),
        overlaps: Vec::new(),
    };
    if let (Some((xa, ea)), Some((xb, eb))) = (a.assignment(), b.assignment()) {
        if xa.len() != xb.len() {
            return Err(Error::Shape(format!("{} variables vs {}", xa.len(), xb.len())));
        }
        out.assignment_match = Some(xa == xb);
        out.energy_deltas.push(ea - eb);
        return Ok(out);
    }
    if let (Some((ga, fa, ea)), Some((gb, fb, eb))) = (a.fields(), b.fields()) {
        if ga != gb {
            return Err(Error::Shape("reports use different grids".into()));
        }
        let pairs: Vec<(usize, usize)> = match (fa.len(), fb.len()) {
            (x, y) if x == y => (0..x).map(|i| (i, i)).collect(),
            (x, 1) => (0..x).map(|i| (i, 0)).collect(),
            (1, y) => (0..y).map(|i| (0, i)).collect(),
            (x, y) => return Err(Error::Shape(format!("{x} particles vs {y}"))),
        };
        for (i, j) in pairs {
            out.energy_deltas.push(ea[i] - eb[j]);
            out.overlaps.push(overlap(fa[i], fb[j], &ga));
        }
        return Ok(out);
    }
    Err(Error::Shape(format!(
        "cannot compare a {} report with a {} report",
        a.kind(),
        b.kind()
    )))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
pub struct PsiRow<'a> {
    pub variable: usize,
    pub label: &'a str,
    pub psi: f64,
}

#[derive(Debug, Serialize)]
pub struct WaveRow<'a> {
    pub particle: &'a str,
    pub x: f64,
    pub psi: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumeration(x: Vec<usize>, e: f64) -> RunReport {
        RunReport::Enumeration(EnumerationSummary {
            labels: x.iter().map(|v| v.to_string()).collect(),
            assignment: x,
            energy: e,
            visited: 4,
            wall_time_s: 0.0,
        })
    }

    fn eigen(v: Vec<f64>, e: f64) -> RunReport {
        RunReport::Eigen(EigenSummary {
            grid: Grid1D::new(0.0, 1.0, v.len()).unwrap(),
            potential: "box".into(),
            mass: 1.0,
            hbar: 1.0,
            eigenvalue: e,
            residual: 0.0,
            iterations: 1,
            eigenvector: v,
            wall_time_s: 0.0,
        })
    }

    #[test]
    fn self_comparison_is_zero() {
        let a = enumeration(vec![0, 1], 2.0);
        let c = compare(&a, &a).unwrap();
        assert_eq!(c.assignment_match, Some(true));
        assert_eq!(c.energy_deltas, vec![0.0]);
        let f = eigen(vec![0.0, 1.0, 2.0, 0.0], 4.0);
        let c = compare(&f, &f).unwrap();
        assert_eq!(c.energy_deltas, vec![0.0]);
        assert!((c.overlaps[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn incompatible_reports() {
        let a = enumeration(vec![0, 1], 2.0);
        let f = eigen(vec![0.0, 1.0, 2.0, 0.0], 4.0);
        assert!(compare(&a, &f).is_err());
        assert!(compare(&a, &enumeration(vec![0], 1.0)).is_err());
        assert!(compare(&f, &eigen(vec![0.0, 1.0, 0.0], 1.0)).is_err());
    }

    #[test]
    fn json_round_trip_keeps_kind() {
        let a = enumeration(vec![1, 0], 3.5);
        let text = serde_json::to_string(&a).unwrap();
        assert!(text.contains("\"kind\":\"enumeration\""));
        assert_eq!(serde_json::from_str::<RunReport>(&text).unwrap(), a);
    }
}
