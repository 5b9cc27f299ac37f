//! TOML model files.
//!
//! ```toml
//! beta = 0.5          # multiplied into every coefficient
//! local_dim = 2       # default 2
//! range = 1           # optional; terms with larger diameter are rejected
//!
//! [lattice]
//! extents = [6]       # one or two axes
//! metric = "chebyshev"  # or "manhattan"
//!
//! [[term]]
//! sites = [0, 1]
//! pauli = "ZZ"
//! coeff = -1.0
//!
//! [[term]]
//! sites = [2]
//! matrix = [[[1.0, 0.0], [0.0, 0.0]],
//!           [[0.0, 0.0], [-1.0, 0.0]]]   # rows of [re, im] entries
//! ```
//!
//! Matrix literals act on their sites in ascending order.

use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::hamiltonian::pauli_term;
use super::{Lattice, LocalHamiltonian, Metric};
use crate::error::{Error, Result};
use crate::operator::HermitianOperator;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "two")]
    pub local_dim: usize,
    pub range: Option<usize>,
    pub lattice: LatticeSpec,
    #[serde(default, rename = "term")]
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub extents: Vec<usize>,
    #[serde(default)]
    pub metric: Metric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub sites: Vec<usize>,
    pub pauli: Option<String>,
    #[serde(default = "one")]
    pub coeff: f64,
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

impl ModelSpec {
    pub fn build(&self) -> Result<LocalHamiltonian> {
        let lattice = Lattice::new(self.lattice.extents.clone(), self.lattice.metric)?;
        let mut h = match self.range {
            Some(r) => LocalHamiltonian::with_declared_range(lattice, self.local_dim, r)?,
            None => LocalHamiltonian::new(lattice, self.local_dim)?,
        };
        for term in &self.terms {
            h.add_term(term.build(self.local_dim, self.beta)?)?;
        }
        Ok(h)
    }
}

impl TermSpec {
    fn build(&self, d: usize, beta: f64) -> Result<HermitianOperator> {
        match (&self.pauli, &self.matrix) {
            (Some(p), None) => {
                if d != 2 {
                    return Err(Error::Hamiltonian("pauli terms need local_dim = 2".into()));
                }
                pauli_term(&self.sites, p, beta * self.coeff)
            }
            (None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Hamiltonian(format!(
                        "matrix literal on {:?} is not square",
                        self.sites
                    )));
                }
                let scale = beta * self.coeff;
                let m = Mat::from_fn(n, n, |i, j| c64::new(rows[i][j][0], rows[i][j][1]) * scale);
                HermitianOperator::new(self.sites.clone(), d, m)
            }
            _ => Err(Error::Hamiltonian(format!(
                "term on {:?} needs exactly one of `pauli` or `matrix`",
                self.sites
            ))),
        }
    }
}

pub fn parse_hamiltonian(text: &str) -> Result<LocalHamiltonian> {
    let spec: ModelSpec = toml::from_str(text)?;
    spec.build()
}

pub fn load_hamiltonian(path: impl AsRef<Path>) -> Result<LocalHamiltonian> {
    parse_hamiltonian(&std::fs::read_to_string(path)?)
}
