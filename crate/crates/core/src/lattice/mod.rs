//! Lattice geometry, local Hamiltonians and Markov shields.

mod hamiltonian;
mod shield;
mod spec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hamiltonian::{local_term_sum, LocalHamiltonian};
pub use shield::{build_shield_plan, marginal_centered_ordering, Shield, ShieldPlan};
pub use spec::{load_hamiltonian, parse_hamiltonian, ModelSpec, TermSpec};

/// Distance on the box. Both are graph distances on ℤ^D restricted to the box;
/// Chebyshev includes diagonal neighbours.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Chebyshev,
    Manhattan,
}

/// Open-boundary box in one or two dimensions with row-major site labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    extents: Vec<usize>,
    metric: Metric,
}

impl Lattice {
    pub fn new(extents: Vec<usize>, metric: Metric) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 {
            return Err(Error::Lattice(format!(
                "only 1D and 2D boxes are supported, got {} axes",
                extents.len()
            )));
        }
        if extents.contains(&0) {
            return Err(Error::Lattice("extents must be positive".into()));
        }
        Ok(Self { extents, metric })
    }

    pub fn chain(n: usize) -> Result<Self> {
        Self::new(vec![n], Metric::Chebyshev)
    }

    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        Self::new(vec![rows, cols], Metric::Chebyshev)
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    pub fn num_sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn sites(&self) -> std::ops::Range<usize> {
        0..self.num_sites()
    }

    pub fn contains(&self, site: usize) -> bool {
        site < self.num_sites()
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut rem = site;
        let mut out = vec![0; self.extents.len()];
        for (axis, &e) in self.extents.iter().enumerate().rev() {
            out[axis] = rem % e;
            rem /= e;
        }
        out
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let steps = ca.iter().zip(&cb).map(|(x, y)| x.abs_diff(*y));
        match self.metric {
            Metric::Chebyshev => steps.max().unwrap_or(0),
            Metric::Manhattan => steps.sum(),
        }
    }

    /// Minimum pairwise distance; `None` when either set is empty.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> Option<usize> {
        a.iter()
            .flat_map(|&x| b.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.distance(x, y))
            .min()
    }

    pub fn diameter(&self, set: &[usize]) -> usize {
        set.iter()
            .flat_map(|&x| set.iter().map(move |&y| (x, y)))
            .map(|(x, y)| self.distance(x, y))
            .max()
            .unwrap_or(0)
    }

    /// B_r(A): all sites within distance `radius` of `set`, ascending.
    pub fn ball(&self, set: &[usize], radius: usize) -> Vec<usize> {
        self.sites()
            .filter(|&i| set.iter().any(|&a| self.distance(i, a) <= radius))
            .collect()
    }

    /// Pairs at unit Manhattan distance, i.e. the edges of the box graph.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.num_sites();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let (ca, cb) = (self.coords(a), self.coords(b));
                let l1: usize = ca.iter().zip(&cb).map(|(x, y)| x.abs_diff(*y)).sum();
                if l1 == 1 {
                    out.push((a, b));
                }
            }
        }
        out
    }
}
