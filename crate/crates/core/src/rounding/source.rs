//! Where rounding layers get their marginals from.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::lattice::{build_shield_plan, marginal_centered_ordering, LocalHamiltonian};
use crate::med::{solve_med, MarginalFamily, SolverOptions};
use crate::operator::{normalize_sites, DensityMatrix};
use crate::oracle::GibbsSolution;

pub trait MarginalSource: Sync {
    /// The marginal on the ascending site set `sites`.
    fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix>;

    /// Whether `marginal(sites)` is available at all.
    fn supports(&self, _sites: &[usize]) -> bool {
        true
    }
}

impl MarginalSource for GibbsSolution {
    fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix> {
        GibbsSolution::marginal(self, sites)
    }
}

/// Marginals of another source mixed with the maximally mixed state:
/// (1 − δ)σ + δ𝟙/dim.
pub struct Depolarized<S> {
    pub inner: S,
    pub delta: f64,
}

impl<S: MarginalSource> MarginalSource for Depolarized<S> {
    fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix> {
        Ok(self.inner.marginal(sites)?.depolarize(self.delta))
    }

    fn supports(&self, sites: &[usize]) -> bool {
        self.inner.supports(sites)
    }
}

impl MarginalSource for MarginalFamily {
    fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix> {
        MarginalFamily::marginal(self, sites)
    }

    fn supports(&self, sites: &[usize]) -> bool {
        self.blocks()
            .iter()
            .any(|b| sites.iter().all(|s| b.sites().contains(s)))
    }
}

/// Solves one MED instance per requested region, with the ordering centered on it so
/// that a single block covers the region.
pub struct MedSource {
    h: LocalHamiltonian,
    radius: usize,
    opts: SolverOptions,
    cache: Mutex<HashMap<Vec<usize>, Arc<MedRegion>>>,
}

#[derive(Clone, Debug)]
pub struct MedRegion {
    pub region: Vec<usize>,
    pub radius: usize,
    pub value: f64,
    pub converged: bool,
    pub marginal: DensityMatrix,
}

impl MedSource {
    pub fn new(h: LocalHamiltonian, radius: usize, opts: SolverOptions) -> Self {
        Self {
            h,
            radius,
            opts,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Shield radius used for `region`: at least the configured one, and large enough
    /// for the centered ball to contain the region.
    pub fn radius_for(&self, region: &[usize]) -> usize {
        let lattice = self.h.lattice();
        let reach = lattice
            .sites()
            .map(|i| {
                region
                    .iter()
                    .map(|&t| lattice.distance(i, t))
                    .max()
                    .unwrap_or(0)
            })
            .min()
            .unwrap_or(0);
        self.radius.max(2 * reach).max(self.h.range())
    }

    pub fn region(&self, sites: &[usize]) -> Result<Arc<MedRegion>> {
        let key = normalize_sites(sites);
        if let Some(r) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(r.clone());
        }
        let radius = self.radius_for(&key);
        let lattice = self.h.lattice();
        let ordering = marginal_centered_ordering(lattice, &key, radius)?;
        let plan = Arc::new(build_shield_plan(
            lattice,
            &ordering,
            radius,
            self.h.range(),
        )?);
        let sol = solve_med(&self.h, plan, &self.opts)?;
        if !sol.converged {
            log::warn!("MED solve for region {key:?} did not converge");
        }
        let region = Arc::new(MedRegion {
            marginal: sol.family.marginal(&key)?,
            region: key.clone(),
            radius,
            value: sol.value(),
            converged: sol.converged,
        });
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, region.clone());
        Ok(region)
    }

    pub fn regions(&self) -> Vec<Arc<MedRegion>> {
        let mut out: Vec<_> = self
            .cache
            .lock()
            .expect("cache lock")
            .values()
            .cloned()
            .collect();
        out.sort_by(|a, b| a.region.cmp(&b.region));
        out
    }
}

impl MarginalSource for MedSource {
    fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix> {
        if sites.is_empty() {
            return Err(Error::Family("empty region".into()));
        }
        Ok(self.region(sites)?.marginal.clone())
    }
}
