//! MED solve, rounding and comparison with the exact state in one call.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_rounding, MarginalSource, MedSource, RoundingOptions, RoundingRun};
use crate::error::Result;
use crate::lattice::{LocalHamiltonian, ShieldPlan};
use crate::med::{solve_med, SolverOptions};
use crate::operator::DensityMatrix;
use crate::oracle::{variational_free_energy, GibbsSolution};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMode {
    /// Exact Gibbs marginals.
    #[default]
    Oracle,
    /// One MED solve per shield, centered on it.
    Med,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EndToEndOptions {
    pub radius: usize,
    pub mode: MarginalMode,
    pub solver: SolverOptions,
    pub rounding: RoundingOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndToEndReport {
    pub sites: usize,
    pub radius: usize,
    pub mode: MarginalMode,
    pub free_energy: f64,
    pub fmed: f64,
    pub fmed_converged: bool,
    /// F(σ̃) for the rounded state after clipping negative eigenvalues.
    pub rounded_free_energy: f64,
    /// Largest d^{|S'_k|} over the layers.
    pub register_dim: usize,
    pub max_eps_sigma: f64,
    pub med_regions: usize,
    pub med_regions_converged: bool,
    pub rounding: RoundingRun,
}

impl EndToEndReport {
    /// FMED ≤ F ≤ F(σ̃), up to `slack`.
    pub fn ordering_holds(&self, slack: f64) -> bool {
        self.fmed <= self.free_energy + slack
            && self.free_energy <= self.rounded_free_energy + slack
    }
}

pub fn end_to_end(
    h: &LocalHamiltonian,
    oracle: &GibbsSolution,
    opts: &EndToEndOptions,
) -> Result<EndToEndReport> {
    let radius = opts.radius.max(h.range());
    let plan = Arc::new(ShieldPlan::consecutive(h.lattice(), radius, h.range())?);
    let med = solve_med(h, Arc::clone(&plan), &opts.solver)?;
    let (run, regions) = match opts.mode {
        MarginalMode::Oracle => (
            run_rounding(&plan, oracle, oracle, &opts.rounding)?,
            Vec::new(),
        ),
        MarginalMode::Med => {
            let src = MedSource::new(h.clone(), radius, opts.solver.clone());
            let rounding = RoundingOptions {
                measure_doubled: false,
                ..opts.rounding.clone()
            };
            let run = run_rounding(&plan, &src as &dyn MarginalSource, oracle, &rounding)?;
            (run, src.regions())
        }
    };
    let clipped = DensityMatrix::from_positive(run.state.map_spectrum(|x| x.max(0.0))?)?;
    Ok(EndToEndReport {
        sites: h.num_sites(),
        radius,
        mode: opts.mode,
        free_energy: oracle.free_energy(),
        fmed: med.value(),
        fmed_converged: med.converged,
        rounded_free_energy: variational_free_energy(h, &clipped)?,
        register_dim: run.layers.iter().map(|l| l.register_dim).max().unwrap_or(1),
        max_eps_sigma: run.max_eps_sigma(),
        med_regions: regions.len(),
        med_regions_converged: regions.iter().all(|r| r.converged),
        rounding: run,
    })
}
