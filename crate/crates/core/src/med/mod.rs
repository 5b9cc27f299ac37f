//! The Markov entropy decomposition: a convex lower bound on the free energy
//! over locally consistent families of shield marginals.

mod constraints;
pub mod solver;
mod spectrahedron;

use std::sync::Arc;

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LocalHamiltonian, ShieldPlan};
use crate::operator::{
    embed, entropy_of_spectrum, partial_trace, relative_entropy, DensityMatrix, HermitianOperator,
};
use crate::oracle::GibbsSolution;

pub(crate) use constraints::FlatLayout;
pub use constraints::{
    consistency_map, project_consistent, ConsistencyResidual, ConsistencySummary, PairResidual,
};
pub use solver::{
    solve_med, solve_problem, MedCertificate, MedSolution, SolverOptions, StepRule, TraceRow,
};
pub use spectrahedron::project_floored_spectrahedron;

/// One marginal σ_{S'_k} per step of a shield plan.
#[derive(Clone, Debug)]
pub struct MarginalFamily {
    plan: Arc<ShieldPlan>,
    d: usize,
    blocks: Vec<HermitianOperator>,
}

impl MarginalFamily {
    pub fn new(plan: Arc<ShieldPlan>, d: usize, blocks: Vec<HermitianOperator>) -> Result<Self> {
        if blocks.len() != plan.len() {
            return Err(Error::Family(format!(
                "{} blocks for {} shields",
                blocks.len(),
                plan.len()
            )));
        }
        for (b, s) in blocks.iter().zip(plan.shields()) {
            if b.sites() != s.extended.as_slice() {
                return Err(Error::Family(format!(
                    "block on {:?} where the shield is {:?}",
                    b.sites(),
                    s.extended
                )));
            }
            if b.local_dim() != d {
                return Err(Error::LocalDimMismatch(b.local_dim(), d));
            }
        }
        Ok(Self { plan, d, blocks })
    }

    /// Marginals of a global state.
    pub fn from_state(plan: Arc<ShieldPlan>, rho: &DensityMatrix) -> Result<Self> {
        let blocks = plan
            .shields()
            .iter()
            .map(|s| partial_trace(rho, &s.extended))
            .collect::<Result<Vec<_>>>()?;
        Self::new(plan, rho.local_dim(), blocks)
    }

    pub fn from_gibbs(plan: Arc<ShieldPlan>, sol: &GibbsSolution) -> Result<Self> {
        let d = sol.state().local_dim();
        let blocks = plan
            .shields()
            .iter()
            .map(|s| sol.marginal(&s.extended).map(DensityMatrix::into_operator))
            .collect::<Result<Vec<_>>>()?;
        Self::new(plan, d, blocks)
    }

    pub fn maximally_mixed(plan: Arc<ShieldPlan>, d: usize) -> Result<Self> {
        let blocks = plan
            .shields()
            .iter()
            .map(|s| {
                DensityMatrix::maximally_mixed(s.extended.clone(), d).map(|m| m.into_operator())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(plan, d, blocks)
    }

    pub fn plan(&self) -> &ShieldPlan {
        &self.plan
    }

    pub fn shared_plan(&self) -> Arc<ShieldPlan> {
        Arc::clone(&self.plan)
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[HermitianOperator] {
        &self.blocks
    }

    /// Block `k` validated as a density matrix.
    pub fn state(&self, k: usize) -> Result<DensityMatrix> {
        DensityMatrix::new(self.blocks[k].clone())
    }

    /// The marginal on `sites`, read off the first block that contains them.
    pub fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix> {
        let block = self
            .blocks
            .iter()
            .find(|b| sites.iter().all(|s| b.sites().contains(s)))
            .ok_or_else(|| Error::Family(format!("no block covers {sites:?}")))?;
        DensityMatrix::new(partial_trace(block, sites)?)
    }

    /// `t·self + (1 − t)·other`.
    pub fn mix(&self, other: &MarginalFamily, t: f64) -> Result<MarginalFamily> {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                a.same_register(b)?;
                Ok(HermitianOperator::from_parts(
                    a.sites().to_vec(),
                    self.d,
                    Mat::from_fn(a.dim(), a.dim(), |i, j| {
                        a.matrix()[(i, j)] * t + b.matrix()[(i, j)] * (1.0 - t)
                    }),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.shared_plan(), self.d, blocks)
    }

    /// `self + step·direction`, blockwise.
    pub fn shifted(&self, direction: &[HermitianOperator], step: f64) -> Result<MarginalFamily> {
        let blocks = self
            .blocks
            .iter()
            .zip(direction)
            .map(|(a, b)| {
                a.same_register(b)?;
                Ok(HermitianOperator::from_parts(
                    a.sites().to_vec(),
                    self.d,
                    a.matrix() + &crate::operator::scaled(b.matrix(), c64::new(step, 0.0)),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.shared_plan(), self.d, blocks)
    }

    /// Frobenius distance summed over blocks (root of the sum of squares).
    pub fn distance(&self, other: &MarginalFamily) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| crate::operator::frobenius_norm(&(a.matrix() - b.matrix())).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest trace distance between corresponding blocks.
    pub fn max_trace_distance(&self, other: &MarginalFamily) -> Result<f64> {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| crate::operator::trace_distance(a, b))
            .try_fold(0.0f64, |m, v| Ok(m.max(v?)))
    }

    pub(crate) fn matrices(&self) -> Vec<Mat<c64>> {
        self.blocks.iter().map(|b| b.matrix().clone()).collect()
    }

    pub(crate) fn with_flat(&self, layout: &FlatLayout, x: &[c64]) -> Result<MarginalFamily> {
        let blocks = layout
            .unflatten(x)
            .into_iter()
            .zip(&self.blocks)
            .map(|(m, b)| HermitianOperator::from_parts_symmetrized(b.sites().to_vec(), self.d, &m))
            .collect();
        Self::new(self.shared_plan(), self.d, blocks)
    }
}

/// The local terms h_k of a Hamiltonian laid out on a shield plan.
#[derive(Clone, Debug)]
pub struct MedProblem {
    plan: Arc<ShieldPlan>,
    d: usize,
    terms: Vec<HermitianOperator>,
}

impl MedProblem {
    pub fn new(h: &LocalHamiltonian, plan: Arc<ShieldPlan>) -> Result<Self> {
        let terms = plan.local_terms(h)?;
        Ok(Self {
            plan,
            d: h.local_dim(),
            terms,
        })
    }

    pub fn plan(&self) -> &ShieldPlan {
        &self.plan
    }

    pub fn shared_plan(&self) -> Arc<ShieldPlan> {
        Arc::clone(&self.plan)
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    /// h_k on S'_k.
    pub fn terms(&self) -> &[HermitianOperator] {
        &self.terms
    }

    fn check(&self, fam: &MarginalFamily) -> Result<()> {
        if fam.plan().ordering() != self.plan.ordering()
            || fam.plan().radius() != self.plan.radius()
        {
            return Err(Error::Family(
                "family built on a different shield plan".into(),
            ));
        }
        Ok(())
    }

    /// Σ_k Tr[h_k σ_k] − Σ_k [S(σ_k) − S(Tr_{site} σ_k)].
    pub fn functional(&self, fam: &MarginalFamily) -> Result<f64> {
        self.check(fam)?;
        let mut total = 0.0;
        for ((block, h), s) in fam.blocks.iter().zip(&self.terms).zip(self.plan.shields()) {
            total += block.inner(h)?;
            total -= entropy_of_spectrum(&block.eigenvalues()?);
            if !s.shield.is_empty() {
                let reduced = partial_trace(block, &s.shield)?;
                total += entropy_of_spectrum(&reduced.eigenvalues()?);
            }
        }
        Ok(total)
    }

    /// Component k: h_k + log σ_k − log(σ_{S_k}) ⊗ 𝟙; for k = 0: h_0 + log σ_0 + 𝟙.
    pub fn gradient(&self, fam: &MarginalFamily) -> Result<Vec<HermitianOperator>> {
        self.check(fam)?;
        fam.blocks
            .iter()
            .zip(&self.terms)
            .zip(self.plan.shields())
            .map(|((block, h), s)| {
                let log = block.log(false).map_err(rank_error)?;
                let g = h.plus(&log)?;
                if s.shield.is_empty() {
                    Ok(g.add_identity(1.0))
                } else {
                    let reduced = partial_trace(block, &s.shield)?;
                    let log_s = reduced.log(false).map_err(rank_error)?;
                    g.minus(&embed(&log_s, &s.extended)?)
                }
            })
            .collect()
    }
}

fn rank_error(e: Error) -> Error {
    match e {
        Error::NonPositiveSpectrum { min, .. } => {
            Error::Family(format!("rank-deficient marginal (eigenvalue {min:e})"))
        }
        other => other,
    }
}

pub fn med_functional(fam: &MarginalFamily, h: &LocalHamiltonian) -> Result<f64> {
    MedProblem::new(h, fam.shared_plan())?.functional(fam)
}

pub fn med_gradient(fam: &MarginalFamily, h: &LocalHamiltonian) -> Result<Vec<HermitianOperator>> {
    MedProblem::new(h, fam.shared_plan())?.gradient(fam)
}

/// ⟨X, Y⟩ = Σ_k Re Tr[X_k Y_k].
pub fn family_inner(x: &[HermitianOperator], y: &[HermitianOperator]) -> Result<f64> {
    x.iter().zip(y).map(|(a, b)| a.inner(b)).sum()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeltaReport {
    /// δ = F − ⟨∇FMED(ρ-marginals), σ⟩ + 1.
    pub delta: f64,
    pub fmed: f64,
    pub free_energy: f64,
    /// Σ_k [D(σ_k‖ρ_k) − D(σ_{S_k}‖ρ_{S_k})].
    pub divergence_sum: f64,
}

impl DeltaReport {
    /// F ≤ FMED + δ.
    pub fn free_energy_slack(&self) -> f64 {
        self.fmed + self.delta - self.free_energy
    }

    /// δ − divergence sum.
    pub fn divergence_slack(&self) -> f64 {
        self.delta - self.divergence_sum
    }
}

/// The δ certificate of a solution against the exact Gibbs marginals.
pub fn delta_certificate(
    solution: &MarginalFamily,
    oracle: &GibbsSolution,
    h: &LocalHamiltonian,
) -> Result<DeltaReport> {
    let problem = MedProblem::new(h, solution.shared_plan())?;
    let reference = MarginalFamily::from_gibbs(solution.shared_plan(), oracle)?;
    let grad = problem.gradient(&reference)?;
    let free_energy = oracle.free_energy();
    let delta = free_energy - family_inner(&grad, solution.blocks())? + 1.0;
    let fmed = problem.functional(solution)?;
    let mut divergence_sum = 0.0;
    for (k, s) in solution.plan().shields().iter().enumerate() {
        let sigma = DensityMatrix::new(solution.blocks()[k].clone())?;
        let rho = DensityMatrix::new(reference.blocks()[k].clone())?;
        divergence_sum += relative_entropy(&sigma, &rho)?;
        if !s.shield.is_empty() {
            divergence_sum -= relative_entropy(
                &sigma.partial_trace(&s.shield)?,
                &rho.partial_trace(&s.shield)?,
            )?;
        }
    }
    Ok(DeltaReport {
        delta,
        fmed,
        free_energy,
        divergence_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::models::{commuting_ising_chain, free_chain};
    use crate::oracle::solve_gibbs;

    fn plan(h: &LocalHamiltonian, radius: usize) -> Arc<ShieldPlan> {
        Arc::new(ShieldPlan::consecutive(h.lattice(), radius, h.range()).unwrap())
    }

    #[test]
    fn free_hamiltonian_at_maximally_mixed_family() {
        let h = free_chain(4).unwrap();
        let p = plan(&h, 1);
        let fam = MarginalFamily::maximally_mixed(p, 2).unwrap();
        let f = med_functional(&fam, &h).unwrap();
        assert!((f + 4.0 * 2f64.ln()).abs() < 1e-12);
        let g = med_gradient(&fam, &h).unwrap();
        let l2 = 2f64.ln();
        for (k, gk) in g.iter().enumerate() {
            let expect = if k == 0 { 1.0 - l2 } else { -l2 };
            let id = HermitianOperator::identity(gk.sites().to_vec(), 2)
                .unwrap()
                .scale(expect);
            assert!(crate::operator::max_abs(&(gk.matrix() - id.matrix())) < 1e-12);
        }
    }

    #[test]
    fn commuting_chain_functional_equals_free_energy() {
        let h = commuting_ising_chain(3, 1.0, 1.0, 0.0).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let fam = MarginalFamily::from_gibbs(plan(&h, 1), &sol).unwrap();
        assert!((med_functional(&fam, &h).unwrap() - sol.free_energy()).abs() < 1e-12);
        let rep = delta_certificate(&fam, &sol, &h).unwrap();
        assert!(rep.delta.abs() < 1e-10);
    }

    #[test]
    fn misaligned_blocks_are_rejected() {
        let l = Lattice::chain(3).unwrap();
        let p = Arc::new(ShieldPlan::consecutive(&l, 1, 1).unwrap());
        let wrong = vec![
            HermitianOperator::identity(vec![0], 2).unwrap(),
            HermitianOperator::identity(vec![1], 2).unwrap(),
            HermitianOperator::identity(vec![1, 2], 2).unwrap(),
        ];
        assert!(MarginalFamily::new(p, 2, wrong).is_err());
    }
}
