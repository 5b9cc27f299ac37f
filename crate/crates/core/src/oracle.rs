//! Exact diagonalization: Gibbs states, marginals, effective interactions and
//! decay scans.

use std::collections::HashMap;
use std::io::Write;
use std::sync::RwLock;

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{local_term_sum, Lattice, LocalHamiltonian};
use crate::operator::{
    conditional_mutual_information, difference, embed, normalize_sites, partial_trace,
    DensityMatrix, HermitianOperator,
};

pub const DEFAULT_MAX_SITES: usize = 12;

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Largest qubit count accepted; for d > 2 the cap is on the equivalent dimension 2^max_sites.
    pub max_sites: usize,
    pub allow_oversize: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_sites: DEFAULT_MAX_SITES,
            allow_oversize: false,
        }
    }
}

impl OracleOptions {
    pub fn check(&self, sites: usize, local_dim: usize) -> Result<()> {
        let log_dim = sites as f64 * (local_dim as f64).log2();
        if !self.allow_oversize && log_dim > self.max_sites as f64 + 1e-9 {
            return Err(Error::SizeCap {
                sites,
                local_dim,
                cap: self.max_sites,
            });
        }
        Ok(())
    }
}

/// ρ = e^{-H}/Z with F = -log Z and an on-demand marginal cache.
#[derive(Debug)]
pub struct GibbsSolution {
    state: DensityMatrix,
    log_partition: f64,
    energy: f64,
    cache: RwLock<HashMap<Vec<usize>, DensityMatrix>>,
}

pub fn solve_gibbs(h: &LocalHamiltonian) -> Result<GibbsSolution> {
    solve_gibbs_with(h, &OracleOptions::default())
}

pub fn solve_gibbs_with(h: &LocalHamiltonian, opts: &OracleOptions) -> Result<GibbsSolution> {
    opts.check(h.num_sites(), h.local_dim())?;
    let full = h.full()?;
    let spec = full.eigh()?;
    let shift = spec.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let sum: f64 = spec.values.iter().map(|&v| (shift - v).exp()).sum();
    let log_partition = sum.ln() - shift;
    let probs: Vec<f64> = spec
        .values
        .iter()
        .map(|&v| (-v - log_partition).exp())
        .collect();
    let energy = probs.iter().zip(&spec.values).map(|(p, v)| p * v).sum();
    let m = spec.map(|x| c64::new((-x - log_partition).exp(), 0.0));
    let state = DensityMatrix::from_operator_unchecked(HermitianOperator::from_parts_symmetrized(
        full.sites().to_vec(),
        h.local_dim(),
        &m,
    ));
    Ok(GibbsSolution {
        state,
        log_partition,
        energy,
        cache: RwLock::new(HashMap::new()),
    })
}

impl GibbsSolution {
    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn free_energy(&self) -> f64 {
        -self.log_partition
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// Tr[Hρ].
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn entropy(&self) -> f64 {
        self.energy + self.log_partition
    }

    /// ρ_A, computed once per site set and cached.
    pub fn marginal(&self, sites: &[usize]) -> Result<DensityMatrix> {
        let key = normalize_sites(sites);
        if let Some(m) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let m = self.state.partial_trace(&key)?;
        self.cache
            .write()
            .expect("cache lock")
            .insert(key, m.clone());
        Ok(m)
    }
}

/// Tr[Hσ] − S(σ).
pub fn variational_free_energy(h: &LocalHamiltonian, sigma: &DensityMatrix) -> Result<f64> {
    let full = h.full()?;
    Ok(full.inner(sigma)? - crate::operator::von_neumann_entropy(sigma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayPoint {
    /// Collar width ℓ.
    pub width: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct EffectiveInteractionReport {
    pub region: Vec<usize>,
    /// Φ̂_A = −H_A − log ρ_A − log Z.
    pub interaction: HermitianOperator,
    /// Operator norm of −log ρ_A − (H_A + Φ̂_A + log Z).
    pub reconstruction_residual: f64,
    pub profile: Vec<DecayPoint>,
}

pub fn exact_effective_interaction(
    sol: &GibbsSolution,
    h: &LocalHamiltonian,
    region: &[usize],
) -> Result<EffectiveInteractionReport> {
    let region = normalize_sites(region);
    let (interaction, neg_log) = effective_interaction_parts(sol, h, &region)?;
    let h_a = local_term_sum(h, &region)?;
    let rebuilt = h_a.plus(&interaction)?.add_identity(sol.log_partition());
    let reconstruction_residual = neg_log.minus(&rebuilt)?.op_norm()?;
    let profile = scan_profile(&interaction, h.lattice(), &region, &PartialTraceProjector)?;
    Ok(EffectiveInteractionReport {
        region,
        interaction,
        reconstruction_residual,
        profile,
    })
}

fn effective_interaction_parts(
    sol: &GibbsSolution,
    h: &LocalHamiltonian,
    region: &[usize],
) -> Result<(HermitianOperator, HermitianOperator)> {
    let rho_a = sol.marginal(region)?;
    let neg_log = rho_a.log(false).map_err(|e| match e {
        Error::NonPositiveSpectrum { .. } => {
            Error::InvalidState(format!("marginal on {region:?} is rank deficient"))
        }
        other => other,
    })?;
    let neg_log = neg_log.scale(-1.0);
    let h_a = local_term_sum(h, region)?;
    let phi = neg_log.minus(&h_a)?.add_identity(-sol.log_partition());
    Ok((phi, neg_log))
}

/// Maps an operator on a region to one supported on the collar.
pub trait CollarProjector {
    fn project(&self, op: &HermitianOperator, collar: &[usize]) -> Result<HermitianOperator>;
}

/// X ↦ (Tr_{A∖collar} X / d^{|A∖collar|}) ⊗ 𝟙.
#[derive(Clone, Copy, Debug, Default)]
pub struct PartialTraceProjector;

impl CollarProjector for PartialTraceProjector {
    fn project(&self, op: &HermitianOperator, collar: &[usize]) -> Result<HermitianOperator> {
        let removed = difference(op.sites(), collar);
        let norm = (op.local_dim() as f64).powi(removed.len() as i32);
        let reduced = partial_trace(op, collar)?.scale(1.0 / norm);
        embed(&reduced, op.sites())
    }
}

/// {i ∈ A : d(i, Ā) < width}.
pub fn collar(lattice: &Lattice, region: &[usize], width: usize) -> Vec<usize> {
    let outside: Vec<usize> = lattice.sites().filter(|s| !region.contains(s)).collect();
    region
        .iter()
        .copied()
        .filter(|&i| {
            lattice
                .set_distance(&[i], &outside)
                .is_some_and(|d| d < width)
        })
        .collect()
}

/// ε(ℓ) = ‖Φ̂_A − Π_ℓ Φ̂_A‖ for ℓ = 0 up to the first width whose collar is all of A.
pub fn decay_scan(
    sol: &GibbsSolution,
    h: &LocalHamiltonian,
    region: &[usize],
) -> Result<Vec<DecayPoint>> {
    decay_scan_with(sol, h, region, &PartialTraceProjector)
}

pub fn decay_scan_with(
    sol: &GibbsSolution,
    h: &LocalHamiltonian,
    region: &[usize],
    projector: &dyn CollarProjector,
) -> Result<Vec<DecayPoint>> {
    let region = normalize_sites(region);
    let (phi, _) = effective_interaction_parts(sol, h, &region)?;
    scan_profile(&phi, h.lattice(), &region, projector)
}

fn scan_profile(
    phi: &HermitianOperator,
    lattice: &Lattice,
    region: &[usize],
    projector: &dyn CollarProjector,
) -> Result<Vec<DecayPoint>> {
    let outside: Vec<usize> = lattice.sites().filter(|s| !region.contains(s)).collect();
    let depth = region
        .iter()
        .filter_map(|&i| lattice.set_distance(&[i], &outside))
        .max()
        .map_or(0, |d| d + 1);
    (0..=depth)
        .map(|width| {
            let c = collar(lattice, region, width);
            let approx = projector.project(phi, &c)?;
            Ok(DecayPoint {
                width,
                epsilon: phi.minus(&approx)?.op_norm()?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Tripartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

impl Tripartition {
    pub fn new(a: &[usize], b: &[usize], c: &[usize]) -> Self {
        Self {
            a: normalize_sites(a),
            b: normalize_sites(b),
            c: normalize_sites(c),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CmiRow {
    pub distance: usize,
    pub cmi: f64,
    pub tripartition: Tripartition,
}

pub fn cmi_decay_scan(
    sol: &GibbsSolution,
    lattice: &Lattice,
    tripartitions: &[Tripartition],
) -> Result<Vec<CmiRow>> {
    tripartitions
        .iter()
        .map(|t| {
            let sites = normalize_sites(&[t.a.clone(), t.b.clone(), t.c.clone()].concat());
            let rho = sol.marginal(&sites)?;
            Ok(CmiRow {
                distance: lattice.set_distance(&t.a, &t.c).unwrap_or(0),
                cmi: conditional_mutual_information(&rho, &t.a, &t.b, &t.c)?,
                tripartition: t.clone(),
            })
        })
        .collect()
}

/// A = {start}, C = {start + k}, B the sites in between, for k = 2, 3, … within a chain of `n`.
pub fn chain_tripartitions(n: usize, start: usize) -> Vec<Tripartition> {
    (start + 2..n)
        .map(|c| {
            let b: Vec<usize> = (start + 1..c).collect();
            Tripartition::new(&[start], &b, &[c])
        })
        .collect()
}

/// Least-squares line through `(x, y)` pairs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Writes `model_id,<key>,value` rows.
pub fn write_scan_csv(mut out: impl Write, key: &str, rows: &[(String, usize, f64)]) -> Result<()> {
    writeln!(out, "model_id,{key},value")?;
    for (id, k, v) in rows {
        writeln!(out, "{id},{k},{v:.12e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{commuting_ising_chain, free_chain, tfim_chain};
    use crate::operator::{pauli, trace_distance};

    #[test]
    fn zero_hamiltonian_gives_maximally_mixed_state() {
        let sol = solve_gibbs(&free_chain(3).unwrap()).unwrap();
        assert!((sol.free_energy() + 3.0 * 2f64.ln()).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(vec![0, 1, 2], 2).unwrap();
        assert!(trace_distance(sol.state(), &mixed).unwrap() < 1e-12);
    }

    #[test]
    fn single_qubit_free_energy() {
        let mut h = LocalHamiltonian::new(Lattice::chain(1).unwrap(), 2).unwrap();
        h.add_term(HermitianOperator::new(vec![0], 2, pauli('Z').unwrap()).unwrap())
            .unwrap();
        let sol = solve_gibbs(&h).unwrap();
        assert!((sol.free_energy() + (2.0 * 1f64.cosh()).ln()).abs() < 1e-12);
        assert!((sol.free_energy() + 1.126928).abs() < 1e-6);
    }

    #[test]
    fn size_cap_is_enforced_unless_overridden() {
        let h = free_chain(13).unwrap();
        assert!(matches!(solve_gibbs(&h), Err(Error::SizeCap { .. })));
        let opts = OracleOptions {
            max_sites: 2,
            allow_oversize: false,
        };
        assert!(solve_gibbs_with(&free_chain(3).unwrap(), &opts).is_err());
        let opts = OracleOptions {
            max_sites: 2,
            allow_oversize: true,
        };
        assert!(solve_gibbs_with(&free_chain(3).unwrap(), &opts).is_ok());
    }

    #[test]
    fn marginals_are_cached_and_consistent() {
        let sol = solve_gibbs(&tfim_chain(4, 0.7).unwrap()).unwrap();
        let a = sol.marginal(&[2, 1]).unwrap();
        let b = sol.marginal(&[1, 2]).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = sol
            .marginal(&[1, 2, 3])
            .unwrap()
            .partial_trace(&[1, 2])
            .unwrap();
        assert!(trace_distance(&a, &c).unwrap() < 1e-12);
    }

    #[test]
    fn whole_region_has_zero_effective_interaction() {
        let h = tfim_chain(4, 0.5).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let rep = exact_effective_interaction(&sol, &h, &[0, 1, 2, 3]).unwrap();
        assert!(rep.interaction.op_norm().unwrap() < 1e-9);
        assert!(rep.reconstruction_residual < 1e-9);
    }

    #[test]
    fn collar_widths() {
        let l = Lattice::chain(8).unwrap();
        let a = [2, 3, 4, 5];
        assert!(collar(&l, &a, 0).is_empty());
        assert!(collar(&l, &a, 1).is_empty());
        assert_eq!(collar(&l, &a, 2), vec![2, 5]);
        assert_eq!(collar(&l, &a, 3), vec![2, 3, 4, 5]);
    }

    #[test]
    fn commuting_chain_cmi_vanishes() {
        let h = commuting_ising_chain(3, 1.0, 1.0, 0.0).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let rows = cmi_decay_scan(&sol, h.lattice(), &chain_tripartitions(3, 0)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].cmi < 1e-10);
    }

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }
}
