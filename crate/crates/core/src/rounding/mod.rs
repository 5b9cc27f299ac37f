//! Site-by-site reconstruction of a global state from local marginals by
//! concatenated rotated Petz channels.

mod pipeline;
mod source;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{Shield, ShieldPlan};
use crate::operator::{
    conditional_mutual_information, difference, partial_trace, trace_distance, union,
    DensityMatrix, HermitianOperator,
};
use crate::oracle::GibbsSolution;
use crate::petz::{rotated_petz_channel, PetzChannel, PetzOptions};

pub use pipeline::{end_to_end, EndToEndOptions, EndToEndReport, MarginalMode};
pub use source::{Depolarized, MarginalSource, MedRegion, MedSource};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundingOptions {
    /// Marginals are replaced by (1 − δ)σ + δ𝟙/dim before use; `None` disables this.
    pub regularization: Option<f64>,
    /// Measure ε_σ on doubled shields when the source can supply them.
    pub measure_doubled: bool,
    pub petz: PetzOptions,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        Self {
            regularization: Some(1e-10),
            measure_doubled: true,
            petz: PetzOptions::default(),
        }
    }
}

/// 4√ε_CMI + 2ε_σ + 2√(ε_CMI + 3 log d √ε_σ).
pub fn layer_budget(eps_cmi: f64, eps_sigma: f64, d: usize) -> f64 {
    let (c, s) = (eps_cmi.max(0.0), eps_sigma.max(0.0));
    4.0 * c.sqrt() + 2.0 * s + 2.0 * (c + 3.0 * (d as f64).ln() * s.sqrt()).sqrt()
}

/// Error accounting for one layer.
#[derive(Clone, Debug, Serialize)]
pub struct LayerRecord {
    pub step: usize,
    pub site: usize,
    pub shield: Vec<usize>,
    pub doubled_extended: Vec<usize>,
    /// Smallest eigenvalue of the (regularized) σ_{S'_k}.
    pub floor: f64,
    pub quadrature_nodes: usize,
    pub cp_defect: f64,
    pub tp_defect: f64,
    /// ‖σ − ρ‖₁ on S'²_k, or on S'_k when `eps_sigma_on_doubled` is false.
    pub eps_sigma: f64,
    pub eps_sigma_on_doubled: bool,
    /// I(k+1 : S²_k∖S_k | S_k)_ρ.
    pub cmi_inner: f64,
    /// I(S'_k : [k]∖S²_k | S²_k∖S_k)_ρ.
    pub cmi_outer: f64,
    pub eps_cmi: f64,
    /// ‖σ̃_k − ρ_{[k]}‖₁.
    pub error_before: f64,
    /// ‖σ̃_{k+1} − ρ_{[k+1]}‖₁.
    pub error_after: f64,
    pub increment: f64,
    pub budget: f64,
    /// ‖φ(σ_{S²_k}) − σ_{S'²_k}‖₁, when doubled marginals are available.
    pub local_recovery_error: Option<f64>,
    /// 2√(ε_CMI + 3 log d √ε_σ), the bound on `local_recovery_error`.
    pub local_recovery_bound: f64,
    /// Register dimension d^{|S'_k|} of the layer.
    pub register_dim: usize,
}

impl LayerRecord {
    pub fn within_budget(&self) -> bool {
        self.increment <= self.budget + 1e-9
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundingRun {
    pub ordering: Vec<usize>,
    pub radius: usize,
    pub regularization: Option<f64>,
    pub layers: Vec<LayerRecord>,
    /// ‖σ̃ − ρ‖₁.
    pub final_error: f64,
    /// Σ of the per-layer budgets.
    pub final_budget: f64,
    #[serde(skip)]
    pub state: HermitianOperator,
}

impl RoundingRun {
    pub fn all_within_budget(&self) -> bool {
        self.layers.iter().all(LayerRecord::within_budget)
    }

    pub fn max_eps_sigma(&self) -> f64 {
        self.layers.iter().map(|l| l.eps_sigma).fold(0.0, f64::max)
    }

    pub fn max_tp_defect(&self) -> f64 {
        self.layers.iter().map(|l| l.tp_defect).fold(0.0, f64::max)
    }
}

fn regularize(sigma: DensityMatrix, reg: Option<f64>) -> DensityMatrix {
    match reg {
        Some(delta) if delta > 0.0 => sigma.depolarize(delta),
        _ => sigma,
    }
}

/// φ_{k+1} = R_{σ_{S'_k}, Tr_{k+1}}, mapping S_k to S'_k. With an empty shield it
/// prepares σ_{S'_k} from nothing.
pub fn build_layer(
    sigma: &HermitianOperator,
    shield: &Shield,
    opts: &PetzOptions,
) -> Result<PetzChannel> {
    if sigma.sites() != shield.extended.as_slice() {
        return Err(crate::error::Error::SiteMismatch(
            shield.extended.clone(),
            sigma.sites().to_vec(),
        ));
    }
    rotated_petz_channel(sigma, &shield.shield, opts)
}

/// The state on no sites.
fn unit_state(d: usize) -> Result<HermitianOperator> {
    HermitianOperator::new(Vec::new(), d, Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0)))
}

/// Runs every layer of `plan` and compares each intermediate state with the exact marginal.
pub fn run_rounding(
    plan: &ShieldPlan,
    source: &dyn MarginalSource,
    oracle: &GibbsSolution,
    opts: &RoundingOptions,
) -> Result<RoundingRun> {
    let rho = oracle.state();
    let d = rho.local_dim();
    let mut state = unit_state(d)?;
    let mut error_before = 0.0;
    let mut layers = Vec::with_capacity(plan.len());
    for s in plan.shields() {
        let doubled = opts.measure_doubled && source.supports(&s.doubled_extended);
        let (sigma, sigma_doubled) = if doubled {
            let big = regularize(source.marginal(&s.doubled_extended)?, opts.regularization);
            (big.partial_trace(&s.extended)?, Some(big))
        } else {
            (
                regularize(source.marginal(&s.extended)?, opts.regularization),
                None,
            )
        };
        let eps_sigma = match &sigma_doubled {
            Some(big) => trace_distance(big, oracle.marginal(&s.doubled_extended)?.as_operator())?,
            None => trace_distance(&sigma, oracle.marginal(&s.extended)?.as_operator())?,
        };
        let petz = build_layer(&sigma, s, &opts.petz)?;
        let local_recovery_error = match &sigma_doubled {
            Some(big) => {
                let input = partial_trace(big, &s.doubled)?;
                Some(trace_distance(&petz.channel.apply_on(&input)?, big)?)
            }
            None => None,
        };
        state = petz.channel.apply_on(&state)?;
        let placed = plan.placed(s.step + 1);
        let error_after = trace_distance(&state, oracle.marginal(&placed)?.as_operator())?;

        let outer_b = difference(&s.doubled, &s.shield);
        let earlier = plan.placed(s.step);
        let cmi_inner = conditional_mutual_information(rho, &[s.site], &s.shield, &outer_b)?;
        let cmi_outer = conditional_mutual_information(
            rho,
            &s.extended,
            &outer_b,
            &difference(&earlier, &s.doubled),
        )?;
        let eps_cmi = cmi_inner.max(cmi_outer);
        let increment = error_after - error_before;
        layers.push(LayerRecord {
            step: s.step,
            site: s.site,
            shield: s.shield.clone(),
            doubled_extended: s.doubled_extended.clone(),
            floor: petz.report.floor,
            quadrature_nodes: petz.report.nodes,
            cp_defect: petz.report.cp_defect,
            tp_defect: petz.report.tp_defect,
            eps_sigma,
            eps_sigma_on_doubled: sigma_doubled.is_some(),
            cmi_inner,
            cmi_outer,
            eps_cmi,
            error_before,
            error_after,
            increment,
            budget: layer_budget(eps_cmi, eps_sigma, d),
            local_recovery_error,
            local_recovery_bound: 2.0 * (eps_cmi + 3.0 * (d as f64).ln() * eps_sigma.sqrt()).sqrt(),
            register_dim: d.pow(s.extended.len() as u32),
        });
        error_before = error_after;
    }
    let final_budget = layers.iter().map(|l| l.budget).sum();
    let all = union(&[], plan.ordering());
    debug_assert_eq!(state.sites(), all.as_slice());
    Ok(RoundingRun {
        ordering: plan.ordering().to_vec(),
        radius: plan.radius(),
        regularization: opts.regularization,
        layers,
        final_error: error_before,
        final_budget,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::models::{commuting_ising_chain, free_chain, tfim_chain};
    use crate::operator::{max_abs, random};
    use crate::oracle::solve_gibbs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain_plan(n: usize, radius: usize) -> ShieldPlan {
        ShieldPlan::consecutive(&Lattice::chain(n).unwrap(), radius, 1).unwrap()
    }

    #[test]
    fn exact_markov_chain_is_reconstructed() {
        let h = commuting_ising_chain(5, 1.0, 1.0, 0.3).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let run = run_rounding(&chain_plan(5, 1), &sol, &sol, &RoundingOptions::default()).unwrap();
        assert!(run.final_error < 1e-6, "{}", run.final_error);
        assert!(run.all_within_budget());
        assert!(run.layers.iter().all(|l| l.eps_sigma_on_doubled));
    }

    #[test]
    fn perturbed_marginals_stay_within_budget() {
        let h = commuting_ising_chain(4, 0.5, 1.0, 0.3).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let src = Depolarized {
            inner: solve_gibbs(&h).unwrap(),
            delta: 1e-4,
        };
        let run = run_rounding(&chain_plan(4, 1), &src, &sol, &RoundingOptions::default()).unwrap();
        assert!(run.all_within_budget());
        assert!(run.final_error <= run.final_budget);
        assert!(run.max_eps_sigma() > 1e-6);
    }

    #[test]
    fn tfim_layers_respect_budget() {
        let h = tfim_chain(5, 0.5).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let run = run_rounding(&chain_plan(5, 2), &sol, &sol, &RoundingOptions::default()).unwrap();
        assert!(run.all_within_budget());
        assert!(run.final_error > 1e-8);
    }

    #[test]
    fn free_hamiltonian_gives_maximally_mixed_state() {
        let h = free_chain(4).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let run = run_rounding(&chain_plan(4, 1), &sol, &sol, &RoundingOptions::default()).unwrap();
        let expect = DensityMatrix::maximally_mixed(vec![0, 1, 2, 3], 2).unwrap();
        // quadrature truncation loses a little trace in every layer
        let tr = run.state.trace();
        assert!((1.0 - tr).abs() < 1e-8);
        let dev = max_abs(&(run.state.scale(1.0 / tr).matrix() - expect.matrix()));
        assert!(dev < 1e-12, "{dev:e}");
    }

    #[test]
    fn layers_commute_with_unitaries_outside_their_register() {
        let h = tfim_chain(4, 1.0).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let plan = chain_plan(4, 1);
        let s = &plan.shields()[3];
        let petz = build_layer(
            &sol.marginal(&s.extended).unwrap(),
            s,
            &PetzOptions::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let prev = random::density_matrix(&mut rng, vec![0, 1, 2], 2, None).unwrap();
        // a unitary on site 0, which is outside S'_3 = {2, 3}
        let u1 = random::unitary(&mut rng, 2).unwrap();
        let u = crate::operator::kron(&u1, &Mat::identity(4, 4));
        let rotated =
            HermitianOperator::new(vec![0, 1, 2], 2, &(&u * prev.matrix()) * u.adjoint()).unwrap();
        let a = petz.channel.apply_on(&rotated).unwrap();
        let b = petz.channel.apply_on(&prev).unwrap();
        let u_out = crate::operator::kron(&u1, &Mat::identity(8, 8));
        let b = &(&u_out * b.matrix()) * u_out.adjoint();
        assert!(max_abs(&(a.matrix() - &b)) < 1e-12);
    }
}
