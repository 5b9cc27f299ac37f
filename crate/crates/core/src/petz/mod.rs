//! Rotated Petz recovery maps and their quadrature.

mod channel;
mod continuity;
mod quadrature;

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    check_ascending, check_subset, conditional_mutual_information, embed, fidelity, partial_trace,
    spectrum_of, trace_distance, trace_norm, union, DensityMatrix, HermitianOperator, Layout,
    SPECTRAL_FLOOR,
};
use crate::oracle::Tripartition;

pub use channel::{ChannelDefects, QuantumChannel};
pub use continuity::{
    continuity_check, lemma_bound_check, reference_taylor_order, sufficient_taylor_order,
    taylor_remainder_probe, ContinuityReport, LemmaCheck, TaylorProbe,
};
pub use quadrature::{beta0, beta0_characteristic, beta0_mass, gauss_legendre, QuadratureScheme};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PetzOptions {
    /// Stop doubling once successive Choi matrices differ by less than this in trace norm.
    pub tol: f64,
    /// Truncation t'; derived from the floor and `tol` when absent.
    pub t_max: Option<f64>,
    pub initial_nodes: usize,
    pub max_nodes: usize,
}

impl Default for PetzOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            t_max: None,
            initial_nodes: 8,
            max_nodes: 1024,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureReport {
    pub t_max: f64,
    pub nodes: usize,
    pub beta_mass: f64,
    pub truncation_mass: f64,
    /// Trace-norm change of the Choi matrix at the last doubling.
    pub last_change: f64,
    /// Smallest eigenvalue of ρ_BC.
    pub floor: f64,
    pub cp_defect: f64,
    pub tp_defect: f64,
}

#[derive(Clone, Debug)]
pub struct PetzChannel {
    pub channel: QuantumChannel,
    pub report: QuadratureReport,
}

/// Spectral data of ρ_BC and ρ_B ⊗ 𝟙_C, enough to form every rotation
/// A_s = ρ_BC^{1/2−is} ρ_B^{is−1/2}.
struct PetzKernel {
    bc: Vec<usize>,
    b: Vec<usize>,
    d: usize,
    lam: Vec<f64>,
    u: Mat<c64>,
    mu: Vec<f64>,
    v: Mat<c64>,
    w: Mat<c64>,
    layout: Layout,
}

impl PetzKernel {
    fn new(rho_bc: &HermitianOperator, b: &[usize]) -> Result<Self> {
        check_ascending(b)?;
        check_subset(b, rho_bc.sites())?;
        let d = rho_bc.local_dim();
        let bc = rho_bc.sites().to_vec();
        let spec = rho_bc.eigh()?;
        if spec.min() <= SPECTRAL_FLOOR {
            return Err(Error::NonPositiveSpectrum {
                min: spec.min(),
                floor: SPECTRAL_FLOOR,
            });
        }
        let rho_b = embed(&partial_trace(rho_bc, b)?, &bc)?;
        let spec_b = spectrum_of(rho_b.matrix())?;
        let w = spec.vectors.adjoint() * &spec_b.vectors;
        Ok(Self {
            layout: Layout::new(&bc, b, d),
            b: b.to_vec(),
            bc,
            d,
            lam: spec.values,
            u: spec.vectors,
            mu: spec_b.values,
            v: spec_b.vectors,
            w,
        })
    }

    fn floor(&self) -> f64 {
        self.lam[0]
    }

    fn rotation(&self, s: f64) -> Mat<c64> {
        let left: Vec<c64> = self
            .lam
            .iter()
            .map(|&l| c64::new(l, 0.0).powc(c64::new(0.5, -s)))
            .collect();
        let right: Vec<c64> = self
            .mu
            .iter()
            .map(|&m| c64::new(m, 0.0).powc(c64::new(-0.5, s)))
            .collect();
        let n = self.lam.len();
        let mid = Mat::from_fn(n, n, |i, j| left[i] * self.w[(i, j)] * right[j]);
        &(&self.u * &mid) * self.v.adjoint()
    }

    /// Columns `K` with R^s(|i⟩⟨j|) = (K K†)[(i,·),(j,·)], scaled by `scale`.
    fn choi_factor(&self, s: f64, scale: f64) -> Mat<c64> {
        let a = self.rotation(s);
        let (din, dc) = (self.layout.part.len(), self.layout.rest.len());
        let dout = self.lam.len();
        Mat::from_fn(din * dout, dc, |row, c| {
            let (i, o) = (row / dout, row % dout);
            a[(o, self.layout.part[i] + self.layout.rest[c])] * scale
        })
    }

    fn choi(&self, scheme: &QuadratureScheme) -> Mat<c64> {
        let weighted: Vec<(f64, f64)> = scheme.beta_weighted().filter(|&(_, w)| w > 0.0).collect();
        let blocks: Vec<Mat<c64>> = weighted
            .par_iter()
            .map(|&(t, w)| self.choi_factor(0.5 * t, w.sqrt()))
            .collect();
        let rows = self.layout.part.len() * self.lam.len();
        let dc = self.layout.rest.len();
        let stacked = Mat::from_fn(rows, dc * blocks.len(), |r, col| {
            blocks[col / dc][(r, col % dc)]
        });
        &stacked * stacked.adjoint()
    }

    fn channel(&self, choi: Mat<c64>) -> Result<QuantumChannel> {
        QuantumChannel::from_choi(self.b.clone(), self.bc.clone(), self.d, choi)
    }
}

/// R^t(X) = ρ_BC^{1/2−it} ρ_B^{it−1/2} X ρ_B^{−it−1/2} ρ_BC^{1/2+it} for X on B.
pub fn rotated_petz_pointwise(
    rho_bc: &HermitianOperator,
    b: &[usize],
    t: f64,
    x: &HermitianOperator,
) -> Result<HermitianOperator> {
    let kernel = PetzKernel::new(rho_bc, b)?;
    if x.sites() != b {
        return Err(Error::SiteMismatch(b.to_vec(), x.sites().to_vec()));
    }
    let a = kernel.rotation(t);
    let padded = embed(x, &kernel.bc)?;
    let out = &(&a * padded.matrix()) * a.adjoint();
    Ok(HermitianOperator::from_parts_symmetrized(
        kernel.bc.clone(),
        kernel.d,
        &out,
    ))
}

/// R^t as a channel from B to BC.
pub fn rotated_petz_pointwise_channel(
    rho_bc: &HermitianOperator,
    b: &[usize],
    t: f64,
) -> Result<QuantumChannel> {
    let kernel = PetzKernel::new(rho_bc, b)?;
    let k = kernel.choi_factor(t, 1.0);
    kernel.channel(&k * k.adjoint())
}

/// ∫ β₀(t) R^{t/2} dt on a fixed quadrature rule.
pub fn rotated_petz_with_scheme(
    rho_bc: &HermitianOperator,
    b: &[usize],
    scheme: &QuadratureScheme,
) -> Result<QuantumChannel> {
    let kernel = PetzKernel::new(rho_bc, b)?;
    kernel.channel(kernel.choi(scheme))
}

/// ∫ β₀(t) R^{t/2} dt, doubling the Gauss–Legendre node count until the Choi matrix
/// settles to `opts.tol` in trace norm.
pub fn rotated_petz_channel(
    rho_bc: &HermitianOperator,
    b: &[usize],
    opts: &PetzOptions,
) -> Result<PetzChannel> {
    let kernel = PetzKernel::new(rho_bc, b)?;
    let a = kernel.floor();
    let t_max = opts
        .t_max
        .unwrap_or_else(|| QuadratureScheme::default_truncation(a, opts.tol));
    let mut n = opts.initial_nodes.max(1);
    let mut prev = kernel.choi(&QuadratureScheme::gauss_legendre(t_max, n));
    let mut change = f64::INFINITY;
    while n * 2 <= opts.max_nodes {
        n *= 2;
        let cur = kernel.choi(&QuadratureScheme::gauss_legendre(t_max, n));
        change = trace_norm(&(&cur - &prev))?;
        prev = cur;
        if change < opts.tol {
            break;
        }
    }
    if change.is_nan() || change >= opts.tol {
        return Err(Error::Quadrature { change, nodes: n });
    }
    let scheme = QuadratureScheme::gauss_legendre(t_max, n);
    let channel = kernel.channel(prev)?;
    let defects = channel.defects()?;
    Ok(PetzChannel {
        channel,
        report: QuadratureReport {
            t_max,
            nodes: n,
            beta_mass: scheme.beta_mass(),
            truncation_mass: scheme.truncation_mass(),
            last_change: change,
            floor: a,
            cp_defect: defects.cp,
            tp_defect: defects.tp,
        },
    })
}

/// The three sides of I(A:C|B) ≥ −2 log F ≥ ¼‖ρ − R(ρ_AB)‖₁².
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecoveryQuality {
    pub cmi: f64,
    pub neg_log_fidelity: f64,
    pub trace_term: f64,
    /// ‖ρ_ABC − R(ρ_AB)‖₁.
    pub trace_distance: f64,
}

impl RecoveryQuality {
    pub fn fidelity_bound_holds(&self, slack: f64) -> bool {
        self.neg_log_fidelity <= self.cmi + slack
    }

    pub fn trace_bound_holds(&self, slack: f64) -> bool {
        self.trace_term <= self.neg_log_fidelity + slack
    }
}

/// Compares ρ_ABC against `channel` applied to ρ_AB. The channel must map B to BC.
pub fn recovery_quality(
    rho: &DensityMatrix,
    tri: &Tripartition,
    channel: &QuantumChannel,
) -> Result<RecoveryQuality> {
    let bc = union(&tri.b, &tri.c);
    if channel.input_sites() != tri.b.as_slice() || channel.output_sites() != bc.as_slice() {
        return Err(Error::Channel(format!(
            "expected a map {:?} -> {:?}, got {:?} -> {:?}",
            tri.b,
            bc,
            channel.input_sites(),
            channel.output_sites()
        )));
    }
    let abc = union(&union(&tri.a, &tri.b), &tri.c);
    let rho_abc = rho.partial_trace(&abc)?;
    let rho_ab = partial_trace(&rho_abc, &union(&tri.a, &tri.b))?;
    let recovered = channel.apply_on(&rho_ab)?;
    let cmi = conditional_mutual_information(&rho_abc, &tri.a, &tri.b, &tri.c)?;
    let f = fidelity(&rho_abc, &recovered)?;
    let dist = trace_distance(&rho_abc, &recovered)?;
    Ok(RecoveryQuality {
        cmi,
        neg_log_fidelity: -2.0 * f.ln(),
        trace_term: 0.25 * dist * dist,
        trace_distance: dist,
    })
}

/// Builds the channel from ρ_BC and evaluates the recovery of ρ_ABC.
pub fn recover(
    rho: &DensityMatrix,
    tri: &Tripartition,
    opts: &PetzOptions,
) -> Result<(RecoveryQuality, QuadratureReport)> {
    let bc = union(&tri.b, &tri.c);
    let rho_bc = rho.partial_trace(&bc)?;
    let petz = rotated_petz_channel(&rho_bc, &tri.b, opts)?;
    Ok((recovery_quality(rho, tri, &petz.channel)?, petz.report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::commuting_ising_chain;
    use crate::operator::{max_abs, random, tensor_product};
    use crate::oracle::solve_gibbs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn product_state_appends_the_c_factor() {
        let mut r = rng(10);
        let rb = random::floored_density_matrix(&mut r, vec![0], 2, 0.05).unwrap();
        let rc = random::floored_density_matrix(&mut r, vec![1], 2, 0.05).unwrap();
        let rbc = tensor_product(&rb, &rc).unwrap();
        let x = random::hermitian(&mut r, vec![0], 2).unwrap();
        for t in [0.0, 0.7, -2.0] {
            let y = rotated_petz_pointwise(&rbc, &[0], t, &x).unwrap();
            let expect = tensor_product(&x, &rc).unwrap();
            assert!(max_abs(&(y.matrix() - expect.matrix())) < 1e-13);
            let back = rotated_petz_pointwise(&rbc, &[0], t, &rb).unwrap();
            assert!(max_abs(&(back.matrix() - rbc.matrix())) < 1e-13);
        }
        let petz = rotated_petz_channel(&rbc, &[0], &PetzOptions::default()).unwrap();
        let direct = QuantumChannel::from_map(vec![0], vec![0, 1], 2, |m| {
            Ok(crate::operator::kron(m, rc.matrix()))
        })
        .unwrap();
        assert!(petz.channel.choi_trace_distance(&direct).unwrap() < 1e-8);
        assert!(petz.report.cp_defect < 1e-9 && petz.report.tp_defect < 1e-8);
    }

    #[test]
    fn pointwise_fixes_the_marginal_on_random_states() {
        let mut r = rng(11);
        let rho = random::floored_density_matrix(&mut r, vec![0, 1, 2], 2, 0.01).unwrap();
        let rb = rho.partial_trace(&[0, 2]).unwrap();
        let y = rotated_petz_pointwise(&rho, &[0, 2], 1.3, &rb).unwrap();
        assert!(max_abs(&(y.matrix() - rho.matrix())) < 1e-12);
    }

    #[test]
    fn classical_petz_matches_bayes_rule() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let rho = HermitianOperator::diagonal(vec![0, 1], 2, &p).unwrap();
        // input distribution q on B = {0}; Petz gives q(b) p(c|b)
        let q = [0.7, 0.3];
        let x = HermitianOperator::diagonal(vec![0], 2, &q).unwrap();
        let y = rotated_petz_pointwise(&rho, &[0], 0.0, &x).unwrap();
        for b in 0..2 {
            let pb = p[2 * b] + p[2 * b + 1];
            for c in 0..2 {
                let expect = q[b] * p[2 * b + c] / pb;
                assert!((y.matrix()[(2 * b + c, 2 * b + c)].re - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn markov_gibbs_state_is_recovered() {
        let h = commuting_ising_chain(3, 1.0, 1.0, 0.3).unwrap();
        let sol = solve_gibbs(&h).unwrap();
        let tri = Tripartition::new(&[0], &[1], &[2]);
        let (q, report) = recover(sol.state(), &tri, &PetzOptions::default()).unwrap();
        assert!(q.cmi < 1e-10);
        assert!(q.trace_distance < 1e-8, "{}", q.trace_distance);
        assert!(report.beta_mass <= 1.0 + 1e-12 && report.beta_mass >= 1.0 - 1e-9);
    }

    #[test]
    fn ghz_cmi_dominates() {
        let amp = |i: usize| {
            if i == 0 || i == 7 {
                c64::new(1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        };
        let psi: Vec<c64> = (0..8).map(amp).collect();
        let ghz = DensityMatrix::pure(vec![0, 1, 2], 2, &psi)
            .unwrap()
            .depolarize(1e-3);
        let tri = Tripartition::new(&[0], &[1], &[2]);
        let (q, _) = recover(&ghz, &tri, &PetzOptions::default()).unwrap();
        assert!((q.cmi - 2f64.ln()).abs() < 0.05);
        assert!(q.fidelity_bound_holds(1e-7) && q.trace_bound_holds(1e-7));
        assert!(q.neg_log_fidelity > 0.01);
    }

    #[test]
    fn doubling_self_convergence() {
        let mut r = rng(12);
        let rho = random::floored_density_matrix(&mut r, vec![0, 1], 2, 0.02).unwrap();
        let petz = rotated_petz_channel(&rho, &[0], &PetzOptions::default()).unwrap();
        assert!(petz.report.last_change < 1e-9);
        let n = petz.report.nodes;
        let finer = rotated_petz_with_scheme(
            &rho,
            &[0],
            &QuadratureScheme::gauss_legendre(petz.report.t_max, 2 * n),
        )
        .unwrap();
        assert!(trace_norm(&(finer.choi() - petz.channel.choi())).unwrap() < 1e-9);
    }

    #[test]
    fn empty_conditioning_prepares_the_state() {
        let mut r = rng(13);
        let rho = random::floored_density_matrix(&mut r, vec![4], 2, 0.1).unwrap();
        let petz = rotated_petz_channel(&rho, &[], &PetzOptions::default()).unwrap();
        let out = petz
            .channel
            .apply_matrix(&Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0)))
            .unwrap();
        assert!(max_abs(&(&out - rho.matrix())) < 1e-9);
    }

    #[test]
    fn singular_states_are_rejected() {
        let rho = HermitianOperator::diagonal(vec![0, 1], 2, &[0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            rotated_petz_channel(&rho, &[0], &PetzOptions::default()),
            Err(Error::NonPositiveSpectrum { .. })
        ));
    }
}
