//! Projected gradient descent over the floored, locally consistent families.

use std::io::Write;
use std::sync::Arc;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::constraints::{ConstraintSystem, FlatLayout};
use super::spectrahedron::project_floored_simplex;
use super::{DeltaReport, MarginalFamily, MedProblem};
use crate::error::Result;
use crate::lattice::{LocalHamiltonian, ShieldPlan};
use crate::operator::{
    add_padded, entropy_of_spectrum, partial_trace, HermitianOperator, Layout, SPECTRAL_FLOOR,
};
use crate::oracle::GibbsSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Trial step `initial_step` every iteration, halved until Armijo holds.
    Fixed,
    /// Barzilai–Borwein trial step, halved until the nonmonotone Armijo test holds.
    BarzilaiBorwein,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Eigenvalue floor λ of the feasible set.
    pub floor: f64,
    /// Stop once the projected gradient norm falls below this.
    pub tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
    pub initial_step: f64,
    pub step_rule: StepRule,
    /// Window of the nonmonotone line search; 1 gives plain Armijo.
    pub memory: usize,
    pub dykstra_max_iters: usize,
    pub dykstra_tol: f64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            floor: 1e-12,
            tol: 1e-9,
            max_iters: 20_000,
            armijo: 1e-4,
            initial_step: 1.0,
            step_rule: StepRule::BarzilaiBorwein,
            memory: 10,
            dykstra_max_iters: 5_000,
            dykstra_tol: 1e-12,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    /// Uses the floor e^{-JN}/2 derived from the Hamiltonian.
    pub fn with_hamiltonian_floor(mut self, h: &LocalHamiltonian) -> Result<Self> {
        self.floor = h.spectral_floor()?;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub fmed: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MedCertificate {
    pub fmed_value: f64,
    pub consistency_residual: f64,
    pub delta: Option<f64>,
    pub floor_used: f64,
    /// Σ_k ‖h_k‖·‖σ_k − P(σ)_k‖₁ with P the projection onto exactly consistent families:
    /// how far the energy term can move because of leftover inconsistency.
    pub feasibility_energy_error: f64,
}

#[derive(Clone, Debug)]
pub struct MedSolution {
    pub family: MarginalFamily,
    pub certificate: MedCertificate,
    pub iterations: usize,
    pub converged: bool,
    pub projected_gradient: f64,
    pub trace: Vec<TraceRow>,
}

impl MedSolution {
    pub fn value(&self) -> f64 {
        self.certificate.fmed_value
    }

    /// Fills in δ against the exact Gibbs state.
    pub fn certify(&mut self, oracle: &GibbsSolution, h: &LocalHamiltonian) -> Result<DeltaReport> {
        let rep = super::delta_certificate(&self.family, oracle, h)?;
        self.certificate.delta = Some(rep.delta);
        Ok(rep)
    }

    pub fn write_trace_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "iteration,fmed,residual,step")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{:.15e},{:.6e},{:.6e}",
                r.iteration, r.fmed, r.residual, r.step
            )?;
        }
        Ok(())
    }
}

/// Minimizes FMED over consistent families with every block ⪰ λ𝟙, starting from
/// the maximally mixed family. Non-convergence is reported through `converged`.
pub fn solve_med(
    h: &LocalHamiltonian,
    plan: Arc<ShieldPlan>,
    opts: &SolverOptions,
) -> Result<MedSolution> {
    let problem = MedProblem::new(h, plan)?;
    solve_problem(&problem, opts)
}

pub fn solve_problem(problem: &MedProblem, opts: &SolverOptions) -> Result<MedSolution> {
    let floor = effective_floor(opts.floor);
    let d = problem.local_dim();
    let system = ConstraintSystem::new(problem.plan(), d, true)?;
    let eval = Evaluator::new(problem, &system.layout, d);
    let start = MarginalFamily::maximally_mixed(problem.shared_plan(), d)?;
    let feasible = FeasibleSet {
        system: &system,
        sites: problem
            .plan()
            .shields()
            .iter()
            .map(|s| s.extended.clone())
            .collect(),
        d,
        floor,
        max_iters: opts.dykstra_max_iters,
        tol: opts.dykstra_tol,
    };

    let mut x = feasible.project(&system.layout.flatten(&start.matrices()))?;
    let (mut f, mut g) = eval.value_and_gradient(&x)?;
    let mut history = vec![f];
    let mut alpha = opts.initial_step;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut pg = f64::INFINITY;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        iterations = it;
        let trial = if opts.step_rule == StepRule::Fixed {
            opts.initial_step
        } else {
            alpha
        };
        let z: Vec<c64> = x.iter().zip(&g).map(|(a, b)| a - b * trial).collect();
        let p = feasible.project(&z)?;
        let dir: Vec<c64> = p.iter().zip(&x).map(|(a, b)| a - b).collect();
        pg = norm(&dir) / trial;
        if opts.record_trace {
            trace.push(TraceRow {
                iteration: it,
                fmed: f,
                residual: system.consistency_norm(&x),
                step: trial,
            });
        }
        if pg <= opts.tol {
            converged = true;
            break;
        }
        let slope = real_inner(&g, &dir);
        let window = opts.memory.max(1);
        let reference = history[history.len().saturating_sub(window)..]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let rounding = 1e-14 * (1.0 + f.abs());
        let mut lambda = 1.0;
        let accepted = loop {
            let cand: Vec<c64> = x.iter().zip(&dir).map(|(a, b)| a + b * lambda).collect();
            let fc = eval.value(&cand)?;
            if fc <= reference + opts.armijo * lambda * slope + rounding {
                break Some((cand, fc));
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                break None;
            }
        };
        let Some((next, f_next)) = accepted else {
            log::debug!("line search stalled at iteration {it} with projected gradient {pg:e}");
            converged = pg <= opts.tol.sqrt();
            break;
        };
        let (_, g_next) = eval.value_and_gradient(&next)?;
        let s: Vec<c64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<c64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = real_inner(&s, &y);
        alpha = if sy > 0.0 {
            let bb = if it % 2 == 0 {
                real_inner(&s, &s) / sy
            } else {
                sy / real_inner(&y, &y)
            };
            bb.clamp(1e-10, 1e10)
        } else {
            1e3
        };
        x = next;
        f = f_next;
        g = g_next;
        history.push(f);
        iterations = it + 1;
    }
    if !converged {
        log::warn!(
            "MED solver stopped after {iterations} iterations with projected gradient {pg:e}"
        );
    }

    let family = start.with_flat(&system.layout, &x)?;
    let fmed_value = problem.functional(&family)?;
    let consistency_residual = super::consistency_map(&family)?.norm;
    let exact = system.project(&x);
    let mut feasibility_energy_error = 0.0;
    for (k, h) in problem.terms().iter().enumerate() {
        let diff = HermitianOperator::from_parts_symmetrized(
            h.sites().to_vec(),
            d,
            &(&system.layout.block(&x, k) - &system.layout.block(&exact, k)),
        );
        feasibility_energy_error += h.op_norm()? * diff.trace_norm()?;
    }
    Ok(MedSolution {
        family,
        certificate: MedCertificate {
            fmed_value,
            consistency_residual,
            delta: None,
            floor_used: floor,
            feasibility_energy_error,
        },
        iterations,
        converged,
        projected_gradient: pg,
        trace,
    })
}

fn effective_floor(requested: f64) -> f64 {
    let min = 2.0 * SPECTRAL_FLOOR;
    if requested < min {
        log::warn!("eigenvalue floor {requested:e} raised to {min:e} to keep logarithms finite");
        min
    } else {
        requested
    }
}

fn norm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn real_inner(a: &[c64], b: &[c64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

/// The affine consistency set intersected with the floored spectrahedra.
struct FeasibleSet<'a> {
    system: &'a ConstraintSystem,
    sites: Vec<Vec<usize>>,
    d: usize,
    floor: f64,
    max_iters: usize,
    tol: f64,
}

impl FeasibleSet<'_> {
    fn project_blocks(&self, x: &[c64]) -> Result<(Vec<c64>, bool)> {
        let layout = &self.system.layout;
        let mut out = Vec::with_capacity(x.len());
        let mut inside = true;
        for (k, sites) in self.sites.iter().enumerate() {
            let m = layout.block(x, k);
            let spec =
                HermitianOperator::from_parts_symmetrized(sites.clone(), self.d, &m).eigh()?;
            let total: f64 = spec.values.iter().sum();
            inside &= spec.min() >= self.floor && (total - 1.0).abs() < 1e-12;
            let mu = project_floored_simplex(&spec.values, self.floor);
            let u = &spec.vectors;
            let w = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * mu[j]);
            out.extend(flat(&(&w * u.adjoint())));
        }
        Ok((out, inside))
    }

    /// Dykstra alternation; the affine projection alone is returned when it already
    /// satisfies the floor.
    fn project(&self, z: &[c64]) -> Result<Vec<c64>> {
        let mut y = self.system.project(z);
        let (first, inside) = self.project_blocks(&y)?;
        if inside {
            return Ok(y);
        }
        let mut x = first;
        let mut q: Vec<c64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        for _ in 0..self.max_iters {
            y = self.system.project(&x);
            let shifted: Vec<c64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            let (next, _) = self.project_blocks(&shifted)?;
            let gap = norm(&y.iter().zip(&next).map(|(a, b)| a - b).collect::<Vec<_>>());
            let moved = norm(&x.iter().zip(&next).map(|(a, b)| a - b).collect::<Vec<_>>());
            q = shifted.iter().zip(&next).map(|(a, b)| a - b).collect();
            x = next;
            if gap < self.tol && moved < self.tol {
                return Ok(x);
            }
        }
        log::debug!("alternating projections hit the iteration cap");
        Ok(x)
    }
}

fn flat(m: &Mat<c64>) -> Vec<c64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// FMED and its gradient on flat families.
struct Evaluator<'a> {
    problem: &'a MedProblem,
    layout: &'a FlatLayout,
    d: usize,
    reductions: Vec<Option<Layout>>,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a MedProblem, layout: &'a FlatLayout, d: usize) -> Self {
        let reductions = problem
            .plan()
            .shields()
            .iter()
            .map(|s| (!s.shield.is_empty()).then(|| Layout::new(&s.extended, &s.shield, d)))
            .collect();
        Self {
            problem,
            layout,
            d,
            reductions,
        }
    }

    fn block(&self, x: &[c64], k: usize) -> HermitianOperator {
        let sites = self.problem.plan().shields()[k].extended.clone();
        HermitianOperator::from_parts_symmetrized(sites, self.d, &self.layout.block(x, k))
    }

    fn value(&self, x: &[c64]) -> Result<f64> {
        let mut total = 0.0;
        for (k, h) in self.problem.terms().iter().enumerate() {
            let sigma = self.block(x, k);
            total += sigma.inner(h)?;
            total -= entropy_of_spectrum(&sigma.eigenvalues()?);
            if let Some(s) = self.reduced(&sigma, k)? {
                total += entropy_of_spectrum(&s.eigenvalues()?);
            }
        }
        Ok(total)
    }

    fn reduced(&self, sigma: &HermitianOperator, k: usize) -> Result<Option<HermitianOperator>> {
        let shield = &self.problem.plan().shields()[k].shield;
        if shield.is_empty() {
            return Ok(None);
        }
        Ok(Some(partial_trace(sigma, shield)?))
    }

    fn value_and_gradient(&self, x: &[c64]) -> Result<(f64, Vec<c64>)> {
        let mut total = 0.0;
        let mut grad = Vec::with_capacity(x.len());
        for (k, h) in self.problem.terms().iter().enumerate() {
            let sigma = self.block(x, k);
            let spec = sigma.eigh()?;
            total += sigma.inner(h)?;
            total -= entropy_of_spectrum(&spec.values);
            let floored = spec.floored(true)?;
            let mut gk = &floored.map(|v| c64::new(v.ln(), 0.0)) + h.matrix();
            match self.reduced(&sigma, k)? {
                None => {
                    for i in 0..gk.nrows() {
                        gk[(i, i)] += c64::new(1.0, 0.0);
                    }
                }
                Some(s) => {
                    let spec_s = s.eigh()?;
                    total += entropy_of_spectrum(&spec_s.values);
                    let log_s = spec_s.floored(true)?.map(|v| c64::new(-v.ln(), 0.0));
                    let layout = self.reductions[k].as_ref().expect("shield layout");
                    add_padded(&mut gk, &log_s, layout);
                }
            }
            grad.extend(flat(&gk));
        }
        Ok((total, grad))
    }
}
