//! Every bound check in one command, with a one-line verdict per check.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::table::{format_f64, Row};
use crate::error::Result;
use crate::lattice::{LocalHamiltonian, ShieldPlan};
use crate::med::{solve_med, SolverOptions};
use crate::models::{commuting_ising_chain, default_corpus, tfim_chain, CorpusModel};
use crate::operator::{random, union, von_neumann_entropy, DensityMatrix};
use crate::oracle::{
    chain_tripartitions, cmi_decay_scan, solve_gibbs, variational_free_energy, GibbsSolution,
    Tripartition,
};
use crate::petz::{
    beta0_mass, continuity_check, lemma_bound_check, recovery_quality, reference_taylor_order,
    rotated_petz_channel, taylor_remainder_probe, PetzOptions, QuadratureScheme,
};
use crate::rounding::{run_rounding, Depolarized, MarginalSource, RoundingOptions};

/// (name, family) of every check, in run order.
pub const CHECKS: &[(&str, &str)] = &[
    ("oracle.variational", "oracle"),
    ("med.relaxation", "med"),
    ("med.certificate", "med"),
    ("med.exact", "med"),
    ("cmi.markov", "cmi"),
    ("cmi.ssa", "cmi"),
    ("cmi.tfim_decay", "cmi"),
    ("petz.recovery_quality", "petz"),
    ("petz.exact_recovery", "petz"),
    ("petz.lemma", "petz"),
    ("petz.continuity", "petz"),
    ("petz.quadrature", "petz"),
    ("rounding.budget", "rounding"),
    ("rounding.exact_markov", "rounding"),
];

/// Deliberate corruption used to check that the suite can fail.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Mixes 20% of a random state into every ρ_BC handed to the recovery checks.
    CorruptMarginal,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Runs only checks whose family equals this or whose name starts with it.
    pub filter: Option<String>,
    /// Largest corpus model included.
    pub max_sites: usize,
    pub radii: Vec<usize>,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            filter: None,
            max_sites: 6,
            radii: vec![1, 2],
            fault: None,
        }
    }
}

impl VerifyOptions {
    fn selects(&self, name: &str, family: &str) -> bool {
        self.filter
            .as_deref()
            .is_none_or(|f| f == family || name.starts_with(f))
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub family: &'static str,
    pub rows: Vec<Row>,
    /// Set when the check could not run at all.
    pub error: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.rows.is_empty() && self.rows.iter().all(|r| !r.failed())
    }

    /// `PASS name  rows=…` or `FAIL name  …` with the first failing row.
    pub fn verdict(&self) -> String {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        let mut s = format!("{tag} {:<24} rows={}", self.name, self.rows.len());
        if let Some(e) = &self.error {
            let _ = write!(s, " error: {e}");
        } else if let Some(r) = self.rows.iter().find(|r| r.failed()) {
            let _ = write!(
                s,
                " first failure: {} {} {} = {} > {}",
                r.model_id,
                r.params,
                r.quantity,
                format_f64(r.value),
                r.bound.map(format_f64).unwrap_or_default()
            );
        }
        s
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifySummary {
    pub checks: Vec<CheckResult>,
}

impl VerifySummary {
    pub fn all_passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(CheckResult::passed)
    }

    /// `check,model_id,params,quantity,value,bound,pass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,model_id,params,quantity,value,bound,pass\n");
        for c in &self.checks {
            for r in &c.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    c.name,
                    r.model_id,
                    r.params,
                    r.quantity,
                    format_f64(r.value),
                    r.bound.map(format_f64).unwrap_or_default(),
                    r.pass.map(|p| p.to_string()).unwrap_or_default()
                );
            }
        }
        s
    }
}

struct MedPoint {
    model: usize,
    radius: usize,
    fmed: f64,
    delta: f64,
    divergence_sum: f64,
    converged: bool,
}

struct Context<'a> {
    opts: &'a VerifyOptions,
    corpus: Vec<(CorpusModel, GibbsSolution)>,
    med: OnceLock<Result<Vec<MedPoint>>>,
}

fn params(h: &LocalHamiltonian) -> String {
    format!("n={}", h.num_sites())
}

impl Context<'_> {
    fn rng(&self, name: &str) -> ChaCha8Rng {
        // FNV-1a of the check name keeps streams independent of run order.
        let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
        });
        ChaCha8Rng::seed_from_u64(self.opts.seed ^ h)
    }

    fn commuting(&self) -> impl Iterator<Item = &(CorpusModel, GibbsSolution)> {
        self.corpus
            .iter()
            .filter(|(m, _)| m.id.starts_with("ising"))
    }

    fn med(&self) -> Result<&[MedPoint]> {
        let res = self.med.get_or_init(|| {
            let tasks: Vec<(usize, usize)> = self
                .corpus
                .iter()
                .enumerate()
                .flat_map(|(i, (m, _))| {
                    let n = m.hamiltonian.num_sites();
                    self.opts
                        .radii
                        .iter()
                        .filter(move |&&r| r < n)
                        .map(move |&r| (i, r))
                })
                .collect();
            tasks
                .par_iter()
                .map(|&(i, r)| {
                    let (m, sol) = &self.corpus[i];
                    let h = &m.hamiltonian;
                    let plan = Arc::new(ShieldPlan::consecutive(h.lattice(), r, h.range())?);
                    let mut med = solve_med(h, plan, &SolverOptions::default())?;
                    let cert = med.certify(sol, h)?;
                    Ok(MedPoint {
                        model: i,
                        radius: r,
                        fmed: med.value(),
                        delta: cert.delta,
                        divergence_sum: cert.divergence_sum,
                        converged: med.converged,
                    })
                })
                .collect()
        });
        match res {
            Ok(v) => Ok(v),
            Err(e) => Err(crate::error::Error::Config(format!(
                "MED sweep failed: {e}"
            ))),
        }
    }

    fn med_rows(&self, f: impl Fn(&MedPoint, &CorpusModel, f64) -> Vec<Row>) -> Result<Vec<Row>> {
        Ok(self
            .med()?
            .iter()
            .flat_map(|p| {
                let (m, sol) = &self.corpus[p.model];
                f(p, m, sol.free_energy())
            })
            .collect())
    }

    fn bc_marginal(
        &self,
        sol: &GibbsSolution,
        tri: &Tripartition,
        rng: &mut ChaCha8Rng,
    ) -> Result<DensityMatrix> {
        let bc = union(&tri.b, &tri.c);
        let rho_bc = sol.marginal(&bc)?;
        Ok(match self.opts.fault {
            Some(Fault::CorruptMarginal) => {
                let noise = random::density_matrix(rng, bc, rho_bc.local_dim(), None)?;
                DensityMatrix::new(rho_bc.scale(0.8).plus(&noise.scale(0.2))?)?
            }
            None => rho_bc,
        })
    }

    /// (A, B, C) = ({s}, {s+1..s+b}, {s+b+1}) for b ∈ {1, 2}, plus B = ∅.
    fn tripartitions(n: usize) -> Vec<Tripartition> {
        let mut out = Vec::new();
        for b in 0..=2usize {
            for s in 0..n.saturating_sub(b + 1) {
                let mid: Vec<usize> = (s + 1..=s + b).collect();
                out.push(Tripartition::new(&[s], &mid, &[s + b + 1]));
            }
        }
        out
    }

    fn recovery_rows(&self, name: &str) -> Result<(Vec<Row>, Vec<Row>)> {
        let mut rng = self.rng(name);
        let petz = PetzOptions::default();
        let mut chain = Vec::new();
        let mut exact = Vec::new();
        for (m, sol) in &self.corpus {
            for tri in Self::tripartitions(m.hamiltonian.num_sites()) {
                let rho_bc = self.bc_marginal(sol, &tri, &mut rng)?;
                let channel = rotated_petz_channel(&rho_bc, &tri.b, &petz)?.channel;
                let q = recovery_quality(sol.state(), &tri, &channel)?;
                let par = format!("a={:?};b={:?};c={:?}", tri.a, tri.b, tri.c).replace(',', " ");
                chain.push(Row::upper(
                    &m.id,
                    &par,
                    "neg_log_fidelity",
                    q.neg_log_fidelity,
                    q.cmi,
                    1e-7,
                ));
                chain.push(Row::upper(
                    &m.id,
                    &par,
                    "trace_term",
                    q.trace_term,
                    q.neg_log_fidelity,
                    1e-7,
                ));
                if q.cmi < 1e-12 {
                    exact.push(Row::upper(
                        &m.id,
                        &par,
                        "trace_distance",
                        q.trace_distance,
                        1e-7,
                        0.0,
                    ));
                }
            }
        }
        Ok((chain, exact))
    }
}

fn run_check(ctx: &Context<'_>, name: &'static str) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    match name {
        "oracle.variational" => {
            let mut rng = ctx.rng(name);
            for (m, sol) in &ctx.corpus {
                let sites: Vec<usize> = m.hamiltonian.lattice().sites().collect();
                let mut best = f64::INFINITY;
                for _ in 0..20 {
                    let sigma = random::density_matrix(&mut rng, sites.clone(), 2, None)?;
                    best = best.min(variational_free_energy(&m.hamiltonian, &sigma)?);
                }
                let at_rho = variational_free_energy(&m.hamiltonian, sol.state())?;
                let par = params(&m.hamiltonian);
                rows.push(Row::upper(
                    &m.id,
                    &par,
                    "free_energy",
                    sol.free_energy(),
                    best,
                    0.0,
                ));
                rows.push(Row::upper(
                    &m.id,
                    &par,
                    "variational_at_gibbs",
                    (at_rho - sol.free_energy()).abs(),
                    1e-8,
                    0.0,
                ));
            }
        }
        "med.relaxation" => {
            rows = ctx.med_rows(|p, m, f| {
                let par = format!("{};l={}", params(&m.hamiltonian), p.radius);
                vec![Row::upper(&m.id, &par, "fmed", p.fmed, f, 1e-8)
                    .with_pass(p.fmed <= f + 1e-8 && p.converged)]
            })?;
        }
        "med.certificate" => {
            rows = ctx.med_rows(|p, m, f| {
                let par = format!("{};l={}", params(&m.hamiltonian), p.radius);
                vec![
                    Row::upper(&m.id, &par, "free_energy", f, p.fmed + p.delta, 1e-7),
                    Row::upper(
                        &m.id,
                        &par,
                        "divergence_sum",
                        p.divergence_sum,
                        p.delta,
                        1e-7,
                    ),
                ]
            })?;
        }
        "med.exact" => {
            rows = ctx.med_rows(|p, m, f| {
                if !m.id.starts_with("ising") {
                    return Vec::new();
                }
                let par = format!("{};l={}", params(&m.hamiltonian), p.radius);
                vec![Row::upper(
                    &m.id,
                    &par,
                    "abs_gap",
                    (f - p.fmed).abs(),
                    1e-6,
                    0.0,
                )]
            })?;
        }
        "cmi.markov" => {
            for (m, sol) in ctx.commuting() {
                let n = m.hamiltonian.num_sites();
                for row in cmi_decay_scan(sol, m.hamiltonian.lattice(), &chain_tripartitions(n, 0))?
                {
                    let par = format!("{};distance={}", params(&m.hamiltonian), row.distance);
                    rows.push(Row::upper(&m.id, &par, "cmi", row.cmi, 1e-10, 0.0));
                }
            }
        }
        "cmi.ssa" => {
            let mut rng = ctx.rng(name);
            for i in 0..100 {
                let rank = Some(1 + i % 8);
                let rho = random::density_matrix(&mut rng, vec![0, 1, 2], 2, rank)?;
                let s = |keep: &[usize]| -> Result<f64> {
                    Ok(von_neumann_entropy(&rho.partial_trace(keep)?))
                };
                let raw = s(&[0, 1])? + s(&[1, 2])? - s(&[0, 1, 2])? - s(&[1])?;
                rows.push(Row::upper(
                    "random_n3",
                    &format!("sample={i}"),
                    "neg_cmi",
                    -raw,
                    0.0,
                    1e-10,
                ));
            }
        }
        "cmi.tfim_decay" => {
            for (m, sol) in ctx.corpus.iter().filter(|(m, _)| m.id.starts_with("tfim")) {
                let n = m.hamiltonian.num_sites();
                let scan =
                    cmi_decay_scan(sol, m.hamiltonian.lattice(), &chain_tripartitions(n, 0))?;
                for w in scan.windows(2) {
                    let par = format!("{};distance={}", params(&m.hamiltonian), w[1].distance);
                    rows.push(
                        Row::upper(&m.id, &par, "cmi_step", w[1].cmi, w[0].cmi, 0.0)
                            .with_pass(w[1].cmi < w[0].cmi),
                    );
                }
            }
        }
        "petz.recovery_quality" => rows = ctx.recovery_rows(name)?.0,
        "petz.exact_recovery" => rows = ctx.recovery_rows("petz.recovery_quality")?.1,
        "petz.lemma" => {
            let mut rng = ctx.rng(name);
            for t in [0.0, 0.5, 2.0] {
                for i in 0..20 {
                    let x = random::floored_density_matrix(&mut rng, vec![0, 1], 2, 0.05)?;
                    let y = random::floored_density_matrix(&mut rng, vec![0, 1], 2, 0.05)?;
                    let c = lemma_bound_check(&x, &y, t)?;
                    rows.push(
                        Row::upper(
                            "random_n2",
                            &format!("t={t};sample={i}"),
                            "lemma_lhs",
                            c.lhs,
                            c.rhs,
                            0.0,
                        )
                        .with_pass(c.holds()),
                    );
                }
            }
        }
        "petz.continuity" => {
            let mut rng = ctx.rng(name);
            for i in 0..10 {
                let rho = random::floored_density_matrix(&mut rng, vec![0, 1], 2, 0.05)?;
                let sigma = random::floored_density_matrix(&mut rng, vec![0, 1], 2, 0.05)?;
                let rep = continuity_check(
                    &rho,
                    &sigma,
                    &[0],
                    None,
                    20,
                    &PetzOptions::default(),
                    &mut rng,
                )?;
                rows.push(
                    Row::upper(
                        "random_n2",
                        &format!("sample={i}"),
                        "diamond_lower",
                        rep.empirical_lower,
                        rep.upper_bound,
                        0.0,
                    )
                    .with_pass(rep.holds()),
                );
            }
        }
        "petz.quadrature" => {
            for t in [2.0, 4.0, 8.0] {
                let q = QuadratureScheme::gauss_legendre(t, 256);
                rows.push(Row::upper(
                    "beta0",
                    &format!("t_max={t}"),
                    "mass_error",
                    (q.beta_mass() - beta0_mass(t)).abs(),
                    1e-10,
                    0.0,
                ));
            }
            let h = tfim_chain(3, 1.0)?;
            let sol = solve_gibbs(&h)?;
            let rho = sol.marginal(&[0, 1])?;
            let opts = PetzOptions {
                tol: 1e-10,
                ..PetzOptions::default()
            };
            let rep = rotated_petz_channel(&rho, &[0], &opts)?.report;
            rows.push(
                Row::upper(
                    "tfim_n3_b1",
                    "sites=[0 1]",
                    "doubling_change",
                    rep.last_change,
                    1e-9,
                    0.0,
                )
                .with_pass(rep.last_change < 1e-9),
            );
            for a in [0.25, 0.5] {
                let k = reference_taylor_order(a, 1.0, 1e-6);
                let p = taylor_remainder_probe(a, 1.0, k, 100)?;
                rows.push(
                    Row::upper(
                        "taylor",
                        &format!("a={a};k={k}"),
                        "max_deviation",
                        p.max_deviation,
                        p.bound,
                        0.0,
                    )
                    .with_pass(p.holds()),
                );
            }
        }
        "rounding.budget" | "rounding.exact_markov" => {
            let opts = RoundingOptions::default();
            let cases: Vec<(&str, LocalHamiltonian, usize, Option<f64>)> =
                if name == "rounding.budget" {
                    vec![
                        (
                            "ising_n4_b1",
                            commuting_ising_chain(4, 1.0, 1.0, 0.3)?,
                            1,
                            None,
                        ),
                        (
                            "ising_n4_b1",
                            commuting_ising_chain(4, 1.0, 1.0, 0.3)?,
                            1,
                            Some(1e-4),
                        ),
                        ("tfim_n6_b0.5", tfim_chain(6, 0.5)?, 2, None),
                    ]
                } else {
                    vec![(
                        "ising_n5_b1",
                        commuting_ising_chain(5, 1.0, 1.0, 0.3)?,
                        1,
                        None,
                    )]
                };
            for (id, h, r, perturb) in cases {
                let sol = solve_gibbs(&h)?;
                let plan = ShieldPlan::consecutive(h.lattice(), r, h.range())?;
                let run = match perturb {
                    Some(delta) => {
                        let src = Depolarized {
                            inner: solve_gibbs(&h)?,
                            delta,
                        };
                        run_rounding(&plan, &src as &dyn MarginalSource, &sol, &opts)?
                    }
                    None => run_rounding(&plan, &sol, &sol, &opts)?,
                };
                let par = format!(
                    "n={};l={r};perturbation={}",
                    h.num_sites(),
                    perturb.unwrap_or(0.0)
                );
                if name == "rounding.budget" {
                    for l in &run.layers {
                        rows.push(Row::upper(
                            id,
                            &format!("{par};k={}", l.step),
                            "layer_increment",
                            l.increment,
                            l.budget,
                            1e-9,
                        ));
                    }
                } else {
                    rows.push(
                        Row::upper(id, &par, "final_error", run.final_error, 1e-6, 0.0)
                            .with_pass(run.final_error < 1e-6),
                    );
                }
            }
        }
        other => unreachable!("unknown check {other}"),
    }
    Ok(rows)
}

/// Runs every selected check. Failures are reported per check, never as an `Err`.
pub fn verify_suite(opts: &VerifyOptions) -> Result<VerifySummary> {
    let corpus = default_corpus(opts.max_sites)?
        .into_iter()
        .map(|m| {
            let sol = solve_gibbs(&m.hamiltonian)?;
            Ok((m, sol))
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context {
        opts,
        corpus,
        med: OnceLock::new(),
    };
    let checks = CHECKS
        .iter()
        .filter(|(name, family)| opts.selects(name, family))
        .map(|&(name, family)| {
            let (rows, error) = match run_check(&ctx, name) {
                Ok(rows) => (rows, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            CheckResult {
                name,
                family,
                rows,
                error,
            }
        })
        .collect();
    Ok(VerifySummary { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_family() {
        let opts = VerifyOptions {
            filter: Some("petz".into()),
            ..Default::default()
        };
        let picked: Vec<_> = CHECKS
            .iter()
            .filter(|(n, f)| opts.selects(n, f))
            .map(|c| c.0)
            .collect();
        assert!(picked.iter().all(|n| n.starts_with("petz.")));
        assert_eq!(picked.len(), 5);
    }

    #[test]
    fn corrupted_marginal_fails_recovery() {
        let opts = VerifyOptions {
            filter: Some("petz.recovery_quality".into()),
            max_sites: 4,
            fault: Some(Fault::CorruptMarginal),
            ..Default::default()
        };
        let s = verify_suite(&opts).unwrap();
        assert_eq!(s.checks.len(), 1);
        assert!(!s.all_passed());
        let clean = verify_suite(&VerifyOptions {
            fault: None,
            ..opts
        })
        .unwrap();
        assert!(clean.all_passed(), "{}", clean.checks[0].verdict());
    }

    #[test]
    fn cmi_checks_pass_and_repeat() {
        let opts = VerifyOptions {
            filter: Some("cmi".into()),
            max_sites: 5,
            seed: 3,
            ..Default::default()
        };
        let a = verify_suite(&opts).unwrap();
        assert!(a.all_passed());
        assert_eq!(a.to_csv(), verify_suite(&opts).unwrap().to_csv());
    }
}
