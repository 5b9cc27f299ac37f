//! Empirical checks of the perturbation bounds for rotated Petz maps.

use faer::c64;
use rand::Rng;
use serde::Serialize;

use super::{rotated_petz_channel, PetzOptions, QuadratureScheme};
use crate::error::{Error, Result};
use crate::operator::{operator_norm, random, trace_norm, HermitianOperator};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LemmaCheck {
    pub t: f64,
    pub a: f64,
    /// max over the four sign choices of ‖X^{±1/2±it} − Y^{±1/2±it}‖.
    pub lhs: f64,
    /// (1+2|t|)·√n·a^{−3/2}·‖X−Y‖.
    pub rhs: f64,
}

impl LemmaCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-14
    }
}

/// For Hermitian a𝟙 ≤ X, Y ≤ 𝟙, compares the rotated square roots against the Lipschitz bound.
pub fn lemma_bound_check(
    x: &HermitianOperator,
    y: &HermitianOperator,
    t: f64,
) -> Result<LemmaCheck> {
    x.same_register(y)?;
    let (ex, ey) = (x.eigenvalues()?, y.eigenvalues()?);
    let a = ex[0].min(ey[0]);
    let top = ex[ex.len() - 1].max(ey[ey.len() - 1]);
    if a <= 0.0 {
        return Err(Error::NonPositiveSpectrum { min: a, floor: 0.0 });
    }
    if top > 1.0 + 1e-12 {
        return Err(Error::InvalidState(format!(
            "largest eigenvalue {top} exceeds 1"
        )));
    }
    let (sx, sy) = (x.eigh()?, y.eigh()?);
    let mut lhs = 0.0f64;
    for re in [0.5, -0.5] {
        for im in [t, -t] {
            let e = c64::new(re, im);
            lhs = lhs.max(operator_norm(&(sx.power(e) - sy.power(e)))?);
        }
    }
    let n = x.dim() as f64;
    let diff = operator_norm(&(x.matrix() - y.matrix()))?;
    Ok(LemmaCheck {
        t,
        a,
        lhs,
        rhs: (1.0 + 2.0 * t.abs()) * n.sqrt() * a.powf(-1.5) * diff,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub a: f64,
    /// ‖ρ_BC − σ_BC‖ in operator norm.
    pub distance: f64,
    /// max over random pure inputs ψ of ‖((R_ρ − R_σ) ⊗ id)(ψ)‖₁.
    pub empirical_lower: f64,
    /// 6 d_BC a^{−5/2} ‖ρ_BC − σ_BC‖.
    pub upper_bound: f64,
    pub probes: usize,
}

impl ContinuityReport {
    pub fn holds(&self) -> bool {
        self.empirical_lower <= self.upper_bound + 1e-12
    }

    /// empirical / bound, 0 when both vanish.
    pub fn slack_ratio(&self) -> f64 {
        if self.upper_bound > 0.0 {
            self.empirical_lower / self.upper_bound
        } else {
            0.0
        }
    }
}

/// Lower-bounds ‖R_ρ − R_σ‖⋄ with `probes` random pure inputs on B ⊗ reference and
/// compares it with the perturbation bound. Both maps share one quadrature truncation.
pub fn continuity_check<R: Rng + ?Sized>(
    rho_bc: &HermitianOperator,
    sigma_bc: &HermitianOperator,
    b: &[usize],
    a: Option<f64>,
    probes: usize,
    opts: &PetzOptions,
    rng: &mut R,
) -> Result<ContinuityReport> {
    rho_bc.same_register(sigma_bc)?;
    let actual = rho_bc.min_eigenvalue()?.min(sigma_bc.min_eigenvalue()?);
    let a = a.unwrap_or(actual);
    if a <= 0.0 || actual < a - 1e-15 {
        return Err(Error::NonPositiveSpectrum {
            min: actual,
            floor: a,
        });
    }
    let opts = PetzOptions {
        t_max: Some(
            opts.t_max
                .unwrap_or_else(|| QuadratureScheme::default_truncation(a, opts.tol)),
        ),
        ..opts.clone()
    };
    let r = rotated_petz_channel(rho_bc, b, &opts)?.channel;
    let s = rotated_petz_channel(sigma_bc, b, &opts)?.channel;
    let diff = r.minus(&s)?;
    let din = diff.input_dim();
    let mut lower = 0.0f64;
    for _ in 0..probes {
        let psi = random::pure_state(rng, din * din);
        lower = lower.max(trace_norm(&diff.apply_with_reference(&psi, din)?)?);
    }
    let distance = operator_norm(&(rho_bc.matrix() - sigma_bc.matrix()))?;
    Ok(ContinuityReport {
        a,
        distance,
        empirical_lower: lower,
        upper_bound: 6.0 * rho_bc.dim() as f64 * a.powf(-2.5) * distance,
        probes,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TaylorProbe {
    pub a: f64,
    pub t_max: f64,
    pub order: usize,
    pub max_deviation: f64,
    /// √(2/a)·e^{t'}·(1−a/2)^k/(a/2).
    pub bound: f64,
}

impl TaylorProbe {
    pub fn holds(&self) -> bool {
        self.max_deviation < self.bound
    }
}

fn remainder_bound(a: f64, t_max: f64, k: usize) -> f64 {
    (2.0 / a).sqrt() * t_max.exp() * (1.0 - 0.5 * a).powi(k as i32) / (0.5 * a)
}

/// Σ_{n<k} binom(α, n) (x − 1)^n.
fn taylor_partial_sum(x: f64, alpha: c64, k: usize) -> c64 {
    let h = x - 1.0;
    let (mut coeff, mut pw, mut sum) = (c64::new(1.0, 0.0), 1.0, c64::new(0.0, 0.0));
    for n in 0..k {
        sum += coeff * pw;
        coeff = coeff * (alpha - n as f64) / (n as f64 + 1.0);
        pw *= h;
    }
    sum
}

/// Truncates the series of x^{−1/2+it} around 1 after `k` terms and measures the
/// worst deviation over `grid` points of [a, 1] and t ∈ {0, ±t'/2, ±t'}.
pub fn taylor_remainder_probe(a: f64, t_max: f64, k: usize, grid: usize) -> Result<TaylorProbe> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidState(format!("floor {a} must lie in (0, 1)")));
    }
    let mut worst = 0.0f64;
    for t in [-t_max, -0.5 * t_max, 0.0, 0.5 * t_max, t_max] {
        let alpha = c64::new(-0.5, t);
        for g in 0..grid.max(2) {
            let x = a + (1.0 - a) * g as f64 / (grid.max(2) - 1) as f64;
            let exact = c64::new(x, 0.0).powc(alpha);
            worst = worst.max((taylor_partial_sum(x, alpha, k) - exact).norm());
        }
    }
    Ok(TaylorProbe {
        a,
        t_max,
        order: k,
        max_deviation: worst,
        bound: remainder_bound(a, t_max, k),
    })
}

/// k = ⌈log(√(2/a)³ e^{t'} ε) / log(1 − a/2)⌉ as printed.
pub fn reference_taylor_order(a: f64, t_max: f64, eps: f64) -> usize {
    let num = ((2.0 / a).powf(1.5) * t_max.exp() * eps).ln();
    (num / (1.0 - 0.5 * a).ln()).ceil().max(0.0) as usize
}

/// Smallest k whose remainder bound is at most ε.
pub fn sufficient_taylor_order(a: f64, t_max: f64, eps: f64) -> usize {
    let num = (eps / ((2.0 / a).powf(1.5) * t_max.exp())).ln();
    (num / (1.0 - 0.5 * a).ln()).ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spectrum_in(rng: &mut ChaCha8Rng, a: f64) -> HermitianOperator {
        let u = random::unitary(rng, 4).unwrap();
        let vals: Vec<f64> = (0..4).map(|_| rng.gen_range(a..=1.0)).collect();
        let w = faer::Mat::from_fn(4, 4, |i, j| u[(i, j)] * vals[j]);
        HermitianOperator::new(vec![0, 1], 2, &w * u.adjoint()).unwrap()
    }

    #[test]
    fn lemma_holds_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for t in [0.0, 0.5, 2.0] {
            for _ in 0..10 {
                let x = spectrum_in(&mut rng, 0.2);
                let y = spectrum_in(&mut rng, 0.2);
                assert!(lemma_bound_check(&x, &y, t).unwrap().holds());
            }
        }
    }

    #[test]
    fn identical_states_have_zero_continuity_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random::floored_density_matrix(&mut rng, vec![0, 1], 2, 0.05).unwrap();
        let rep =
            continuity_check(&rho, &rho, &[0], None, 5, &PetzOptions::default(), &mut rng).unwrap();
        assert_eq!(rep.empirical_lower, 0.0);
        assert_eq!(rep.upper_bound, 0.0);
        assert!(rep.holds());
    }

    #[test]
    fn depolarized_perturbation_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let rho = random::floored_density_matrix(&mut rng, vec![0, 1], 2, 0.05).unwrap();
        let sigma = rho.depolarize(1e-3);
        let rep = continuity_check(
            &rho,
            &sigma,
            &[0],
            None,
            20,
            &PetzOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert!(rep.holds());
        assert!(rep.empirical_lower > 0.0);
        assert!(matches!(
            continuity_check(
                &rho,
                &sigma,
                &[0],
                Some(0.3),
                1,
                &PetzOptions::default(),
                &mut rng
            ),
            Err(Error::NonPositiveSpectrum { .. })
        ));
    }

    #[test]
    fn taylor_probe() {
        for a in [0.25, 0.5] {
            let k = reference_taylor_order(a, 1.0, 1e-6);
            let p = taylor_remainder_probe(a, 1.0, k, 100).unwrap();
            assert!(p.holds(), "{p:?}");
            assert!(sufficient_taylor_order(a, 1.0, 1e-6) > k);
        }
        let devs: Vec<f64> = [10, 20, 30, 40]
            .iter()
            .map(|&k| {
                taylor_remainder_probe(0.5, 1.0, k, 50)
                    .unwrap()
                    .max_deviation
            })
            .collect();
        assert!(devs.windows(2).all(|w| w[1] < w[0]));
        for k in 1..5 {
            let v = taylor_partial_sum(1.0, c64::new(-0.5, 0.8), k);
            assert_eq!(v, c64::new(1.0, 0.0));
        }
    }
}
