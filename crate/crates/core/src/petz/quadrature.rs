//! Truncated Gauss–Legendre rules for integrals against β₀.

use std::f64::consts::PI;

use serde::Serialize;

/// β₀(t) = (π/2)(cosh(πt) + 1)⁻¹, a probability density on ℝ.
pub fn beta0(t: f64) -> f64 {
    let c = (0.5 * PI * t).cosh();
    PI / (4.0 * c * c)
}

/// ∫_{-t'}^{t'} β₀ = tanh(πt'/2).
pub fn beta0_mass(t_max: f64) -> f64 {
    (0.5 * PI * t_max).tanh()
}

/// ∫ β₀(t) e^{iωt} dt = ω / sinh ω.
pub fn beta0_characteristic(omega: f64) -> f64 {
    if omega.abs() < 1e-8 {
        1.0 - omega * omega / 6.0
    } else {
        omega / omega.sinh()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule on [-t', t'].
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureScheme {
    t_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureScheme {
    pub fn gauss_legendre(t_max: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self {
            t_max,
            nodes: x.iter().map(|v| v * t_max).collect(),
            weights: w.iter().map(|v| v * t_max).collect(),
        }
    }

    /// Truncation t' = max(4, log(1/(a·tol))/π), which loses at most 2a·tol of β₀'s mass.
    pub fn default_truncation(a: f64, tol: f64) -> f64 {
        ((1.0 / (a * tol)).ln() / PI).max(4.0)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(t_i, w_i β₀(t_i))` pairs.
    pub fn beta_weighted(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| (t, w * beta0(t)))
    }

    /// Σ w_i β₀(t_i).
    pub fn beta_mass(&self) -> f64 {
        self.beta_weighted().map(|(_, w)| w).sum()
    }

    /// Analytic mass of β₀ outside [-t', t'].
    pub fn truncation_mass(&self) -> f64 {
        1.0 - beta0_mass(self.t_max)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta0_values() {
        assert!((beta0(0.0) - PI / 4.0).abs() < 1e-15);
        for t in [0.1, 0.7, 3.0] {
            assert_eq!(beta0(t), beta0(-t));
            let direct = 0.5 * PI / ((PI * t).cosh() + 1.0);
            assert!((beta0(t) - direct).abs() < 1e-15);
        }
        assert_eq!(beta0(1e3), 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let p8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((p8 - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(400);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn normalization() {
        let q = QuadratureScheme::gauss_legendre(20.0, 512);
        assert!((q.beta_mass() - 1.0).abs() < 1e-12);
        let q = QuadratureScheme::gauss_legendre(5.0, 256);
        assert!((q.beta_mass() - beta0_mass(5.0)).abs() < 1e-13);
    }

    #[test]
    fn characteristic_function() {
        let q = QuadratureScheme::gauss_legendre(20.0, 512);
        for w in [0.0, 0.3, 2.0, 5.0] {
            let num = q.integrate(|t| beta0(t) * (w * t).cos());
            assert!((num - beta0_characteristic(w)).abs() < 1e-11, "{w}");
        }
    }
}
