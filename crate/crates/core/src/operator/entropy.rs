use super::{normalize_sites, partial_trace, union, DensityMatrix, HermitianOperator};
use crate::error::{Error, Result};

/// Negative CMI beyond this is logged before clipping.
const SSA_SLACK: f64 = 1e-9;

pub(crate) fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

pub(crate) fn operator_entropy(op: &HermitianOperator) -> Result<f64> {
    Ok(entropy_of_spectrum(&op.eigenvalues()?))
}

/// S(σ) = -Tr σ log σ in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    operator_entropy(rho).unwrap_or(f64::NAN)
}

fn marginal_entropy(rho: &HermitianOperator, sites: &[usize]) -> Result<f64> {
    if sites.is_empty() {
        return Ok(0.0);
    }
    operator_entropy(&partial_trace(rho, sites)?)
}

fn check_disjoint(sets: &[&[usize]]) -> Result<()> {
    let mut seen: Vec<usize> = Vec::new();
    for s in sets {
        for x in *s {
            if seen.contains(x) {
                return Err(Error::Overlap(vec![*x]));
            }
            seen.push(*x);
        }
    }
    Ok(())
}

/// I(A:C|B) = S(AB) + S(BC) - S(ABC) - S(B). Small negative values are clipped to 0.
pub fn conditional_mutual_information(
    rho: &DensityMatrix,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    check_disjoint(&[a, b, c])?;
    let (a, b, c) = (normalize_sites(a), normalize_sites(b), normalize_sites(c));
    let ab = union(&a, &b);
    let bc = union(&b, &c);
    let abc = union(&ab, &c);
    let value = marginal_entropy(rho, &ab)? + marginal_entropy(rho, &bc)?
        - marginal_entropy(rho, &abc)?
        - marginal_entropy(rho, &b)?;
    if value < 0.0 {
        if value < -SSA_SLACK {
            log::warn!("conditional mutual information {value:e} is negative beyond slack");
        }
        return Ok(0.0);
    }
    Ok(value)
}

pub fn mutual_information(rho: &DensityMatrix, a: &[usize], c: &[usize]) -> Result<f64> {
    conditional_mutual_information(rho, a, &[], c)
}

/// S(A|B) = S(AB) - S(B).
pub fn conditional_entropy(rho: &DensityMatrix, a: &[usize], b: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b])?;
    let ab = union(a, b);
    Ok(marginal_entropy(rho, &ab)? - marginal_entropy(rho, &normalize_sites(b))?)
}

/// D(ρ‖σ) = Tr ρ (log ρ - log σ). Requires σ to be full rank.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.same_register(sigma)?;
    let log_sigma = sigma.log(false)?;
    let cross = rho.inner(&log_sigma)?;
    Ok(-operator_entropy(rho)? - cross)
}

/// Unhalved trace distance ‖ρ - σ‖₁.
pub fn trace_distance(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<f64> {
    rho.same_register(sigma)?;
    let diff = HermitianOperator::from_parts(
        rho.sites().to_vec(),
        rho.local_dim(),
        rho.matrix() - sigma.matrix(),
    );
    diff.trace_norm()
}

/// F(ρ, σ) = ‖√ρ √σ‖₁, using the positive parts of both arguments.
pub fn fidelity(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<f64> {
    rho.same_register(sigma)?;
    let a = rho.sqrt_psd()?;
    let b = sigma.sqrt_psd()?;
    let prod = a.matrix() * b.matrix();
    super::trace_norm(&prod)
}
