use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;

/// Euclidean projection of `values` onto {μ : μ_i ≥ floor, Σ μ_i = 1}.
pub(crate) fn project_floored_simplex(values: &[f64], floor: f64) -> Vec<f64> {
    let n = values.len();
    let radius = 1.0 - n as f64 * floor;
    let mut sorted: Vec<f64> = values.iter().map(|v| v - floor).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    values
        .iter()
        .map(|v| (v - floor - theta).max(0.0) + floor)
        .collect()
}

/// Frobenius-nearest point of {σ ⪰ floor·𝟙, Tr σ = 1}.
pub fn project_floored_spectrahedron(
    op: &HermitianOperator,
    floor: f64,
) -> Result<HermitianOperator> {
    if floor * op.dim() as f64 > 1.0 {
        return Err(Error::Family(format!(
            "floor {floor:e} is infeasible in dimension {}",
            op.dim()
        )));
    }
    let spec = op.eigh()?;
    let mu = project_floored_simplex(&spec.values, floor);
    let u = &spec.vectors;
    let n = u.nrows();
    let w = Mat::from_fn(n, n, |i, j| u[(i, j)] * mu[j]);
    let m: Mat<c64> = &w * u.adjoint();
    Ok(HermitianOperator::from_parts_symmetrized(
        op.sites().to_vec(),
        op.local_dim(),
        &m,
    ))
}
