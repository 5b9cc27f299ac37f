//! Seeded random operators for tests and verification sweeps.

use faer::{c64, Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{DensityMatrix, HermitianOperator};
use crate::error::{Error, Result};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Complex Gaussian matrix with independent standard normal entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat<c64> {
    Mat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// GUE-like Hermitian operator with unit operator norm.
pub fn hermitian<R: Rng + ?Sized>(
    rng: &mut R,
    sites: Vec<usize>,
    d: usize,
) -> Result<HermitianOperator> {
    let dim = d.pow(sites.len() as u32);
    let g = ginibre(rng, dim, dim);
    let h = HermitianOperator::new(sites, d, &g + g.adjoint())?;
    let norm = h.op_norm()?;
    Ok(if norm > 0.0 { h.scale(1.0 / norm) } else { h })
}

/// Induced-measure random state `G G† / Tr`, with `rank` columns (full rank when `None`).
pub fn density_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    sites: Vec<usize>,
    d: usize,
    rank: Option<usize>,
) -> Result<DensityMatrix> {
    let dim = d.pow(sites.len() as u32);
    let g = ginibre(rng, dim, rank.unwrap_or(dim));
    DensityMatrix::from_positive(HermitianOperator::new(sites, d, &g * g.adjoint())?)
}

/// Random state with spectrum bounded below by `floor`.
pub fn floored_density_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    sites: Vec<usize>,
    d: usize,
    floor: f64,
) -> Result<DensityMatrix> {
    let rho = density_matrix(rng, sites, d, None)?;
    let dim = rho.dim() as f64;
    Ok(rho.depolarize(floor * dim))
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<c64> {
    let v: Vec<c64> = (0..dim).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Unitary from the eigenvectors of a random Hermitian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<Mat<c64>> {
    if dim == 1 {
        let z = gaussian(rng);
        return Ok(Mat::from_fn(1, 1, |_, _| z / z.norm()));
    }
    let g = ginibre(rng, dim, dim);
    let h = &g + g.adjoint();
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigen)?;
    Ok(evd.U().to_owned())
}
