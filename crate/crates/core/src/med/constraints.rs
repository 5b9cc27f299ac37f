//! The local consistency map B and projections onto its affine feasible set.

use faer::{c64, Mat, Side};
use serde::Serialize;

use super::MarginalFamily;
use crate::error::{Error, Result};
use crate::lattice::ShieldPlan;
use crate::operator::{intersection, partial_trace, HermitianOperator, Layout};

/// Flat storage of a family: block `k` occupies `offsets[k]..offsets[k] + dims[k]²`
/// in row-major order.
#[derive(Clone, Debug)]
pub(crate) struct FlatLayout {
    pub offsets: Vec<usize>,
    pub dims: Vec<usize>,
    pub len: usize,
}

impl FlatLayout {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut len = 0;
        for &d in &dims {
            offsets.push(len);
            len += d * d;
        }
        Self { offsets, dims, len }
    }

    pub fn flatten(&self, blocks: &[Mat<c64>]) -> Vec<c64> {
        let mut x = Vec::with_capacity(self.len);
        for b in blocks {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    x.push(b[(i, j)]);
                }
            }
        }
        x
    }

    pub fn block(&self, x: &[c64], k: usize) -> Mat<c64> {
        let (o, d) = (self.offsets[k], self.dims[k]);
        Mat::from_fn(d, d, |i, j| x[o + i * d + j])
    }

    pub fn unflatten(&self, x: &[c64]) -> Vec<Mat<c64>> {
        (0..self.dims.len()).map(|k| self.block(x, k)).collect()
    }

    #[inline]
    pub fn var(&self, k: usize, i: usize, j: usize) -> usize {
        self.offsets[k] + i * self.dims[k] + j
    }
}

/// Sparse linear constraints `M x = b` with a cached pseudo-inverse of `M Mᵀ`.
#[derive(Clone, Debug)]
pub(crate) struct ConstraintSystem {
    pub layout: FlatLayout,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<c64>,
    consistency_rows: usize,
    gram_pinv: Mat<f64>,
}

impl ConstraintSystem {
    /// Pairwise overlap agreement, plus unit-trace rows when `with_trace` is set.
    pub fn new(plan: &ShieldPlan, d: usize, with_trace: bool) -> Result<Self> {
        let shields = plan.shields();
        let dims: Vec<usize> = shields
            .iter()
            .map(|s| d.pow(s.extended.len() as u32))
            .collect();
        let layout = FlatLayout::new(dims);
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        for (j, sj) in shields.iter().enumerate() {
            for (l, sl) in shields.iter().enumerate().skip(j + 1) {
                let overlap = intersection(&sj.extended, &sl.extended);
                if overlap.is_empty() {
                    continue;
                }
                let lj = Layout::new(&sj.extended, &overlap, d);
                let ll = Layout::new(&sl.extended, &overlap, d);
                let od = lj.part.len();
                for a in 0..od {
                    for b in 0..od {
                        let mut row = Vec::with_capacity(lj.rest.len() + ll.rest.len());
                        for &r in &lj.rest {
                            row.push((layout.var(j, lj.part[a] + r, lj.part[b] + r), 1.0));
                        }
                        for &r in &ll.rest {
                            row.push((layout.var(l, ll.part[a] + r, ll.part[b] + r), -1.0));
                        }
                        rows.push(row);
                    }
                }
            }
        }
        let consistency_rows = rows.len();
        let mut rhs = vec![c64::new(0.0, 0.0); consistency_rows];
        if with_trace {
            for k in 0..shields.len() {
                rows.push(
                    (0..layout.dims[k])
                        .map(|i| (layout.var(k, i, i), 1.0))
                        .collect(),
                );
                rhs.push(c64::new(1.0, 0.0));
            }
        }
        let gram_pinv = gram_pseudo_inverse(&rows, layout.len)?;
        Ok(Self {
            layout,
            rows,
            rhs,
            consistency_rows,
            gram_pinv,
        })
    }

    /// `M x − b`.
    pub fn residual(&self, x: &[c64]) -> Vec<c64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| row.iter().map(|&(v, c)| x[v] * c).sum::<c64>() - b)
            .collect()
    }

    /// Euclidean norm of the pairwise-consistency part of the residual.
    pub fn consistency_norm(&self, x: &[c64]) -> f64 {
        self.residual(x)[..self.consistency_rows]
            .iter()
            .map(|r| r.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean projection onto `{x : M x = b}`.
    pub fn project(&self, x: &[c64]) -> Vec<c64> {
        let r = self.residual(x);
        let m = r.len();
        let mut out = x.to_vec();
        if m == 0 {
            return out;
        }
        let parts = Mat::from_fn(m, 2, |i, c| if c == 0 { r[i].re } else { r[i].im });
        let w = &self.gram_pinv * &parts;
        let s: Vec<c64> = (0..m).map(|i| c64::new(w[(i, 0)], w[(i, 1)])).collect();
        for (row, si) in self.rows.iter().zip(&s) {
            for &(v, c) in row {
                out[v] -= si * c;
            }
        }
        out
    }
}

fn gram_pseudo_inverse(rows: &[Vec<(usize, f64)>], nvars: usize) -> Result<Mat<f64>> {
    let m = rows.len();
    if m == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let mut touching: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvars];
    for (i, row) in rows.iter().enumerate() {
        for &(v, c) in row {
            touching[v].push((i, c));
        }
    }
    let mut gram = Mat::<f64>::zeros(m, m);
    for t in &touching {
        for &(i, ci) in t {
            for &(j, cj) in t {
                gram[(i, j)] += ci * cj;
            }
        }
    }
    let evd = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigen)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let top = (0..m).map(|i| s[i].abs()).fold(0.0, f64::max);
    let keep: Vec<(usize, f64)> = (0..m)
        .filter(|&i| s[i] > 1e-10 * top)
        .map(|i| (i, 1.0 / s[i]))
        .collect();
    let scaled = Mat::from_fn(m, keep.len(), |i, c| u[(i, keep[c].0)] * keep[c].1);
    let kept = Mat::from_fn(m, keep.len(), |i, c| u[(i, keep[c].0)]);
    Ok(&scaled * kept.transpose())
}

/// `Tr_{S'_j∖S'_l} σ_j − Tr_{S'_l∖S'_j} σ_l` for one overlapping pair.
#[derive(Clone, Debug)]
pub struct PairResidual {
    pub j: usize,
    pub l: usize,
    pub overlap: Vec<usize>,
    pub residual: HermitianOperator,
}

#[derive(Clone, Debug)]
pub struct ConsistencyResidual {
    pub pairs: Vec<PairResidual>,
    /// Square root of the summed squared Frobenius norms.
    pub norm: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConsistencySummary {
    pub pairs: usize,
    pub norm: f64,
}

/// Applies B to every overlapping pair of the family.
pub fn consistency_map(fam: &MarginalFamily) -> Result<ConsistencyResidual> {
    let shields = fam.plan().shields();
    let mut pairs = Vec::new();
    for j in 0..shields.len() {
        for l in j + 1..shields.len() {
            let overlap = intersection(&shields[j].extended, &shields[l].extended);
            if overlap.is_empty() {
                continue;
            }
            let a = partial_trace(&fam.blocks()[j], &overlap)?;
            let b = partial_trace(&fam.blocks()[l], &overlap)?;
            pairs.push(PairResidual {
                j,
                l,
                overlap,
                residual: a.minus(&b)?,
            });
        }
    }
    let norm = pairs
        .iter()
        .map(|p| p.residual.frobenius_norm().powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ConsistencyResidual { pairs, norm })
}

/// Frobenius-nearest family in ker B. Positivity is not enforced.
pub fn project_consistent(fam: &MarginalFamily) -> Result<MarginalFamily> {
    let system = ConstraintSystem::new(fam.plan(), fam.local_dim(), false)?;
    let x = system.layout.flatten(&fam.matrices());
    let y = system.project(&x);
    fam.with_flat(&system.layout, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::med::MarginalFamily;
    use crate::operator::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn plan(n: usize, radius: usize) -> Arc<ShieldPlan> {
        Arc::new(ShieldPlan::consecutive(&Lattice::chain(n).unwrap(), radius, 1).unwrap())
    }

    #[test]
    fn global_state_family_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::density_matrix(&mut rng, vec![0, 1, 2, 3], 2, None).unwrap();
        let fam = MarginalFamily::from_state(plan(4, 2), &rho).unwrap();
        assert!(consistency_map(&fam).unwrap().norm < 1e-12);
        let system = ConstraintSystem::new(fam.plan(), 2, true).unwrap();
        let x = system.layout.flatten(&fam.matrices());
        assert!(system.residual(&x).iter().all(|r| r.norm() < 1e-12));
    }

    #[test]
    fn single_site_overlap_residual() {
        let p = plan(2, 1);
        let a = HermitianOperator::diagonal(vec![0], 2, &[0.6, 0.4]).unwrap();
        let ab = crate::operator::tensor_product(
            &HermitianOperator::diagonal(vec![0], 2, &[0.5, 0.5]).unwrap(),
            &HermitianOperator::diagonal(vec![1], 2, &[0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let fam = MarginalFamily::new(p, 2, vec![a, ab]).unwrap();
        let res = consistency_map(&fam).unwrap();
        assert_eq!(res.pairs.len(), 1);
        assert!((res.norm - (0.02f64).sqrt()).abs() < 1e-15);
        assert!((res.pairs[0].residual.matrix()[(0, 0)].re - 0.1).abs() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = plan(4, 2);
        let blocks = p
            .shields()
            .iter()
            .map(|s| {
                random::density_matrix(&mut rng, s.extended.clone(), 2, None)
                    .unwrap()
                    .into_operator()
            })
            .collect();
        let fam = MarginalFamily::new(p, 2, blocks).unwrap();
        let once = project_consistent(&fam).unwrap();
        assert!(consistency_map(&once).unwrap().norm < 1e-10);
        let twice = project_consistent(&once).unwrap();
        assert!(once.distance(&twice) < 1e-10);
    }
}
