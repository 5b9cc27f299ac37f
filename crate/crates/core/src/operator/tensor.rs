//! Index bookkeeping for registers stored in ascending site order, plus a few
//! dense helpers shared by the rest of the crate.

use faer::{c64, Mat};

use crate::error::{Error, Result};

/// Splits the basis of a register over `sites` into a sub-register `part`
/// and its complement. The register index is `part[p] + rest[r]`.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub part: Vec<usize>,
    pub rest: Vec<usize>,
}

impl Layout {
    /// `part` must be an ascending subset of the ascending `sites`.
    pub fn new(sites: &[usize], part: &[usize], d: usize) -> Layout {
        let n = sites.len();
        let mut in_part = vec![false; n];
        let part_pos: Vec<usize> = part
            .iter()
            .map(|s| {
                let p = sites.binary_search(s).expect("part must be a subset");
                in_part[p] = true;
                p
            })
            .collect();
        let rest_pos: Vec<usize> = (0..n).filter(|&p| !in_part[p]).collect();
        Layout {
            part: offsets(&part_pos, n, d),
            rest: offsets(&rest_pos, n, d),
        }
    }
}

fn offsets(positions: &[usize], n: usize, d: usize) -> Vec<usize> {
    let weights: Vec<usize> = positions
        .iter()
        .map(|&p| d.pow((n - 1 - p) as u32))
        .collect();
    let dim = d.pow(positions.len() as u32);
    (0..dim)
        .map(|mut idx| {
            let mut off = 0;
            for w in weights.iter().rev() {
                off += (idx % d) * w;
                idx /= d;
            }
            off
        })
        .collect()
}

pub(crate) fn check_ascending(sites: &[usize]) -> Result<()> {
    if sites.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::UnorderedSites(sites.to_vec()))
    }
}

pub(crate) fn check_subset(part: &[usize], sites: &[usize]) -> Result<()> {
    match part.iter().find(|s| sites.binary_search(s).is_err()) {
        Some(&site) => Err(Error::UnknownSite {
            site,
            available: sites.to_vec(),
        }),
        None => Ok(()),
    }
}

/// Sorted, deduplicated copy.
pub fn normalize_sites(sites: &[usize]) -> Vec<usize> {
    let mut v = sites.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|s| !b.contains(s)).copied().collect()
}

pub fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|s| b.contains(s)).copied().collect()
}

pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| {
        a[(i / rb, j / cb)] * b[(i % rb, j % cb)]
    })
}

pub fn scaled(m: &Mat<c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn trace(m: &Mat<c64>) -> c64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Frobenius inner product Tr[a† b].
pub fn inner(a: &Mat<c64>, b: &Mat<c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}

pub fn max_abs(m: &Mat<c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn frobenius_norm(m: &Mat<c64>) -> f64 {
    inner(m, m).re.sqrt()
}

pub fn singular_values(m: &Mat<c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values().map_err(|_| Error::Eigen)
}

/// Largest singular value.
pub fn operator_norm(m: &Mat<c64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Sum of singular values.
pub fn trace_norm(m: &Mat<c64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// `(m + m†)/2` together with the largest entry of `m - m†`.
pub(crate) fn hermitian_part(m: &Mat<c64>) -> (Mat<c64>, f64) {
    let n = m.nrows();
    let mut asym = 0.0f64;
    let h = Mat::from_fn(n, n, |i, j| {
        let a = m[(i, j)];
        let b = m[(j, i)].conj();
        asym = asym.max((a - b).norm());
        (a + b) * 0.5
    });
    (h, asym)
}

/// Sums the `(part, part)` blocks over the complement index.
pub(crate) fn trace_out(m: &Mat<c64>, layout: &Layout) -> Mat<c64> {
    let k = layout.part.len();
    Mat::from_fn(k, k, |a, b| {
        layout
            .rest
            .iter()
            .map(|&r| m[(layout.part[a] + r, layout.part[b] + r)])
            .sum()
    })
}

/// `acc += m ⊗ 𝟙` with the factor placement given by `layout`.
pub(crate) fn add_padded(acc: &mut Mat<c64>, m: &Mat<c64>, layout: &Layout) {
    let k = layout.part.len();
    for &r in &layout.rest {
        for b in 0..k {
            for a in 0..k {
                acc[(layout.part[a] + r, layout.part[b] + r)] += m[(a, b)];
            }
        }
    }
}

pub(crate) fn pad_identity(m: &Mat<c64>, layout: &Layout, dim: usize) -> Mat<c64> {
    let mut out = Mat::zeros(dim, dim);
    let k = layout.part.len();
    for &r in &layout.rest {
        for b in 0..k {
            for a in 0..k {
                out[(layout.part[a] + r, layout.part[b] + r)] = m[(a, b)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_follow_big_endian_order() {
        let l = Layout::new(&[0, 1, 2], &[1], 2);
        assert_eq!(l.part, vec![0, 2]);
        assert_eq!(l.rest, vec![0, 1, 4, 5]);
    }

    #[test]
    fn set_helpers() {
        assert_eq!(union(&[3, 1], &[2, 3]), vec![1, 2, 3]);
        assert_eq!(difference(&[1, 2, 3], &[2]), vec![1, 3]);
        assert_eq!(intersection(&[1, 2, 3], &[3, 4]), vec![3]);
        assert!(check_ascending(&[1, 1]).is_err());
        assert!(check_subset(&[5], &[1, 2]).is_err());
    }
}
