//! Dense Hermitian operators tagged with the lattice sites they act on.
//!
//! Tensor factors are always stored in ascending site order with the smallest
//! site as the most significant digit of the basis index.

mod entropy;
pub mod random;
mod tensor;

use std::ops::Deref;

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

pub(crate) use entropy::entropy_of_spectrum;
pub use entropy::{
    conditional_entropy, conditional_mutual_information, fidelity, mutual_information,
    relative_entropy, trace_distance, von_neumann_entropy,
};
pub(crate) use tensor::{add_padded, check_ascending, check_subset, Layout};
pub use tensor::{
    difference, frobenius_norm, inner, intersection, kron, max_abs, normalize_sites, operator_norm,
    scaled, singular_values, trace, trace_norm, union,
};

/// Eigenvalues at or below this are treated as zero by log and negative powers.
pub const SPECTRAL_FLOOR: f64 = 1e-14;
const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const NEGATIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct HermitianOperator {
    sites: Vec<usize>,
    d: usize,
    matrix: Mat<c64>,
}

impl HermitianOperator {
    /// Sites must be strictly ascending. The matrix is symmetrized; a warning is
    /// logged when its anti-Hermitian part exceeds 1e-12.
    pub fn new(sites: Vec<usize>, d: usize, matrix: Mat<c64>) -> Result<Self> {
        check_ascending(&sites)?;
        if d < 2 {
            return Err(Error::InvalidLocalDim(d));
        }
        let dim = d.pow(sites.len() as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let (matrix, asym) = tensor::hermitian_part(&matrix);
        if asym > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            log::warn!("symmetrized a matrix with anti-Hermitian part {asym:e}");
        }
        Ok(Self { sites, d, matrix })
    }

    /// Skips validation; callers guarantee shape and Hermiticity.
    pub(crate) fn from_parts(sites: Vec<usize>, d: usize, matrix: Mat<c64>) -> Self {
        debug_assert_eq!(matrix.nrows(), d.pow(sites.len() as u32));
        Self { sites, d, matrix }
    }

    /// Like `from_parts` but symmetrizes away rounding noise.
    pub(crate) fn from_parts_symmetrized(sites: Vec<usize>, d: usize, matrix: &Mat<c64>) -> Self {
        Self::from_parts(sites, d, tensor::hermitian_part(matrix).0)
    }

    pub fn zeros(sites: Vec<usize>, d: usize) -> Result<Self> {
        let dim = d.pow(sites.len() as u32);
        Self::new(sites, d, Mat::zeros(dim, dim))
    }

    pub fn identity(sites: Vec<usize>, d: usize) -> Result<Self> {
        let dim = d.pow(sites.len() as u32);
        Self::new(sites, d, Mat::identity(dim, dim))
    }

    /// Real diagonal operator.
    pub fn diagonal(sites: Vec<usize>, d: usize, diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let m = Mat::from_fn(dim, dim, |i, j| {
            if i == j {
                c64::new(diag[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Self::new(sites, d, m)
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    /// Re Tr[self · other] for operators on the same sites.
    pub fn inner(&self, other: &HermitianOperator) -> Result<f64> {
        self.same_register(other)?;
        Ok(inner(&self.matrix, &other.matrix).re)
    }

    pub fn scale(&self, s: f64) -> HermitianOperator {
        Self::from_parts(
            self.sites.clone(),
            self.d,
            scaled(&self.matrix, c64::new(s, 0.0)),
        )
    }

    /// Sum of two operators, each padded with identities onto the union of their sites.
    pub fn plus(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.combine(other, 1.0)
    }

    pub fn minus(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &HermitianOperator, sign: f64) -> Result<HermitianOperator> {
        if self.d != other.d {
            return Err(Error::LocalDimMismatch(self.d, other.d));
        }
        let sites = union(&self.sites, &other.sites);
        let a = embed(self, &sites)?;
        let b = embed(other, &sites)?;
        let m = Mat::from_fn(a.dim(), a.dim(), |i, j| {
            a.matrix[(i, j)] + b.matrix[(i, j)] * sign
        });
        Ok(Self::from_parts(sites, self.d, m))
    }

    pub fn add_identity(&self, s: f64) -> HermitianOperator {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += c64::new(s, 0.0);
        }
        Self::from_parts(self.sites.clone(), self.d, m)
    }

    pub(crate) fn same_register(&self, other: &HermitianOperator) -> Result<()> {
        if self.sites != other.sites {
            return Err(Error::SiteMismatch(self.sites.clone(), other.sites.clone()));
        }
        if self.d != other.d {
            return Err(Error::LocalDimMismatch(self.d, other.d));
        }
        Ok(())
    }

    pub fn eigh(&self) -> Result<Spectrum> {
        spectrum_of(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues_of(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Largest absolute eigenvalue.
    pub fn op_norm(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|v| v.abs()).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.matrix)
    }

    pub fn exp(&self) -> Result<HermitianOperator> {
        self.map_spectrum(f64::exp)
    }

    pub fn log(&self, regularize: bool) -> Result<HermitianOperator> {
        let spec = self.eigh()?.floored(regularize)?;
        Ok(self.with_matrix(spec.map(|x| c64::new(x.ln(), 0.0))))
    }

    /// `self^exponent` for a complex exponent; generally not Hermitian.
    pub fn power(&self, exponent: c64, regularize: bool) -> Result<Mat<c64>> {
        Ok(self.eigh()?.floored(regularize)?.power(exponent))
    }

    /// Square root of the positive part; negative eigenvalues are clipped to zero.
    pub fn sqrt_psd(&self) -> Result<HermitianOperator> {
        self.map_spectrum(|x| x.max(0.0).sqrt())
    }

    /// Applies a real function to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
        let spec = self.eigh()?;
        Ok(self.with_matrix(spec.map(|x| c64::new(f(x), 0.0))))
    }

    fn with_matrix(&self, m: Mat<c64>) -> HermitianOperator {
        Self::from_parts_symmetrized(self.sites.clone(), self.d, &m)
    }
}

/// Eigendecomposition of a Hermitian matrix given as a plain matrix.
pub(crate) fn spectrum_of(m: &Mat<c64>) -> Result<Spectrum> {
    let n = m.nrows();
    if n == 1 {
        return Ok(Spectrum {
            values: vec![m[(0, 0)].re],
            vectors: Mat::identity(1, 1),
        });
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigen)?;
    let s = evd.S().column_vector();
    Ok(Spectrum {
        values: (0..n).map(|i| s[i].re).collect(),
        vectors: evd.U().to_owned(),
    })
}

pub(crate) fn eigenvalues_of(m: &Mat<c64>) -> Result<Vec<f64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)].re]);
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigen)
}

/// Eigendecomposition `U diag(values) U†` with nondecreasing values.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl Spectrum {
    /// `U f(Λ) U†`.
    pub fn map(&self, f: impl Fn(f64) -> c64) -> Mat<c64> {
        let u = &self.vectors;
        let n = u.nrows();
        let fv: Vec<c64> = self.values.iter().map(|&x| f(x)).collect();
        let w = Mat::from_fn(n, n, |i, j| u[(i, j)] * fv[j]);
        &w * u.adjoint()
    }

    pub fn power(&self, exponent: c64) -> Mat<c64> {
        self.map(|x| c64::new(x, 0.0).powc(exponent))
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Checks the spectrum against `SPECTRAL_FLOOR`, clamping instead when `regularize` is set.
    pub fn floored(mut self, regularize: bool) -> Result<Spectrum> {
        let min = self.min();
        if min > SPECTRAL_FLOOR {
            return Ok(self);
        }
        if !regularize {
            return Err(Error::NonPositiveSpectrum {
                min,
                floor: SPECTRAL_FLOOR,
            });
        }
        for v in &mut self.values {
            *v = v.max(SPECTRAL_FLOOR);
        }
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralFunction {
    Exp,
    Log {
        regularize: bool,
    },
    /// Square root of the positive part.
    Sqrt,
    Power {
        exponent: c64,
        regularize: bool,
    },
}

/// `U f(Λ) U†` for the given spectral function.
pub fn matrix_function(op: &HermitianOperator, f: SpectralFunction) -> Result<Mat<c64>> {
    Ok(match f {
        SpectralFunction::Exp => op.exp()?.into_matrix(),
        SpectralFunction::Log { regularize } => op.log(regularize)?.into_matrix(),
        SpectralFunction::Sqrt => op.sqrt_psd()?.into_matrix(),
        SpectralFunction::Power {
            exponent,
            regularize,
        } => op.power(exponent, regularize)?,
    })
}

/// Pads `op` with identities onto `target`, which must be ascending and contain `op.sites()`.
pub fn embed(op: &HermitianOperator, target: &[usize]) -> Result<HermitianOperator> {
    check_ascending(target)?;
    check_subset(&op.sites, target)?;
    if op.sites.len() == target.len() {
        return Ok(op.clone());
    }
    let layout = Layout::new(target, &op.sites, op.d);
    let dim = op.d.pow(target.len() as u32);
    let m = tensor::pad_identity(&op.matrix, &layout, dim);
    Ok(HermitianOperator::from_parts(target.to_vec(), op.d, m))
}

/// Traces out every site not in `keep`. `keep` may be given in any order.
pub fn partial_trace(op: &HermitianOperator, keep: &[usize]) -> Result<HermitianOperator> {
    let keep = normalize_sites(keep);
    check_subset(&keep, &op.sites)?;
    if keep.len() == op.sites.len() {
        return Ok(op.clone());
    }
    let layout = Layout::new(&op.sites, &keep, op.d);
    let m = tensor::trace_out(&op.matrix, &layout);
    Ok(HermitianOperator::from_parts(keep, op.d, m))
}

/// Tensor product of operators on disjoint site sets.
pub fn tensor_product(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    if a.d != b.d {
        return Err(Error::LocalDimMismatch(a.d, b.d));
    }
    let shared = intersection(&a.sites, &b.sites);
    if !shared.is_empty() {
        return Err(Error::Overlap(shared));
    }
    let sites = union(&a.sites, &b.sites);
    let layout = Layout::new(&sites, &a.sites, a.d);
    let dim = a.d.pow(sites.len() as u32);
    let mut m = Mat::zeros(dim, dim);
    for (r2, &rb) in layout.rest.iter().enumerate() {
        for (r1, &ra) in layout.rest.iter().enumerate() {
            let bv = b.matrix[(r1, r2)];
            for q in 0..layout.part.len() {
                for p in 0..layout.part.len() {
                    m[(layout.part[p] + ra, layout.part[q] + rb)] = a.matrix[(p, q)] * bv;
                }
            }
        }
    }
    Ok(HermitianOperator::from_parts(sites, a.d, m))
}

/// A Hermitian operator with unit trace and nonnegative spectrum.
#[derive(Clone, Debug)]
pub struct DensityMatrix(HermitianOperator);

impl DensityMatrix {
    /// Validates trace and positivity. Eigenvalues down to -1e-10 are clipped and the
    /// result renormalized.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let spec = op.eigh()?;
        let min = spec.min();
        if min < -NEGATIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        if min < 0.0 {
            let total: f64 = spec.values.iter().map(|v| v.max(0.0)).sum();
            let m = spec.map(|x| c64::new(x.max(0.0) / total, 0.0));
            return Ok(Self(op.with_matrix(m)));
        }
        Ok(Self(op))
    }

    pub(crate) fn from_operator_unchecked(op: HermitianOperator) -> Self {
        Self(op)
    }

    pub fn maximally_mixed(sites: Vec<usize>, d: usize) -> Result<Self> {
        let dim = d.pow(sites.len() as u32) as f64;
        Ok(Self(
            HermitianOperator::identity(sites, d)?.scale(1.0 / dim),
        ))
    }

    /// The projector onto a normalized copy of `amplitudes`.
    pub fn pure(sites: Vec<usize>, d: usize, amplitudes: &[c64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let n = amplitudes.len();
        let m = Mat::from_fn(n, n, |i, j| {
            amplitudes[i] * amplitudes[j].conj() / (norm * norm)
        });
        Ok(Self(HermitianOperator::new(sites, d, m)?))
    }

    /// Normalizes a positive operator to unit trace.
    pub fn from_positive(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if tr.is_nan() || tr <= 0.0 {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(op.scale(1.0 / tr))
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        Ok(Self(partial_trace(&self.0, keep)?))
    }

    /// `(1 - weight) self + weight 𝟙/dim`.
    pub fn depolarize(&self, weight: f64) -> DensityMatrix {
        let dim = self.dim() as f64;
        Self(self.0.scale(1.0 - weight).add_identity(weight / dim))
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.0
    }
}

impl Deref for DensityMatrix {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

impl AsRef<HermitianOperator> for DensityMatrix {
    fn as_ref(&self) -> &HermitianOperator {
        &self.0
    }
}

/// Pauli matrix by letter (`I`, `X`, `Y`, `Z`).
pub fn pauli(letter: char) -> Option<Mat<c64>> {
    let z = c64::new(0.0, 0.0);
    let o = c64::new(1.0, 0.0);
    let i = c64::new(0.0, 1.0);
    let entries = match letter.to_ascii_uppercase() {
        'I' => [o, z, z, o],
        'X' => [z, o, o, z],
        'Y' => [z, -i, i, z],
        'Z' => [o, z, z, -o],
        _ => return None,
    };
    Some(Mat::from_fn(2, 2, |r, c| entries[2 * r + c]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op1(letter: char, site: usize) -> HermitianOperator {
        HermitianOperator::new(vec![site], 2, pauli(letter).unwrap()).unwrap()
    }

    #[test]
    fn embed_pads_with_identity() {
        let e = embed(&op1('Z', 1), &[1, 2]).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| e.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
        let e = embed(&op1('Z', 2), &[1, 2]).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| e.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn embed_onto_own_sites_is_identity_map() {
        let z = op1('Z', 3);
        let e = embed(&z, &[3]).unwrap();
        assert_eq!(max_abs(&(e.matrix() - z.matrix())), 0.0);
    }

    #[test]
    fn embedded_inner_product_scales_by_dimension() {
        let x = embed(&op1('X', 1), &[1, 2]).unwrap();
        let y = embed(&op1('X', 1), &[1, 2]).unwrap();
        let small = trace(&(op1('X', 1).matrix() * op1('X', 1).matrix())).re;
        assert!((trace(&(x.matrix() * y.matrix())).re - 2.0 * small).abs() < 1e-14);
    }

    #[test]
    fn embed_rejects_unknown_site_and_dim_mismatch() {
        assert!(embed(&op1('Z', 4), &[1, 2]).is_err());
        assert!(HermitianOperator::new(vec![0, 1], 2, Mat::identity(3, 3)).is_err());
        assert!(HermitianOperator::new(vec![1, 0], 2, Mat::identity(4, 4)).is_err());
    }

    #[test]
    fn partial_trace_of_product_and_bell_state() {
        let a = DensityMatrix::new(HermitianOperator::diagonal(vec![0], 2, &[0.7, 0.3]).unwrap())
            .unwrap();
        let b = DensityMatrix::new(HermitianOperator::diagonal(vec![1], 2, &[0.2, 0.8]).unwrap())
            .unwrap();
        let ab = tensor_product(&a, &b).unwrap();
        let back = partial_trace(&ab, &[0]).unwrap();
        assert!(max_abs(&(back.matrix() - a.matrix())) < 1e-15);
        let back = partial_trace(&ab, &[1]).unwrap();
        assert!(max_abs(&(back.matrix() - b.matrix())) < 1e-15);

        let s = 1.0 / 2f64.sqrt();
        let amp = [
            c64::new(s, 0.0),
            c64::new(0.0, 0.0),
            c64::new(0.0, 0.0),
            c64::new(s, 0.0),
        ];
        let bell = DensityMatrix::pure(vec![1, 2], 2, &amp).unwrap();
        let r = bell.partial_trace(&[1]).unwrap();
        let half = HermitianOperator::identity(vec![1], 2).unwrap().scale(0.5);
        assert!(max_abs(&(r.matrix() - half.matrix())) < 1e-15);
        assert!(partial_trace(&bell, &[7]).is_err());
    }

    #[test]
    fn partial_trace_onto_empty_set_gives_trace() {
        let z = op1('I', 0);
        let t = partial_trace(&z, &[]).unwrap();
        assert_eq!(t.dim(), 1);
        assert!((t.trace() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_function_edge_cases() {
        let zero = HermitianOperator::zeros(vec![0, 1], 2).unwrap();
        let e = matrix_function(&zero, SpectralFunction::Exp).unwrap();
        assert!(max_abs(&(&e - Mat::<c64>::identity(4, 4))) < 1e-14);

        let id = HermitianOperator::identity(vec![0], 2).unwrap();
        for t in [-3.0, 0.0, 0.7, 5.0] {
            let p = matrix_function(
                &id,
                SpectralFunction::Power {
                    exponent: c64::new(0.5, t),
                    regularize: false,
                },
            )
            .unwrap();
            assert!(max_abs(&(&p - Mat::<c64>::identity(2, 2))) < 1e-14);
        }

        assert!(matches!(
            zero.log(false),
            Err(Error::NonPositiveSpectrum { .. })
        ));
        let l = zero.log(true).unwrap();
        assert!((l.matrix()[(0, 0)].re - SPECTRAL_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn density_matrix_validation() {
        let bad = HermitianOperator::diagonal(vec![0], 2, &[0.6, 0.6]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        let neg = HermitianOperator::diagonal(vec![0], 2, &[1.1, -0.1]).unwrap();
        assert!(DensityMatrix::new(neg).is_err());
        let tiny = HermitianOperator::diagonal(vec![0], 2, &[1.0 + 5e-11, -5e-11]).unwrap();
        let rho = DensityMatrix::new(tiny).unwrap();
        assert!(rho.min_eigenvalue().unwrap() >= 0.0);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetrizes_slightly_non_hermitian_input() {
        let mut m = pauli('X').unwrap();
        m[(0, 1)] += c64::new(1e-9, 0.0);
        let h = HermitianOperator::new(vec![0], 2, m).unwrap();
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
    }
}
