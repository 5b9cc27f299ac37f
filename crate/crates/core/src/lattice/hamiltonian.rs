use faer::{c64, Mat};

use super::Lattice;
use crate::error::{Error, Result};
use crate::operator::{
    add_padded, check_ascending, kron, normalize_sites, pauli, HermitianOperator, Layout,
};

/// A sum of local terms h_X with the inverse temperature already multiplied in.
#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    lattice: Lattice,
    d: usize,
    terms: Vec<HermitianOperator>,
    declared_range: Option<usize>,
}

impl LocalHamiltonian {
    pub fn new(lattice: Lattice, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidLocalDim(d));
        }
        Ok(Self {
            lattice,
            d,
            terms: Vec::new(),
            declared_range: None,
        })
    }

    /// Every added term must then have diameter at most `range`.
    pub fn with_declared_range(lattice: Lattice, d: usize, range: usize) -> Result<Self> {
        let mut h = Self::new(lattice, d)?;
        h.declared_range = Some(range);
        Ok(h)
    }

    pub fn add_term(&mut self, term: HermitianOperator) -> Result<()> {
        if term.local_dim() != self.d {
            return Err(Error::LocalDimMismatch(term.local_dim(), self.d));
        }
        if term.sites().is_empty() {
            return Err(Error::Hamiltonian("terms need a nonempty support".into()));
        }
        if let Some(&site) = term.sites().iter().find(|&&s| !self.lattice.contains(s)) {
            return Err(Error::UnknownSite {
                site,
                available: self.lattice.sites().collect(),
            });
        }
        let diam = self.lattice.diameter(term.sites());
        if let Some(r) = self.declared_range {
            if diam > r {
                return Err(Error::Hamiltonian(format!(
                    "term on {:?} has diameter {diam} above the declared range {r}",
                    term.sites()
                )));
            }
        }
        self.terms.push(term);
        Ok(())
    }

    /// Adds `coeff · P₁ ⊗ … ⊗ P_m` with one Pauli letter per listed site, in any site order.
    pub fn add_pauli(&mut self, sites: &[usize], paulis: &str, coeff: f64) -> Result<()> {
        let op = pauli_term(sites, paulis, coeff)?;
        if op.local_dim() != self.d {
            return Err(Error::LocalDimMismatch(2, self.d));
        }
        self.add_term(op)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn num_sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn terms(&self) -> &[HermitianOperator] {
        &self.terms
    }

    /// Declared range if any, otherwise the largest term diameter.
    pub fn range(&self) -> usize {
        self.declared_range.unwrap_or_else(|| {
            self.terms
                .iter()
                .map(|t| self.lattice.diameter(t.sites()))
                .max()
                .unwrap_or(0)
        })
    }

    pub fn scaled(&self, factor: f64) -> LocalHamiltonian {
        Self {
            terms: self.terms.iter().map(|t| t.scale(factor)).collect(),
            ..self.clone()
        }
    }

    pub fn max_term_norm(&self) -> Result<f64> {
        self.terms
            .iter()
            .map(|t| t.op_norm())
            .try_fold(0.0f64, |m, n| Ok(m.max(n?)))
    }

    /// J = log d + max‖h_X‖·2^{(2r+1)^D}, the interaction strength bound behind the
    /// spectral floor e^{-JN}/2.
    pub fn strength_bound(&self) -> Result<f64> {
        let r = self.range() as u32;
        let exponent = (2 * r + 1).pow(self.lattice.dimension() as u32);
        Ok((self.d as f64).ln() + self.max_term_norm()? * 2f64.powi(exponent as i32))
    }

    /// e^{-JN}/2; usually far below machine precision for nontrivial models.
    pub fn spectral_floor(&self) -> Result<f64> {
        Ok((-self.strength_bound()? * self.num_sites() as f64).exp() / 2.0)
    }

    pub fn full(&self) -> Result<HermitianOperator> {
        local_term_sum(self, &self.lattice.sites().collect::<Vec<_>>())
    }

    /// Sum of the terms with support inside `within` that touch `site`, on `within`.
    pub fn terms_touching(&self, site: usize, within: &[usize]) -> Result<HermitianOperator> {
        let within = normalize_sites(within);
        sum_embedded(
            self.d,
            &within,
            self.terms.iter().filter(|t| {
                t.sites().contains(&site) && t.sites().iter().all(|s| within.contains(s))
            }),
        )
    }
}

/// H_V: the sum of exactly those terms with support inside `v`, embedded on `v`.
pub fn local_term_sum(h: &LocalHamiltonian, v: &[usize]) -> Result<HermitianOperator> {
    let v = normalize_sites(v);
    sum_embedded(
        h.d,
        &v,
        h.terms
            .iter()
            .filter(|t| t.sites().iter().all(|s| v.contains(s))),
    )
}

fn sum_embedded<'a>(
    d: usize,
    target: &[usize],
    terms: impl Iterator<Item = &'a HermitianOperator>,
) -> Result<HermitianOperator> {
    check_ascending(target)?;
    let dim = d.pow(target.len() as u32);
    let mut acc = Mat::<c64>::zeros(dim, dim);
    for t in terms {
        let layout = Layout::new(target, t.sites(), d);
        add_padded(&mut acc, t.matrix(), &layout);
    }
    HermitianOperator::new(target.to_vec(), d, acc)
}

/// `coeff · ⊗ P` as an operator on the sorted sites.
pub(crate) fn pauli_term(sites: &[usize], paulis: &str, coeff: f64) -> Result<HermitianOperator> {
    let letters: Vec<char> = paulis.chars().collect();
    if letters.len() != sites.len() {
        return Err(Error::Hamiltonian(format!(
            "pauli string {paulis:?} has {} letters for {} sites",
            letters.len(),
            sites.len()
        )));
    }
    let mut pairs: Vec<(usize, char)> = sites.iter().copied().zip(letters).collect();
    pairs.sort_by_key(|p| p.0);
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Hamiltonian(format!("repeated site in {sites:?}")));
    }
    let mut m = Mat::from_fn(1, 1, |_, _| c64::new(coeff, 0.0));
    for &(_, letter) in &pairs {
        let p = pauli(letter)
            .ok_or_else(|| Error::Hamiltonian(format!("unknown pauli letter {letter:?}")))?;
        m = kron(&m, &p);
    }
    HermitianOperator::new(pairs.iter().map(|p| p.0).collect(), 2, m)
}
