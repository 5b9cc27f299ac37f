use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{
    check_ascending, difference, eigenvalues_of, intersection, operator_norm, spectrum_of,
    trace_norm, union, HermitianOperator, Layout,
};

/// A linear map from operators on `input_sites` to operators on `output_sites`,
/// stored as its Choi matrix `J[(i,a),(j,b)] = Φ(|i⟩⟨j|)[a,b]`.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    input_sites: Vec<usize>,
    output_sites: Vec<usize>,
    d: usize,
    choi: Mat<c64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChannelDefects {
    /// max(0, −λ_min(J)).
    pub cp: f64,
    /// ‖Tr_out J − 𝟙‖ in operator norm.
    pub tp: f64,
}

impl QuantumChannel {
    pub fn from_choi(
        input_sites: Vec<usize>,
        output_sites: Vec<usize>,
        d: usize,
        choi: Mat<c64>,
    ) -> Result<Self> {
        check_ascending(&input_sites)?;
        check_ascending(&output_sites)?;
        let din = d.pow(input_sites.len() as u32);
        let dout = d.pow(output_sites.len() as u32);
        if choi.nrows() != din * dout || choi.ncols() != din * dout {
            return Err(Error::DimensionMismatch {
                expected: din * dout,
                found: choi.nrows(),
            });
        }
        Ok(Self {
            input_sites,
            output_sites,
            d,
            choi,
        })
    }

    /// Tabulates `f` on the matrix units |i⟩⟨j|.
    pub fn from_map(
        input_sites: Vec<usize>,
        output_sites: Vec<usize>,
        d: usize,
        f: impl Fn(&Mat<c64>) -> Result<Mat<c64>>,
    ) -> Result<Self> {
        let din = d.pow(input_sites.len() as u32);
        let dout = d.pow(output_sites.len() as u32);
        let mut choi = Mat::zeros(din * dout, din * dout);
        for i in 0..din {
            for j in 0..din {
                let unit = Mat::from_fn(din, din, |a, b| {
                    if a == i && b == j {
                        c64::new(1.0, 0.0)
                    } else {
                        c64::new(0.0, 0.0)
                    }
                });
                let out = f(&unit)?;
                for a in 0..dout {
                    for b in 0..dout {
                        choi[(i * dout + a, j * dout + b)] = out[(a, b)];
                    }
                }
            }
        }
        Self::from_choi(input_sites, output_sites, d, choi)
    }

    pub fn input_sites(&self) -> &[usize] {
        &self.input_sites
    }

    pub fn output_sites(&self) -> &[usize] {
        &self.output_sites
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn input_dim(&self) -> usize {
        self.d.pow(self.input_sites.len() as u32)
    }

    pub fn output_dim(&self) -> usize {
        self.d.pow(self.output_sites.len() as u32)
    }

    pub fn choi(&self) -> &Mat<c64> {
        &self.choi
    }

    /// Φ(X) for an input-register matrix X.
    pub fn apply_matrix(&self, x: &Mat<c64>) -> Result<Mat<c64>> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        if x.nrows() != din || x.ncols() != din {
            return Err(Error::DimensionMismatch {
                expected: din,
                found: x.nrows(),
            });
        }
        let mut out = Mat::zeros(dout, dout);
        for i in 0..din {
            for j in 0..din {
                let xij = x[(i, j)];
                if xij == c64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..dout {
                    for a in 0..dout {
                        out[(a, b)] += xij * self.choi[(i * dout + a, j * dout + b)];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_input(x)?;
        let out = self.apply_matrix(x.matrix())?;
        Ok(HermitianOperator::from_parts_symmetrized(
            self.output_sites.clone(),
            self.d,
            &out,
        ))
    }

    /// (id ⊗ Φ)(X) for X on a register containing the input sites. The output lives on
    /// the untouched sites together with the output sites.
    pub fn apply_on(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.local_dim() != self.d {
            return Err(Error::LocalDimMismatch(x.local_dim(), self.d));
        }
        let sites = x.sites();
        if intersection(&self.input_sites, sites).len() != self.input_sites.len() {
            return Err(Error::SiteMismatch(
                self.input_sites.clone(),
                sites.to_vec(),
            ));
        }
        let rest = difference(sites, &self.input_sites);
        let clash = intersection(&rest, &self.output_sites);
        if !clash.is_empty() {
            return Err(Error::Overlap(clash));
        }
        let target = union(&rest, &self.output_sites);
        let src = Layout::new(sites, &self.input_sites, self.d);
        let dst = Layout::new(&target, &self.output_sites, self.d);
        let (din, dout, nr) = (self.input_dim(), self.output_dim(), src.rest.len());
        let m = x.matrix();
        let lhs = Mat::from_fn(nr * nr, din * din, |rr, ij| {
            let (r, s) = (rr / nr, rr % nr);
            let (i, j) = (ij / din, ij % din);
            m[(src.part[i] + src.rest[r], src.part[j] + src.rest[s])]
        });
        let rhs = Mat::from_fn(din * din, dout * dout, |ij, ab| {
            let (i, j) = (ij / din, ij % din);
            let (a, b) = (ab / dout, ab % dout);
            self.choi[(i * dout + a, j * dout + b)]
        });
        let prod = &lhs * &rhs;
        let dim = nr * dout;
        let mut out = Mat::zeros(dim, dim);
        for rr in 0..nr * nr {
            let (r, s) = (rr / nr, rr % nr);
            for ab in 0..dout * dout {
                let (a, b) = (ab / dout, ab % dout);
                out[(dst.part[a] + dst.rest[r], dst.part[b] + dst.rest[s])] = prod[(rr, ab)];
            }
        }
        Ok(HermitianOperator::from_parts_symmetrized(
            target, self.d, &out,
        ))
    }

    /// (Φ ⊗ id)(|ψ⟩⟨ψ|) for ψ on input ⊗ reference, with `psi[i * dref + r]`.
    pub fn apply_with_reference(&self, psi: &[c64], dref: usize) -> Result<Mat<c64>> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        if psi.len() != din * dref {
            return Err(Error::DimensionMismatch {
                expected: din * dref,
                found: psi.len(),
            });
        }
        // out[(a,r),(b,s)] = Σ ψ_ir ψ*_js J[(i,a),(j,b)]
        let mut out = Mat::zeros(dout * dref, dout * dref);
        for i in 0..din {
            for j in 0..din {
                for r in 0..dref {
                    let pir = psi[i * dref + r];
                    for s in 0..dref {
                        let c = pir * psi[j * dref + s].conj();
                        for a in 0..dout {
                            for b in 0..dout {
                                out[(a * dref + r, b * dref + s)] +=
                                    c * self.choi[(i * dout + a, j * dout + b)];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn defects(&self) -> Result<ChannelDefects> {
        let min = eigenvalues_of(&self.choi)?.first().copied().unwrap_or(0.0);
        let (din, dout) = (self.input_dim(), self.output_dim());
        let reduced = Mat::from_fn(din, din, |i, k| {
            let mut acc: c64 = (0..dout)
                .map(|a| self.choi[(i * dout + a, k * dout + a)])
                .sum();
            if i == k {
                acc -= c64::new(1.0, 0.0);
            }
            acc
        });
        Ok(ChannelDefects {
            cp: (-min).max(0.0),
            tp: operator_norm(&reduced)?,
        })
    }

    /// Kraus operators `K_m` (output × input) with Φ(X) = Σ K_m X K_m†, dropping
    /// eigenvalues of the Choi matrix below `cutoff`.
    pub fn kraus(&self, cutoff: f64) -> Result<Vec<Mat<c64>>> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        let spec = spectrum_of(&self.choi)?;
        Ok(spec
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > cutoff)
            .map(|(m, &v)| {
                let s = v.sqrt();
                Mat::from_fn(dout, din, |a, i| spec.vectors[(i * dout + a, m)] * s)
            })
            .collect())
    }

    /// Φ − Ψ as a Hermiticity-preserving map.
    pub fn minus(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        if self.input_sites != other.input_sites || self.output_sites != other.output_sites {
            return Err(Error::Channel("channels act on different registers".into()));
        }
        Ok(Self {
            choi: &self.choi - &other.choi,
            ..self.clone()
        })
    }

    /// Trace norm of the Choi matrix, normalized by the input dimension.
    pub fn choi_trace_distance(&self, other: &QuantumChannel) -> Result<f64> {
        Ok(trace_norm(&(&self.choi - &other.choi))? / self.input_dim() as f64)
    }

    fn check_input(&self, x: &HermitianOperator) -> Result<()> {
        if x.sites() != self.input_sites.as_slice() {
            return Err(Error::SiteMismatch(
                self.input_sites.clone(),
                x.sites().to_vec(),
            ));
        }
        if x.local_dim() != self.d {
            return Err(Error::LocalDimMismatch(x.local_dim(), self.d));
        }
        Ok(())
    }
}
