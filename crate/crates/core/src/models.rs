//! Built-in model families used by the corpus and the CLI.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice::{Lattice, LocalHamiltonian};
use crate::operator::random;

/// β(J Σ Z_i Z_j + h Σ Z_i) on the nearest-neighbour bonds of `lattice`.
pub fn commuting_ising(
    lattice: Lattice,
    beta: f64,
    coupling: f64,
    field: f64,
) -> Result<LocalHamiltonian> {
    let mut h = LocalHamiltonian::new(lattice.clone(), 2)?;
    for (a, b) in lattice.bonds() {
        h.add_pauli(&[a, b], "ZZ", beta * coupling)?;
    }
    if field != 0.0 {
        for i in lattice.sites() {
            h.add_pauli(&[i], "Z", beta * field)?;
        }
    }
    Ok(h)
}

pub fn commuting_ising_chain(
    n: usize,
    beta: f64,
    coupling: f64,
    field: f64,
) -> Result<LocalHamiltonian> {
    commuting_ising(Lattice::chain(n)?, beta, coupling, field)
}

/// β(−J Σ Z_i Z_j − g Σ X_i) on the nearest-neighbour bonds of `lattice`.
pub fn transverse_ising(
    lattice: Lattice,
    beta: f64,
    coupling: f64,
    field: f64,
) -> Result<LocalHamiltonian> {
    let mut h = LocalHamiltonian::new(lattice.clone(), 2)?;
    for (a, b) in lattice.bonds() {
        h.add_pauli(&[a, b], "ZZ", -beta * coupling)?;
    }
    for i in lattice.sites() {
        h.add_pauli(&[i], "X", -beta * field)?;
    }
    Ok(h)
}

/// Transverse-field Ising chain at J = g = 1.
pub fn tfim_chain(n: usize, beta: f64) -> Result<LocalHamiltonian> {
    transverse_ising(Lattice::chain(n)?, beta, 1.0, 1.0)
}

/// Seeded random nearest-neighbour chain: every bond and site carries an
/// independent random Hermitian term of unit operator norm, scaled by β.
pub fn random_two_local_chain(n: usize, beta: f64, seed: u64) -> Result<LocalHamiltonian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = LocalHamiltonian::new(Lattice::chain(n)?, 2)?;
    for i in 0..n {
        h.add_term(random::hermitian(&mut rng, vec![i], 2)?.scale(beta))?;
        if i + 1 < n {
            h.add_term(random::hermitian(&mut rng, vec![i, i + 1], 2)?.scale(beta))?;
        }
    }
    Ok(h)
}

/// The zero Hamiltonian on a chain.
pub fn free_chain(n: usize) -> Result<LocalHamiltonian> {
    LocalHamiltonian::new(Lattice::chain(n)?, 2)
}

/// One entry of the default test corpus.
#[derive(Clone, Debug)]
pub struct CorpusModel {
    pub id: String,
    pub hamiltonian: LocalHamiltonian,
}

/// Commuting chains N ∈ {3..6} at β ∈ {0.5, 1}, transverse-field Ising chains
/// N ∈ {4, 6, 8, 10} at β ∈ {0.3, 0.5, 1}, and three seeded random chains.
/// Entries above `max_sites` are skipped.
pub fn default_corpus(max_sites: usize) -> Result<Vec<CorpusModel>> {
    let mut out = Vec::new();
    for n in 3..=6 {
        for beta in [0.5, 1.0] {
            out.push(CorpusModel {
                id: format!("ising_n{n}_b{beta}"),
                hamiltonian: commuting_ising_chain(n, beta, 1.0, 0.3)?,
            });
        }
    }
    for n in [4, 6, 8, 10] {
        for beta in [0.3, 0.5, 1.0] {
            out.push(CorpusModel {
                id: format!("tfim_n{n}_b{beta}"),
                hamiltonian: tfim_chain(n, beta)?,
            });
        }
    }
    for seed in 0..3u64 {
        out.push(CorpusModel {
            id: format!("random_n5_s{seed}"),
            hamiltonian: random_two_local_chain(5, 0.7, seed)?,
        });
    }
    out.retain(|m| m.hamiltonian.num_sites() <= max_sites);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_shapes() {
        let h = tfim_chain(4, 0.5).unwrap();
        assert_eq!(h.terms().len(), 7);
        assert_eq!(h.range(), 1);
        let c = commuting_ising_chain(3, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(c.terms().len(), 2);
        let r1 = random_two_local_chain(3, 1.0, 9).unwrap();
        let r2 = random_two_local_chain(3, 1.0, 9).unwrap();
        assert_eq!(r1.terms()[1].matrix(), r2.terms()[1].matrix());
        assert_eq!(default_corpus(6).unwrap().len(), 8 + 6 + 3);
    }
}
