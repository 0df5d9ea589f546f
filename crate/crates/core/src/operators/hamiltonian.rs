use num_complex::Complex64;

use super::{IntegralSet, OperatorTerm, QOperator};
use crate::error::{Error, Result};
use crate::fock_space::FockBasis;

/// Second-quantized Hamiltonian from spin-orbital integrals.
pub fn hamiltonian_from_integrals(ints: &IntegralSet, basis: &FockBasis) -> Result<QOperator> {
    let m = ints.n_orbitals();
    if m != basis.n_orbitals() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_orbitals(),
            found: m,
        });
    }
    let mut terms = Vec::new();
    if ints.core_energy() != 0.0 {
        terms.push(OperatorTerm::new(
            Complex64::new(ints.core_energy(), 0.0),
            vec![],
            vec![],
        ));
    }
    for p in 0..m {
        for q in 0..m {
            let h = ints.h(p, q);
            if h != Complex64::new(0.0, 0.0) {
                terms.push(OperatorTerm::new(h, vec![p], vec![q]));
            }
        }
    }
    // ¼ Σ ⟨pq||rs⟩ a†p a†q a_s a_r collapses onto p<q, r<s
    for p in 0..m {
        for q in p + 1..m {
            for r in 0..m {
                for s in r + 1..m {
                    let g = ints.g(p, q, r, s);
                    if g != Complex64::new(0.0, 0.0) {
                        terms.push(OperatorTerm::new(g, vec![p, q], vec![s, r]));
                    }
                }
            }
        }
    }
    QOperator::from_terms(terms, basis)
}

/// Open-chain Hubbard terms on spin-orbitals `2i+σ`.
pub fn hubbard_terms(sites: usize, hopping: f64, repulsion: f64) -> Vec<OperatorTerm> {
    let mut terms = Vec::new();
    for i in 0..sites.saturating_sub(1) {
        for s in 0..2 {
            let (a, b) = (2 * i + s, 2 * (i + 1) + s);
            terms.push(OperatorTerm::new(Complex64::new(-hopping, 0.0), vec![a], vec![b]));
            terms.push(OperatorTerm::new(Complex64::new(-hopping, 0.0), vec![b], vec![a]));
        }
    }
    for i in 0..sites {
        // n↑n↓ = a†↑ a†↓ a↓ a↑
        terms.push(OperatorTerm::new(
            Complex64::new(repulsion, 0.0),
            vec![2 * i, 2 * i + 1],
            vec![2 * i + 1, 2 * i],
        ));
    }
    terms
}

/// `H = -t Σ (c†c + h.c.) + U Σ n↑n↓` in the site basis, built term by term.
pub fn build_hubbard(sites: usize, hopping: f64, repulsion: f64, basis: &FockBasis) -> Result<QOperator> {
    if basis.n_orbitals() != 2 * sites {
        return Err(Error::InvalidDimension(format!(
            "Hubbard chain of {sites} sites needs {} spin-orbitals, basis has {}",
            2 * sites,
            basis.n_orbitals()
        )));
    }
    QOperator::from_terms(hubbard_terms(sites, hopping, repulsion), basis)
}
