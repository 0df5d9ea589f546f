//! Seeded random generators for property tests and the randomized suites.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster_analysis::Amplitudes;
use crate::fock_space::{Determinant, ExcitationSignature, FockBasis};
use crate::operators::{CMatrix, CVector, IntegralSet};

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real and imaginary parts uniform in `[-scale, scale)`.
pub fn random_complex(rng: &mut impl Rng, scale: f64) -> Complex64 {
    Complex64::new(
        rng.random_range(-1.0..1.0) * scale,
        rng.random_range(-1.0..1.0) * scale,
    )
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| random_complex(rng, scale))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> CMatrix {
    let a = random_matrix(rng, n, scale);
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_anti_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> CMatrix {
    let a = random_matrix(rng, n, scale);
    (&a - a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_unit_vector(rng: &mut impl Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| random_complex(rng, 1.0));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Complex Hermitian spin-orbital integrals whose aufbau determinant with
/// `n_occ` electrons dominates: orbital energies rise with index and jump
/// by one unit across the Fermi level, perturbed by `one_body` and
/// `two_body` sized random couplings.
pub fn random_integrals(
    rng: &mut impl Rng,
    n_orbitals: usize,
    n_occ: usize,
    one_body: f64,
    two_body: f64,
) -> IntegralSet {
    let m = n_orbitals;
    let h = random_hermitian(rng, m, one_body);
    let raw: Vec<Complex64> = (0..m.pow(4)).map(|_| random_complex(rng, two_body)).collect();
    let v = |p: usize, q: usize, r: usize, s: usize| raw[((p * m + q) * m + r) * m + s];
    // average over ⟨pq|rs⟩ = ⟨rs|pq⟩* and ⟨pq|rs⟩ = ⟨qp|sr⟩
    let w = |p, q, r, s| (v(p, q, r, s) + v(r, s, p, q).conj() + v(q, p, s, r) + v(s, r, q, p).conj()) * 0.25;
    IntegralSet::from_physicist(
        m,
        |p, q| {
            if p == q {
                let eps = p as f64 - n_occ as f64 + if p >= n_occ { 1.0 } else { 0.0 };
                Complex64::new(eps + h[(p, p)].re, 0.0)
            } else {
                h[(p, q)]
            }
        },
        w,
        0.0,
    )
    .expect("orbital count checked by caller")
}

/// Random amplitudes on every excitation of `reference` in `basis` that `keep` accepts.
pub fn random_amplitudes(
    rng: &mut impl Rng,
    reference: Determinant,
    basis: &FockBasis,
    scale: f64,
    keep: impl Fn(&ExcitationSignature) -> bool,
) -> Amplitudes {
    let mut amps = Amplitudes::new(reference);
    for &d in basis.determinants() {
        if d == reference {
            continue;
        }
        let sig = ExcitationSignature::between(reference, d);
        if keep(&sig) {
            amps.insert(sig, random_complex(rng, scale))
                .expect("signature taken from the basis");
        }
    }
    amps
}
