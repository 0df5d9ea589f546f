//! Cluster amplitudes of exact states, their internal/external split and
//! the CAS projectors.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock_space::{
    apply_excitation, classify_determinant, Determinant, DeterminantClass, ExcitationSignature,
    FockBasis, SpinOrbitalPartition,
};
use crate::operators::{CMatrix, CVector, QOperator};

/// States with `|⟨Φ|Ψ⟩|` below this cannot be intermediately normalized.
pub const INTERMEDIATE_NORMALIZATION_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Excitation amplitudes `t^{O}_{V}` relative to a fixed reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Amplitudes {
    reference: Determinant,
    entries: BTreeMap<ExcitationSignature, Complex64>,
    max_rank: usize,
}

impl Amplitudes {
    pub fn new(reference: Determinant) -> Self {
        Self {
            reference,
            entries: BTreeMap::new(),
            max_rank: 0,
        }
    }

    pub fn insert(&mut self, sig: ExcitationSignature, value: Complex64) -> Result<()> {
        if sig.rank() == 0 || !sig.is_excitation_of(self.reference) {
            return Err(Error::InvalidInput(format!(
                "{sig} is not an excitation of {}",
                self.reference
            )));
        }
        self.max_rank = self.max_rank.max(sig.rank());
        self.entries.insert(sig, value);
        Ok(())
    }

    pub fn reference(&self) -> Determinant {
        self.reference
    }

    pub fn get(&self, sig: &ExcitationSignature) -> Option<Complex64> {
        self.entries.get(sig).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ExcitationSignature, &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    /// Largest amplitude modulus, zero when empty.
    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|t| t.norm()).fold(0.0, f64::max)
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if basis.index_of(self.reference).is_none() {
            return Err(Error::InvalidInput(format!(
                "reference {} is not in the basis",
                self.reference
            )));
        }
        Ok(())
    }

    /// `Σ t_K E_K` as a dense matrix.
    pub fn excitation_matrix(&self, basis: &FockBasis) -> Result<CMatrix> {
        self.check_basis(basis)?;
        let n = basis.len();
        let mut m = CMatrix::zeros(n, n);
        for (sig, &t) in &self.entries {
            let ops = sig.excitation_ops();
            for (col, &d) in basis.determinants().iter().enumerate() {
                if let Some((out, phase)) = crate::fock_space::apply_string(&ops, d) {
                    if let Some(row) = basis.index_of(out) {
                        m[(row, col)] += t * phase;
                    }
                }
            }
        }
        Ok(m)
    }

    /// `Σ t_K E_K†`: the amplitudes placed on de-excitation strings, without
    /// conjugation.
    pub fn deexcitation_matrix(&self, basis: &FockBasis) -> Result<CMatrix> {
        Ok(self.excitation_matrix(basis)?.transpose())
    }

    /// `(Σ t_K E_K) v` without forming the matrix.
    pub fn apply(&self, v: &CVector, basis: &FockBasis) -> CVector {
        let mut out = CVector::zeros(v.len());
        for (j, &d) in basis.determinants().iter().enumerate() {
            let c = v[j];
            if c == ZERO {
                continue;
            }
            for (sig, &t) in &self.entries {
                if let Some((target, phase)) = apply_excitation(sig, d) {
                    if let Some(i) = basis.index_of(target) {
                        out[i] += t * phase * c;
                    }
                }
            }
        }
        out
    }

    /// `e^{T} v` summed until the nilpotent series terminates.
    pub fn apply_exp(&self, v: &CVector, basis: &FockBasis) -> CVector {
        let mut result = v.clone();
        let mut term = v.clone();
        for n in 1..=basis.n_electrons().max(1) {
            term = self.apply(&term, basis) / Complex64::new(n as f64, 0.0);
            if term.iter().all(|&z| z == ZERO) {
                break;
            }
            result += &term;
        }
        result
    }
}

/// Unit vector on `d`.
pub fn determinant_vector(basis: &FockBasis, d: Determinant) -> Result<CVector> {
    let idx = basis
        .index_of(d)
        .ok_or_else(|| Error::InvalidInput(format!("{d} is not in the basis")))?;
    let mut v = CVector::zeros(basis.len());
    v[idx] = ONE;
    Ok(v)
}

/// Amplitudes `T` with `e^{T}|Φ⟩ = Ψ/⟨Φ|Ψ⟩`, solved rank by rank: the
/// rank-`k` amplitudes are what remains of `Ψ/c₀` after subtracting
/// `e^{T_{<k}}|Φ⟩`.
pub fn cluster_analyze(psi: &CVector, reference: Determinant, basis: &FockBasis) -> Result<Amplitudes> {
    if psi.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: psi.len(),
        });
    }
    let ref_idx = basis
        .index_of(reference)
        .ok_or_else(|| Error::InvalidInput(format!("reference {reference} is not in the basis")))?;
    let c0 = psi[ref_idx];
    if c0.norm() < INTERMEDIATE_NORMALIZATION_TOL {
        return Err(Error::IntermediateNormalization(c0.norm()));
    }
    let x = psi / c0;
    let phi = determinant_vector(basis, reference)?;

    let mut by_rank: Vec<Vec<(usize, ExcitationSignature)>> = vec![Vec::new(); basis.n_electrons() + 1];
    for (i, &d) in basis.determinants().iter().enumerate() {
        if i == ref_idx {
            continue;
        }
        let sig = ExcitationSignature::between(reference, d);
        by_rank[sig.rank()].push((i, sig));
    }

    let mut amps = Amplitudes::new(reference);
    for group in by_rank.iter().skip(1) {
        if group.is_empty() {
            continue;
        }
        let y = amps.apply_exp(&phi, basis);
        for (i, sig) in group {
            let (_, sign) = apply_excitation(sig, reference).expect("valid excitation of the reference");
            let t = (x[*i] - y[*i]) * sign;
            if t != ZERO {
                amps.insert(sig.clone(), t)?;
            }
        }
    }
    Ok(amps)
}

/// Splits `T` into internal (all holes occ-active, all particles
/// virt-active) and external parts.
pub fn split_amplitudes(t: &Amplitudes, part: &SpinOrbitalPartition) -> (Amplitudes, Amplitudes) {
    let mut int = Amplitudes::new(t.reference);
    let mut ext = Amplitudes::new(t.reference);
    for (sig, &v) in &t.entries {
        let target = if part.is_internal(sig) { &mut int } else { &mut ext };
        target.max_rank = target.max_rank.max(sig.rank());
        target.entries.insert(sig.clone(), v);
    }
    (int, ext)
}

/// `T - T†`.
pub fn sigma_lowest_order(t: &Amplitudes, basis: &FockBasis) -> Result<QOperator> {
    let m = t.excitation_matrix(basis)?;
    let sigma = &m - m.adjoint();
    QOperator::from_matrix(sigma, basis)
}

/// Diagonal projectors onto the reference, the internal and the external
/// determinants.
#[derive(Clone, Debug)]
pub struct Projectors {
    pub p: QOperator,
    pub q_int: QOperator,
    pub q_ext: QOperator,
    classes: Vec<DeterminantClass>,
    cas_indices: Vec<usize>,
}

impl Projectors {
    pub fn class_of(&self, idx: usize) -> DeterminantClass {
        self.classes[idx]
    }

    pub fn classes(&self) -> &[DeterminantClass] {
        &self.classes
    }

    /// Parent-basis indices of the CAS: reference first, then internal
    /// determinants in basis order.
    pub fn cas_indices(&self) -> &[usize] {
        &self.cas_indices
    }

    pub fn cas_dim(&self) -> usize {
        self.cas_indices.len()
    }

    /// `P + Q_int` as a matrix.
    pub fn cas_projector(&self) -> CMatrix {
        self.p.matrix() + self.q_int.matrix()
    }

    /// CAS coefficients of a full-space vector, in `cas_indices` order.
    pub fn restrict(&self, v: &CVector) -> CVector {
        CVector::from_iterator(self.cas_indices.len(), self.cas_indices.iter().map(|&i| v[i]))
    }

    /// Embeds CAS coefficients back into the full space.
    pub fn lift(&self, c: &CVector) -> CVector {
        let mut v = CVector::zeros(self.classes.len());
        for (k, &i) in self.cas_indices.iter().enumerate() {
            v[i] = c[k];
        }
        v
    }

    /// Restriction of a full-space matrix to the CAS block.
    pub fn restrict_matrix(&self, a: &CMatrix) -> CMatrix {
        let n = self.cas_indices.len();
        CMatrix::from_fn(n, n, |i, j| a[(self.cas_indices[i], self.cas_indices[j])])
    }

    /// Norm of the external part of `v`.
    pub fn external_norm(&self, v: &CVector) -> f64 {
        self.classes
            .iter()
            .zip(v.iter())
            .filter(|(c, _)| **c == DeterminantClass::External)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

pub fn build_projectors(
    reference: Determinant,
    basis: &FockBasis,
    part: &SpinOrbitalPartition,
) -> Result<Projectors> {
    if part.n_orbitals() != basis.n_orbitals() || part.n_electrons() != basis.n_electrons() {
        return Err(Error::InvalidInput(format!(
            "partition ({} orbitals, {} electrons) does not match the basis ({}, {})",
            part.n_orbitals(),
            part.n_electrons(),
            basis.n_orbitals(),
            basis.n_electrons()
        )));
    }
    let n = basis.len();
    let classes = basis
        .determinants()
        .iter()
        .map(|&d| classify_determinant(d, reference, part))
        .collect::<Result<Vec<_>>>()?;
    let diag = |want: DeterminantClass| {
        let mut m = CMatrix::zeros(n, n);
        for (i, c) in classes.iter().enumerate() {
            if *c == want {
                m[(i, i)] = ONE;
            }
        }
        QOperator::from_matrix(m, basis)
    };
    let ref_idx = basis.index_of(reference).expect("classified as reference");
    let mut cas_indices = vec![ref_idx];
    cas_indices.extend(
        classes
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == DeterminantClass::Internal)
            .map(|(i, _)| i),
    );
    Ok(Projectors {
        p: diag(DeterminantClass::Reference)?,
        q_int: diag(DeterminantClass::Internal)?,
        q_ext: diag(DeterminantClass::External)?,
        classes,
        cas_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_space::build_basis;
    use crate::operators::matfn::{expm_matrix, hermitian_eigen};
    use crate::operators::hamiltonian_from_integrals;
    use crate::random::{random_complex, random_integrals, random_unit_vector, seeded};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reference_state_has_no_amplitudes() {
        let basis = build_basis(6, 3).unwrap();
        let phi = determinant_vector(&basis, basis.aufbau_reference()).unwrap();
        let t = cluster_analyze(&(phi * c(0.0, 2.0)), basis.aufbau_reference(), &basis).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn two_determinant_state_gives_ratio() {
        let basis = build_basis(4, 2).unwrap();
        let reference = basis.aufbau_reference();
        for (occ, virt) in [(1, 2), (0, 2), (1, 3)] {
            let sig = ExcitationSignature::new(vec![occ], vec![virt]).unwrap();
            let (d, sign) = apply_excitation(&sig, reference).unwrap();
            let mut psi = CVector::zeros(basis.len());
            psi[basis.index_of(reference).unwrap()] = c(0.8, 0.1);
            psi[basis.index_of(d).unwrap()] = c(0.3, -0.5);
            let t = cluster_analyze(&psi, reference, &basis).unwrap();
            assert_eq!(t.len(), 1);
            let expect = c(0.3, -0.5) / c(0.8, 0.1) * sign;
            assert!((t.get(&sig).unwrap() - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn vanishing_reference_is_rejected() {
        let basis = build_basis(4, 2).unwrap();
        let mut psi = CVector::zeros(basis.len());
        psi[1] = ONE;
        assert!(matches!(
            cluster_analyze(&psi, basis.aufbau_reference(), &basis),
            Err(Error::IntermediateNormalization(_))
        ));
    }

    #[test]
    fn round_trip_random_state() {
        let basis = build_basis(8, 4).unwrap();
        let reference = basis.aufbau_reference();
        let ref_idx = basis.index_of(reference).unwrap();
        let mut rng = seeded(17);
        for _ in 0..5 {
            let mut psi = random_unit_vector(&mut rng, basis.len());
            psi[ref_idx] += c(3.0, 1.0);
            let t = cluster_analyze(&psi, reference, &basis).unwrap();
            assert!(t.max_rank() <= 4);
            let tm = t.excitation_matrix(&basis).unwrap();
            let phi = determinant_vector(&basis, reference).unwrap();
            let rebuilt = expm_matrix(&tm).unwrap() * &phi;
            let target = &psi / psi[ref_idx];
            assert!((rebuilt - &target).norm() < 1e-10);
            assert!((t.apply_exp(&phi, &basis) - target).norm() < 1e-10);
        }
    }

    fn exact_ground(m: usize, n: usize, seed: u64) -> (FockBasis, QOperator, f64, CVector) {
        let basis = build_basis(m, n).unwrap();
        let mut rng = seeded(seed);
        let ints = random_integrals(&mut rng, m, n, 0.2, 0.1);
        let h = hamiltonian_from_integrals(&ints, &basis).unwrap();
        let (e, v) = hermitian_eigen(h.matrix()).unwrap();
        let psi = v.column(0).into_owned();
        (basis, h, e[0], psi)
    }

    #[test]
    fn cc_residual_vanishes_for_exact_state() {
        let (basis, h, e, psi) = exact_ground(8, 4, 31);
        let reference = basis.aufbau_reference();
        let t = cluster_analyze(&psi, reference, &basis).unwrap();
        let tm = t.excitation_matrix(&basis).unwrap();
        let hbar = expm_matrix(&(-&tm)).unwrap() * h.matrix() * expm_matrix(&tm).unwrap();
        let phi = determinant_vector(&basis, reference).unwrap();
        let mut r = hbar * &phi;
        let ref_idx = basis.index_of(reference).unwrap();
        assert!((r[ref_idx] - c(e, 0.0)).norm() < 1e-9);
        r[ref_idx] = ZERO;
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn hybrid_residual_vanishes() {
        let (basis, h, e, psi) = exact_ground(8, 4, 32);
        let reference = basis.aufbau_reference();
        let part = SpinOrbitalPartition::auto_homo_lumo(8, 4, 2, 2).unwrap();
        let proj = build_projectors(reference, &basis, &part).unwrap();
        let t = cluster_analyze(&psi, reference, &basis).unwrap();
        let (t_int, t_ext) = split_amplitudes(&t, &part);
        assert!(!t_int.is_empty() && !t_ext.is_empty());
        let ext = t_ext.excitation_matrix(&basis).unwrap();
        let hbar = expm_matrix(&(-&ext)).unwrap() * h.matrix() * expm_matrix(&ext).unwrap();
        let phi = determinant_vector(&basis, reference).unwrap();
        let int_state = t_int.apply_exp(&phi, &basis);
        let r = proj.cas_projector() * (hbar * &int_state - &int_state * c(e, 0.0));
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn split_extremes_and_mixed() {
        let basis = build_basis(6, 2).unwrap();
        let reference = basis.aufbau_reference();
        let mut rng = seeded(4);
        let psi = random_unit_vector(&mut rng, basis.len()) + determinant_vector(&basis, reference).unwrap() * c(2.0, 0.0);
        let t = cluster_analyze(&psi, reference, &basis).unwrap();

        let empty = SpinOrbitalPartition::auto_homo_lumo(6, 2, 0, 0).unwrap();
        let (i, e) = split_amplitudes(&t, &empty);
        assert!(i.is_empty());
        assert_eq!(e, t);

        let full = SpinOrbitalPartition::auto_homo_lumo(6, 2, 2, 4).unwrap();
        let (i, e) = split_amplitudes(&t, &full);
        assert_eq!(i, t);
        assert!(e.is_empty());

        let part = SpinOrbitalPartition::auto_homo_lumo(6, 2, 2, 2).unwrap();
        let (i, e) = split_amplitudes(&t, &part);
        assert_eq!(i.len() + e.len(), t.len());
        let mixed = ExcitationSignature::new(vec![0, 1], vec![2, 5]).unwrap();
        assert!(e.get(&mixed).is_some() && i.get(&mixed).is_none());
    }

    #[test]
    fn sigma_lowest_order_shapes() {
        let basis = build_basis(4, 2).unwrap();
        let reference = basis.aufbau_reference();
        let zero = sigma_lowest_order(&Amplitudes::new(reference), &basis).unwrap();
        assert_eq!(zero.matrix().norm(), 0.0);

        let sig = ExcitationSignature::new(vec![1], vec![2]).unwrap();
        let mut t = Amplitudes::new(reference);
        t.insert(sig.clone(), c(0.4, 0.0)).unwrap();
        let s = sigma_lowest_order(&t, &basis).unwrap();
        let (d, sign) = apply_excitation(&sig, reference).unwrap();
        let (i, j) = (basis.index_of(d).unwrap(), basis.index_of(reference).unwrap());
        assert!((s.matrix()[(i, j)] - c(0.4 * sign, 0.0)).norm() < 1e-15);
        assert!((s.matrix()[(j, i)] + c(0.4 * sign, 0.0)).norm() < 1e-15);
        let rest: f64 = s.matrix().norm_squared() - 2.0 * 0.16;
        // E also couples other determinant pairs, each with a ±θ entry
        assert!(rest >= -1e-15);
        let rot = expm_matrix(s.matrix()).unwrap();
        assert!((rot[(i, j)].re - 0.4f64.sin() * sign).abs() < 1e-14);
        assert!((rot[(j, j)].re - 0.4f64.cos()).abs() < 1e-14);

        let mut rng = seeded(8);
        let basis = build_basis(8, 4).unwrap();
        let mut t = Amplitudes::new(basis.aufbau_reference());
        for d in basis.determinants().iter().skip(1) {
            let sig = ExcitationSignature::between(basis.aufbau_reference(), *d);
            t.insert(sig, random_complex(&mut rng, 0.5)).unwrap();
        }
        let s = sigma_lowest_order(&t, &basis).unwrap();
        assert!((s.matrix() + s.matrix().adjoint()).norm() < 1e-14);
    }

    #[test]
    fn projector_identities() {
        let basis = build_basis(8, 4).unwrap();
        let reference = basis.aufbau_reference();
        for (no, nv) in [(0, 0), (2, 2), (4, 4), (1, 3)] {
            let part = SpinOrbitalPartition::auto_homo_lumo(8, 4, no, nv).unwrap();
            let proj = build_projectors(reference, &basis, &part).unwrap();
            let (p, qi, qe) = (proj.p.matrix(), proj.q_int.matrix(), proj.q_ext.matrix());
            assert!((p + qi + qe - CMatrix::identity(70, 70)).norm() < 1e-15);
            assert!((p * qi).norm() + (p * qe).norm() + (qi * qe).norm() < 1e-15);
            assert_eq!(p.trace(), ONE);
            assert_eq!((qi + qe).trace(), c(69.0, 0.0));
            if no == 4 && nv == 4 {
                assert_eq!(qe.norm(), 0.0);
            }
            if no == 0 {
                assert_eq!(qi.norm(), 0.0);
            }
            assert_eq!(proj.cas_indices()[0], basis.index_of(reference).unwrap());
            assert_eq!(proj.cas_dim() as f64, (p + qi).trace().re);
        }
        let ints_basis = build_basis(6, 2).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(8, 4, 1, 1).unwrap();
        assert!(build_projectors(reference, &ints_basis, &part).is_err());
    }

    #[test]
    fn insert_validates_signature() {
        let basis = build_basis(4, 2).unwrap();
        let mut t = Amplitudes::new(basis.aufbau_reference());
        assert!(t.insert(ExcitationSignature::new(vec![2], vec![3]).unwrap(), ONE).is_err());
        assert!(t.insert(ExcitationSignature::identity(), ONE).is_err());
    }
}
