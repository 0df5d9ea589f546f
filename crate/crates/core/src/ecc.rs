//! Extended coupled-cluster functional identities checked on dense matrices.
//!
//! `X` amplitudes are stored with excitation signatures and applied in
//! de-excitation (transposed) form, so the bra is `⟨Φ| e^{X} e^{−T}`.

use num_complex::Complex64;
use rand::Rng;

use crate::cluster_analysis::{determinant_vector, split_amplitudes, Amplitudes};
use crate::error::{Error, Result};
use crate::fock_space::{FockBasis, SpinOrbitalPartition};
use crate::operators::matfn::{expm_frechet, expm_matrix};
use crate::operators::{commutator_matrix, CMatrix, CVector, QOperator};
use crate::random::random_amplitudes;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct EccConfiguration {
    pub t_int: Amplitudes,
    pub t_ext: Amplitudes,
    pub x_int: Amplitudes,
    pub x_ext: Amplitudes,
    pub dt_int: Amplitudes,
    pub dt_ext: Amplitudes,
}

impl EccConfiguration {
    /// Uniform random amplitudes of magnitude up to `scale` on every
    /// excitation of the partition reference, split by the partition.
    pub fn random(rng: &mut impl Rng, part: &SpinOrbitalPartition, basis: &FockBasis, scale: f64) -> Self {
        let r = part.reference();
        let mut draw = || split_amplitudes(&random_amplitudes(rng, r, basis, scale, |_| true), part);
        let (t_int, t_ext) = draw();
        let (x_int, x_ext) = draw();
        let (dt_int, dt_ext) = draw();
        Self {
            t_int,
            t_ext,
            x_int,
            x_ext,
            dt_int,
            dt_ext,
        }
    }

    /// All six sets empty.
    pub fn zero(part: &SpinOrbitalPartition) -> Self {
        let e = Amplitudes::new(part.reference());
        Self {
            t_int: e.clone(),
            t_ext: e.clone(),
            x_int: e.clone(),
            x_ext: e.clone(),
            dt_int: e.clone(),
            dt_ext: e,
        }
    }

    fn matrices(&self, basis: &FockBasis) -> Result<Matrices> {
        let reference = self.t_int.reference();
        for a in [&self.t_ext, &self.x_int, &self.x_ext, &self.dt_int, &self.dt_ext] {
            if a.reference() != reference {
                return Err(Error::InvalidInput("amplitude sets refer to different references".into()));
            }
        }
        let ti = self.t_int.excitation_matrix(basis)?;
        let te = self.t_ext.excitation_matrix(basis)?;
        let xi = self.x_int.deexcitation_matrix(basis)?;
        let xe = self.x_ext.deexcitation_matrix(basis)?;
        Ok(Matrices {
            phi: determinant_vector(basis, reference)?,
            exp_ti: expm_matrix(&ti)?,
            exp_mti: expm_matrix(&(-&ti))?,
            exp_te: expm_matrix(&te)?,
            exp_mte: expm_matrix(&(-&te))?,
            exp_xi: expm_matrix(&xi)?,
            exp_xe: expm_matrix(&xe)?,
            dti: self.dt_int.excitation_matrix(basis)?,
            dte: self.dt_ext.excitation_matrix(basis)?,
            ti,
            te,
            xe,
        })
    }
}

struct Matrices {
    phi: CVector,
    ti: CMatrix,
    te: CMatrix,
    xe: CMatrix,
    exp_ti: CMatrix,
    exp_mti: CMatrix,
    exp_te: CMatrix,
    exp_mte: CMatrix,
    exp_xi: CMatrix,
    exp_xe: CMatrix,
    dti: CMatrix,
    dte: CMatrix,
}

impl Matrices {
    fn bracket(&self, m: &CMatrix) -> Complex64 {
        (self.phi.transpose() * m * &self.phi)[(0, 0)]
    }
}

/// Three evaluations of `⟨Φ|e^{X_int}e^{X_ext}e^{−T_int}e^{−T_ext} i∂_t e^{T_ext}e^{T_int}|Φ⟩`.
#[derive(Clone, Copy, Debug)]
pub struct LdtForms {
    /// Derivative of `e^{T_ext + T_int}` taken as a Fréchet derivative.
    pub v1: Complex64,
    /// Split into the `Ṫ_ext` term conjugated by `e^{±T_int}` and the `Ṫ_int` term.
    pub v2: Complex64,
    /// Through `B = e^{T_int} e^{X_ext} e^{−T_int} Ṫ_ext`, full product.
    pub v4: Complex64,
}

pub fn eval_ldt_forms(cfg: &EccConfiguration, basis: &FockBasis) -> Result<LdtForms> {
    let m = cfg.matrices(basis)?;
    let t = &m.ti + &m.te;
    let (_, d_exp_t) = expm_frechet(&t, &(&m.dti + &m.dte))?;
    let bra = &m.exp_xi * &m.exp_xe * &m.exp_mti * &m.exp_mte;
    let v1 = m.bracket(&(&bra * d_exp_t)) * I;

    let v2 = m.bracket(&(&m.exp_xi * &m.exp_xe * &m.exp_mti * &m.dte * &m.exp_ti)) * I
        + m.bracket(&(&m.exp_xi * &m.exp_xe * &m.dti)) * I;

    let b = &m.exp_ti * &m.exp_xe * &m.exp_mti * &m.dte;
    let v4 = m.bracket(&(&m.exp_xi * &m.exp_mti * b * &m.exp_ti)) * I + m.bracket(&(&m.exp_xi * &m.dti)) * I;

    Ok(LdtForms { v1, v2, v4 })
}

#[derive(Clone, Copy, Debug)]
pub struct LhForms {
    /// `⟨Φ|e^{X_int}e^{X_ext}e^{−T_int}e^{−T_ext} H e^{T_ext}e^{T_int}|Φ⟩`.
    pub w1: Complex64,
    /// `⟨Φ|e^{X_int}e^{−T_int} e^{X^int_ext} H̄_ext e^{T_int}|Φ⟩` with
    /// `X^int_ext = e^{T_int} X_ext e^{−T_int}` exponentiated directly.
    pub w2: Complex64,
}

pub fn eval_lh_forms(cfg: &EccConfiguration, h: &QOperator, basis: &FockBasis) -> Result<LhForms> {
    let m = cfg.matrices(basis)?;
    let hm = h.matrix();
    let w1 = m.bracket(&(&m.exp_xi * &m.exp_xe * &m.exp_mti * &m.exp_mte * hm * &m.exp_te * &m.exp_ti));
    let x_int_ext = &m.exp_ti * &m.xe * &m.exp_mti;
    let hbar_ext = &m.exp_mte * hm * &m.exp_te;
    let w2 = m.bracket(&(&m.exp_xi * &m.exp_mti * expm_matrix(&x_int_ext)? * hbar_ext * &m.exp_ti));
    Ok(LhForms { w1, w2 })
}

#[derive(Clone, Copy, Debug)]
pub struct BchCheck {
    /// Index of the first nested commutator that vanished identically.
    pub terms: usize,
    /// `‖Σ ad^n_{T_int} X_ext / n! − e^{T_int} X_ext e^{−T_int}‖`.
    pub deviation: f64,
}

/// Sums `Σ_n ad^n_{T_int} X_ext / n!` until a term is exactly zero, which
/// nilpotency of excitation matrices guarantees.
pub fn bch_termination(cfg: &EccConfiguration, basis: &FockBasis) -> Result<BchCheck> {
    let m = cfg.matrices(basis)?;
    let direct = &m.exp_ti * &m.xe * &m.exp_mti;
    let mut term = m.xe.clone();
    let mut sum = term.clone();
    let limit = 4 * basis.n_electrons().max(1) + 2;
    for n in 1..=limit {
        term = commutator_matrix(&m.ti, &term) / Complex64::new(n as f64, 0.0);
        if term.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(BchCheck {
                terms: n,
                deviation: (sum - direct).norm(),
            });
        }
        sum += &term;
    }
    Err(Error::NotConverged(limit))
}

#[derive(Clone, Copy, Debug)]
pub struct ActionIntegrand {
    /// `v4 − w2`.
    pub value: Complex64,
    /// `v1 − w1`, the functional evaluated without rearrangement.
    pub direct: Complex64,
    pub deviation: f64,
}

pub fn eval_ecc_action_integrand(cfg: &EccConfiguration, h: &QOperator, basis: &FockBasis) -> Result<ActionIntegrand> {
    let v = eval_ldt_forms(cfg, basis)?;
    let w = eval_lh_forms(cfg, h, basis)?;
    let value = v.v4 - w.w2;
    let direct = v.v1 - w.w1;
    Ok(ActionIntegrand {
        value,
        direct,
        deviation: (value - direct).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_space::build_basis;
    use crate::operators::hamiltonian_from_integrals;
    use crate::random::{random_integrals, seeded};

    fn setup() -> (FockBasis, SpinOrbitalPartition, QOperator) {
        let basis = build_basis(6, 3).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(6, 3, 2, 2).unwrap();
        let h = hamiltonian_from_integrals(&random_integrals(&mut seeded(31), 6, 3, 0.3, 0.2), &basis).unwrap();
        (basis, part, h)
    }

    #[test]
    fn zero_configuration() {
        let (basis, part, h) = setup();
        let cfg = EccConfiguration::zero(&part);
        let v = eval_ldt_forms(&cfg, &basis).unwrap();
        assert_eq!((v.v1, v.v2, v.v4), (Complex64::default(), Complex64::default(), Complex64::default()));
        let a = eval_ecc_action_integrand(&cfg, &h, &basis).unwrap();
        let r = basis.index_of(part.reference()).unwrap();
        assert!((a.value + h.matrix()[(r, r)]).norm() < 1e-14);
    }

    #[test]
    fn static_configuration_is_minus_w2() {
        let (basis, part, h) = setup();
        let mut cfg = EccConfiguration::random(&mut seeded(32), &part, &basis, 0.1);
        cfg.dt_int = Amplitudes::new(part.reference());
        cfg.dt_ext = Amplitudes::new(part.reference());
        let v = eval_ldt_forms(&cfg, &basis).unwrap();
        assert!(v.v1.norm() < 1e-15 && v.v2.norm() < 1e-15 && v.v4.norm() < 1e-15);
        let a = eval_ecc_action_integrand(&cfg, &h, &basis).unwrap();
        assert_eq!(a.value, -eval_lh_forms(&cfg, &h, &basis).unwrap().w2);
    }

    #[test]
    fn no_deexcitation_gives_plain_derivative() {
        let (basis, part, _) = setup();
        let mut cfg = EccConfiguration::random(&mut seeded(33), &part, &basis, 0.1);
        cfg.x_int = Amplitudes::new(part.reference());
        cfg.x_ext = Amplitudes::new(part.reference());
        let v = eval_ldt_forms(&cfg, &basis).unwrap();
        // without X only the rank-0 component of Ṫ survives: none here
        for z in [v.v1, v.v2, v.v4] {
            assert!(z.norm() < 1e-15);
        }
    }

    #[test]
    fn random_forms_agree() {
        let (basis, part, h) = setup();
        let mut rng = seeded(34);
        for _ in 0..20 {
            let cfg = EccConfiguration::random(&mut rng, &part, &basis, 0.1);
            let v = eval_ldt_forms(&cfg, &basis).unwrap();
            assert!((v.v1 - v.v2).norm() < 1e-12);
            assert!((v.v1 - v.v4).norm() < 1e-12);
            let w = eval_lh_forms(&cfg, &h, &basis).unwrap();
            assert!((w.w1 - w.w2).norm() < 1e-12);
            assert!(eval_ecc_action_integrand(&cfg, &h, &basis).unwrap().deviation < 1e-12);
            let b = bch_termination(&cfg, &basis).unwrap();
            assert!(b.deviation < 1e-12);
        }
    }

    #[test]
    fn trivial_internal_cluster_makes_x_int_ext_plain() {
        let (basis, part, h) = setup();
        let mut cfg = EccConfiguration::random(&mut seeded(35), &part, &basis, 0.1);
        cfg.t_int = Amplitudes::new(part.reference());
        let b = bch_termination(&cfg, &basis).unwrap();
        assert_eq!((b.terms, b.deviation), (1, 0.0));
        let w = eval_lh_forms(&cfg, &h, &basis).unwrap();
        assert!((w.w1 - w.w2).norm() < 1e-13);
    }

    #[test]
    fn excitation_matrices_commute_and_invert() {
        let (basis, part, _) = setup();
        let cfg = EccConfiguration::random(&mut seeded(36), &part, &basis, 0.5);
        let m = cfg.matrices(&basis).unwrap();
        assert!(commutator_matrix(&m.ti, &m.te).norm() < 1e-15);
        assert!(commutator_matrix(&(&m.dti + &m.dte), &(&m.ti + &m.te)).norm() < 1e-15);
        let n = basis.len();
        assert!((&m.exp_mti * &m.exp_ti - CMatrix::identity(n, n)).norm() < 1e-14);
        assert!((&m.exp_mte * &m.exp_te - CMatrix::identity(n, n)).norm() < 1e-14);
    }
}
