//! Action-functional integrands for the unitary and the Λ-parametrized
//! similarity-transformed Ansätze, each in a raw and a rearranged form.
//! The raw forms differentiate exponentials through the Fréchet derivative,
//! the rearranged ones through the commutator series or the
//! commutativity of excitation operators.

use num_complex::Complex64;

use crate::cluster_analysis::{determinant_vector, Amplitudes, Projectors};
use crate::downfolding::{downfold_sescc, unitary_transform};
use crate::error::{Error, Result};
use crate::fock_space::FockBasis;
use crate::operators::matfn::{anti_hermiticity_defect, expm_frechet, expm_matrix};
use crate::operators::{CMatrix, QOperator};
use crate::sweeps::CAS_SUPPORT_TOL;

use super::{build_heff_td, dexp_series};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug)]
pub struct LagrangianValues {
    /// `⟨Φ|e^{−σ_int}e^{−σ_ext}(i∂_t − H)e^{σ_ext}e^{σ_int}|Φ⟩` with exact derivatives.
    pub l_a: Complex64,
    /// Through `A(σ_ext, σ̇_ext)` and `A(σ_int, σ̇_int)`.
    pub l_b: Complex64,
    /// Through the time-dependent CAS Hamiltonian.
    pub l_c: Complex64,
}

impl LagrangianValues {
    pub fn max_deviation(&self) -> f64 {
        (self.l_a - self.l_b).norm().max((self.l_a - self.l_c).norm()).max((self.l_b - self.l_c).norm())
    }
}

fn require_anti_hermitian(m: &CMatrix) -> Result<()> {
    let defect = anti_hermiticity_defect(m);
    if defect > 1e-10 {
        return Err(Error::NotAntiHermitian(defect));
    }
    Ok(())
}

/// `σ_int` must keep `e^{σ_int}|Φ⟩` inside the CAS for the CAS form to exist.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_lagrangians(
    h: &QOperator,
    sigma_int: &CMatrix,
    sigma_ext: &CMatrix,
    sigma_int_dot: &CMatrix,
    sigma_ext_dot: &CMatrix,
    proj: &Projectors,
    basis: &FockBasis,
    order: usize,
) -> Result<LagrangianValues> {
    for m in [sigma_int, sigma_ext, sigma_int_dot, sigma_ext_dot] {
        require_anti_hermitian(m)?;
    }
    let phi = determinant_vector(basis, basis.determinants()[proj.cas_indices()[0]])?;
    let hm = h.matrix();

    let (ue, due) = expm_frechet(sigma_ext, sigma_ext_dot)?;
    let (ui, dui) = expm_frechet(sigma_int, sigma_int_dot)?;
    let psi = &ue * &ui * &phi;
    let psi_dot = (&due * &ui + &ue * &dui) * &phi;
    let bra = expm_matrix(&(-sigma_int))? * expm_matrix(&(-sigma_ext))?;
    let ket = psi_dot * I - hm * &psi;
    let l_a = (phi.transpose() * bra * ket)[(0, 0)];

    let chi = &ui * &phi;
    let a_ext = dexp_series(sigma_ext, sigma_ext_dot, order).a;
    let a_int = dexp_series(sigma_int, sigma_int_dot, order).a;
    let hbar = unitary_transform(hm, sigma_ext)?;
    let l_b = chi.dotc(&((&a_ext * I - &hbar) * &chi)) + phi.dotc(&(&a_int * &phi)) * I;

    let outside = (&chi - proj.lift(&proj.restrict(&chi))).norm();
    if outside > CAS_SUPPORT_TOL {
        return Err(Error::CasSupport(outside));
    }
    let heff = build_heff_td(h, sigma_ext, sigma_ext_dot, proj, basis, order)?;
    let c = proj.restrict(&chi);
    let c_dot = proj.restrict(&(&ui * &a_int * &phi));
    let l_c = c.dotc(&c_dot) * I - c.dotc(&(&heff.matrix * &c));

    Ok(LagrangianValues { l_a, l_b, l_c })
}

/// Amplitudes and their time derivatives for the Λ-parametrized functional.
#[derive(Clone, Debug)]
pub struct SesccLagrangianInputs<'a> {
    pub t_int: &'a Amplitudes,
    pub t_ext: &'a Amplitudes,
    pub lambda_int: &'a Amplitudes,
    pub lambda_ext: &'a Amplitudes,
    pub t_int_dot: &'a Amplitudes,
    pub t_ext_dot: &'a Amplitudes,
}

/// Returns `(form1, form2)`: the functional evaluated directly in the full
/// space, and split into the CAS part built on the similarity-transformed
/// CAS Hamiltonian plus the coupling carried by `Λ_ext`.
pub fn evaluate_sescc_lagrangian(
    h: &QOperator,
    inputs: &SesccLagrangianInputs<'_>,
    proj: &Projectors,
    basis: &FockBasis,
) -> Result<(Complex64, Complex64)> {
    let phi = determinant_vector(basis, inputs.t_int.reference())?;
    let n = basis.len();
    let hm = h.matrix();
    let ti = inputs.t_int.excitation_matrix(basis)?;
    let te = inputs.t_ext.excitation_matrix(basis)?;
    let li = inputs.lambda_int.deexcitation_matrix(basis)?;
    let le = inputs.lambda_ext.deexcitation_matrix(basis)?;
    let tid = inputs.t_int_dot.excitation_matrix(basis)?;
    let ted = inputs.t_ext_dot.excitation_matrix(basis)?;
    let one = CMatrix::identity(n, n);

    let exp_ti = expm_matrix(&ti)?;
    let exp_mti = expm_matrix(&(-&ti))?;
    let exp_te = expm_matrix(&te)?;
    let exp_mte = expm_matrix(&(-&te))?;

    let t = &ti + &te;
    let (exp_t, d_exp_t) = expm_frechet(&t, &(&tid + &ted))?;
    let bra1 = phi.transpose() * (&one + &li + &le) * &exp_mti * &exp_mte;
    let form1 = (bra1 * (d_exp_t * I - hm * exp_t) * &phi)[(0, 0)];

    let heff = downfold_sescc(h, inputs.t_ext, proj, basis)?;
    let phi_cas = proj.restrict(&phi);
    let bra_int = phi_cas.transpose() * proj.restrict_matrix(&(&one + &li)) * proj.restrict_matrix(&exp_mti);
    let ket_int = (proj.restrict_matrix(&tid) * I - &heff.matrix) * proj.restrict_matrix(&exp_ti) * &phi_cas;
    let l_int = (bra_int * ket_int)[(0, 0)];

    let hbar_ext = &exp_mte * hm * &exp_te;
    let l_ext = (phi.transpose() * &le * &exp_mti * ((&ted + &tid) * I - hbar_ext) * &exp_ti * &phi)[(0, 0)];

    Ok((form1, l_int + l_ext))
}
