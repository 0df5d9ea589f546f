//! Real-time evolution: the full-space reference propagation, the
//! derivative-of-exponential series, the time-dependent downfolded
//! Hamiltonian and propagation of the CAS coefficients under it.

mod lagrangian;

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;

pub use lagrangian::{evaluate_lagrangians, evaluate_sescc_lagrangian, LagrangianValues, SesccLagrangianInputs};

use crate::cluster_analysis::{build_projectors, Projectors};
use crate::downfolding::{unitary_transform, EffectiveHamiltonian, HeffSource, HERMITICITY_TOL};
use crate::error::{Error, Result};
use crate::export::{fmt_f64, write_csv};
use crate::fock_space::{FockBasis, SpinOrbitalPartition};
use crate::operators::matfn::{anti_hermiticity_defect, hermitian_eigen, hermiticity_defect, logm_unitary_matrix};
use crate::operators::{commutator_matrix, hamiltonian_from_integrals, CMatrix, CVector, IntegralSet, QOperator};
use crate::sweeps::{sweep_external, sweep_internal, SweepOrdering};

/// Default truncation order of the derivative-of-exponential series.
pub const DEFAULT_DEXP_ORDER: usize = 12;
/// RK4 steps whose norm drifts further than this from the initial norm are rejected.
pub const NORM_DRIFT_TOL: f64 = 1e-6;

/// Per-time split `Ψ(t) = e^{σ_ext} e^{σ_int} Φ`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub sigma_ext: CMatrix,
    pub sigma_int: CMatrix,
    pub omega12: CMatrix,
    /// CAS coefficients of `e^{σ_int} Φ`, in [`Projectors::cas_indices`] order.
    pub c_int: CVector,
    /// Global phase, unwrapped along the trajectory.
    pub delta: f64,
    /// `‖e^{σ_ext} c_int − Ψ‖` in the full space.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub decompositions: Option<Vec<Decomposition>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `Ψ(t_k) = e^{−iHt_k} Ψ₀` on `t_k = k·dt`, evaluated in the eigenbasis of
/// `H` so no error accumulates between steps.
pub fn propagate_full(h: &QOperator, psi0: &CVector, dt: f64, nsteps: usize) -> Result<Trajectory> {
    let defect = hermiticity_defect(h.matrix());
    if defect > HERMITICITY_TOL {
        return Err(Error::NotHermitian(defect));
    }
    if psi0.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi0.len(),
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let (energies, v) = hermitian_eigen(h.matrix())?;
    let amps = v.adjoint() * psi0;
    let mut times = Vec::with_capacity(nsteps + 1);
    let mut states = Vec::with_capacity(nsteps + 1);
    for k in 0..=nsteps {
        let t = k as f64 * dt;
        let rotated = CVector::from_fn(amps.len(), |i, _| amps[i] * Complex64::from_polar(1.0, -energies[i] * t));
        times.push(t);
        states.push(&v * rotated);
    }
    Ok(Trajectory {
        times,
        states,
        decompositions: None,
    })
}

/// `A = Σ_{k=0}^{K} (−1)^k/(k+1)! I_k` with `I_0 = Ẋ`, `I_k = [X, I_{k−1}]`,
/// so that `∂_t e^{X} = e^{X} A` as `K → ∞`.
#[derive(Clone, Debug)]
pub struct DexpSeries {
    pub a: CMatrix,
    /// `‖last term‖ / ‖A‖`, zero when `A` vanishes.
    pub tail: f64,
}

pub fn dexp_series(x: &CMatrix, xdot: &CMatrix, order: usize) -> DexpSeries {
    let mut term = xdot.clone();
    let mut a = xdot.clone();
    let mut coef = 1.0;
    let mut last = xdot.norm();
    for k in 1..=order {
        term = commutator_matrix(x, &term);
        coef *= -1.0 / (k as f64 + 1.0);
        let scaled = &term * Complex64::new(coef, 0.0);
        last = scaled.norm();
        a += scaled;
    }
    let norm = a.norm();
    DexpSeries {
        tail: if norm > 0.0 { last / norm } else { 0.0 },
        a,
    }
}

fn check_anti_hermitian(m: &CMatrix) -> Result<()> {
    let defect = anti_hermiticity_defect(m);
    if defect > HERMITICITY_TOL {
        return Err(Error::NotAntiHermitian(defect));
    }
    Ok(())
}

/// `(P+Q_int) (e^{−σ} H e^{σ} − i A(σ, σ̇)) (P+Q_int)`; Hermitian.
pub fn build_heff_td(
    h: &QOperator,
    sigma_ext: &CMatrix,
    sigma_ext_dot: &CMatrix,
    proj: &Projectors,
    basis: &FockBasis,
    order: usize,
) -> Result<EffectiveHamiltonian> {
    check_anti_hermitian(sigma_ext)?;
    check_anti_hermitian(sigma_ext_dot)?;
    let hbar = unitary_transform(h.matrix(), sigma_ext)?;
    let a = dexp_series(sigma_ext, sigma_ext_dot, order).a;
    let full = hbar - a * Complex64::new(0.0, 1.0);
    EffectiveHamiltonian::from_full(&full, proj, basis, HeffSource::DuccTimeDependent, true)
}

/// Runs the sweeps at every stored time and fills in the decompositions.
pub fn decompose_trajectory(
    traj: &Trajectory,
    part: &SpinOrbitalPartition,
    basis: &FockBasis,
    ordering: SweepOrdering,
) -> Result<Trajectory> {
    let proj = build_projectors(part.reference(), basis, part)?;
    let mut out = Vec::with_capacity(traj.len());
    let mut previous_delta: Option<f64> = None;
    for psi in &traj.states {
        let ext = sweep_external(psi, part, basis, ordering)?;
        let int = sweep_internal(&ext.psi_act, part, basis)?;
        let mut delta = int.delta;
        if let Some(prev) = previous_delta {
            delta += TAU * ((prev - delta) / TAU).round();
        }
        previous_delta = Some(delta);
        let sigma_ext = logm_unitary_matrix(&ext.omega12.adjoint())?;
        let n = basis.len();
        let sigma_int = logm_unitary_matrix(&int.omega3.adjoint())? + CMatrix::identity(n, n) * Complex64::new(0.0, delta);
        let c_int = proj.restrict(&ext.psi_act);
        let residual = (ext.omega12.adjoint() * proj.lift(&c_int) - psi).norm();
        out.push(Decomposition {
            sigma_ext,
            sigma_int,
            omega12: ext.omega12,
            c_int,
            delta,
            residual,
        });
    }
    Ok(Trajectory {
        times: traj.times.clone(),
        states: traj.states.clone(),
        decompositions: Some(out),
    })
}

/// Fourth-order finite-difference derivative of samples on a uniform grid of
/// spacing `h`: five-point central stencil inside, one-sided five-point
/// stencils at the two points nearest each end.
pub fn finite_difference_derivative(values: &[CMatrix], h: f64) -> Result<Vec<CMatrix>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("need at least 5 samples for the derivative, got {n}")));
    }
    let combo = |idx: [usize; 5], w: [f64; 5]| {
        let mut acc = &values[idx[0]] * Complex64::new(w[0], 0.0);
        for k in 1..5 {
            acc += &values[idx[k]] * Complex64::new(w[k], 0.0);
        }
        acc / Complex64::new(12.0 * h, 0.0)
    };
    let forward0 = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let forward1 = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let central = [1.0, -8.0, 0.0, 8.0, -1.0];
    let neg = |w: [f64; 5]| w.map(|x| -x);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(match i {
            0 => combo([0, 1, 2, 3, 4], forward0),
            1 => combo([0, 1, 2, 3, 4], forward1),
            _ if i == n - 1 => combo([n - 1, n - 2, n - 3, n - 4, n - 5], neg(forward0)),
            _ if i == n - 2 => combo([n - 1, n - 2, n - 3, n - 4, n - 5], neg(forward1)),
            _ => combo([i - 2, i - 1, i, i + 1, i + 2], central),
        });
    }
    Ok(out)
}

/// Source of the CAS Hamiltonian at a given time.
pub trait HeffProvider {
    fn heff_at(&self, t: f64) -> Result<CMatrix>;
}

impl<F: Fn(f64) -> Result<CMatrix>> HeffProvider for F {
    fn heff_at(&self, t: f64) -> Result<CMatrix> {
        self(t)
    }
}

/// A time-independent CAS Hamiltonian.
pub struct ConstantHeff(pub CMatrix);

impl HeffProvider for ConstantHeff {
    fn heff_at(&self, _t: f64) -> Result<CMatrix> {
        Ok(self.0.clone())
    }
}

/// CAS Hamiltonians tabulated on `t_k = t0 + k·spacing`.
pub struct TabulatedHeff {
    pub t0: f64,
    pub spacing: f64,
    pub matrices: Vec<CMatrix>,
}

impl HeffProvider for TabulatedHeff {
    fn heff_at(&self, t: f64) -> Result<CMatrix> {
        let x = (t - self.t0) / self.spacing;
        let k = x.round();
        if (x - k).abs() > 1e-6 || k < 0.0 || k as usize >= self.matrices.len() {
            return Err(Error::InvalidInput(format!("time {t} is not on the tabulated grid")));
        }
        Ok(self.matrices[k as usize].clone())
    }
}

#[derive(Clone, Debug)]
pub struct CasTrajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<CVector>,
}

/// Classical RK4 for `i ċ = H^eff(t) c`, sampling the provider at `t`,
/// `t + dt/2` and `t + dt`.
pub fn propagate_internal(
    provider: &impl HeffProvider,
    c0: &CVector,
    t0: f64,
    dt: f64,
    nsteps: usize,
    renormalize: bool,
) -> Result<CasTrajectory> {
    let norm0 = c0.norm();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("initial CAS vector has norm {norm0}")));
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let mut c = c0.clone();
    let mut times = vec![t0];
    let mut coeffs = vec![c.clone()];
    for step in 0..nsteps {
        let t = t0 + step as f64 * dt;
        let h0 = provider.heff_at(t)?;
        let hm = provider.heff_at(t + 0.5 * dt)?;
        let h1 = provider.heff_at(t + dt)?;
        let k1 = &h0 * &c * minus_i;
        let k2 = &hm * (&c + &k1 * half) * minus_i;
        let k3 = &hm * (&c + &k2 * half) * minus_i;
        let k4 = &h1 * (&c + &k3 * full) * minus_i;
        c += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
        let drift = (c.norm() - 1.0).abs();
        if drift > NORM_DRIFT_TOL {
            return Err(Error::NormDrift { step: step + 1, drift });
        }
        if renormalize {
            let n = c.norm();
            c /= Complex64::new(n, 0.0);
        }
        times.push(t + dt);
        coeffs.push(c.clone());
    }
    Ok(CasTrajectory { times, coeffs })
}

/// Result of propagating the CAS coefficients under `H^eff(t)` built from
/// the decomposed full trajectory, compared against the decomposition.
#[derive(Clone, Debug)]
pub struct ConsistencyStudy {
    pub times: Vec<f64>,
    pub propagated: Vec<CVector>,
    pub decomposed: Vec<CVector>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub energies: Vec<f64>,
    pub norms: Vec<f64>,
    /// `‖(P+Q_int) Ψ(t)‖` before any rotation.
    pub cas_weights: Vec<f64>,
    pub heff_eigenvalues: Vec<Vec<f64>>,
    pub max_reconstruction_residual: f64,
}

impl ConsistencyStudy {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let roots = self.heff_eigenvalues.first().map_or(0, Vec::len);
        let mut header: Vec<String> = ["time", "energy", "norm", "cas_weight", "c_int_norm", "deviation"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..roots).map(|k| format!("heff_eig_{k}")));
        let rows: Vec<Vec<String>> = (0..self.times.len())
            .map(|i| {
                let mut r = vec![
                    fmt_f64(self.times[i]),
                    fmt_f64(self.energies[i]),
                    fmt_f64(self.norms[i]),
                    fmt_f64(self.cas_weights[i]),
                    fmt_f64(self.propagated[i].norm()),
                    fmt_f64(self.deviations[i]),
                ];
                r.extend(self.heff_eigenvalues[i].iter().map(|&e| fmt_f64(e)));
                r
            })
            .collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(path, &header_refs, &rows)
    }
}

/// Full propagation on a grid of spacing `dt/2`, per-point decomposition,
/// `σ̇_ext` by finite differences, then RK4 of the CAS coefficients with
/// step `dt` over `nsteps` steps.
pub fn td_consistency(
    h: &QOperator,
    psi0: &CVector,
    part: &SpinOrbitalPartition,
    basis: &FockBasis,
    dt: f64,
    nsteps: usize,
    order: usize,
) -> Result<ConsistencyStudy> {
    let proj = build_projectors(part.reference(), basis, part)?;
    let spacing = 0.5 * dt;
    let fine = propagate_full(h, psi0, spacing, 2 * nsteps)?;
    let fine = decompose_trajectory(&fine, part, basis, SweepOrdering::default())?;
    let decs = fine.decompositions.as_ref().expect("just decomposed");
    let sigmas: Vec<CMatrix> = decs.iter().map(|d| d.sigma_ext.clone()).collect();
    let mut sigma_dots = finite_difference_derivative(&sigmas, spacing)?;
    // differencing leaves round-off outside the anti-Hermitian subspace
    for s in &mut sigma_dots {
        *s = (&*s - s.adjoint()) * Complex64::new(0.5, 0.0);
    }
    let matrices = sigmas
        .iter()
        .zip(&sigma_dots)
        .map(|(s, sd)| build_heff_td(h, s, sd, &proj, basis, order).map(|e| e.matrix))
        .collect::<Result<Vec<_>>>()?;
    let provider = TabulatedHeff {
        t0: 0.0,
        spacing,
        matrices,
    };
    let c0 = &decs[0].c_int;
    let cas = propagate_internal(&provider, &(c0 / Complex64::new(c0.norm(), 0.0)), 0.0, dt, nsteps, false)?;

    let mut study = ConsistencyStudy {
        times: cas.times.clone(),
        propagated: cas.coeffs.clone(),
        decomposed: Vec::new(),
        deviations: Vec::new(),
        max_deviation: 0.0,
        energies: Vec::new(),
        norms: Vec::new(),
        cas_weights: Vec::new(),
        heff_eigenvalues: Vec::new(),
        max_reconstruction_residual: decs.iter().map(|d| d.residual).fold(0.0, f64::max),
    };
    for (n, c) in cas.coeffs.iter().enumerate() {
        let k = 2 * n;
        let psi = &fine.states[k];
        let exact = decs[k].c_int.clone();
        let dev = (c - &exact).norm();
        study.max_deviation = study.max_deviation.max(dev);
        study.deviations.push(dev);
        study.decomposed.push(exact);
        study.energies.push(psi.dotc(&(h.matrix() * psi)).re);
        study.norms.push(psi.norm());
        study.cas_weights.push(proj.restrict(psi).norm());
        study.heff_eigenvalues.push(hermitian_eigen(&provider.matrices[k])?.0);
    }
    Ok(study)
}

/// A sudden-quench test case for the two-site Hubbard model in its
/// tight-binding eigenbasis.
#[derive(Clone, Debug)]
pub struct DimerQuench {
    pub basis: FockBasis,
    /// Post-quench Hamiltonian.
    pub h: QOperator,
    /// Pre-quench ground state: same Hamiltonian plus a bonding–antibonding
    /// coupling of strength `bias` (an on-site energy difference in the site basis).
    pub psi0: CVector,
    /// Reference `|1100⟩`; the active pair is the down-spin bonding and
    /// antibonding orbitals, so the internal determinant conserves `S_z`.
    pub part: SpinOrbitalPartition,
}

pub fn hubbard_dimer_quench(hopping: f64, repulsion: f64, bias: f64) -> Result<DimerQuench> {
    let basis = crate::fock_space::build_basis(4, 2)?;
    let ints = IntegralSet::hubbard_mo(2, hopping, repulsion, &[])?;
    let h = hamiltonian_from_integrals(&ints, &basis)?;
    // n_left − n_right couples bonding and antibonding orbitals of equal spin
    let mut pre = ints;
    pre.set_one_body(0, 2, Complex64::new(bias, 0.0));
    pre.set_one_body(1, 3, Complex64::new(bias, 0.0));
    let h0 = hamiltonian_from_integrals(&pre, &basis)?;
    let psi0 = hermitian_eigen(h0.matrix())?.1.column(0).into_owned();
    let part = SpinOrbitalPartition::new_unordered(4, vec![0], vec![1], vec![3], vec![2])?;
    Ok(DimerQuench { basis, h, psi0, part })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster_analysis::determinant_vector;
    use crate::downfolding::downfold_ducc;
    use crate::fock_space::build_basis;
    use crate::operators::matfn::expm_matrix;
    use crate::random::{random_anti_hermitian, random_hermitian, random_integrals, random_unit_vector, seeded};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let basis = build_basis(4, 2).unwrap();
        let h = hamiltonian_from_integrals(&IntegralSet::hubbard(2, 1.0, 4.0, &[]).unwrap(), &basis).unwrap();
        let (e, v) = hermitian_eigen(h.matrix()).unwrap();
        let psi0 = v.column(1).into_owned();
        let traj = propagate_full(&h, &psi0, 0.1, 20).unwrap();
        for (t, psi) in traj.times.iter().zip(&traj.states) {
            assert!((psi - &psi0 * Complex64::from_polar(1.0, -e[1] * t)).norm() < 1e-12);
        }
        let zero = QOperator::zeros(&basis);
        let still = propagate_full(&zero, &psi0, 0.1, 5).unwrap();
        assert!(still.states.iter().all(|s| (s - &psi0).norm() == 0.0));
        let bad = QOperator::from_matrix(crate::random::random_matrix(&mut seeded(1), 6, 1.0), &basis).unwrap();
        assert!(matches!(propagate_full(&bad, &psi0, 0.1, 2), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn quench_conserves_energy() {
        let basis = build_basis(4, 2).unwrap();
        let h = hamiltonian_from_integrals(&IntegralSet::hubbard(2, 1.0, 4.0, &[]).unwrap(), &basis).unwrap();
        let h0 = hamiltonian_from_integrals(&IntegralSet::hubbard(2, 1.0, 0.0, &[]).unwrap(), &basis).unwrap();
        let psi0 = hermitian_eigen(h0.matrix()).unwrap().1.column(0).into_owned();
        let traj = propagate_full(&h, &psi0, 0.01, 1000).unwrap();
        let e0 = psi0.dotc(&(h.matrix() * &psi0)).re;
        for psi in &traj.states {
            assert!((psi.dotc(&(h.matrix() * psi)).re - e0).abs() < 1e-10);
            assert!((psi.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dexp_trivial_cases() {
        let mut rng = seeded(2);
        let x = random_anti_hermitian(&mut rng, 6, 1.0);
        let zero = CMatrix::zeros(6, 6);
        assert_eq!(dexp_series(&x, &zero, 12).a.norm(), 0.0);
        let xd = random_anti_hermitian(&mut rng, 6, 1.0);
        assert_eq!(dexp_series(&x, &xd, 0).a, xd);
        // commuting pair: exact already at K = 0
        let d = x.clone() * c(0.3, 0.0);
        let s = dexp_series(&x, &d, 0).a;
        let l = crate::operators::matfn::expm_frechet(&x, &d).unwrap();
        assert!((l.0 * s - l.1).norm() < 1e-13);
        for k in 0..=14 {
            assert!(anti_hermiticity_defect(&dexp_series(&x, &xd, k).a) < 1e-12);
        }
    }

    #[test]
    fn dexp_converges_to_derivative() {
        let mut rng = seeded(3);
        let x0 = random_anti_hermitian(&mut rng, 8, 0.3);
        let x1 = random_anti_hermitian(&mut rng, 8, 0.3);
        let x2 = random_anti_hermitian(&mut rng, 8, 0.3);
        // X(t) = x0 + t x1 + t² x2 at t = 0.4
        let t = 0.4;
        let x = |s: f64| &x0 + &x1 * c(s, 0.0) + &x2 * c(s * s, 0.0);
        let xdot = &x1 + &x2 * c(2.0 * t, 0.0);
        let dt = 1e-4;
        let fd = (expm_matrix(&x(t + dt)).unwrap() - expm_matrix(&x(t - dt)).unwrap()) / c(2.0 * dt, 0.0);
        let ex = expm_matrix(&x(t)).unwrap();
        let errors: Vec<f64> = (0..=12)
            .map(|k| (&ex * dexp_series(&x(t), &xdot, k).a - &fd).norm() / fd.norm())
            .collect();
        assert!(errors[12] < 1e-7, "{errors:?}");
        let floor = errors[12] * 2.0;
        for w in errors.windows(2) {
            assert!(w[1] < w[0] || w[1] < floor, "{errors:?}");
        }
    }

    #[test]
    fn heff_td_reductions() {
        let mut rng = seeded(4);
        let basis = build_basis(6, 3).unwrap();
        let h = hamiltonian_from_integrals(&random_integrals(&mut rng, 6, 3, 0.2, 0.1), &basis).unwrap();
        let part = SpinOrbitalPartition::auto_homo_lumo(6, 3, 2, 2).unwrap();
        let proj = build_projectors(part.reference(), &basis, &part).unwrap();
        let sigma = random_anti_hermitian(&mut rng, 20, 0.3);
        let zero = CMatrix::zeros(20, 20);
        let td = build_heff_td(&h, &sigma, &zero, &proj, &basis, 12).unwrap();
        let ducc = downfold_ducc(&h, &QOperator::from_matrix(sigma.clone(), &basis).unwrap(), &proj, &basis).unwrap();
        assert!((&td.matrix - &ducc.matrix).norm() < 1e-14);

        let d = random_anti_hermitian(&mut rng, 20, 0.3);
        let td = build_heff_td(&h, &zero, &d, &proj, &basis, 12).unwrap();
        let expect = proj.restrict_matrix(&(h.matrix() - &d * c(0.0, 1.0)));
        assert!((td.matrix - expect).norm() < 1e-14);

        let td = build_heff_td(&h, &sigma, &d, &proj, &basis, 12).unwrap();
        let raw = proj.restrict_matrix(
            &(unitary_transform(h.matrix(), &sigma).unwrap() - dexp_series(&sigma, &d, 12).a * c(0.0, 1.0)),
        );
        assert!(hermiticity_defect(&raw) < 1e-10);
        assert!(td.hermitian);
        let bad = random_hermitian(&mut rng, 20, 1.0);
        assert!(build_heff_td(&h, &bad, &zero, &proj, &basis, 12).is_err());
    }

    #[test]
    fn stencils_are_fourth_order() {
        // derivative of e^{iωt}·M sampled on a grid
        let m = CMatrix::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let err = |h: f64| {
            let vals: Vec<CMatrix> = (0..12).map(|k| &m * Complex64::from_polar(1.0, 1.3 * k as f64 * h)).collect();
            let d = finite_difference_derivative(&vals, h).unwrap();
            d.iter()
                .enumerate()
                .map(|(k, dk)| (dk - &m * (Complex64::from_polar(1.0, 1.3 * k as f64 * h) * c(0.0, 1.3))).norm())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio.log2() - 4.0).abs() < 0.3, "{ratio}");
        assert!(finite_difference_derivative(&vec![m; 4], 0.1).is_err());
    }

    #[test]
    fn rk4_constant_eigenvector_phase() {
        let mut rng = seeded(5);
        let hm = random_hermitian(&mut rng, 5, 1.0);
        let (e, v) = hermitian_eigen(&hm).unwrap();
        let c0 = v.column(2).into_owned();
        let traj = propagate_internal(&ConstantHeff(hm), &c0, 0.0, 0.01, 200, false).unwrap();
        let t = traj.times[200];
        assert!((&traj.coeffs[200] - &c0 * Complex64::from_polar(1.0, -e[2] * t)).norm() < 1e-9);
        let far = CVector::from_element(5, c(1.0, 0.0));
        assert!(propagate_internal(&ConstantHeff(CMatrix::zeros(5, 5)), &far, 0.0, 0.1, 1, false).is_err());
    }

    #[test]
    fn rk4_rejects_norm_drift() {
        let hm = CMatrix::from_diagonal(&CVector::from_element(2, c(0.0, -1.0)));
        let c0 = CVector::from_element(2, c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        assert!(matches!(
            propagate_internal(&ConstantHeff(hm), &c0, 0.0, 0.01, 10, false),
            Err(Error::NormDrift { step: 1, .. })
        ));
    }

    #[test]
    fn stationary_state_has_constant_sigma_ext() {
        let basis = build_basis(6, 2).unwrap();
        let mut rng = seeded(6);
        let h = hamiltonian_from_integrals(&random_integrals(&mut rng, 6, 2, 0.2, 0.1), &basis).unwrap();
        let psi0 = hermitian_eigen(h.matrix()).unwrap().1.column(0).into_owned();
        let part = SpinOrbitalPartition::auto_homo_lumo(6, 2, 1, 2).unwrap();
        let traj = decompose_trajectory(&propagate_full(&h, &psi0, 0.05, 40).unwrap(), &part, &basis, SweepOrdering::default()).unwrap();
        let decs = traj.decompositions.unwrap();
        for d in &decs {
            assert!((&d.sigma_ext - &decs[0].sigma_ext).norm() < 1e-8);
            assert!(d.residual < 1e-10);
        }
        let stat = crate::sweeps::decompose(&psi0, &part, &basis, SweepOrdering::default()).unwrap();
        assert!((&decs[0].sigma_ext - stat.sigma_ext.matrix()).norm() < 1e-14);
        // unwrapped phase tracks −E t
        let e0 = hermitian_eigen(h.matrix()).unwrap().0[0];
        let slope = (decs[40].delta - decs[0].delta) / 2.0;
        assert!((slope + e0).abs() < 1e-8);
    }

    #[test]
    fn random_trajectory_reconstructs() {
        let basis = build_basis(6, 3).unwrap();
        let mut rng = seeded(7);
        let h = hamiltonian_from_integrals(&random_integrals(&mut rng, 6, 3, 0.3, 0.2), &basis).unwrap();
        let phi = determinant_vector(&basis, basis.aufbau_reference()).unwrap();
        let psi0 = (phi * c(3.0, 0.0)) + random_unit_vector(&mut rng, 20);
        let psi0 = &psi0 / c(psi0.norm(), 0.0);
        let part = SpinOrbitalPartition::auto_homo_lumo(6, 3, 2, 2).unwrap();
        let traj = decompose_trajectory(&propagate_full(&h, &psi0, 0.05, 30).unwrap(), &part, &basis, SweepOrdering::default()).unwrap();
        for (d, psi) in traj.decompositions.unwrap().iter().zip(&traj.states) {
            assert!(d.residual < 1e-8);
            let rebuilt = expm_matrix(&d.sigma_ext).unwrap() * expm_matrix(&d.sigma_int).unwrap() * determinant_vector(&basis, basis.aufbau_reference()).unwrap();
            assert!((rebuilt - psi).norm() < 1e-8);
        }
    }
}
