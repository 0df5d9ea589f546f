//! Elimination of external, then internal, determinants by elementary
//! unitary rotations, and the exact `σ_ext`, `σ_int` recovered from them.
//!
//! A rotation with signature `(O, V)` has generator
//! `g = θ (e^{iφ} E − e^{−iφ} E†)` with `E = E^V_O`. `E` pairs each
//! determinant `D` it does not annihilate with `E D = s_D D'`, and `g` acts
//! on each pair as a 2×2 block, so `e^g` is applied in closed form:
//!
//! ```text
//! c_D  ← cos θ c_D − s e^{−iφ} sin θ c_D'
//! c_D' ← s e^{iφ} sin θ c_D + cos θ c_D'
//! ```

use std::cmp::Reverse;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock_space::{
    apply_excitation, apply_string, Determinant, ExcitationSignature, FockBasis, OrbitalClass,
    SpinOrbitalPartition,
};
use crate::operators::{logm_unitary, CMatrix, CVector, QOperator};

/// Coefficients at or below this are treated as already eliminated.
pub const NEGLIGIBLE: f64 = 1e-14;
/// A previously eliminated coefficient regrowing above this is an ordering failure.
pub const REINTRODUCTION_TOL: f64 = 1e-10;
/// Largest external weight `sweep_internal` accepts.
pub const CAS_SUPPORT_TOL: f64 = 1e-10;

/// One elementary rotation `e^{θ(e^{iφ}E − e^{−iφ}E†)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationStep {
    pub signature: ExcitationSignature,
    pub angle: f64,
    pub phase: f64,
}

impl RotationStep {
    pub fn identity(signature: ExcitationSignature) -> Self {
        Self {
            signature,
            angle: 0.0,
            phase: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.angle == 0.0
    }

    /// `(domain index, image index, sign)` for every determinant `E` maps into the basis.
    fn pairs(&self, basis: &FockBasis) -> Vec<(usize, usize, f64)> {
        let ops = self.signature.excitation_ops();
        basis
            .determinants()
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| {
                let (out, s) = apply_string(&ops, d)?;
                Some((i, basis.index_of(out)?, s))
            })
            .collect()
    }

    /// Dense generator matrix.
    pub fn generator(&self, basis: &FockBasis) -> CMatrix {
        let n = basis.len();
        let mut g = CMatrix::zeros(n, n);
        let up = Complex64::from_polar(self.angle, self.phase);
        for (x, y, s) in self.pairs(basis) {
            g[(y, x)] += up * s;
            g[(x, y)] -= up.conj() * s;
        }
        g
    }

    /// Rotation coefficients for the rows touched by this step.
    fn blocks(&self, basis: &FockBasis) -> Vec<(usize, usize, Complex64, Complex64, f64)> {
        let (sin, cos) = self.angle.sin_cos();
        let e = Complex64::from_polar(1.0, self.phase);
        self.pairs(basis)
            .into_iter()
            .map(|(x, y, s)| (x, y, e * (s * sin), e.conj() * (s * sin), cos))
            .collect()
    }

    /// `v ← e^g v`.
    pub fn apply(&self, v: &mut CVector, basis: &FockBasis) {
        if self.is_identity() {
            return;
        }
        for (x, y, fwd, back, cos) in self.blocks(basis) {
            let (cx, cy) = (v[x], v[y]);
            v[x] = cx * cos - back * cy;
            v[y] = fwd * cx + cy * cos;
        }
    }

    /// `m ← e^g m`, i.e. the same row operations on every column.
    pub fn apply_left(&self, m: &mut CMatrix, basis: &FockBasis) {
        if self.is_identity() {
            return;
        }
        for (x, y, fwd, back, cos) in self.blocks(basis) {
            for col in 0..m.ncols() {
                let (cx, cy) = (m[(x, col)], m[(y, col)]);
                m[(x, col)] = cx * cos - back * cy;
                m[(y, col)] = fwd * cx + cy * cos;
            }
        }
    }
}

/// Rotation with partner `Φ` that zeroes the coefficient of `target`.
///
/// With `E Φ = s·target` and `r = c_target / (s c_Φ)`, the condition
/// `s e^{iφ} sin θ c_Φ + cos θ c_target = 0` gives `e^{iφ} tan θ = −r`.
/// `φ` is `arg r` folded into `(−π/2, π/2]`, and `θ` carries the sign the
/// fold removed, so the generator is continuous in the coefficients.
pub fn rotation_for_target(
    state: &CVector,
    target: Determinant,
    reference: Determinant,
    basis: &FockBasis,
) -> Result<RotationStep> {
    if state.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: state.len(),
        });
    }
    if target == reference {
        return Err(Error::InvalidInput(format!("target {target} is the reference")));
    }
    let signature = ExcitationSignature::between(reference, target);
    let (image, sign) = apply_excitation(&signature, reference)
        .filter(|(d, _)| *d == target)
        .ok_or_else(|| Error::InvalidInput(format!("{target} is not an excitation of {reference}")))?;
    debug_assert_eq!(image, target);
    let missing = |d: Determinant| Error::InvalidInput(format!("{d} is not in the basis"));
    let c_t = state[basis.index_of(target).ok_or_else(|| missing(target))?];
    let c_p = state[basis.index_of(reference).ok_or_else(|| missing(reference))?];
    if c_t.norm() < NEGLIGIBLE && c_p.norm() < NEGLIGIBLE {
        return Ok(RotationStep::identity(signature));
    }
    let magnitude = c_t.norm().atan2(c_p.norm());
    let z = if c_p.norm() > 0.0 { c_t * c_p.conj() * sign } else { c_t * sign };
    let mut phase = z.arg();
    let mut angle = -magnitude;
    if phase > FRAC_PI_2 {
        phase -= PI;
        angle = magnitude;
    } else if phase <= -FRAC_PI_2 {
        phase += PI;
        angle = magnitude;
    }
    Ok(RotationStep {
        signature,
        angle,
        phase,
    })
}

/// Order in which external determinants are eliminated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrdering {
    /// Occupied-inactive sweep by lowest inactive hole, then the
    /// virtual-inactive sweep by highest inactive particle (descending);
    /// rank ascending and lexicographic inside each group.
    #[default]
    ParticleMajor,
    /// Second sweep grouped by lowest occupied-active hole instead. Kept for
    /// comparison: it can regrow determinants eliminated earlier.
    LowestActiveHole,
}

fn has_class(part: &SpinOrbitalPartition, idx: &[usize], class: OrbitalClass) -> bool {
    idx.iter().any(|&p| part.class_of(p) == class)
}

fn lowest_of(part: &SpinOrbitalPartition, idx: &[usize], class: OrbitalClass) -> usize {
    idx.iter()
        .copied()
        .filter(|&p| part.class_of(p) == class)
        .min()
        .unwrap_or(usize::MAX)
}

/// Targets of the first two sweeps and of the internal sweep, in elimination order.
pub fn sweep_targets(
    part: &SpinOrbitalPartition,
    basis: &FockBasis,
    ordering: SweepOrdering,
) -> (Vec<Determinant>, Vec<Determinant>, Vec<Determinant>) {
    let reference = part.reference();
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut internal = Vec::new();
    for &d in basis.determinants() {
        if d == reference {
            continue;
        }
        let sig = ExcitationSignature::between(reference, d);
        if part.is_internal(&sig) {
            internal.push((d, sig));
        } else if has_class(part, sig.occ(), OrbitalClass::OccInactive) {
            first.push((d, sig));
        } else {
            second.push((d, sig));
        }
    }
    first.sort_by_key(|(_, s)| (lowest_of(part, s.occ(), OrbitalClass::OccInactive), s.rank(), s.clone()));
    match ordering {
        SweepOrdering::ParticleMajor => second.sort_by_key(|(_, s)| {
            let top = part.highest_inactive_particle(s).expect("second-sweep targets carry an inactive particle");
            (Reverse(top), s.rank(), s.clone())
        }),
        SweepOrdering::LowestActiveHole => second
            .sort_by_key(|(_, s)| (lowest_of(part, s.occ(), OrbitalClass::OccActive), s.rank(), s.clone())),
    }
    internal.sort_by_key(|(_, s)| (lowest_of(part, s.occ(), OrbitalClass::OccActive), s.rank(), s.clone()));
    let strip = |v: Vec<(Determinant, ExcitationSignature)>| v.into_iter().map(|(d, _)| d).collect();
    (strip(first), strip(second), strip(internal))
}

/// Running state of a sweep: the vector, the accumulated unitary and the
/// already-eliminated indices watched for regrowth.
struct Eliminator<'a> {
    basis: &'a FockBasis,
    reference: Determinant,
    state: CVector,
    eliminated: Vec<usize>,
    max_regrowth: f64,
}

impl<'a> Eliminator<'a> {
    fn run(&mut self, targets: &[Determinant]) -> Result<(CMatrix, Vec<RotationStep>)> {
        let n = self.basis.len();
        let mut omega = CMatrix::identity(n, n);
        let mut steps = Vec::with_capacity(targets.len());
        for &target in targets {
            let step = rotation_for_target(&self.state, target, self.reference, self.basis)?;
            step.apply(&mut self.state, self.basis);
            step.apply_left(&mut omega, self.basis);
            self.eliminated.push(self.basis.index_of(target).expect("target from basis"));
            for &i in &self.eliminated {
                let c = self.state[i].norm();
                self.max_regrowth = self.max_regrowth.max(c);
                if c > REINTRODUCTION_TOL {
                    return Err(Error::OrderingViolation {
                        determinant: self.basis.get(i).occupation(),
                        magnitude: c,
                    });
                }
            }
            steps.push(step);
        }
        Ok((omega, steps))
    }
}

/// Output of the two external sweeps.
#[derive(Clone, Debug)]
pub struct ExternalSweep {
    pub omega1: CMatrix,
    pub omega2: CMatrix,
    /// `Ω2 Ω1`.
    pub omega12: CMatrix,
    pub psi_act: CVector,
    pub steps: Vec<RotationStep>,
    /// Largest coefficient seen on an already-eliminated determinant.
    pub max_regrowth: f64,
}

fn check_inputs(psi: &CVector, part: &SpinOrbitalPartition, basis: &FockBasis) -> Result<usize> {
    if psi.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: psi.len(),
        });
    }
    if part.n_orbitals() != basis.n_orbitals() || part.n_electrons() != basis.n_electrons() {
        return Err(Error::InvalidInput("partition does not match the basis sector".into()));
    }
    Ok(basis.index_of(part.reference()).expect("same sector"))
}

/// Eliminates every external determinant; `Ω2 Ω1 Ψ` lies in the CAS.
pub fn sweep_external(
    psi: &CVector,
    part: &SpinOrbitalPartition,
    basis: &FockBasis,
    ordering: SweepOrdering,
) -> Result<ExternalSweep> {
    let ref_idx = check_inputs(psi, part, basis)?;
    if psi[ref_idx].norm() < crate::cluster_analysis::INTERMEDIATE_NORMALIZATION_TOL {
        return Err(Error::IntermediateNormalization(psi[ref_idx].norm()));
    }
    let (first, second, _) = sweep_targets(part, basis, ordering);
    let mut elim = Eliminator {
        basis,
        reference: part.reference(),
        state: psi.clone(),
        eliminated: Vec::new(),
        max_regrowth: 0.0,
    };
    let (omega1, mut steps) = elim.run(&first)?;
    let (omega2, steps2) = elim.run(&second)?;
    steps.extend(steps2);
    Ok(ExternalSweep {
        omega12: &omega2 * &omega1,
        omega1,
        omega2,
        psi_act: elim.state,
        steps,
        max_regrowth: elim.max_regrowth,
    })
}

/// Output of the internal sweep: `Ω3 ψ_act = ‖ψ_act‖ e^{iδ} Φ`.
#[derive(Clone, Debug)]
pub struct InternalSweep {
    pub omega3: CMatrix,
    pub delta: f64,
    pub steps: Vec<RotationStep>,
    pub max_regrowth: f64,
}

pub fn sweep_internal(psi_act: &CVector, part: &SpinOrbitalPartition, basis: &FockBasis) -> Result<InternalSweep> {
    let ref_idx = check_inputs(psi_act, part, basis)?;
    let reference = part.reference();
    let (_, _, internal) = sweep_targets(part, basis, SweepOrdering::default());
    let external: f64 = basis
        .determinants()
        .iter()
        .zip(psi_act.iter())
        .filter(|(d, _)| **d != reference && !part.is_internal(&ExcitationSignature::between(reference, **d)))
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    if external > CAS_SUPPORT_TOL {
        return Err(Error::CasSupport(external));
    }
    let mut elim = Eliminator {
        basis,
        reference,
        state: psi_act.clone(),
        eliminated: Vec::new(),
        max_regrowth: 0.0,
    };
    let (omega3, steps) = elim.run(&internal)?;
    Ok(InternalSweep {
        omega3,
        delta: elim.state[ref_idx].arg(),
        steps,
        max_regrowth: elim.max_regrowth,
    })
}

/// `σ_ext = log Ω12†` and `σ_int = log Ω3† + iδ`, so that
/// `Ψ = e^{σ_ext} e^{σ_int} Φ`.
pub fn extract_sigmas(
    omega12: &QOperator,
    omega3: &QOperator,
    delta: f64,
) -> Result<(QOperator, QOperator)> {
    let sigma_ext = logm_unitary(&omega12.adjoint())?;
    let log3 = logm_unitary(&omega3.adjoint())?;
    let shift = CMatrix::identity(omega3.dim(), omega3.dim()) * Complex64::new(0.0, delta);
    Ok((sigma_ext, log3.with_matrix(log3.matrix() + shift)))
}

/// Everything the three sweeps produce for one state.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub omega1: QOperator,
    pub omega2: QOperator,
    pub omega3: QOperator,
    pub omega12: QOperator,
    pub sigma_ext: QOperator,
    pub sigma_int: QOperator,
    pub psi_act: CVector,
    pub delta: f64,
    pub external_steps: Vec<RotationStep>,
    pub internal_steps: Vec<RotationStep>,
    pub max_regrowth: f64,
    /// `‖e^{σ_ext} e^{σ_int} Φ − Ψ‖`.
    pub residual: f64,
}

/// Runs all three sweeps on a normalized state and assembles `σ_ext`, `σ_int`.
pub fn decompose(
    psi: &CVector,
    part: &SpinOrbitalPartition,
    basis: &FockBasis,
    ordering: SweepOrdering,
) -> Result<SweepResult> {
    let ext = sweep_external(psi, part, basis, ordering)?;
    let int = sweep_internal(&ext.psi_act, part, basis)?;
    let wrap = |m: CMatrix| QOperator::from_matrix(m, basis);
    let omega12 = wrap(ext.omega12)?;
    let omega3 = wrap(int.omega3)?;
    let (sigma_ext, sigma_int) = extract_sigmas(&omega12, &omega3, int.delta)?;
    let phi = crate::cluster_analysis::determinant_vector(basis, part.reference())?;
    let u_ext = crate::operators::matfn::expm_matrix(sigma_ext.matrix())?;
    let u_int = crate::operators::matfn::expm_matrix(sigma_int.matrix())?;
    let residual = (u_ext * (u_int * phi) - psi).norm();
    Ok(SweepResult {
        omega1: wrap(ext.omega1)?,
        omega2: wrap(ext.omega2)?,
        omega3,
        omega12,
        sigma_ext,
        sigma_int,
        psi_act: ext.psi_act,
        delta: int.delta,
        external_steps: ext.steps,
        internal_steps: int.steps,
        max_regrowth: ext.max_regrowth.max(int.max_regrowth),
        residual,
    })
}
