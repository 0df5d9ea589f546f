//! Effective Hamiltonians on the complete active space: similarity
//! (SESCC) and unitary (DUCC) downfolding, and their spectra.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::cluster_analysis::{Amplitudes, Projectors};
use crate::error::{Error, Result};
use crate::export::{fmt_f64, json_complex, json_f64, json_matrix};
use crate::fock_space::{apply_excitation, Determinant, DeterminantClass, FockBasis, SpinOrbitalPartition};
use crate::operators::matfn::{anti_hermiticity_defect, expm_matrix, general_eigen, hermitian_eigen, hermiticity_defect};
use crate::operators::{CMatrix, CVector, QOperator};

/// Tolerance on anti-Hermiticity of `σ` inputs and Hermiticity of outputs.
pub const HERMITICITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeffSource {
    /// `(P+Q_int) H (P+Q_int)`.
    CasCi,
    Sescc,
    Ducc,
    /// DUCC with the `−iA` velocity term.
    DuccTimeDependent,
}

/// A downfolded Hamiltonian over the CAS sub-basis: reference first, then
/// the internal determinants in parent-basis order.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    pub matrix: CMatrix,
    pub hermitian: bool,
    pub source: HeffSource,
    pub determinants: Vec<Determinant>,
}

impl EffectiveHamiltonian {
    /// Projects a full-space matrix onto the CAS.
    pub fn from_full(full: &CMatrix, proj: &Projectors, basis: &FockBasis, source: HeffSource, hermitian: bool) -> Result<Self> {
        let mut matrix = proj.restrict_matrix(full);
        if hermitian {
            let defect = hermiticity_defect(&matrix);
            if defect > HERMITICITY_TOL {
                return Err(Error::NotHermitian(defect));
            }
            matrix = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        }
        Ok(Self {
            matrix,
            hermitian,
            source,
            determinants: proj.cas_indices().iter().map(|&i| basis.get(i)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// JSON record with the dense matrix, the CAS basis and caller metadata.
    pub fn to_json(&self, part: &SpinOrbitalPartition, residuals: &BTreeMap<String, f64>) -> Value {
        json!({
            "source": self.source,
            "hermitian": self.hermitian,
            "dimension": self.dim(),
            "partition": {
                "occ_inactive": part.occ_inactive(),
                "occ_active": part.occ_active(),
                "virt_active": part.virt_active(),
                "virt_inactive": part.virt_inactive(),
            },
            "basis": self.determinants.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "matrix": json_matrix(&self.matrix),
            "residuals": residuals.iter().map(|(k, v)| (k.clone(), json_f64(*v))).collect::<serde_json::Map<_, _>>(),
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>, part: &SpinOrbitalPartition, residuals: &BTreeMap<String, f64>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(part, residuals))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Plain-text dump: a header, the CAS determinants (1-based), then
    /// `re im i j` for every nonzero element.
    pub fn matrix_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "&HEFF DIM={}, SOURCE={:?}, HERMITIAN={} &END", self.dim(), self.source, self.hermitian);
        for (k, d) in self.determinants.iter().enumerate() {
            let _ = writeln!(out, "BASIS {} {}", k + 1, d);
        }
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.matrix[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    let _ = writeln!(out, "{} {} {} {}", fmt_f64(z.re), fmt_f64(z.im), i + 1, j + 1);
                }
            }
        }
        out
    }
}

/// `(P+Q_int) H (P+Q_int)`.
pub fn cas_ci(h: &QOperator, proj: &Projectors, basis: &FockBasis) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_full(h.matrix(), proj, basis, HeffSource::CasCi, true)
}

/// Full-space `e^{−T_ext} H e^{T_ext}`.
pub fn similarity_transform(h: &QOperator, t_ext: &Amplitudes, basis: &FockBasis) -> Result<CMatrix> {
    let t = t_ext.excitation_matrix(basis)?;
    Ok(expm_matrix(&(-&t))? * h.matrix() * expm_matrix(&t)?)
}

/// `(P+Q_int) e^{−T_ext} H e^{T_ext} (P+Q_int)`; non-Hermitian in general.
pub fn downfold_sescc(h: &QOperator, t_ext: &Amplitudes, proj: &Projectors, basis: &FockBasis) -> Result<EffectiveHamiltonian> {
    for (sig, _) in t_ext.iter() {
        let (d, _) = apply_excitation(sig, t_ext.reference()).expect("validated on insert");
        let class = basis.index_of(d).map(|i| proj.class_of(i));
        if class != Some(DeterminantClass::External) {
            return Err(Error::InternalSignature(sig.to_string()));
        }
    }
    let hbar = similarity_transform(h, t_ext, basis)?;
    EffectiveHamiltonian::from_full(&hbar, proj, basis, HeffSource::Sescc, false)
}

/// Full-space `e^{−σ} H e^{σ}`, with `e^{−σ}` taken as the adjoint of `e^{σ}`.
pub fn unitary_transform(h: &CMatrix, sigma: &CMatrix) -> Result<CMatrix> {
    let defect = anti_hermiticity_defect(sigma);
    if defect > HERMITICITY_TOL {
        return Err(Error::NotAntiHermitian(defect));
    }
    let u = expm_matrix(sigma)?;
    Ok(u.adjoint() * h * u)
}

/// `(P+Q_int) e^{−σ_ext} H e^{σ_ext} (P+Q_int)`; Hermitian.
pub fn downfold_ducc(h: &QOperator, sigma_ext: &QOperator, proj: &Projectors, basis: &FockBasis) -> Result<EffectiveHamiltonian> {
    let hbar = unitary_transform(h.matrix(), sigma_ext.matrix())?;
    EffectiveHamiltonian::from_full(&hbar, proj, basis, HeffSource::Ducc, true)
}

/// Full spectrum of an effective Hamiltonian.
#[derive(Clone, Debug)]
pub struct CasSpectrum {
    /// Real ascending for Hermitian input, sorted by real part otherwise.
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors as columns.
    pub vectors: CMatrix,
}

impl CasSpectrum {
    /// Root whose eigenvector has the largest `|⟨target|v⟩| / ‖target‖`;
    /// returns `(index, overlap)`.
    pub fn select_by_overlap(&self, target: &CVector) -> (usize, f64) {
        let norm = target.norm();
        (0..self.values.len())
            .map(|k| (k, self.vectors.column(k).dotc(target).norm() / norm))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    /// Root closest to `energy`.
    pub fn select_by_energy(&self, energy: f64) -> usize {
        (0..self.values.len())
            .min_by(|&a, &b| {
                let da = (self.values[a] - energy).norm();
                let db = (self.values[b] - energy).norm();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }
}

pub fn cas_eigensolve(heff: &EffectiveHamiltonian) -> Result<CasSpectrum> {
    if heff.hermitian {
        let (vals, vectors) = hermitian_eigen(&heff.matrix)?;
        Ok(CasSpectrum {
            values: vals.into_iter().map(|e| Complex64::new(e, 0.0)).collect(),
            vectors,
        })
    } else {
        let (values, vectors) = general_eigen(&heff.matrix)?;
        Ok(CasSpectrum { values, vectors })
    }
}

/// Cosine deficit `1 − |⟨a|b⟩| / (‖a‖‖b‖)`.
pub fn overlap_deficit(a: &CVector, b: &CVector) -> f64 {
    1.0 - a.dotc(b).norm() / (a.norm() * b.norm())
}

/// Convenience: JSON for a spectrum.
pub fn spectrum_json(s: &CasSpectrum) -> Value {
    Value::Array(s.values.iter().map(|&z| json_complex(z)).collect())
}
