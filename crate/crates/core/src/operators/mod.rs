//! Many-body operators as dense matrices over a [`FockBasis`].

mod hamiltonian;
mod integrals;
pub mod matfn;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock_space::{apply_string, FockBasis, LadderOp};

pub use hamiltonian::{build_hubbard, hamiltonian_from_integrals, hubbard_terms};
pub use integrals::{parse_fcidump, read_fcidump, FcidumpHeader, IntegralSet};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `coefficient · a†_{c1}…a†_{ck} a_{a1}…a_{al}` with factors in the listed order.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTerm {
    pub coefficient: Complex64,
    pub creators: Vec<usize>,
    pub annihilators: Vec<usize>,
}

impl OperatorTerm {
    pub fn new(coefficient: Complex64, creators: Vec<usize>, annihilators: Vec<usize>) -> Self {
        Self {
            coefficient,
            creators,
            annihilators,
        }
    }

    fn ops(&self) -> Vec<LadderOp> {
        self.creators
            .iter()
            .map(|&p| LadderOp::Create(p))
            .chain(self.annihilators.iter().map(|&q| LadderOp::Annihilate(q)))
            .collect()
    }
}

/// A many-body operator on one `(M, N)` sector.
#[derive(Clone, Debug, PartialEq)]
pub struct QOperator {
    matrix: CMatrix,
    n_orbitals: usize,
    n_electrons: usize,
    terms: Option<Vec<OperatorTerm>>,
}

impl QOperator {
    pub fn from_matrix(matrix: CMatrix, basis: &FockBasis) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            matrix,
            n_orbitals: basis.n_orbitals(),
            n_electrons: basis.n_electrons(),
            terms: None,
        })
    }

    /// Assembles the matrix by applying every term to every basis determinant.
    pub fn from_terms(terms: Vec<OperatorTerm>, basis: &FockBasis) -> Result<Self> {
        let m = basis.n_orbitals();
        for t in &terms {
            if let Some(&p) = t.creators.iter().chain(&t.annihilators).find(|&&p| p >= m) {
                return Err(Error::InvalidInput(format!(
                    "term index {p} out of range for {m} spin-orbitals"
                )));
            }
        }
        let n = basis.len();
        let mut matrix = CMatrix::zeros(n, n);
        for t in &terms {
            let ops = t.ops();
            for (col, &d) in basis.determinants().iter().enumerate() {
                if let Some((out, phase)) = apply_string(&ops, d) {
                    if let Some(row) = basis.index_of(out) {
                        matrix[(row, col)] += t.coefficient * phase;
                    }
                }
            }
        }
        Ok(Self {
            matrix,
            n_orbitals: basis.n_orbitals(),
            n_electrons: basis.n_electrons(),
            terms: Some(terms),
        })
    }

    pub fn identity(basis: &FockBasis) -> Self {
        Self::from_matrix(CMatrix::identity(basis.len(), basis.len()), basis)
            .expect("square by construction")
    }

    pub fn zeros(basis: &FockBasis) -> Self {
        Self::from_matrix(CMatrix::zeros(basis.len(), basis.len()), basis)
            .expect("square by construction")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn terms(&self) -> Option<&[OperatorTerm]> {
        self.terms.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(M, N)` of the sector this operator acts on.
    pub fn sector(&self) -> (usize, usize) {
        (self.n_orbitals, self.n_electrons)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            n_orbitals: self.n_orbitals,
            n_electrons: self.n_electrons,
            terms: None,
        }
    }

    /// Same sector, new matrix (terms dropped).
    pub fn with_matrix(&self, matrix: CMatrix) -> Self {
        Self {
            matrix,
            n_orbitals: self.n_orbitals,
            n_electrons: self.n_electrons,
            terms: None,
        }
    }

    fn check_same_sector(&self, other: &Self) -> Result<()> {
        if self.sector() != other.sector() || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_sector(other)?;
        Ok(self.with_matrix(&self.matrix * &other.matrix))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        matfn::hermiticity_defect(&self.matrix) < tol
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        matfn::anti_hermiticity_defect(&self.matrix) < tol
    }
}

pub fn expm(x: &QOperator) -> Result<QOperator> {
    Ok(x.with_matrix(matfn::expm_matrix(&x.matrix)?))
}

pub fn logm_unitary(u: &QOperator) -> Result<QOperator> {
    Ok(u.with_matrix(matfn::logm_unitary_matrix(&u.matrix)?))
}

/// `AB - BA`.
pub fn commutator(a: &QOperator, b: &QOperator) -> Result<QOperator> {
    a.check_same_sector(b)?;
    Ok(a.with_matrix(commutator_matrix(&a.matrix, &b.matrix)))
}

pub fn commutator_matrix(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}
