//! Dense complex matrix functions: exponential, principal logarithm of a
//! unitary, and eigensolvers for Hermitian and general matrices.

use nalgebra::{Schur, SymmetricEigen};
use num_complex::Complex64;

use super::{CMatrix, CVector};
use crate::error::{Error, Result};

/// Unitarity tolerance accepted by [`logm_unitary_matrix`].
pub const UNITARY_TOL: f64 = 1e-10;

/// Distance from `-1` below which an eigenvalue is treated as on the branch cut.
pub const BRANCH_CUT_TOL: f64 = 1e-10;

pub fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm of `a - a†`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Frobenius norm of `a + a†`.
pub fn anti_hermiticity_defect(a: &CMatrix) -> f64 {
    (a + a.adjoint()).norm()
}

/// Frobenius norm of `a† a - I`.
pub fn unitarity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    (a.adjoint() * a - CMatrix::identity(n, n)).norm()
}

/// Matrix exponential (nalgebra's scaling-and-squaring Padé), with the
/// shape and finiteness checks the rest of the crate relies on.
pub fn expm_matrix(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::InvalidDimension(format!(
            "expm of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    Ok(a.exp())
}

/// `(e^X, L(X, E))` where `L` is the Fréchet derivative of the exponential
/// at `X` in direction `E`, read off the block exponential
/// `exp([[X, E], [0, X]]) = [[e^X, L], [0, e^X]]`.
pub fn expm_frechet(x: &CMatrix, e: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = x.nrows();
    if !x.is_square() || e.shape() != x.shape() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: e.nrows(),
        });
    }
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(x);
    block.view_mut((n, n), (n, n)).copy_from(x);
    block.view_mut((0, n), (n, n)).copy_from(e);
    let big = expm_matrix(&block)?;
    Ok((
        big.view((0, 0), (n, n)).into_owned(),
        big.view((0, n), (n, n)).into_owned(),
    ))
}

/// Deflation thresholds tried in turn. At machine epsilon the QR sweep can
/// stall on round-off noise in the subdiagonal for clustered spectra, so
/// every attempt is bounded and a slightly looser threshold follows.
const SCHUR_EPS: [f64; 2] = [f64::EPSILON, 64.0 * f64::EPSILON];

fn schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let max_iter = 100 * a.nrows().max(10);
    SCHUR_EPS
        .iter()
        .find_map(|&eps| Schur::try_new(a.clone(), eps, max_iter))
        .map(|s| s.unpack())
        .ok_or_else(|| Error::Eigensolver("Schur decomposition did not converge".into()))
}

/// Principal logarithm of a unitary matrix via its (diagonal) Schur form.
/// The result is anti-Hermitian.
pub fn logm_unitary_matrix(u: &CMatrix) -> Result<CMatrix> {
    if !u.is_square() {
        return Err(Error::InvalidDimension(format!(
            "logm of a {}x{} matrix",
            u.nrows(),
            u.ncols()
        )));
    }
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary(defect));
    }
    let n = u.nrows();
    if n == 0 {
        return Ok(u.clone());
    }
    let (q, t) = schur(u)?;
    let mut diag = CVector::zeros(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        if (lambda + 1.0).norm() < BRANCH_CUT_TOL {
            return Err(Error::BranchCut {
                re: lambda.re,
                im: lambda.im,
            });
        }
        diag[i] = Complex64::new(0.0, lambda.arg());
    }
    let l = &q * CMatrix::from_diagonal(&diag) * q.adjoint();
    Ok((&l - l.adjoint()).map(|z| z * 0.5))
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, unit
/// eigenvectors in the columns.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !a.is_square() {
        return Err(Error::InvalidDimension("non-square Hermitian eigenproblem".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), a.clone()));
    }
    let sym = (a + a.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Eigen-decomposition of a general complex matrix via Schur form and
/// triangular back-substitution. Eigenvalues are sorted by real part and the
/// eigenvectors are normalized to unit 2-norm.
pub fn general_eigen(a: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    if !a.is_square() {
        return Err(Error::InvalidDimension("non-square eigenproblem".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), a.clone()));
    }
    let (q, t) = schur(a)?;
    let small = f64::EPSILON * one_norm(&t).max(f64::MIN_POSITIVE);
    let mut tri_vecs = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        tri_vecs[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                acc += t[(j, l)] * tri_vecs[(l, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            tri_vecs[(j, k)] = -acc / denom;
        }
    }
    let mut vecs = &q * tri_vecs;
    for mut c in vecs.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= Complex64::new(norm, 0.0);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        t[(i, i)]
            .re
            .total_cmp(&t[(j, j)].re)
            .then(t[(i, i)].im.total_cmp(&t[(j, j)].im))
    });
    let values = order.iter().map(|&i| t[(i, i)]).collect();
    let mut sorted = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        sorted.set_column(k, &vecs.column(i));
    }
    Ok((values, sorted))
}
