//! Dense complex linear algebra helpers used throughout the crate.
//!
//! All matrices are `nalgebra` dynamic matrices over `Complex64`. The two
//! workhorses are the Hermitian eigendecomposition (for `e^{iλV}` and for
//! exact diagonalisation of `H0 + λV`) and Kronecker assembly of Pauli
//! strings (for the Trotter backend).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{PtqError, Result};

/// Maximum elementwise deviation from Hermitian symmetry, `max |A - A^H|`.
pub fn hermiticity_deviation(a: &DMatrix<Complex64>) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Maximum elementwise deviation from unitarity, `max |U^H U - I|`.
pub fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let gram = u.adjoint() * u;
    let eye = DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
    max_abs_diff(&gram, &eye)
}

/// Maximum elementwise absolute difference between two matrices.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    let mut dev = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        dev = dev.max((x - y).norm());
    }
    dev
}

/// Largest absolute eigenvalue of a Hermitian matrix (its spectral norm).
pub fn hermitian_spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Eigendecomposition of a Hermitian matrix, sorted by ascending eigenvalue.
///
/// Returns `(eigenvalues, q)` with the columns of `q` holding the
/// corresponding orthonormal eigenvectors, so `a = q · diag(eigenvalues) · q^H`.
pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(PtqError::DimensionMismatch {
            expected: n,
            actual: a.ncols(),
        });
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut q = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        q.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, q))
}

/// `e^{i·scale·A}` for Hermitian `A`, via the eigendecomposition
/// `A = Q D Q^H` and `e^{i·scale·A} = Q e^{i·scale·D} Q^H`. The result is
/// unitary to machine precision.
pub fn expm_i_hermitian(a: &DMatrix<Complex64>, scale: f64) -> Result<DMatrix<Complex64>> {
    let (values, q) = hermitian_eigen(a)?;
    let n = a.nrows();
    let phases = DMatrix::<Complex64>::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        values
            .iter()
            .map(|&d| Complex64::new(0.0, scale * d).exp()),
    ));
    Ok(&q * phases * q.adjoint())
}

/// Single-qubit Pauli matrix for a character in `{I, X, Y, Z}`.
pub fn pauli_1q(c: char) -> Option<DMatrix<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let m = match c {
        'I' => DMatrix::from_row_slice(2, 2, &[one, zero, zero, one]),
        'X' => DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
        'Y' => DMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]),
        'Z' => DMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]),
        _ => return None,
    };
    Some(m)
}

/// Dense `2^N × 2^N` matrix of a Pauli string.
///
/// Character `j` of the string acts on qubit `j`. Qubit `j` carries bit `j`
/// of the basis index (little-endian), so the string's first character sits
/// in the lowest Kronecker slot.
pub fn pauli_string_matrix(string: &str) -> Result<DMatrix<Complex64>> {
    if string.is_empty() {
        return Err(PtqError::InvalidPauliString {
            string: string.to_string(),
            reason: "empty string".to_string(),
        });
    }
    let mut m = DMatrix::<Complex64>::identity(1, 1);
    for c in string.chars().rev() {
        let p = pauli_1q(c).ok_or_else(|| PtqError::InvalidPauliString {
            string: string.to_string(),
            reason: format!("character {c:?} is not one of I, X, Y, Z"),
        })?;
        m = m.kronecker(&p);
    }
    Ok(m)
}
