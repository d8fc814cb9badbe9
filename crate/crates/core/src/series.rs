//! Truncated power series in the coupling λ.
//!
//! Used by the series-expansion bias oracle: instead of deriving per-term
//! algebra by hand, the tensor contraction realised by a term circuit is
//! replayed with every scalar replaced by a polynomial in λ, truncated at a
//! fixed degree. Coefficients are complex because the circuits carry factors
//! of `i` from `e^{iλV}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// A polynomial `Σ_j c_j λ^j` truncated at a fixed degree.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSeries {
    coeffs: Vec<Complex64>,
}

impl LambdaSeries {
    /// The zero series with coefficients up to `λ^degree`.
    pub fn zero(degree: usize) -> Self {
        Self {
            coeffs: vec![Complex64::default(); degree + 1],
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least the λ^0 slot");
        Self { coeffs }
    }

    /// Truncation degree (highest tracked power of λ).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `λ^j`; zero beyond the truncation degree.
    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs.get(j).copied().unwrap_or_default()
    }

    /// Numerical evaluation at a concrete λ (Horner).
    pub fn eval(&self, lambda: f64) -> Complex64 {
        let mut acc = Complex64::default();
        for &c in self.coeffs.iter().rev() {
            acc = acc * lambda + c;
        }
        acc
    }
}

/// A matrix-valued polynomial `Σ_j M_j λ^j` truncated at a fixed degree.
#[derive(Debug, Clone)]
pub struct MatrixSeries {
    coeffs: Vec<DMatrix<Complex64>>,
}

impl MatrixSeries {
    /// Series of `e^{iλA}`: coefficient of `λ^j` is `(i)^j A^j / j!`.
    pub fn exp_i(a: &DMatrix<Complex64>, degree: usize) -> Self {
        let dim = a.nrows();
        assert_eq!(dim, a.ncols(), "exp_i needs a square matrix");
        let mut coeffs = Vec::with_capacity(degree + 1);
        let mut power = DMatrix::<Complex64>::identity(dim, dim);
        let mut factor = Complex64::new(1.0, 0.0);
        coeffs.push(power.clone());
        for j in 1..=degree {
            power = a * &power;
            factor *= Complex64::new(0.0, 1.0) / j as f64;
            coeffs.push(&power * factor);
        }
        Self { coeffs }
    }

    /// Series of the linearised gate `I + iλA` (exact, all higher
    /// coefficients zero), padded to the requested degree.
    pub fn linear_i(a: &DMatrix<Complex64>, degree: usize) -> Self {
        let dim = a.nrows();
        let mut coeffs = vec![DMatrix::<Complex64>::zeros(dim, dim); degree + 1];
        coeffs[0] = DMatrix::identity(dim, dim);
        if degree >= 1 {
            coeffs[1] = a * Complex64::new(0.0, 1.0);
        }
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Truncated product with a vector series: coefficient `c` of the result
    /// is `Σ_{a+b=c} M_a v_b`.
    pub fn mul_vector(&self, v: &VectorSeries) -> VectorSeries {
        let degree = v.degree();
        let dim = v.coeffs[0].len();
        let mut out = vec![DVector::<Complex64>::zeros(dim); degree + 1];
        for (a, m) in self.coeffs.iter().enumerate().take(degree + 1) {
            for b in 0..=degree - a {
                out[a + b] += m * &v.coeffs[b];
            }
        }
        VectorSeries { coeffs: out }
    }
}

/// A vector-valued polynomial `Σ_j v_j λ^j` truncated at a fixed degree.
#[derive(Debug, Clone)]
pub struct VectorSeries {
    coeffs: Vec<DVector<Complex64>>,
}

impl VectorSeries {
    /// The basis state `e_index`, constant in λ.
    pub fn basis(dim: usize, index: usize, degree: usize) -> Self {
        let mut coeffs = vec![DVector::<Complex64>::zeros(dim); degree + 1];
        coeffs[0][index] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Componentwise multiplication by real weights, applied to every
    /// λ-coefficient (the action of a diagonal λ-independent operator).
    pub fn scale_components(&mut self, weights: &[f64]) {
        for v in &mut self.coeffs {
            assert_eq!(v.len(), weights.len(), "weight vector length mismatch");
            for (x, &w) in v.iter_mut().zip(weights) {
                *x *= w;
            }
        }
    }

    /// The series of a single component.
    pub fn component(&self, index: usize) -> LambdaSeries {
        LambdaSeries::from_coeffs(self.coeffs.iter().map(|v| v[index]).collect())
    }
}
