//! Complex quadratic forms `xᴴ Q x + 2 Re{linᴴ x} + c`.

use nalgebra::{DMatrix, DVector};

use crate::{CMatrix, CVector, C64};

/// Hermiticity tolerance, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue, relative to the largest entry.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub quad: CMatrix,
    pub lin: CVector,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn new(quad: CMatrix, lin: CVector, constant: f64) -> Self {
        debug_assert_eq!(quad.nrows(), quad.ncols());
        debug_assert_eq!(quad.nrows(), lin.len());
        Self {
            quad,
            lin,
            constant,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(CMatrix::zeros(dim, dim), CVector::zeros(dim), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn eval(&self, x: &CVector) -> f64 {
        let qx = &self.quad * x;
        x.dotc(&qx).re + 2.0 * self.lin.dotc(x).re + self.constant
    }

    /// Evaluates at a real point.
    pub fn eval_real(&self, x: &DVector<f64>) -> f64 {
        self.eval(&x.map(|v| C64::new(v, 0.0)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.quad.map(|v| v * factor),
            self.lin.map(|v| v * factor),
            self.constant * factor,
        )
    }

    fn scale(&self) -> f64 {
        self.quad.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        hermitian_defect(&self.quad) <= HERMITIAN_TOL * self.scale().max(f64::MIN_POSITIVE)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.quad)
    }

    pub fn is_psd(&self) -> bool {
        self.is_hermitian() && self.min_eigenvalue() >= -PSD_TOL * self.scale().max(1e-300)
    }
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Real symmetric embedding `[[Re, −Im], [Im, Re]]` of a complex matrix.
pub fn real_embedding(m: &CMatrix) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + c)] = -v.im;
            out[(i + r, j)] = v.im;
            out[(i + r, j + c)] = v.re;
        }
    }
    out
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    // Each eigenvalue of the real embedding appears twice.
    let herm = (m + m.adjoint()).map(|v| v * 0.5);
    let emb = real_embedding(&herm);
    emb.symmetric_eigenvalues().min()
}
