use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default cap on matrix dimension; dense O(d^3) algorithms only.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Frobenius-norm tolerance for the Hermitian invariant M = M^H.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues in [-PSD_CLAMP_TOL, 0) are treated as roundoff and clamped to 0;
/// anything below is a hard error.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

/// Tolerance on |trace - 1| for density-like matrices.
pub const TRACE_TOL: f64 = 1e-8;

/// Current dimension cap; `QONLINE_DIM_CAP` overrides the default.
pub fn dim_cap() -> usize {
    std::env::var("QONLINE_DIM_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_DIM_CAP)
}

pub(crate) fn check_dim_cap(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(())
}

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_data(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::BadShape {
                dim,
                len: data.len(),
            });
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, C64::new(v, 0.0));
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matrix add dimension mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            dim: self.dim,
            data,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matrix sub dimension mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            dim: self.dim,
            data,
        }
    }

    pub fn scale(&self, factor: C64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn scale_re(&self, factor: f64) -> Matrix {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matrix mul dimension mismatch");
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.at(i, k);
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let v = out.at(i, j) + aik * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Matrix {
        let d = self.dim;
        Matrix::from_fn(d, |i, j| self.at(j, i).conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ||M - M^H||_F, the deviation from being Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = self.at(i, j) - self.at(j, i).conj();
                sum += d.norm_sqr();
            }
        }
        sum.sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix diff dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product with the first factor most significant:
    /// `out[(i*db+p), (j*db+q)] = a[i][j] * b[p][q]`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let da = self.dim;
        let db = other.dim;
        let mut out = Matrix::zeros(da * db);
        for i in 0..da {
            for j in 0..da {
                let aij = self.at(i, j);
                if aij.re == 0.0 && aij.im == 0.0 {
                    continue;
                }
                for p in 0..db {
                    for q in 0..db {
                        out.set(i * db + p, j * db + q, aij * other.at(p, q));
                    }
                }
            }
        }
        out
    }
}

/// A validated Hermitian matrix (M = M^H within `HERMITIAN_TOL` in Frobenius norm).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    inner: Matrix,
}

impl HermitianMatrix {
    /// Validates the Hermitian invariant and the dimension cap.
    pub fn new(m: Matrix) -> Result<Self> {
        check_dim_cap(m.dim())?;
        let defect = m.hermitian_defect();
        // NaN entries must fail validation too.
        if defect > HERMITIAN_TOL || defect.is_nan() {
            return Err(Error::NotHermitian {
                defect,
                tol: HERMITIAN_TOL,
            });
        }
        Ok(HermitianMatrix { inner: m })
    }

    /// Wraps an internally computed matrix, symmetrizing (M + M^H)/2 to remove
    /// floating-point drift.
    pub fn hermitized(m: Matrix) -> Result<Self> {
        check_dim_cap(m.dim())?;
        let adj = m.adjoint();
        let inner = m.add(&adj).scale_re(0.5);
        Ok(HermitianMatrix { inner })
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            inner: Matrix::zeros(dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            inner: Matrix::identity(dim),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        HermitianMatrix {
            inner: Matrix::diagonal(values),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.inner.at(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            inner: self.inner.add(&other.inner),
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            inner: self.inner.sub(&other.inner),
        }
    }

    pub fn scale_re(&self, factor: f64) -> HermitianMatrix {
        HermitianMatrix {
            inner: self.inner.scale_re(factor),
        }
    }

    pub fn trace_re(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        self.inner.max_abs_diff(&other.inner)
    }
}
