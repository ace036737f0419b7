//! Self-contained dense linear algebra over complex Hermitian matrices:
//! eigendecomposition, spectral functions, norms, tensor/partial-trace
//! operations, and entropies. Everything is a pure function of immutable
//! values; natural logarithms throughout unless noted.

mod eig;
mod matrix;

pub use eig::{eig_hermitian, SpectralDecomposition};
pub use matrix::{
    dim_cap, C64, DEFAULT_DIM_CAP, HERMITIAN_TOL, HermitianMatrix, Matrix, PSD_CLAMP_TOL,
    TRACE_TOL,
};

use crate::error::{Error, Result};

/// V diag(f(lambda)) V^H for a scalar real function f.
pub fn spectral_function(h: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let dec = eig_hermitian(h)?;
    HermitianMatrix::hermitized(dec.apply(f))
}

/// Matrix exponential of a Hermitian matrix.
pub fn matrix_exp(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    spectral_function(h, f64::exp)
}

/// Matrix logarithm. Eigenvalues in [-1e-10, 0] count as singular (the clamp
/// rule sends them to 0) and anything below -1e-10 is a domain error; strictly
/// positive eigenvalues, however tiny, are fine.
pub fn matrix_log(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let dec = eig_hermitian(h)?;
    let lambda_min = dec.min_eigenvalue();
    if lambda_min <= 0.0 {
        return Err(Error::LogDomain { lambda_min });
    }
    HermitianMatrix::hermitized(dec.apply(f64::ln))
}

/// Matrix square root with the eigenvalue clamp rule applied.
pub fn matrix_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let dec = eig_hermitian(h)?;
    let lambda_min = dec.min_eigenvalue();
    if lambda_min < -PSD_CLAMP_TOL {
        return Err(Error::NegativeEigenvalue {
            value: lambda_min,
            tol: PSD_CLAMP_TOL,
        });
    }
    HermitianMatrix::hermitized(dec.apply(|x| x.max(0.0).sqrt()))
}

/// Sum of absolute eigenvalues (Hermitian trace norm).
pub fn trace_norm(m: &HermitianMatrix) -> Result<f64> {
    let dec = eig_hermitian(m)?;
    Ok(dec.eigenvalues.iter().map(|x| x.abs()).sum())
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(m: &HermitianMatrix) -> Result<f64> {
    let dec = eig_hermitian(m)?;
    Ok(dec
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max))
}

/// Kronecker product, first factor most significant.
pub fn tensor(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    matrix::check_dim_cap(a.dim() * b.dim())?;
    HermitianMatrix::new(a.matrix().kron(b.matrix()))
}

/// Partial trace over the factors not listed in `keep`, for a matrix on a
/// tensor product of factors with the given dimensions (first factor most
/// significant). Kept factors preserve their relative order.
pub fn partial_trace(
    m: &HermitianMatrix,
    factor_dims: &[usize],
    keep: &[usize],
) -> Result<HermitianMatrix> {
    let product: usize = factor_dims.iter().product();
    if product != m.dim() {
        return Err(Error::FactorMismatch {
            product,
            dim: m.dim(),
        });
    }
    if keep.is_empty() {
        return Err(Error::BadKeepSet {
            index: 0,
            count: factor_dims.len(),
        });
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    for &i in &keep_sorted {
        if i >= factor_dims.len() {
            return Err(Error::BadKeepSet {
                index: i,
                count: factor_dims.len(),
            });
        }
    }
    let traced: Vec<usize> = (0..factor_dims.len())
        .filter(|i| !keep_sorted.contains(i))
        .collect();

    // Row-major strides: factor 0 most significant.
    let mut strides = vec![1usize; factor_dims.len()];
    for i in (0..factor_dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * factor_dims[i + 1];
    }

    let keep_dim: usize = keep_sorted.iter().map(|&i| factor_dims[i]).product();
    let traced_dim: usize = traced.iter().map(|&i| factor_dims[i]).product();

    // Decompose a flat index over the listed factors into a full-space offset.
    let offset = |factors: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &f in factors.iter().rev() {
            off += (idx % factor_dims[f]) * strides[f];
            idx /= factor_dims[f];
        }
        off
    };

    let mut out = Matrix::zeros(keep_dim);
    for r in 0..keep_dim {
        let r_off = offset(&keep_sorted, r);
        for c in 0..keep_dim {
            let c_off = offset(&keep_sorted, c);
            let mut sum = C64::new(0.0, 0.0);
            for k in 0..traced_dim {
                let k_off = offset(&traced, k);
                sum += m.at(r_off + k_off, c_off + k_off);
            }
            out.set(r, c, sum);
        }
    }
    HermitianMatrix::hermitized(out)
}

/// von Neumann entropy -sum lambda ln lambda in nats, with 0 ln 0 = 0.
/// Requires trace within 1e-8 of 1 and eigenvalues above the clamp tolerance.
pub fn von_neumann_entropy(rho: &HermitianMatrix) -> Result<f64> {
    let trace = rho.trace_re();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::TraceNotOne {
            trace,
            tol: TRACE_TOL,
        });
    }
    let dec = eig_hermitian(rho)?;
    let mut entropy = 0.0;
    for &lambda in &dec.eigenvalues {
        if lambda < -PSD_CLAMP_TOL {
            return Err(Error::NegativeEigenvalue {
                value: lambda,
                tol: PSD_CLAMP_TOL,
            });
        }
        let p = lambda.clamp(0.0, 1.0);
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    Ok(entropy)
}

/// Quantum relative entropy D(rho || sigma) = Tr(rho ln rho) - Tr(rho ln sigma)
/// in nats. sigma must be positive definite (eigenvalues > 1e-12).
pub fn relative_entropy(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    for m in [rho, sigma] {
        let trace = m.trace_re();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne {
                trace,
                tol: TRACE_TOL,
            });
        }
    }
    let dec_sigma = eig_hermitian(sigma)?;
    if dec_sigma.min_eigenvalue() <= 1e-12 {
        return Err(Error::LogDomain {
            lambda_min: dec_sigma.min_eigenvalue(),
        });
    }
    let dec_rho = eig_hermitian(rho)?;
    let mut tr_rho_log_rho = 0.0;
    for &lambda in &dec_rho.eigenvalues {
        if lambda < -PSD_CLAMP_TOL {
            return Err(Error::NegativeEigenvalue {
                value: lambda,
                tol: PSD_CLAMP_TOL,
            });
        }
        let p = lambda.clamp(0.0, 1.0);
        if p > 0.0 {
            tr_rho_log_rho += p * p.ln();
        }
    }
    let log_sigma = HermitianMatrix::hermitized(dec_sigma.apply(f64::ln))?;
    let cross = trace_inner(rho, &log_sigma)?;
    Ok(tr_rho_log_rho - cross)
}

/// Trace inner product Re Tr(A B) of two Hermitian matrices; errors if the
/// imaginary part of the trace exceeds 1e-10.
pub fn trace_inner(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let d = a.dim();
    let mut sum = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            sum += a.at(i, j) * b.at(j, i);
        }
    }
    if sum.im.abs() >= 1e-10 {
        return Err(Error::ImaginaryTrace { imag: sum.im });
    }
    Ok(sum.re)
}

/// Binary entropy H(x) = -x log2 x - (1-x) log2 (1-x), with 0 log 0 = 0.
pub fn binary_entropy(x: f64) -> f64 {
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * x.log2();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).log2();
    }
    h
}
