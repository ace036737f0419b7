use num_complex::Complex64 as C64;

use super::matrix::{HermitianMatrix, Matrix};
use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius tolerance for Jacobi convergence.
const JACOBI_REL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigendecomposition H = V diag(lambda) V^H with eigenvalues sorted descending
/// and the matching eigenvectors as columns of a unitary `eigenvectors`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// V diag(values) V^H as a raw matrix, for one value per eigenvalue.
    pub fn recombine(&self, values: &[f64]) -> Matrix {
        let d = self.dim();
        assert_eq!(values.len(), d, "one value per eigenvalue");
        let v = &self.eigenvectors;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut sum = C64::new(0.0, 0.0);
                for (k, &w) in values.iter().enumerate() {
                    sum += v.at(i, k) * w * v.at(j, k).conj();
                }
                out.set(i, j, sum);
            }
        }
        out
    }

    /// V diag(f(lambda)) V^H as a raw matrix.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.recombine(&values)
    }

    /// V diag(lambda) V^H.
    pub fn reconstruct(&self) -> Matrix {
        self.apply(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self
            .eigenvalues
            .last()
            .expect("decomposition of empty matrix")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self
            .eigenvalues
            .first()
            .expect("decomposition of empty matrix")
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let d = a.dim();
    let mut sum = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                sum += a.at(i, j).norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Cyclic complex Jacobi eigensolver with a fixed row-major sweep order.
///
/// Converges when the off-diagonal Frobenius norm drops below
/// `1e-12 * ||H||_F`; errors out after 100 sweeps. Deterministic for a fixed
/// input.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let d = h.dim();
    let mut a = h.matrix().clone();
    let mut v = Matrix::identity(d);
    let scale = a.frobenius_norm();
    let tol = JACOBI_REL_TOL * scale;

    let mut converged = scale == 0.0;
    if !converged {
        for _sweep in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= tol {
                converged = true;
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&a) <= tol {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::EigDidNotConverge {
            sweeps: MAX_SWEEPS,
            off: off_diagonal_norm(&a),
        });
    }

    let mut order: Vec<usize> = (0..d).collect();
    let diag: Vec<f64> = (0..d).map(|i| a.at(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("NaN eigenvalue"));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = Matrix::from_fn(d, |i, j| v.at(i, order[j]));
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// One complex Jacobi rotation annihilating the (p, q) entry of `a`,
/// accumulated into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.at(p, q);
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r; // e^{i phi}
    let app = a.at(p, p).re;
    let aqq = a.at(q, q).re;

    // Real symmetric 2x2 rotation after absorbing the phase.
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // Unitary G with G[p][p] = c, G[p][q] = s, G[q][p] = -s e^{-i phi},
    // G[q][q] = c e^{-i phi}; apply A <- G^H A G, V <- V G.
    let d = a.dim();
    let gqp = -phase.conj() * s;
    let gqq = phase.conj() * c;

    for i in 0..d {
        let aip = a.at(i, p);
        let aiq = a.at(i, q);
        a.set(i, p, aip * c + aiq * gqp);
        a.set(i, q, aip * s + aiq * gqq);
    }
    for j in 0..d {
        let apj = a.at(p, j);
        let aqj = a.at(q, j);
        a.set(p, j, apj * c + aqj * gqp.conj());
        a.set(q, j, apj * s + aqj * gqq.conj());
    }
    // Exact zeros on the annihilated pair keep the sweep stable.
    a.set(p, q, C64::new(0.0, 0.0));
    a.set(q, p, C64::new(0.0, 0.0));
    a.set(p, p, C64::new(a.at(p, p).re, 0.0));
    a.set(q, q, C64::new(a.at(q, q).re, 0.0));

    for i in 0..d {
        let vip = v.at(i, p);
        let viq = v.at(i, q);
        v.set(i, p, vip * c + viq * gqp);
        v.set(i, q, vip * s + viq * gqq);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(dim: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(dim, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        HermitianMatrix::hermitized(g).unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        let h = HermitianMatrix::identity(2);
        let dec = eig_hermitian(&h).unwrap();
        assert_eq!(dec.eigenvalues, vec![1.0, 1.0]);
    }

    #[test]
    fn pauli_z_diagonal() {
        let h = HermitianMatrix::diagonal(&[1.0, -1.0]);
        let dec = eig_hermitian(&h).unwrap();
        assert_eq!(dec.eigenvalues, vec![1.0, -1.0]);
        assert_eq!(dec.eigenvectors.at(0, 0), C64::new(1.0, 0.0));
        assert_eq!(dec.eigenvectors.at(1, 1), C64::new(1.0, 0.0));
    }

    #[test]
    fn reconstruction_error_random_8x8() {
        let h = random_hermitian(8, 42);
        let dec = eig_hermitian(&h).unwrap();
        let err = dec.reconstruct().sub(h.matrix()).frobenius_norm();
        assert!(err < 1e-9, "reconstruction error {err}");
    }

    #[test]
    fn columns_orthonormal() {
        let h = random_hermitian(6, 7);
        let dec = eig_hermitian(&h).unwrap();
        let v = &dec.eigenvectors;
        let gram = v.adjoint().mul(v);
        let defect = gram.sub(&Matrix::identity(6)).frobenius_norm();
        assert!(defect < 1e-10 * 6.0, "orthonormality defect {defect}");
    }

    #[test]
    fn deterministic_for_fixed_input() {
        let h = random_hermitian(5, 3);
        let a = eig_hermitian(&h).unwrap();
        let b = eig_hermitian(&h).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn zero_matrix_converges() {
        let h = HermitianMatrix::zeros(3);
        let dec = eig_hermitian(&h).unwrap();
        assert_eq!(dec.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let h = random_hermitian(8, 11);
        let dec = eig_hermitian(&h).unwrap();
        for w in dec.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}
