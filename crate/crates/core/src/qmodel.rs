//! Quantum objects of the learning game: density matrices, two-outcome
//! measurements, Born probabilities, seeded random instance generation, and
//! the single-measurement postselection operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{
    self, eig_hermitian, matrix_sqrt, trace_inner, C64, HermitianMatrix, Matrix, PSD_CLAMP_TOL,
    TRACE_TOL,
};

/// Acceptance probabilities at or below this are treated as the zero-map
/// outcome of postselection.
pub const ZERO_PROB_TOL: f64 = 1e-12;

/// Trace-1 PSD Hermitian matrix on `qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    matrix: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(qubits: usize, matrix: HermitianMatrix) -> Result<Self> {
        let dim = qubit_dim(qubits)?;
        if matrix.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: matrix.dim(),
                right: dim,
            });
        }
        let trace = matrix.trace_re();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne {
                trace,
                tol: TRACE_TOL,
            });
        }
        let dec = eig_hermitian(&matrix)?;
        let lambda_min = dec.min_eigenvalue();
        if lambda_min < -PSD_CLAMP_TOL {
            return Err(Error::NegativeEigenvalue {
                value: lambda_min,
                tol: PSD_CLAMP_TOL,
            });
        }
        Ok(DensityMatrix { qubits, matrix })
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        let dim = qubit_dim(qubits)?;
        DensityMatrix::new(
            qubits,
            HermitianMatrix::identity(dim).scale_re(1.0 / dim as f64),
        )
    }

    /// |i><i| in the computational basis.
    pub fn basis_state(qubits: usize, index: usize) -> Result<Self> {
        let dim = qubit_dim(qubits)?;
        let mut m = Matrix::zeros(dim);
        m.set(index, index, C64::new(1.0, 0.0));
        DensityMatrix::new(qubits, HermitianMatrix::new(m)?)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }
}

/// Hermitian matrix with spectrum in [0,1]; accepts a state with probability
/// Tr(E rho).
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    qubits: usize,
    matrix: HermitianMatrix,
}

impl Measurement {
    pub fn new(qubits: usize, matrix: HermitianMatrix) -> Result<Self> {
        let dim = qubit_dim(qubits)?;
        if matrix.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: matrix.dim(),
                right: dim,
            });
        }
        let dec = eig_hermitian(&matrix)?;
        let min = dec.min_eigenvalue();
        let max = dec.max_eigenvalue();
        if min < -PSD_CLAMP_TOL || max > 1.0 + PSD_CLAMP_TOL {
            return Err(Error::SpectrumOutOfRange { min, max });
        }
        Ok(Measurement { qubits, matrix })
    }

    pub fn identity(qubits: usize) -> Result<Self> {
        let dim = qubit_dim(qubits)?;
        Measurement::new(qubits, HermitianMatrix::identity(dim))
    }

    /// Projector |i><i|.
    pub fn basis_projector(qubits: usize, index: usize) -> Result<Self> {
        let dim = qubit_dim(qubits)?;
        let mut m = Matrix::zeros(dim);
        m.set(index, index, C64::new(1.0, 0.0));
        Measurement::new(qubits, HermitianMatrix::new(m)?)
    }

    /// I - E, the complementary outcome.
    pub fn complement(&self) -> Measurement {
        Measurement {
            qubits: self.qubits,
            matrix: HermitianMatrix::identity(self.dim()).sub(&self.matrix),
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }
}

fn qubit_dim(qubits: usize) -> Result<usize> {
    let cap = spectra::dim_cap();
    if qubits >= usize::BITS as usize || (1usize << qubits) > cap {
        return Err(Error::DimensionCap {
            dim: 1usize
                .checked_shl(qubits as u32)
                .unwrap_or(usize::MAX),
            cap,
        });
    }
    Ok(1usize << qubits)
}

/// Deterministic seeded random stream. Identical seeds produce identical draw
/// sequences across runs and platforms; child streams are derived by hashing
/// the parent seed with an index, so concurrent consumers stay independent.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child stream `index`, derived from the parent seed (not its state).
    pub fn child(&self, index: u64) -> Self {
        RngStream::from_seed(splitmix64(self.seed ^ splitmix64(index)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn complex_gaussian(&mut self) -> C64 {
        C64::new(self.normal(), self.normal())
    }
}

/// Born rule: Tr(E rho), clamped to [0,1] when within 1e-9 of the boundary.
pub fn born_probability(e: &Measurement, rho: &DensityMatrix) -> Result<f64> {
    if e.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: e.dim(),
            right: rho.dim(),
        });
    }
    let p = trace_inner(e.matrix(), rho.matrix())?;
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(Error::BornOutOfRange { value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Ginibre-normalized random state: G G^H / Tr(G G^H) with independent
/// standard complex Gaussian entries. Full rank almost surely.
pub fn random_density(qubits: usize, rng: &mut RngStream) -> Result<DensityMatrix> {
    let dim = qubit_dim(qubits)?;
    let g = Matrix::from_fn(dim, |_, _| rng.complex_gaussian());
    let gg = g.mul(&g.adjoint());
    let trace = gg.trace().re;
    let matrix = HermitianMatrix::hermitized(gg.scale_re(1.0 / trace))?;
    DensityMatrix::new(qubits, matrix)
}

/// Random two-outcome measurement: V diag(u) V^H with V the eigenbasis of a
/// random Hermitian matrix and u i.i.d. uniform on [0, 1].
pub fn random_measurement(qubits: usize, rng: &mut RngStream) -> Result<Measurement> {
    let dim = qubit_dim(qubits)?;
    let g = Matrix::from_fn(dim, |_, _| rng.complex_gaussian());
    let h = HermitianMatrix::hermitized(g)?;
    let dec = eig_hermitian(&h)?;
    let u: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
    let v = &dec.eigenvectors;
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut sum = C64::new(0.0, 0.0);
            for (k, &uk) in u.iter().enumerate() {
                sum += v.at(i, k) * uk * v.at(j, k).conj();
            }
            m.set(i, j, sum);
        }
    }
    Measurement::new(qubits, HermitianMatrix::hermitized(m)?)
}

/// Result of postselecting on acceptance by a measurement.
#[derive(Clone, Debug)]
pub enum PostselectOutcome {
    /// sqrt(E) rho sqrt(E) / Tr(E rho) together with the acceptance
    /// probability Tr(E rho).
    Accepted {
        state: DensityMatrix,
        probability: f64,
    },
    /// Tr(E rho) <= 1e-12: the zero-map outcome, flagged rather than errored.
    Degenerate,
}

impl PostselectOutcome {
    pub fn probability(&self) -> f64 {
        match self {
            PostselectOutcome::Accepted { probability, .. } => *probability,
            PostselectOutcome::Degenerate => 0.0,
        }
    }

    pub fn state(&self) -> Option<&DensityMatrix> {
        match self {
            PostselectOutcome::Accepted { state, .. } => Some(state),
            PostselectOutcome::Degenerate => None,
        }
    }
}

/// Postselect on acceptance by E via the Kraus operator sqrt(E); identical to
/// the ancilla-dilation definition while working at the original dimension.
pub fn postselect(e: &Measurement, rho: &DensityMatrix) -> Result<PostselectOutcome> {
    if e.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: e.dim(),
            right: rho.dim(),
        });
    }
    let p = trace_inner(e.matrix(), rho.matrix())?;
    if p <= ZERO_PROB_TOL {
        return Ok(PostselectOutcome::Degenerate);
    }
    let root = matrix_sqrt(e.matrix())?;
    let unnormalized = root.matrix().mul(rho.matrix().matrix()).mul(root.matrix());
    let state = DensityMatrix::new(
        rho.qubits(),
        HermitianMatrix::hermitized(unnormalized.scale_re(1.0 / p))?,
    )?;
    Ok(PostselectOutcome::Accepted {
        state,
        probability: p,
    })
}

/// JSON wire format for fixture matrices: {"dim": d, "re": [[..]], "im": [[..]]}.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Matrix) -> Self {
        let d = m.dim();
        let re = (0..d)
            .map(|i| (0..d).map(|j| m.at(i, j).re).collect())
            .collect();
        let im = (0..d)
            .map(|i| (0..d).map(|j| m.at(i, j).im).collect())
            .collect();
        MatrixJson { dim: d, re, im }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        let d = self.dim;
        let ok = self.re.len() == d
            && self.im.len() == d
            && self.re.iter().all(|r| r.len() == d)
            && self.im.iter().all(|r| r.len() == d);
        if !ok {
            return Err(Error::BadShape {
                dim: d,
                len: self.re.iter().map(|r| r.len()).sum(),
            });
        }
        Ok(Matrix::from_fn(d, |i, j| {
            C64::new(self.re[i][j], self.im[i][j])
        }))
    }

    pub fn to_density(&self, qubits: usize) -> Result<DensityMatrix> {
        DensityMatrix::new(qubits, HermitianMatrix::new(self.to_matrix()?)?)
    }

    pub fn to_measurement(&self, qubits: usize) -> Result<Measurement> {
        Measurement::new(qubits, HermitianMatrix::new(self.to_matrix()?)?)
    }
}
