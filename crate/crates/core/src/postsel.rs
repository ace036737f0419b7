//! The postselection-based learner: amplified hypotheses over k registers,
//! the amplified measurement E*, postselection updates, and numerical checks
//! of the quantum union bound.

use crate::error::{Error, Result};
use crate::harness::TrialRecord;
use crate::loss::{make_feedback, FeedbackMode};
use crate::qmodel::{
    born_probability, postselect, DensityMatrix, Measurement, PostselectOutcome, RngStream,
    ZERO_PROB_TOL,
};
use crate::spectra::{
    self, eig_hermitian, partial_trace, trace_inner, trace_norm, C64, HermitianMatrix, Matrix,
    PSD_CLAMP_TOL, TRACE_TOL,
};

/// Cap on the register count (the update enumerates 2^k acceptance patterns).
pub const REGISTER_CAP: usize = 20;

/// Frobenius tolerance for the permutation-symmetry invariant.
pub const SWAP_TOL: f64 = 1e-8;

/// k-register amplified hypothesis state of dimension 2^{k n}, symmetric
/// under permuting the registers.
#[derive(Clone, Debug)]
pub struct AmplifiedHypothesis {
    qubits: usize,
    registers: usize,
    state: HermitianMatrix,
}

impl AmplifiedHypothesis {
    pub fn new(qubits: usize, registers: usize, state: HermitianMatrix) -> Result<Self> {
        let dim = amplified_dim(qubits, registers)?;
        if state.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: state.dim(),
                right: dim,
            });
        }
        let trace = state.trace_re();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne {
                trace,
                tol: TRACE_TOL,
            });
        }
        // PSD within the clamp tolerance, via a shifted Cholesky factorization
        // (an eigendecomposition at dimension 2^{kn} would dominate runtime).
        if let Some(pivot) = negative_pivot(&state) {
            return Err(Error::NegativeEigenvalue {
                value: pivot,
                tol: PSD_CLAMP_TOL,
            });
        }
        let defect = max_swap_defect(&state, qubits, registers);
        if defect > SWAP_TOL {
            return Err(Error::NotPermutationSymmetric { defect });
        }
        Ok(AmplifiedHypothesis {
            qubits,
            registers,
            state,
        })
    }

    /// I / 2^{kn}, the amplified maximally mixed initial hypothesis.
    pub fn maximally_mixed(qubits: usize, registers: usize) -> Result<Self> {
        let dim = amplified_dim(qubits, registers)?;
        AmplifiedHypothesis::new(
            qubits,
            registers,
            HermitianMatrix::identity(dim).scale_re(1.0 / dim as f64),
        )
    }

    /// rho^{(x) k}, the amplified version of a single-register state.
    pub fn product_power(rho: &DensityMatrix, registers: usize) -> Result<Self> {
        amplified_dim(rho.qubits(), registers)?;
        let mut state = rho.matrix().clone();
        for _ in 1..registers {
            state = spectra::tensor(&state, rho.matrix())?;
        }
        AmplifiedHypothesis::new(rho.qubits(), registers, state)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    pub fn state(&self) -> &HermitianMatrix {
        &self.state
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }
}

fn amplified_dim(qubits: usize, registers: usize) -> Result<usize> {
    if registers == 0 || registers > REGISTER_CAP {
        return Err(Error::RegisterCap {
            k: registers,
            cap: REGISTER_CAP,
        });
    }
    let bits = qubits * registers;
    let cap = spectra::dim_cap();
    if bits >= usize::BITS as usize || (1usize << bits) > cap {
        return Err(Error::DimensionCap {
            dim: 1usize.checked_shl(bits as u32).unwrap_or(usize::MAX),
            cap,
        });
    }
    Ok(1usize << bits)
}

/// Cholesky-based PSD check for lambda_min >= -PSD_CLAMP_TOL: factor
/// M + tol I and report the first pivot below the roundoff floor, if any.
fn negative_pivot(m: &HermitianMatrix) -> Option<f64> {
    let d = m.dim();
    let mut a = m.matrix().clone();
    for i in 0..d {
        a.set(i, i, a.at(i, i) + C64::new(PSD_CLAMP_TOL, 0.0));
    }
    let scale = a.frobenius_norm().max(1.0);
    let pivot_floor = -1e-12 * scale;
    let mut l = Matrix::zeros(d);
    for j in 0..d {
        let mut diag = a.at(j, j).re;
        for k in 0..j {
            diag -= l.at(j, k).norm_sqr();
        }
        if diag < pivot_floor {
            return Some(diag);
        }
        let root = diag.max(0.0).sqrt();
        l.set(j, j, C64::new(root, 0.0));
        if root == 0.0 {
            continue;
        }
        for i in (j + 1)..d {
            let mut v = a.at(i, j);
            for k in 0..j {
                v -= l.at(i, k) * l.at(j, k).conj();
            }
            l.set(i, j, v / root);
        }
    }
    None
}

/// Largest Frobenius defect of the state under adjacent-register swaps.
fn max_swap_defect(state: &HermitianMatrix, qubits: usize, registers: usize) -> f64 {
    let reg_dim = 1usize << qubits;
    let dim = state.dim();
    let mut worst = 0.0f64;
    for swap_at in 0..registers.saturating_sub(1) {
        // Permute the base-2^n digits of each index, swapping positions
        // swap_at and swap_at + 1 (register 0 most significant).
        let perm = |idx: usize| -> usize {
            let mut digits = vec![0usize; registers];
            let mut rest = idx;
            for slot in (0..registers).rev() {
                digits[slot] = rest % reg_dim;
                rest /= reg_dim;
            }
            digits.swap(swap_at, swap_at + 1);
            digits.iter().fold(0, |acc, &d| acc * reg_dim + d)
        };
        let mut sum = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                let diff = state.at(r, c) - state.at(perm(r), perm(c));
                sum += diff.norm_sqr();
            }
        }
        worst = worst.max(sum.sqrt());
    }
    worst
}

/// Which acceptance counts j out of k lie in the window |j/k - b| <= eps/2.
fn accepted_counts(registers: usize, b: f64, epsilon: f64) -> Vec<usize> {
    (0..=registers)
        .filter(|&j| (j as f64 / registers as f64 - b).abs() <= epsilon / 2.0)
        .collect()
}

/// The amplified measurement E*: apply E to each of the k registers and
/// accept iff the fraction of accepting registers is within eps/2 of b.
/// E* = sum over accepted patterns s of (x)_j M_{s_j}, M_1 = E, M_0 = I - E.
pub fn amplified_measurement(
    e: &Measurement,
    b: f64,
    epsilon: f64,
    registers: usize,
) -> Result<HermitianMatrix> {
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::BadProbability { value: b });
    }
    amplified_dim(e.qubits(), registers)?;
    let m1 = e.matrix().matrix().clone();
    let m0 = Matrix::identity(e.dim()).sub(&m1);

    // levels[j] = sum over patterns with j accepting registers of the
    // Kronecker products; built register by register.
    let mut levels: Vec<Matrix> = vec![Matrix::identity(1)];
    for _ in 0..registers {
        let prev_dim = levels[0].dim();
        let mut next = vec![Matrix::zeros(prev_dim * e.dim()); levels.len() + 1];
        for (j, level) in levels.iter().enumerate() {
            next[j] = next[j].add(&level.kron(&m0));
            next[j + 1] = next[j + 1].add(&level.kron(&m1));
        }
        levels = next;
    }

    let mut estar = Matrix::zeros(levels[0].dim());
    for j in accepted_counts(registers, b, epsilon) {
        estar = estar.add(&levels[j]);
    }
    HermitianMatrix::hermitized(estar)
}

/// Learner configuration for the postselection strategy.
#[derive(Clone, Copy, Debug)]
pub struct PostselLearnerConfig {
    pub epsilon: f64,
    pub registers: usize,
    /// Feedback must satisfy |b_t - Tr(E_t rho)| <= feedback_tolerance;
    /// defaults to epsilon/6, the value the update-threshold analysis uses.
    pub feedback_tolerance: f64,
}

impl PostselLearnerConfig {
    pub fn new(epsilon: f64, registers: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::EpsilonOutOfRange { epsilon });
        }
        Ok(PostselLearnerConfig {
            epsilon,
            registers,
            feedback_tolerance: epsilon / 6.0,
        })
    }

    pub fn validate(&self, qubits: usize) -> Result<()> {
        amplified_dim(qubits, self.registers)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::EpsilonOutOfRange {
                epsilon: self.epsilon,
            });
        }
        Ok(())
    }
}

/// Theoretical register count k = ceil((C/eps^2) ln(n/eps)), clamped to the
/// largest k that keeps 2^{kn} within the dimension cap.
pub fn suggested_registers(qubits: usize, epsilon: f64, c: f64) -> usize {
    let n = qubits.max(1) as f64;
    let theoretical = (c / (epsilon * epsilon)) * (n / epsilon).ln();
    let theoretical = theoretical.ceil().max(1.0) as usize;
    let mut largest = 1;
    for k in 1..=REGISTER_CAP {
        if amplified_dim(qubits.max(1), k).is_ok() {
            largest = k;
        } else {
            break;
        }
    }
    theoretical.min(largest)
}

/// Outcome of one postselection iteration.
#[derive(Clone, Debug)]
pub struct PostselStep {
    pub hypothesis: AmplifiedHypothesis,
    /// Tr(E* omega*) evaluated on the incoming hypothesis.
    pub acceptance: f64,
    pub updated: bool,
}

/// One iteration of the postselection strategy: keep the hypothesis when
/// Tr(E* omega*) >= 1 - eps/6, otherwise postselect on E* accepting.
///
/// The update applies the 2^k pattern Kraus operators K_s = (x)_j sqrt(M_{s_j})
/// over accepted patterns s. All K_s share the eigenbasis V_E^{(x) k}, so the
/// operator sum is evaluated there as a Hadamard product instead of 2^k dense
/// multiplications.
pub fn postselection_step(
    hypothesis: &AmplifiedHypothesis,
    e: &Measurement,
    b: f64,
    cfg: &PostselLearnerConfig,
) -> Result<PostselStep> {
    cfg.validate(hypothesis.qubits())?;
    if e.qubits() != hypothesis.qubits() {
        return Err(Error::DimensionMismatch {
            left: e.dim(),
            right: 1 << hypothesis.qubits(),
        });
    }
    if cfg.registers != hypothesis.registers() {
        return Err(Error::InvalidConfig(format!(
            "config expects {} registers, hypothesis has {}",
            cfg.registers,
            hypothesis.registers()
        )));
    }
    let k = hypothesis.registers();
    let estar = amplified_measurement(e, b, cfg.epsilon, k)?;
    let acceptance = trace_inner(&estar, hypothesis.state())?;
    if acceptance >= 1.0 - cfg.epsilon / 6.0 {
        return Ok(PostselStep {
            hypothesis: hypothesis.clone(),
            acceptance,
            updated: false,
        });
    }
    if acceptance <= ZERO_PROB_TOL {
        return Err(Error::DegeneratePostselection {
            probability: acceptance,
        });
    }

    let accepted = accepted_counts(k, b, cfg.epsilon);
    let next = postselect_patterns(hypothesis, e, &accepted, acceptance)?;
    Ok(PostselStep {
        hypothesis: next,
        acceptance,
        updated: true,
    })
}

/// sum_{s accepted} K_s omega K_s / p evaluated in the shared eigenbasis of E.
fn postselect_patterns(
    hypothesis: &AmplifiedHypothesis,
    e: &Measurement,
    accepted: &[usize],
    acceptance: f64,
) -> Result<AmplifiedHypothesis> {
    let k = hypothesis.registers();
    let reg_dim = e.dim();
    let dim = hypothesis.dim();

    let dec = eig_hermitian(e.matrix())?;
    let mu: Vec<f64> = dec
        .eigenvalues
        .iter()
        .map(|&l| l.clamp(0.0, 1.0))
        .collect();

    // V = V_E^{(x) k}; register 0 most significant, matching the Kronecker
    // convention of amplified_measurement.
    let mut v = Matrix::identity(1);
    for _ in 0..k {
        v = v.kron(&dec.eigenvectors);
    }
    let w = v.adjoint().mul(hypothesis.state().matrix()).mul(&v);

    // Pairwise square-root factors per eigenvalue pair.
    let s1: Vec<Vec<f64>> = (0..reg_dim)
        .map(|a| (0..reg_dim).map(|bb| (mu[a] * mu[bb]).sqrt()).collect())
        .collect();
    let s0: Vec<Vec<f64>> = (0..reg_dim)
        .map(|a| {
            (0..reg_dim)
                .map(|bb| ((1.0 - mu[a]) * (1.0 - mu[bb])).sqrt())
                .collect()
        })
        .collect();

    let digits = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0usize; k];
        for slot in (0..k).rev() {
            out[slot] = idx % reg_dim;
            idx /= reg_dim;
        }
        out
    };
    let index_digits: Vec<Vec<usize>> = (0..dim).map(digits).collect();

    let mut accepted_mask = vec![false; k + 1];
    for &c in accepted {
        accepted_mask[c] = true;
    }

    // Q[I][J] = sum over accepted patterns s of prod_j f(s_j, I_j, J_j),
    // collected per acceptance count by a polynomial convolution.
    let mut x = Matrix::zeros(dim);
    let mut poly = vec![0.0f64; k + 1];
    let mut next = vec![0.0f64; k + 1];
    for r in 0..dim {
        for c in 0..dim {
            poly.iter_mut().for_each(|p| *p = 0.0);
            poly[0] = 1.0;
            let (dr, dc) = (&index_digits[r], &index_digits[c]);
            for j in 0..k {
                let f0 = s0[dr[j]][dc[j]];
                let f1 = s1[dr[j]][dc[j]];
                next.iter_mut().for_each(|p| *p = 0.0);
                for deg in 0..=j {
                    let coeff = poly[deg];
                    if coeff != 0.0 {
                        next[deg] += coeff * f0;
                        next[deg + 1] += coeff * f1;
                    }
                }
                std::mem::swap(&mut poly, &mut next);
            }
            let q: f64 = (0..=k).filter(|&j| accepted_mask[j]).map(|j| poly[j]).sum();
            x.set(r, c, w.at(r, c) * (q / acceptance));
        }
    }

    let updated = v.mul(&x).mul(&v.adjoint());
    AmplifiedHypothesis::new(
        hypothesis.qubits(),
        hypothesis.registers(),
        HermitianMatrix::hermitized(updated)?,
    )
}

/// Single-register hypothesis: trace out all but the first register. By
/// permutation symmetry any register gives the same state.
pub fn reduced_hypothesis(hypothesis: &AmplifiedHypothesis) -> Result<DensityMatrix> {
    let factor_dims = vec![1usize << hypothesis.qubits(); hypothesis.registers()];
    let reduced = partial_trace(hypothesis.state(), &factor_dims, &[0])?;
    DensityMatrix::new(hypothesis.qubits(), reduced)
}

/// Drive the postselection learner against a hidden state over a measurement
/// stream. Feedback must respect the configured tolerance; on every "good"
/// iteration (no update) the prediction is checked against the 2 eps / 3
/// guarantee.
pub fn run_postselection_learner(
    rho_hidden: &DensityMatrix,
    measurements: &[Measurement],
    feedback: FeedbackMode,
    rng: &mut RngStream,
    cfg: &PostselLearnerConfig,
) -> Result<Vec<TrialRecord>> {
    cfg.validate(rho_hidden.qubits())?;
    match feedback {
        FeedbackMode::Exact => {}
        FeedbackMode::NoisyInterval { epsilon } => {
            if epsilon > cfg.feedback_tolerance {
                return Err(Error::InvalidConfig(format!(
                    "feedback noise {epsilon} exceeds the configured tolerance {}",
                    cfg.feedback_tolerance
                )));
            }
        }
        FeedbackMode::Bernoulli => {
            return Err(Error::InvalidConfig(
                "the postselection learner needs interval feedback, not Bernoulli".into(),
            ));
        }
    }

    let mut hypothesis = AmplifiedHypothesis::maximally_mixed(rho_hidden.qubits(), cfg.registers)?;
    let mut records = Vec::with_capacity(measurements.len());
    let mut cum_loss = 0.0;
    let mut cum_comparator = 0.0;

    for (i, e) in measurements.iter().enumerate() {
        let t = (i + 1) as u64;
        let true_p = born_probability(e, rho_hidden)?;
        let b = make_feedback(feedback, true_p, rng)?;
        let reduced = reduced_hypothesis(&hypothesis)?;
        let prediction = born_probability(e, &reduced)?;

        let step = postselection_step(&hypothesis, e, b, cfg)?;
        if !step.updated && (prediction - b).abs() > 2.0 * cfg.epsilon / 3.0 + 1e-9 {
            return Err(Error::InvariantViolation {
                t,
                what: format!(
                    "good iteration with |prediction - b| = {} > 2 eps / 3",
                    (prediction - b).abs()
                ),
            });
        }
        hypothesis = step.hypothesis;

        let loss = (prediction - b).abs();
        let comparator_loss = (true_p - b).abs();
        cum_loss += loss;
        cum_comparator += comparator_loss;
        records.push(TrialRecord {
            t,
            prediction,
            feedback: b,
            loss,
            cum_loss,
            cum_comparator_loss: cum_comparator,
            cum_regret: cum_loss - cum_comparator,
            mistake: (prediction - true_p).abs() > cfg.epsilon,
            updated: step.updated,
        });
    }
    Ok(records)
}

/// Outcome of sequentially postselecting a state through k measurements.
#[derive(Clone, Debug)]
pub struct UnionBoundReport {
    pub k: usize,
    /// max_i (1 - Tr(E_i phi)) on the original state.
    pub epsilon_max: f64,
    /// Product of the per-step acceptance probabilities.
    pub success_prob: f64,
    /// ||phi_tilde - phi||_Tr; None when a postselection was degenerate.
    pub trace_dist: Option<f64>,
    pub degenerate: bool,
    pub bounds_ok: bool,
}

/// Check the quantum union bound numerically: success probability at least
/// 1 - 2 sqrt(k eps) and disturbance at most 4 sqrt(k eps).
pub fn union_bound_check(
    phi: &DensityMatrix,
    measurements: &[Measurement],
) -> Result<UnionBoundReport> {
    let k = measurements.len();
    let mut epsilon_max = 0.0f64;
    for e in measurements {
        epsilon_max = epsilon_max.max(1.0 - born_probability(e, phi)?);
    }

    let mut current = phi.clone();
    let mut success_prob = 1.0;
    for e in measurements {
        match postselect(e, &current)? {
            PostselectOutcome::Accepted { state, probability } => {
                success_prob *= probability;
                current = state;
            }
            PostselectOutcome::Degenerate => {
                return Ok(UnionBoundReport {
                    k,
                    epsilon_max,
                    success_prob: 0.0,
                    trace_dist: None,
                    degenerate: true,
                    bounds_ok: false,
                });
            }
        }
    }

    let diff = current.matrix().sub(phi.matrix());
    let trace_dist = trace_norm(&diff)?;
    let ke = (k as f64 * epsilon_max).sqrt();
    let bounds_ok = success_prob >= 1.0 - 2.0 * ke - 1e-9 && trace_dist <= 4.0 * ke + 1e-9;
    Ok(UnionBoundReport {
        k,
        epsilon_max,
        success_prob,
        trace_dist: Some(trace_dist),
        degenerate: false,
        bounds_ok,
    })
}
