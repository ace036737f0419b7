//! The online learners: the matrix-multiplicative-weights update, the
//! entropy-regularized follow-the-leader update (solved in closed form as a
//! Gibbs state), gradient construction, the mistake-filtered wrapper, and the
//! theoretical regret/mistake bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{loss_subderivative, LossSpec};
use crate::qmodel::{born_probability, DensityMatrix, Measurement};
use crate::spectra::{self, eig_hermitian, spectral_norm, trace_inner, HermitianMatrix};

const LN2: f64 = std::f64::consts::LN_2;

/// Largest admissible learning rate; the update rules require eta < 1/2.
pub const ETA_MAX: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Rftl,
    Mmw,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Rftl => write!(f, "rftl"),
            Variant::Mmw => write!(f, "mmw"),
        }
    }
}

/// Immutable learner state; updates return new values.
#[derive(Clone, Debug)]
pub struct LearnerState {
    qubits: usize,
    eta: f64,
    lipschitz: f64,
    variant: Variant,
    grad_sum: HermitianMatrix,
    iterate: DensityMatrix,
    t: u64,
    update_count: u64,
}

impl LearnerState {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Sum of the gradients fed so far.
    pub fn grad_sum(&self) -> &HermitianMatrix {
        &self.grad_sum
    }

    /// Current hypothesis omega_t.
    pub fn iterate(&self) -> &DensityMatrix {
        &self.iterate
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Scaling applied to the accumulated gradient inside the exponent:
    /// eta for RFTL, eta/L for MMW.
    pub fn exponent_scale(&self) -> f64 {
        match self.variant {
            Variant::Rftl => self.eta,
            Variant::Mmw => self.eta / self.lipschitz,
        }
    }
}

/// Fresh learner with the maximally mixed initial hypothesis.
pub fn initial_state(
    qubits: usize,
    eta: f64,
    lipschitz: f64,
    variant: Variant,
) -> Result<LearnerState> {
    if !(eta > 0.0 && eta < ETA_MAX) {
        return Err(Error::EtaOutOfRange { eta });
    }
    if lipschitz <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    let iterate = DensityMatrix::maximally_mixed(qubits)?;
    Ok(LearnerState {
        qubits,
        eta,
        lipschitz,
        variant,
        grad_sum: HermitianMatrix::zeros(iterate.dim()),
        iterate,
        t: 0,
        update_count: 0,
    })
}

/// Loss gradient: l'(Tr(E omega)) E. Its spectral norm is at most the loss's
/// Lipschitz constant.
pub fn gradient(
    spec: LossSpec,
    e: &Measurement,
    omega: &DensityMatrix,
) -> Result<HermitianMatrix> {
    let prediction = born_probability(e, omega)?;
    let scalar = loss_subderivative(spec, prediction);
    Ok(e.matrix().scale_re(scalar))
}

/// Bernoulli-feedback gradient 2 (Tr(E omega) - Y) E; an unbiased estimate of
/// the exact-feedback L2 gradient, used with effective Lipschitz constant 2.
pub fn bernoulli_gradient(prediction: f64, y: f64, e: &Measurement) -> HermitianMatrix {
    e.matrix().scale_re(2.0 * (prediction - y))
}

/// Normalized matrix exponential exp(X)/Tr(exp(X)), computed with the
/// spectrum shifted by its maximum for overflow safety. Positive definite by
/// construction.
fn gibbs_state(qubits: usize, exponent: &HermitianMatrix) -> Result<DensityMatrix> {
    let dec = eig_hermitian(exponent)?;
    let shift = dec.max_eigenvalue();
    let weights: Vec<f64> = dec.eigenvalues.iter().map(|l| (l - shift).exp()).collect();
    let z: f64 = weights.iter().sum();
    let normalized: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let m = dec.recombine(&normalized);
    DensityMatrix::new(qubits, HermitianMatrix::hermitized(m)?)
}

fn advance(state: &LearnerState, grad: &HermitianMatrix) -> Result<LearnerState> {
    if grad.dim() != state.grad_sum.dim() {
        return Err(Error::DimensionMismatch {
            left: grad.dim(),
            right: state.grad_sum.dim(),
        });
    }
    let grad_sum = state.grad_sum.add(grad);
    let exponent = grad_sum.scale_re(-state.exponent_scale());
    let iterate = gibbs_state(state.qubits, &exponent)?;
    Ok(LearnerState {
        grad_sum,
        iterate,
        t: state.t + 1,
        update_count: state.update_count + 1,
        ..state.clone()
    })
}

/// Matrix-multiplicative-weights step:
/// omega_{t+1} = exp(-(eta/L) sum grad) / Tr(exp(-(eta/L) sum grad)).
/// Requires the gradient's spectral norm to stay within the Lipschitz bound.
pub fn mmw_update(state: &LearnerState, grad: &HermitianMatrix) -> Result<LearnerState> {
    if state.variant != Variant::Mmw {
        return Err(Error::VariantMismatch {
            state: state.variant.to_string(),
            update: "mmw".into(),
        });
    }
    let norm = spectral_norm(grad)?;
    if norm > state.lipschitz + 1e-9 {
        return Err(Error::GradientNormExceeded {
            norm,
            lipschitz: state.lipschitz,
        });
    }
    advance(state, grad)
}

/// Entropy-regularized follow-the-leader step. The minimizer of
/// eta (sum grad . phi) + sum_i lambda_i(phi) log lambda_i(phi) over density
/// matrices is the Gibbs state exp(-eta sum grad)/Tr(exp(-eta sum grad));
/// the update computes that closed form.
pub fn rftl_update(state: &LearnerState, grad: &HermitianMatrix) -> Result<LearnerState> {
    if state.variant != Variant::Rftl {
        return Err(Error::VariantMismatch {
            state: state.variant.to_string(),
            update: "rftl".into(),
        });
    }
    advance(state, grad)
}

/// Dispatch to the state's own update rule.
pub fn update(state: &LearnerState, grad: &HermitianMatrix) -> Result<LearnerState> {
    match state.variant {
        Variant::Rftl => rftl_update(state, grad),
        Variant::Mmw => mmw_update(state, grad),
    }
}

/// The follow-the-leader objective
/// eta (grad_sum . phi) + sum_i lambda_i(phi) log lambda_i(phi), in nats.
pub fn rftl_objective(phi: &DensityMatrix, grad_sum: &HermitianMatrix, eta: f64) -> Result<f64> {
    let linear = trace_inner(grad_sum, phi.matrix())?;
    let entropy = spectra::von_neumann_entropy(phi.matrix())?;
    Ok(eta * linear - entropy)
}

/// One step of the mistake-filtered wrapper: predict, then update with L1
/// loss only when the loss exceeds 2 epsilon / 3 (strictly).
pub struct MistakeStep {
    pub state: LearnerState,
    pub predicted: f64,
    pub updated: bool,
}

pub fn mistake_filtered_step(
    state: &LearnerState,
    e: &Measurement,
    b: f64,
    epsilon: f64,
) -> Result<MistakeStep> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::EpsilonOutOfRange { epsilon });
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::BadProbability { value: b });
    }
    let predicted = born_probability(e, state.iterate())?;
    if (predicted - b).abs() > 2.0 * epsilon / 3.0 {
        let spec = LossSpec::l1(b)?;
        let grad = gradient(spec, e, state.iterate())?;
        let next = update(state, &grad)?;
        Ok(MistakeStep {
            state: next,
            predicted,
            updated: true,
        })
    } else {
        Ok(MistakeStep {
            state: state.clone(),
            predicted,
            updated: false,
        })
    }
}

/// Proven regret bound after T iterations:
/// RFTL 2L sqrt(2 ln2 T n), MMW 2L sqrt(ln2 T n).
pub fn theoretical_regret_bound(variant: Variant, t: u64, qubits: usize, lipschitz: f64) -> f64 {
    let tn = (t as f64) * (qubits as f64);
    match variant {
        Variant::Rftl => 2.0 * lipschitz * (2.0 * LN2 * tn).sqrt(),
        Variant::Mmw => 2.0 * lipschitz * (LN2 * tn).sqrt(),
    }
}

/// Learning rate from the regret theorems for a declared horizon T:
/// RFTL sqrt(ln2 n / (2 T L^2)), MMW sqrt(ln2 n / (4 T)).
pub fn theorem_eta(variant: Variant, t: u64, qubits: usize, lipschitz: f64) -> f64 {
    let n = qubits as f64;
    let t = t as f64;
    match variant {
        Variant::Rftl => (LN2 * n / (2.0 * t * lipschitz * lipschitz)).sqrt(),
        Variant::Mmw => (LN2 * n / (4.0 * t)).sqrt(),
    }
}

/// Theorem learning rate clamped below the eta < 1/2 input contract. The
/// theorems' value can exceed 1/2 for tiny T L^2; the clamp keeps the update
/// rule admissible.
pub fn default_eta(variant: Variant, t: u64, qubits: usize, lipschitz: f64) -> f64 {
    theorem_eta(variant, t, qubits, lipschitz).min(ETA_MAX * (1.0 - 1e-12))
}

/// Update budget of the mistake-filtered wrapper, from solving
/// (epsilon/3) T <= theoretical_regret_bound(variant, T, n, 1):
/// MMW 36 ln2 n / eps^2, RFTL 72 ln2 n / eps^2.
pub fn mistake_bound(variant: Variant, qubits: usize, epsilon: f64) -> f64 {
    let n = qubits as f64;
    let c = match variant {
        Variant::Mmw => 36.0,
        Variant::Rftl => 72.0,
    };
    c * LN2 * n / (epsilon * epsilon)
}

/// Per-iteration regret accounting: rows plus running sums.
#[derive(Clone, Debug, Default)]
pub struct RegretLedger {
    rows: Vec<LedgerRow>,
    cum_loss: f64,
    cum_comparator_loss: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LedgerRow {
    pub t: u64,
    pub prediction: f64,
    pub loss: f64,
    pub comparator_loss: Option<f64>,
}

impl RegretLedger {
    pub fn new() -> Self {
        RegretLedger::default()
    }

    pub fn push(&mut self, row: LedgerRow) {
        self.cum_loss += row.loss;
        self.cum_comparator_loss += row.comparator_loss.unwrap_or(0.0);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn cum_loss(&self) -> f64 {
        self.cum_loss
    }

    pub fn cum_comparator_loss(&self) -> f64 {
        self.cum_comparator_loss
    }

    /// Cumulative loss minus the comparator's cumulative loss.
    pub fn regret(&self) -> f64 {
        self.cum_loss - self.cum_comparator_loss
    }

    /// Cumulative fields must equal the sums of their rows within 1e-9.
    pub fn check_prefix_sums(&self) -> Result<()> {
        let loss: f64 = self.rows.iter().map(|r| r.loss).sum();
        let comp: f64 = self
            .rows
            .iter()
            .map(|r| r.comparator_loss.unwrap_or(0.0))
            .sum();
        if (loss - self.cum_loss).abs() > 1e-9 || (comp - self.cum_comparator_loss).abs() > 1e-9 {
            return Err(Error::InvariantViolation {
                t: self.rows.len() as u64,
                what: "ledger cumulative sums drifted from row sums".into(),
            });
        }
        Ok(())
    }
}

/// Minimum eigenvalue of the current iterate; positive for every state the
/// updates produce.
pub fn iterate_min_eigenvalue(state: &LearnerState) -> Result<f64> {
    Ok(eig_hermitian(state.iterate().matrix())?.min_eigenvalue())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use crate::qmodel::{random_density, random_measurement, RngStream};
    use crate::spectra::Matrix;

    #[test]
    fn initial_state_examples() {
        let s = initial_state(1, 0.1, 1.0, Variant::Mmw).unwrap();
        assert!(s
            .iterate()
            .matrix()
            .max_abs_diff(&HermitianMatrix::diagonal(&[0.5, 0.5]))
            < 1e-15);
        assert_eq!(s.t(), 0);

        let s3 = initial_state(3, 0.1, 1.0, Variant::Rftl).unwrap();
        let entropy = spectra::von_neumann_entropy(s3.iterate().matrix()).unwrap();
        assert!((entropy - 3.0 * LN2).abs() < 1e-10);

        assert!(matches!(
            initial_state(1, 0.7, 1.0, Variant::Mmw),
            Err(Error::EtaOutOfRange { .. })
        ));
        assert!(initial_state(1, 0.0, 1.0, Variant::Mmw).is_err());
    }

    #[test]
    fn gradient_examples() {
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        let e = Measurement::basis_projector(1, 0).unwrap();

        // L2 with b equal to the prediction: zero matrix.
        let spec = LossSpec::l2(0.5).unwrap();
        let g = gradient(spec, &e, &mixed).unwrap();
        assert!(g.max_abs_diff(&HermitianMatrix::zeros(2)) < 1e-12);

        // L2, prediction 0.5, b = 1: gradient 2(0.5 - 1) E = -E.
        let spec = LossSpec::l2(1.0).unwrap();
        let g = gradient(spec, &e, &mixed).unwrap();
        assert!(g.max_abs_diff(&e.matrix().scale_re(-1.0)) < 1e-12);

        // L1 sign structure.
        let above = LossSpec::l1(0.2).unwrap();
        let g = gradient(above, &e, &mixed).unwrap();
        assert!(g.max_abs_diff(e.matrix()) < 1e-12);
        let below = LossSpec::l1(0.9).unwrap();
        let g = gradient(below, &e, &mixed).unwrap();
        assert!(g.max_abs_diff(&e.matrix().scale_re(-1.0)) < 1e-12);
    }

    #[test]
    fn gradient_norm_bounded_by_lipschitz() {
        let mut rng = RngStream::from_seed(40);
        for kind in [LossKind::L1, LossKind::L2] {
            for _ in 0..20 {
                let omega = random_density(2, &mut rng).unwrap();
                let e = random_measurement(2, &mut rng).unwrap();
                let spec = LossSpec::new(kind, rng.uniform()).unwrap();
                let g = gradient(spec, &e, &omega).unwrap();
                assert!(spectral_norm(&g).unwrap() <= spec.lipschitz() + 1e-12);
            }
        }
    }

    #[test]
    fn mmw_zero_gradient_stays_mixed() {
        let mut state = initial_state(2, 0.1, 1.0, Variant::Mmw).unwrap();
        let zero = HermitianMatrix::zeros(4);
        for _ in 0..5 {
            state = mmw_update(&state, &zero).unwrap();
            let mixed = DensityMatrix::maximally_mixed(2).unwrap();
            assert!(state.iterate().matrix().max_abs_diff(mixed.matrix()) < 1e-12);
        }
        assert_eq!(state.t(), 5);
        assert_eq!(state.update_count(), 5);
    }

    #[test]
    fn mmw_single_gradient_softmax() {
        // One gradient -E with E = |0><0| and eta/L = 0.1 gives the diagonal
        // softmax diag(e^{0.1}, 1) / (e^{0.1} + 1).
        let state = initial_state(1, 0.1, 1.0, Variant::Mmw).unwrap();
        let e = Measurement::basis_projector(1, 0).unwrap();
        let next = mmw_update(&state, &e.matrix().scale_re(-1.0)).unwrap();
        let z = 0.1f64.exp() + 1.0;
        let expected = HermitianMatrix::diagonal(&[0.1f64.exp() / z, 1.0 / z]);
        assert!(next.iterate().matrix().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn mmw_commuting_gradients_match_scalar_softmax() {
        // Diagonal gradients commute; the iterate is the entrywise softmax of
        // -(eta/L) times the accumulated diagonal.
        let eta = 0.2;
        let l = 2.0;
        let mut state = initial_state(2, eta, l, Variant::Mmw).unwrap();
        let mut rng = RngStream::from_seed(55);
        let mut acc = [0.0; 4];
        for _ in 0..10 {
            let diag: Vec<f64> = (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            for (a, d) in acc.iter_mut().zip(&diag) {
                *a += d;
            }
            state = mmw_update(&state, &HermitianMatrix::diagonal(&diag)).unwrap();

            let weights: Vec<f64> = acc.iter().map(|a| (-eta / l * a).exp()).collect();
            let z: f64 = weights.iter().sum();
            let expected: Vec<f64> = weights.iter().map(|w| w / z).collect();
            assert!(state
                .iterate()
                .matrix()
                .max_abs_diff(&HermitianMatrix::diagonal(&expected))
                < 1e-12);
        }
    }

    #[test]
    fn mmw_rejects_oversized_gradient() {
        let state = initial_state(1, 0.1, 1.0, Variant::Mmw).unwrap();
        let big = HermitianMatrix::diagonal(&[1.5, 0.0]);
        assert!(matches!(
            mmw_update(&state, &big),
            Err(Error::GradientNormExceeded { .. })
        ));
    }

    #[test]
    fn variant_mismatch_rejected() {
        let state = initial_state(1, 0.1, 1.0, Variant::Rftl).unwrap();
        let zero = HermitianMatrix::zeros(2);
        assert!(matches!(
            mmw_update(&state, &zero),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn rftl_zero_gradient_maximizes_entropy() {
        let state = initial_state(2, 0.1, 1.0, Variant::Rftl).unwrap();
        let next = rftl_update(&state, &HermitianMatrix::zeros(4)).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(next.iterate().matrix().max_abs_diff(mixed.matrix()) < 1e-12);
    }

    #[test]
    fn rftl_diagonal_closed_form() {
        // eta * grad_sum = diag(1, 0) gives diag(e^-1, 1)/(e^-1 + 1); oracle is
        // scalar minimization of eta g p + p ln p + (1-p) ln(1-p) over a grid.
        let eta = 0.25;
        let state = initial_state(1, eta, 1.0, Variant::Rftl).unwrap();
        let grad = HermitianMatrix::diagonal(&[1.0 / eta, 0.0]);
        // Spectral norm of this gradient is 4 > L, but RFTL has no norm
        // precondition; it realizes eta * grad_sum = diag(1, 0).
        let next = rftl_update(&state, &grad).unwrap();
        let z = (-1.0f64).exp() + 1.0;
        let expected = HermitianMatrix::diagonal(&[(-1.0f64).exp() / z, 1.0 / z]);
        assert!(next.iterate().matrix().max_abs_diff(&expected) < 1e-12);

        // Grid-search oracle over p in [0,1].
        let objective = |p: f64| {
            let mut v = 1.0 * p; // eta * grad_sum has top-left entry 1
            if p > 0.0 {
                v += p * p.ln();
            }
            if p < 1.0 {
                v += (1.0 - p) * (1.0 - p).ln();
            }
            v
        };
        let mut best_p = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..=100_000 {
            let p = i as f64 / 100_000.0;
            let v = objective(p);
            if v < best {
                best = v;
                best_p = p;
            }
        }
        assert!((best_p - (-1.0f64).exp() / z).abs() < 1e-4);
    }

    #[test]
    fn rftl_objective_examples() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let zero = HermitianMatrix::zeros(4);
        let v = rftl_objective(&mixed, &zero, 0.1).unwrap();
        assert!((v + 2.0 * LN2).abs() < 1e-10);

        let pure = DensityMatrix::basis_state(2, 1).unwrap();
        let v = rftl_objective(&pure, &zero, 0.1).unwrap();
        assert!(v.abs() < 1e-10);

        // Random inputs: objective composes the spectral primitives.
        let mut rng = RngStream::from_seed(77);
        let phi = random_density(2, &mut rng).unwrap();
        let g = random_measurement(2, &mut rng).unwrap().matrix().clone();
        let eta = 0.3;
        let expected = eta * trace_inner(&g, phi.matrix()).unwrap()
            - spectra::von_neumann_entropy(phi.matrix()).unwrap();
        assert!((rftl_objective(&phi, &g, eta).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn rftl_iterate_beats_random_states() {
        let mut rng = RngStream::from_seed(90);
        let eta = 0.1;
        let mut state = initial_state(1, eta, 1.0, Variant::Rftl).unwrap();
        for _ in 0..5 {
            let e = random_measurement(1, &mut rng).unwrap();
            let spec = LossSpec::l1(rng.uniform()).unwrap();
            let grad = gradient(spec, &e, state.iterate()).unwrap();
            state = rftl_update(&state, &grad).unwrap();

            let obj_iterate = rftl_objective(state.iterate(), state.grad_sum(), eta).unwrap();
            for _ in 0..200 {
                let phi = random_density(1, &mut rng).unwrap();
                let obj_phi = rftl_objective(&phi, state.grad_sum(), eta).unwrap();
                assert!(obj_iterate <= obj_phi + 1e-9);
            }
        }
    }

    #[test]
    fn iterate_stays_positive_definite() {
        let mut rng = RngStream::from_seed(91);
        for variant in [Variant::Rftl, Variant::Mmw] {
            let mut state = initial_state(2, 0.2, 1.0, variant).unwrap();
            for _ in 0..20 {
                let e = random_measurement(2, &mut rng).unwrap();
                let spec = LossSpec::l1(rng.uniform()).unwrap();
                let grad = gradient(spec, &e, state.iterate()).unwrap();
                state = update(&state, &grad).unwrap();
                assert!(iterate_min_eigenvalue(&state).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn rftl_mmw_coincide_for_matched_eta() {
        // With eta_rftl = eta_mmw / L and identical gradient streams the two
        // updates produce the same Gibbs states.
        let l = 2.0;
        let eta_mmw = 0.3;
        let mut rftl = initial_state(1, eta_mmw / l, l, Variant::Rftl).unwrap();
        let mut mmw = initial_state(1, eta_mmw, l, Variant::Mmw).unwrap();
        let mut rng = RngStream::from_seed(92);
        for _ in 0..10 {
            let e = random_measurement(1, &mut rng).unwrap();
            let spec = LossSpec::l2(rng.uniform()).unwrap();
            let grad = gradient(spec, &e, rftl.iterate()).unwrap();
            rftl = rftl_update(&rftl, &grad).unwrap();
            mmw = mmw_update(&mmw, &grad).unwrap();
            assert!(rftl.iterate().matrix().max_abs_diff(mmw.iterate().matrix()) < 1e-9);
        }
    }

    #[test]
    fn mistake_filter_threshold() {
        let state = initial_state(1, 0.1, 1.0, Variant::Mmw).unwrap();
        let e = Measurement::basis_projector(1, 0).unwrap();

        // Prediction equals b: no update.
        let step = mistake_filtered_step(&state, &e, 0.5, 0.3).unwrap();
        assert!(!step.updated);
        assert_eq!(step.state.t(), 0);

        // |0.5 - 1.0| = 0.5 > 2*0.3/3 = 0.2: update.
        let step = mistake_filtered_step(&state, &e, 1.0, 0.3).unwrap();
        assert!(step.updated);
        assert_eq!(step.state.update_count(), 1);

        // Exactly at the boundary: strict inequality, no update.
        let epsilon = 0.75;
        let b = 0.0; // |0.5 - 0| = 0.5 = 2*0.75/3
        let step = mistake_filtered_step(&state, &e, b, epsilon).unwrap();
        assert!((step.predicted - 0.5).abs() < 1e-15);
        assert!(!step.updated);

        assert!(mistake_filtered_step(&state, &e, 0.5, 0.0).is_err());
        assert!(mistake_filtered_step(&state, &e, 1.5, 0.3).is_err());
    }

    #[test]
    fn bound_formulas() {
        let b = theoretical_regret_bound(Variant::Mmw, 100, 1, 1.0);
        assert!((b - 2.0 * (LN2 * 100.0).sqrt()).abs() < 1e-12);
        assert!((b - 16.651).abs() < 1e-3);

        let rftl = theoretical_regret_bound(Variant::Rftl, 123, 2, 1.5);
        let mmw = theoretical_regret_bound(Variant::Mmw, 123, 2, 1.5);
        assert!((rftl / mmw - 2f64.sqrt()).abs() < 1e-12);

        let eta_rftl = theorem_eta(Variant::Rftl, 400, 2, 1.0);
        assert!((eta_rftl - (LN2 * 2.0 / 800.0).sqrt()).abs() < 1e-15);
        let eta_mmw = theorem_eta(Variant::Mmw, 400, 2, 1.0);
        assert!((eta_mmw - (LN2 * 2.0 / 1600.0).sqrt()).abs() < 1e-15);

        // The theorem value can exceed the eta < 1/2 contract for tiny T L^2;
        // the default clamps.
        assert!(theorem_eta(Variant::Mmw, 1, 3, 1.0) > ETA_MAX);
        assert!(default_eta(Variant::Mmw, 1, 3, 1.0) < ETA_MAX);
    }

    #[test]
    fn mistake_bound_formulas() {
        let b = mistake_bound(Variant::Mmw, 2, 0.1);
        assert!((b - 36.0 * LN2 * 200.0).abs() < 1e-9);
        assert!((b - 4990.66).abs() < 0.5);

        // Scales by 4 when epsilon halves; RFTL doubles MMW.
        assert!((mistake_bound(Variant::Mmw, 1, 0.05) / mistake_bound(Variant::Mmw, 1, 0.1)
            - 4.0)
            .abs()
            < 1e-12);
        assert!((mistake_bound(Variant::Rftl, 3, 0.2) / mistake_bound(Variant::Mmw, 3, 0.2)
            - 2.0)
            .abs()
            < 1e-12);
    }

    #[test]
    fn grad_sum_norm_bounded() {
        let mut rng = RngStream::from_seed(93);
        let mut state = initial_state(1, 0.1, 1.0, Variant::Mmw).unwrap();
        for _ in 0..15 {
            let e = random_measurement(1, &mut rng).unwrap();
            let spec = LossSpec::l1(rng.uniform()).unwrap();
            let grad = gradient(spec, &e, state.iterate()).unwrap();
            state = mmw_update(&state, &grad).unwrap();
            let norm = spectral_norm(state.grad_sum()).unwrap();
            assert!(norm <= state.lipschitz() * state.update_count() as f64 + 1e-6);
        }
    }

    #[test]
    fn ledger_prefix_sums() {
        let mut ledger = RegretLedger::new();
        for t in 1..=10 {
            ledger.push(LedgerRow {
                t,
                prediction: 0.5,
                loss: 0.125 * t as f64,
                comparator_loss: Some(0.0625),
            });
        }
        ledger.check_prefix_sums().unwrap();
        assert!((ledger.regret() - (ledger.cum_loss() - ledger.cum_comparator_loss())).abs() == 0.0);
    }

    #[test]
    fn bernoulli_gradient_convention() {
        // 2 (prediction - Y) E, the unbiased L2 gradient under 0/1 feedback.
        let e = Measurement::basis_projector(1, 0).unwrap();
        let g = bernoulli_gradient(0.5, 1.0, &e);
        assert!(g.max_abs_diff(&e.matrix().scale_re(-1.0)) < 1e-15);
        let g = bernoulli_gradient(0.25, 0.0, &e);
        assert!(g.max_abs_diff(&e.matrix().scale_re(0.5)) < 1e-15);
        // Effective Lipschitz constant 2 on [0,1] targets.
        assert!(spectral_norm(&bernoulli_gradient(1.0, 0.0, &e)).unwrap() <= 2.0 + 1e-12);
    }

    #[test]
    fn linearized_regret_dominates_true_regret() {
        // Convexity step of the regret proofs:
        // sum [l_t(w_t) - l_t(phi)] <= sum grad_t . (w_t - phi).
        let mut rng = RngStream::from_seed(95);
        for variant in [Variant::Rftl, Variant::Mmw] {
            let comparator = random_density(2, &mut rng).unwrap();
            let mut state = initial_state(2, 0.1, 1.0, variant).unwrap();
            let t_max = 40;
            let mut true_regret = 0.0;
            let mut linearized = 0.0;
            for _ in 0..t_max {
                let e = random_measurement(2, &mut rng).unwrap();
                let spec = LossSpec::l1(rng.uniform()).unwrap();
                let pred = born_probability(&e, state.iterate()).unwrap();
                let comp = born_probability(&e, &comparator).unwrap();
                true_regret += crate::loss::loss_value(spec, pred)
                    - crate::loss::loss_value(spec, comp);
                let grad = gradient(spec, &e, state.iterate()).unwrap();
                let diff = state.iterate().matrix().sub(comparator.matrix());
                linearized += trace_inner(&grad, &diff).unwrap();
                state = update(&state, &grad).unwrap();
            }
            assert!(
                true_regret <= linearized + 1e-8 * t_max as f64,
                "{variant}: {true_regret} vs {linearized}"
            );
        }
    }

    #[test]
    fn gibbs_handles_large_exponent_spread() {
        let exponent = HermitianMatrix::diagonal(&[0.0, -500.0]);
        let rho = gibbs_state(1, &exponent).unwrap();
        assert!((rho.matrix().at(0, 0).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_matches_unshifted_formula() {
        let mut rng = RngStream::from_seed(94);
        let g = Matrix::from_fn(4, |_, _| rng.complex_gaussian());
        let h = HermitianMatrix::hermitized(g).unwrap();
        let direct = spectra::matrix_exp(&h).unwrap();
        let z = direct.trace_re();
        let expected = direct.scale_re(1.0 / z);
        let gibbs = gibbs_state(2, &h).unwrap();
        assert!(gibbs.matrix().max_abs_diff(&expected) < 1e-12);
    }
}
