//! Loss functions and feedback channels: L1/L2 losses with targets, bounded
//! subderivatives, and exact/noisy-interval/Bernoulli feedback generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmodel::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    L1,
    L2,
}

impl LossKind {
    /// Lipschitz constant of the loss on [0, 1]: 1 for L1, 2 for L2.
    pub fn lipschitz(self) -> f64 {
        match self {
            LossKind::L1 => 1.0,
            LossKind::L2 => 2.0,
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossKind::L1 => write!(f, "l1"),
            LossKind::L2 => write!(f, "l2"),
        }
    }
}

/// A loss with its target b in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    target: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, target: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::BadProbability { value: target });
        }
        Ok(LossSpec { kind, target })
    }

    pub fn l1(target: f64) -> Result<Self> {
        LossSpec::new(LossKind::L1, target)
    }

    pub fn l2(target: f64) -> Result<Self> {
        LossSpec::new(LossKind::L2, target)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn lipschitz(&self) -> f64 {
        self.kind.lipschitz()
    }
}

/// |x - b| or (x - b)^2.
pub fn loss_value(spec: LossSpec, x: f64) -> f64 {
    let d = x - spec.target;
    match spec.kind {
        LossKind::L1 => d.abs(),
        LossKind::L2 => d * d,
    }
}

/// Subderivative of the loss at x. For L1 the kink at x = b takes the value 0,
/// which makes the mistake-filtered learner's no-update behavior exact when
/// the prediction matches the target.
pub fn loss_subderivative(spec: LossSpec, x: f64) -> f64 {
    let d = x - spec.target;
    match spec.kind {
        LossKind::L1 => {
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::L2 => 2.0 * d,
    }
}

/// How the adversary turns the true probability Tr(E rho) into feedback.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// b_t = Tr(E_t rho) exactly.
    Exact,
    /// b_t = Tr(E_t rho) + uniform(-epsilon, epsilon), clipped to [0, 1];
    /// always satisfies |b_t - Tr(E_t rho)| <= epsilon.
    NoisyInterval { epsilon: f64 },
    /// A 0/1 draw with mean Tr(E_t rho).
    Bernoulli,
}

impl std::fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeedbackMode::Exact => write!(f, "exact"),
            FeedbackMode::NoisyInterval { epsilon } => write!(f, "noisy-interval({epsilon})"),
            FeedbackMode::Bernoulli => write!(f, "bernoulli"),
        }
    }
}

/// Generate feedback for a true acceptance probability.
pub fn make_feedback(mode: FeedbackMode, true_p: f64, rng: &mut RngStream) -> Result<f64> {
    if !(0.0..=1.0).contains(&true_p) {
        return Err(Error::BadProbability { value: true_p });
    }
    match mode {
        FeedbackMode::Exact => Ok(true_p),
        FeedbackMode::NoisyInterval { epsilon } => {
            if epsilon <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "noisy-interval feedback epsilon must be positive, got {epsilon}"
                )));
            }
            let noisy = true_p + rng.uniform_in(-epsilon, epsilon);
            Ok(noisy.clamp(0.0, 1.0))
        }
        FeedbackMode::Bernoulli => Ok(if rng.uniform() < true_p { 1.0 } else { 0.0 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        let l1 = LossSpec::l1(0.4).unwrap();
        assert_eq!(loss_value(l1, 0.4), 0.0);

        let l2 = LossSpec::l2(0.0).unwrap();
        assert_eq!(loss_value(l2, 1.0), 1.0);

        let l1b = LossSpec::l1(0.7).unwrap();
        assert!((loss_value(l1b, 0.25) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn target_out_of_range_rejected() {
        assert!(LossSpec::l1(1.2).is_err());
        assert!(LossSpec::l2(-0.1).is_err());
    }

    #[test]
    fn subderivative_values() {
        let l1 = LossSpec::l1(0.3).unwrap();
        assert_eq!(loss_subderivative(l1, 0.3), 0.0);
        assert_eq!(loss_subderivative(l1, 0.5), 1.0);
        assert_eq!(loss_subderivative(l1, 0.1), -1.0);

        let l2 = LossSpec::l2(1.0).unwrap();
        assert!((loss_subderivative(l2, 0.5) - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn subderivative_bounded_by_lipschitz() {
        for kind in [LossKind::L1, LossKind::L2] {
            for ib in 0..=10 {
                let spec = LossSpec::new(kind, ib as f64 / 10.0).unwrap();
                for ix in 0..=100 {
                    let x = ix as f64 / 100.0;
                    assert!(loss_subderivative(spec, x).abs() <= spec.lipschitz());
                }
            }
        }
    }

    #[test]
    fn convexity_witness() {
        let mut rng = RngStream::from_seed(100);
        for kind in [LossKind::L1, LossKind::L2] {
            for _ in 0..500 {
                let spec = LossSpec::new(kind, rng.uniform()).unwrap();
                let x = rng.uniform();
                let y = rng.uniform();
                let alpha = rng.uniform();
                let blend = loss_value(spec, alpha * x + (1.0 - alpha) * y);
                let bound = alpha * loss_value(spec, x) + (1.0 - alpha) * loss_value(spec, y);
                assert!(blend <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn subgradient_inequality() {
        // loss(y) >= loss(x) + loss'(x) (y - x), the first step of the regret
        // proofs.
        let mut rng = RngStream::from_seed(101);
        for kind in [LossKind::L1, LossKind::L2] {
            for _ in 0..500 {
                let spec = LossSpec::new(kind, rng.uniform()).unwrap();
                let x = rng.uniform();
                let y = rng.uniform();
                let lhs = loss_value(spec, y);
                let rhs = loss_value(spec, x) + loss_subderivative(spec, x) * (y - x);
                assert!(lhs >= rhs - 1e-12);
            }
        }
    }

    #[test]
    fn feedback_exact() {
        let mut rng = RngStream::from_seed(7);
        assert_eq!(
            make_feedback(FeedbackMode::Exact, 0.3, &mut rng).unwrap(),
            0.3
        );
    }

    #[test]
    fn feedback_noisy_interval_guarantee() {
        let mut rng = RngStream::from_seed(8);
        let mode = FeedbackMode::NoisyInterval { epsilon: 0.1 };
        for _ in 0..100_000 {
            let p = rng.uniform();
            let b = make_feedback(mode, p, &mut rng).unwrap();
            assert!((b - p).abs() <= 0.1 + 1e-15);
            assert!((0.0..=1.0).contains(&b));
        }
        let b = make_feedback(mode, 0.5, &mut rng).unwrap();
        assert!((0.4..=0.6).contains(&b));
    }

    #[test]
    fn feedback_bernoulli_mean() {
        let mut rng = RngStream::from_seed(9);
        let mut sum = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            sum += make_feedback(FeedbackMode::Bernoulli, 0.7, &mut rng).unwrap();
        }
        let mean = sum / draws as f64;
        assert!((mean - 0.7).abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn feedback_rejects_bad_probability() {
        let mut rng = RngStream::from_seed(10);
        assert!(make_feedback(FeedbackMode::Exact, 1.5, &mut rng).is_err());
        assert!(make_feedback(
            FeedbackMode::NoisyInterval { epsilon: 0.0 },
            0.5,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn feedback_mode_serde() {
        let m: FeedbackMode = serde_json::from_str(r#"{"mode":"exact"}"#).unwrap();
        assert_eq!(m, FeedbackMode::Exact);
        let m: FeedbackMode =
            serde_json::from_str(r#"{"mode":"noisy-interval","epsilon":0.05}"#).unwrap();
        assert_eq!(m, FeedbackMode::NoisyInterval { epsilon: 0.05 });
    }
}
