//! Verifiers and calculators for the information-theoretic bounds: pivot
//! translation, the serial-encoding bit bound, and the MMW-based
//! random-access-code adversary with its chain inequality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{self, Variant};
use crate::loss::LossSpec;
use crate::qmodel::{
    born_probability, random_density, random_measurement, DensityMatrix, MatrixJson, Measurement,
    RngStream,
};
use crate::spectra::{binary_entropy, HermitianMatrix};

const LN2: f64 = std::f64::consts::LN_2;

/// Translate a measurement so its pivot point a_v moves to 1/2:
/// E = E'/(2 a_v) when a_v >= 1/2, (E' + (1 - 2 a_v) I) / (2 (1 - a_v))
/// otherwise. Endpoints use the continuous limits a_v = 0 -> (E' + I)/2 and
/// a_v = 1 -> E'/2, which keep the affine pivot property.
pub fn pivot_translate(eprime: &Measurement, pivot: f64) -> Result<Measurement> {
    if !(0.0..=1.0).contains(&pivot) {
        return Err(Error::BadPivot { pivot });
    }
    let dim = eprime.dim();
    let matrix = if pivot >= 0.5 {
        eprime.matrix().scale_re(1.0 / (2.0 * pivot))
    } else {
        let shift = HermitianMatrix::identity(dim).scale_re(1.0 - 2.0 * pivot);
        eprime
            .matrix()
            .add(&shift)
            .scale_re(1.0 / (2.0 * (1.0 - pivot)))
    };
    Measurement::new(eprime.qubits(), matrix)
}

/// Largest number of serially-encoded bits an n-qubit state can carry at
/// margin eps: k_max = n / (1 - H2((1 - eps)/2)).
pub fn serial_encoding_max_bits(qubits: usize, epsilon: f64) -> f64 {
    let h = binary_entropy((1.0 - epsilon) / 2.0);
    qubits as f64 / (1.0 - h)
}

/// Random-access-code information bound: can n qubits carry k bits at
/// worst-case decoding error p? True iff n >= (1 - 2p)^2 k / (4 ln 2).
pub fn rac_bound_check(qubits: usize, bits: usize, p: f64) -> bool {
    let margin = 1.0 - 2.0 * p;
    qubits as f64 >= margin * margin * bits as f64 / (4.0 * LN2) - 1e-12
}

/// MMW learning rate for a k-iteration adversary run, clamped below 1/2.
pub fn default_rac_eta(qubits: usize, bits: usize) -> f64 {
    learn::default_eta(Variant::Mmw, bits as u64, qubits, 1.0)
}

/// A k-bit-into-n-qubit random access code: encoder states per bit string and
/// decoders per (bit index, prefix) pair. Decoders may depend on previously
/// decoded bits (serial decoding).
#[derive(Clone, Debug)]
pub struct RandomAccessCode {
    qubits: usize,
    bits: usize,
    encoder: BTreeMap<String, DensityMatrix>,
    decoders: Vec<BTreeMap<String, Measurement>>,
}

impl RandomAccessCode {
    pub fn new(
        qubits: usize,
        bits: usize,
        encoder: BTreeMap<String, DensityMatrix>,
        decoders: Vec<BTreeMap<String, Measurement>>,
    ) -> Result<Self> {
        if decoders.len() != bits {
            return Err(Error::InvalidConfig(format!(
                "expected {bits} decoder maps, got {}",
                decoders.len()
            )));
        }
        for y in 0..(1usize << bits) {
            let key = bit_string(y, bits);
            let state = encoder
                .get(&key)
                .ok_or(Error::MissingEncoderEntry { key: key.clone() })?;
            if state.qubits() != qubits {
                return Err(Error::DimensionMismatch {
                    left: state.dim(),
                    right: 1 << qubits,
                });
            }
        }
        for map in &decoders {
            for e in map.values() {
                if e.qubits() != qubits {
                    return Err(Error::DimensionMismatch {
                        left: e.dim(),
                        right: 1 << qubits,
                    });
                }
            }
        }
        Ok(RandomAccessCode {
            qubits,
            bits,
            encoder,
            decoders,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn encoder_state(&self, y: &str) -> Result<&DensityMatrix> {
        self.encoder.get(y).ok_or(Error::MissingEncoderEntry {
            key: y.to_string(),
        })
    }

    /// Decoder for bit `index` (0-based) given the already-decoded prefix.
    pub fn decoder(&self, index: usize, prefix: &str) -> Result<&Measurement> {
        self.decoders
            .get(index)
            .and_then(|m| m.get(prefix))
            .ok_or(Error::DecoderLookup {
                index,
                prefix: prefix.to_string(),
            })
    }

    /// The n = k = 1 perfect code: basis states with the |1><1| decoder.
    pub fn perfect_single_bit() -> Result<Self> {
        let mut encoder = BTreeMap::new();
        encoder.insert("0".to_string(), DensityMatrix::basis_state(1, 0)?);
        encoder.insert("1".to_string(), DensityMatrix::basis_state(1, 1)?);
        let mut map = BTreeMap::new();
        map.insert(String::new(), Measurement::basis_projector(1, 1)?);
        RandomAccessCode::new(1, 1, encoder, vec![map])
    }

    /// A code whose decoders are all I/2: predictions sit at the tie point.
    pub fn uninformative(qubits: usize, bits: usize, rng: &mut RngStream) -> Result<Self> {
        let mut encoder = BTreeMap::new();
        for y in 0..(1usize << bits) {
            encoder.insert(bit_string(y, bits), random_density(qubits, rng)?);
        }
        let half = Measurement::new(
            qubits,
            HermitianMatrix::identity(1 << qubits).scale_re(0.5),
        )?;
        let decoders = (0..bits)
            .map(|i| {
                let mut map = BTreeMap::new();
                for prefix in 0..(1usize << i) {
                    map.insert(bit_string(prefix, i), half.clone());
                }
                map
            })
            .collect();
        RandomAccessCode::new(qubits, bits, encoder, decoders)
    }

    /// Random encoder states with random serial decoders for every prefix.
    pub fn random(qubits: usize, bits: usize, rng: &mut RngStream) -> Result<Self> {
        let mut encoder = BTreeMap::new();
        for y in 0..(1usize << bits) {
            encoder.insert(bit_string(y, bits), random_density(qubits, rng)?);
        }
        let mut decoders = Vec::with_capacity(bits);
        for i in 0..bits {
            let mut map = BTreeMap::new();
            for prefix in 0..(1usize << i) {
                map.insert(bit_string(prefix, i), random_measurement(qubits, rng)?);
            }
            decoders.push(map);
        }
        RandomAccessCode::new(qubits, bits, encoder, decoders)
    }

    pub fn to_json(&self) -> RacJson {
        RacJson {
            n: self.qubits,
            k: self.bits,
            encoder: self
                .encoder
                .iter()
                .map(|(k, v)| (k.clone(), MatrixJson::from_matrix(v.matrix().matrix())))
                .collect(),
            decoders: self
                .decoders
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|(k, v)| (k.clone(), MatrixJson::from_matrix(v.matrix().matrix())))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(json: &RacJson) -> Result<Self> {
        let mut encoder = BTreeMap::new();
        for (key, m) in &json.encoder {
            encoder.insert(key.clone(), m.to_density(json.n)?);
        }
        let mut decoders = Vec::with_capacity(json.decoders.len());
        for map in &json.decoders {
            let mut out = BTreeMap::new();
            for (key, m) in map {
                out.insert(key.clone(), m.to_measurement(json.n)?);
            }
            decoders.push(out);
        }
        RandomAccessCode::new(json.n, json.k, encoder, decoders)
    }
}

/// Fixture format: base-2 string keys mapping to serialized matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RacJson {
    pub n: usize,
    pub k: usize,
    pub encoder: BTreeMap<String, MatrixJson>,
    pub decoders: Vec<BTreeMap<String, MatrixJson>>,
}

fn bit_string(value: usize, bits: usize) -> String {
    (0..bits)
        .rev()
        .map(|i| if (value >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Outcome of running the MMW adversary against a code.
#[derive(Clone, Debug)]
pub struct RacAdversaryOutcome {
    /// The bit string the adversary pins down.
    pub decoded: String,
    /// max_t |Tr(E_t rho_y) - y_t| on the adversarially decoded string.
    pub empirical_error: f64,
    /// k/2 <= p_emp k + 2 sqrt(ln2 k n) within 1e-9.
    pub inequality_ok: bool,
    /// Tr(E_t omega_t) per iteration.
    pub predictions: Vec<f64>,
}

/// Run the MMW algorithm with absolute loss for k iterations, labeling
/// y_t = 0 when the prediction exceeds 1/2 and y_t = 1 otherwise (ties go to
/// 1), then verify the chain inequality k/2 <= p_emp k + 2 sqrt(ln2 k n).
pub fn rac_adversary_run(code: &RandomAccessCode, eta: f64) -> Result<RacAdversaryOutcome> {
    let n = code.qubits();
    let k = code.bits();
    let mut state = learn::initial_state(n, eta, 1.0, Variant::Mmw)?;
    let mut decoded = String::new();
    let mut used = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(k);

    for i in 0..k {
        let e = code.decoder(i, &decoded)?.clone();
        let prediction = born_probability(&e, state.iterate())?;
        let label = if prediction > 0.5 { 0u8 } else { 1u8 };
        predictions.push(prediction);

        let spec = LossSpec::l1(label as f64)?;
        let grad = learn::gradient(spec, &e, state.iterate())?;
        state = learn::mmw_update(&state, &grad)?;

        decoded.push(if label == 1 { '1' } else { '0' });
        used.push((e, label));
    }

    let rho = code.encoder_state(&decoded)?;
    let mut empirical_error = 0.0f64;
    for (e, label) in &used {
        let p = born_probability(e, rho)?;
        empirical_error = empirical_error.max((p - *label as f64).abs());
    }

    let lhs = k as f64 / 2.0;
    let rhs = empirical_error * k as f64 + 2.0 * (LN2 * k as f64 * n as f64).sqrt();
    Ok(RacAdversaryOutcome {
        decoded,
        empirical_error,
        inequality_ok: lhs <= rhs + 1e-9,
        predictions,
    })
}
