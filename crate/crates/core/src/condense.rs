//! Condensation operators `V = I_p ⊗ v` and their normalized form
//! `Ṽ = √2/(√p‖v‖₂) · V`.
//!
//! The block structure is never materialized: condensing a length `λp`
//! vector is `p` dot products with the weight vector `v`.

use crate::error::{check_len, Error, Result};
use crate::features::dot;
use crate::quantize::{check_beta, Alphabet, NoiseShapingConfig, Scheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    SigmaDelta { order: usize, lambda_tilde: usize },
    Beta { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub v: Vec<f64>,
    pub norm2: f64,
    pub norm1: f64,
    pub kind: WeightKind,
}

impl WeightVector {
    fn new(v: Vec<f64>, kind: WeightKind) -> Self {
        let norm2 = dot(&v, &v).sqrt();
        let norm1 = v.iter().map(|x| x.abs()).sum();
        WeightVector {
            v,
            norm2,
            norm1,
            kind,
        }
    }

    pub fn lambda(&self) -> usize {
        self.v.len()
    }

    /// `√2/(√p‖v‖₂)`.
    pub fn normalizer(&self, p: usize) -> f64 {
        (2.0f64).sqrt() / ((p as f64).sqrt() * self.norm2)
    }

    /// Weights matching a quantizer configuration.
    pub fn for_config(config: &NoiseShapingConfig) -> Result<Self> {
        match config.scheme {
            Scheme::Beta { beta } => beta_weights(beta, config.lambda),
            _ => {
                let order = config.scheme.order();
                let lt = config
                    .lambda_tilde()
                    .expect("sigma-delta configs always have λ̃");
                Ok(sigma_delta_weights(order, lt))
            }
        }
    }
}

/// Coefficients of `(1 + t + … + t^{λ̃−1})^r`, a vector of length `rλ̃ − r + 1`.
pub fn sigma_delta_weights(order: usize, lambda_tilde: usize) -> WeightVector {
    let base = vec![1.0; lambda_tilde];
    let mut v = vec![1.0];
    for _ in 0..order {
        v = crate::quantize::convolve(&v, &base);
    }
    WeightVector::new(
        v,
        WeightKind::SigmaDelta {
            order,
            lambda_tilde,
        },
    )
}

/// `(β^{-1}, β^{-2}, …, β^{-λ})`.
pub fn beta_weights(beta: f64, lambda: usize) -> Result<WeightVector> {
    check_beta(beta)?;
    if lambda == 0 {
        return Err(Error::invalid("lambda", "must be at least 1"));
    }
    let v = (1..=lambda as i32).map(|j| beta.powi(-j)).collect();
    Ok(WeightVector::new(v, WeightKind::Beta { beta }))
}

/// What a condensed vector was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureSource {
    Unquantized,
    SigmaDelta { order: usize, bits: u8 },
    Beta { beta: f64, bits: u8 },
}

impl FeatureSource {
    pub fn quantized(config: &NoiseShapingConfig) -> Self {
        let bits = config.alphabet.bits();
        match config.scheme {
            Scheme::Beta { beta } => FeatureSource::Beta { beta, bits },
            _ => FeatureSource::SigmaDelta {
                order: config.scheme.order(),
                bits,
            },
        }
    }
}

/// The length-`p` vector `Ṽq` (or `Ṽz`).
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedFeature {
    pub y: Vec<f64>,
    pub normalizer: f64,
    pub source: FeatureSource,
    /// Input scale used before quantization; estimates divide by its square.
    pub prescale: f64,
}

impl CondensedFeature {
    pub fn p(&self) -> usize {
        self.y.len()
    }

    pub fn with_source(mut self, source: FeatureSource, prescale: f64) -> Self {
        self.source = source;
        self.prescale = prescale;
        self
    }
}

/// `y_k = normalizer · Σ_j v_j · input_{(k−1)λ+j}`.
pub fn condense(input: &[f64], weights: &WeightVector, p: usize) -> Result<CondensedFeature> {
    if p == 0 {
        return Err(Error::invalid("p", "must be at least 1"));
    }
    check_len(weights.lambda() * p, input.len())?;
    let normalizer = weights.normalizer(p);
    let y = input
        .chunks_exact(weights.lambda())
        .map(|block| normalizer * dot(&weights.v, block))
        .collect();
    Ok(CondensedFeature {
        y,
        normalizer,
        source: FeatureSource::Unquantized,
        prescale: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMethod {
    Rff,
    SemiQ,
    StocQ,
    Universal,
    SigmaDelta,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintParams {
    pub m: usize,
    pub bits: u8,
    pub p: usize,
    pub lambda: usize,
    pub order: usize,
    pub beta: f64,
}

impl FootprintParams {
    pub fn dense(m: usize, bits: u8) -> Self {
        FootprintParams {
            m,
            bits,
            p: m,
            lambda: 1,
            order: 1,
            beta: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    /// Bits stored per sample.
    pub bits: u64,
    /// Theoretical `m·log₂β` count for 1-bit β schemes with `β^k = β + 1`.
    pub golden_bits: Option<f64>,
}

/// Bits needed to store one encoded sample.
///
/// Sigma-Delta counts the distinct values a block sum can take:
/// `Σ v_j a_j` over odd `a_j` spans `(2K−1)‖v‖₁ + 1` values.
pub fn memory_footprint(method: StorageMethod, params: &FootprintParams) -> Result<Footprint> {
    let FootprintParams {
        m,
        bits,
        p,
        lambda,
        order,
        beta,
    } = *params;
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let uses_bits = !matches!(method, StorageMethod::Rff | StorageMethod::SemiQ | StorageMethod::Universal);
    if uses_bits && (bits == 0 || bits > crate::quantize::MAX_BITS) {
        return Err(Error::invalid("bits", format!("must be in 1..=8, got {bits}")));
    }
    let needs_blocks = matches!(method, StorageMethod::SigmaDelta | StorageMethod::Beta);
    if needs_blocks && (lambda == 0 || p == 0 || lambda * p != m) {
        return Err(Error::invalid(
            "m",
            format!("expected m = λ·p, got m = {m}, λ = {lambda}, p = {p}"),
        ));
    }
    let m64 = m as u64;
    let plain = |bits| Footprint {
        bits,
        golden_bits: None,
    };
    Ok(match method {
        StorageMethod::Rff | StorageMethod::SemiQ => plain(32 * m64),
        StorageMethod::StocQ => plain(m64 * bits as u64),
        StorageMethod::Universal => plain(m64),
        StorageMethod::SigmaDelta => {
            if order == 0 || (lambda + order - 1) % order != 0 {
                return Err(Error::invalid(
                    "lambda",
                    format!("{lambda} is not of the form r·λ̃ − r + 1 for r = {order}"),
                ));
            }
            let weights = sigma_delta_weights(order, lambda.div_ceil(order));
            let max_odd = (1u64 << bits) - 1;
            let values = max_odd * weights.norm1.round() as u64 + 1;
            plain(p as u64 * bits_for(values))
        }
        StorageMethod::Beta => {
            check_beta(beta)?;
            let golden = (bits == 1 && satisfies_golden_relation(beta))
                .then(|| m as f64 * beta.log2());
            Footprint {
                bits: m64 * bits as u64,
                golden_bits: golden,
            }
        }
    })
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
fn bits_for(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as u64
    }
}

/// True if `β^k = β + 1` for some integer `k > 1`.
fn satisfies_golden_relation(beta: f64) -> bool {
    (2..=64).any(|k| (beta.powi(k) - beta - 1.0).abs() < 1e-9)
}

/// Condense a quantized code vector, tagging the result with its quantizer.
pub fn condense_codes(
    codes: &[f64],
    config: &NoiseShapingConfig,
    prescale: f64,
) -> Result<CondensedFeature> {
    let weights = WeightVector::for_config(config)?;
    Ok(condense(codes, &weights, config.p)?.with_source(FeatureSource::quantized(config), prescale))
}

pub(crate) fn alphabet_index(alphabet: &Alphabet, code: f64) -> Result<usize> {
    alphabet
        .index_of(code)
        .ok_or_else(|| Error::invalid("codes", format!("{code} is not an alphabet level")))
}
