//! Scalar and noise-shaping quantizers over the midrise alphabet
//! `{a/(2K−1) : a odd, |a| ≤ 2K−1}`.
//!
//! All noise-shaping schemes return their state trajectory so callers can
//! check the difference equations `D^r u = y − q` (Sigma-Delta) and
//! `H u = y − q` (distributed β scheme) directly. Exceeding a stability
//! bound is reported through [`QuantizationResult::overload`], never as an
//! error.

use rand::Rng;

use crate::error::{check_len, Error, Result};

/// Slack allowed when comparing a state magnitude against its bound.
pub const STATE_TOLERANCE: f64 = 1e-12;

pub const MAX_BITS: u8 = 8;

/// The `2^b`-level symmetric midrise alphabet, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    bits: u8,
    levels: Vec<f64>,
}

impl Alphabet {
    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::invalid(
                "bits",
                format!("must be in 1..={MAX_BITS}, got {bits}"),
            ));
        }
        let top = (1i32 << bits) - 1;
        let levels = (0..=top).map(|k| (2 * k - top) as f64 / top as f64).collect();
        Ok(Alphabet { bits, levels })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// `K = 2^{b−1}`.
    pub fn half_count(&self) -> usize {
        1 << (self.bits - 1)
    }

    /// `2K − 1`, the largest odd numerator.
    pub fn max_odd(&self) -> i32 {
        (1i32 << self.bits) - 1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Gap between consecutive levels, `2/(2K−1)`.
    pub fn step(&self) -> f64 {
        2.0 / self.max_odd() as f64
    }

    /// Half the step, `1/(2K−1)`: the largest error of an unsaturated rounding.
    pub fn half_step(&self) -> f64 {
        1.0 / self.max_odd() as f64
    }

    pub fn value(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Index of the level nearest to `x`; ties go to the larger level.
    pub fn nearest_index(&self, x: f64) -> usize {
        let scaled = x * self.max_odd() as f64;
        let k = (scaled / 2.0).floor() + self.half_count() as f64;
        k.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    pub fn nearest(&self, x: f64) -> f64 {
        self.levels[self.nearest_index(x)]
    }

    /// Index of `value` if it is (bit-for-bit) a level of this alphabet.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let k = self.nearest_index(value);
        (self.levels[k] == value).then_some(k)
    }
}

/// Memoryless scalar quantization: coordinatewise nearest level.
pub fn msq(z: &[f64], alphabet: &Alphabet) -> Vec<f64> {
    z.iter().map(|&x| alphabet.nearest(x)).collect()
}

/// Stochastic rounding to one of the two bracketing levels, unbiased on `[-1, 1]`.
pub fn stocq<R: Rng + ?Sized>(z: &[f64], alphabet: &Alphabet, rng: &mut R) -> Vec<f64> {
    let top = alphabet.max_odd();
    z.iter()
        .map(|&x| {
            let scaled = x.clamp(-1.0, 1.0) * top as f64;
            let lower = (2.0 * ((scaled - 1.0) / 2.0).floor() + 1.0)
                .clamp(-(top as f64), (top - 2).max(-top) as f64);
            let p_upper = ((scaled - lower) / 2.0).clamp(0.0, 1.0);
            let a = if rng.random::<f64>() < p_upper {
                lower + 2.0
            } else {
                lower
            };
            let a = a.min(top as f64);
            alphabet.value(((a as i32 + top) / 2) as usize)
        })
        .collect()
}

/// Output of a noise-shaping quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    /// Codes over the alphabet, length `m`.
    pub q: Vec<f64>,
    /// State trajectory `u_1..u_m`.
    pub state: Vec<f64>,
    /// `max_i |u_i|`.
    pub max_state: f64,
    /// True if the quantizer left its certified range at some step.
    pub overload: bool,
    pub u_final: f64,
    /// Factor the input was multiplied by before quantizing (1 when unscaled).
    pub prescale: f64,
}

impl QuantizationResult {
    fn from_trace(q: Vec<f64>, state: Vec<f64>, overload: bool) -> Self {
        let max_state = state.iter().fold(0.0f64, |acc, u| acc.max(u.abs()));
        let u_final = state.last().copied().unwrap_or(0.0);
        QuantizationResult {
            q,
            state,
            max_state,
            overload,
            u_final,
            prescale: 1.0,
        }
    }
}

/// First-order Sigma-Delta: `q_i = Q(y_i + u_{i−1})`, `u_i = u_{i−1} + y_i − q_i`.
///
/// With `u0 = 0` and `‖z‖_∞ ≤ 1` the state never exceeds `1/(2K−1)`.
pub fn sigma_delta_r1(z: &[f64], alphabet: &Alphabet, u0: f64) -> QuantizationResult {
    let bound = alphabet.half_step() + STATE_TOLERANCE;
    let mut q = Vec::with_capacity(z.len());
    let mut state = Vec::with_capacity(z.len());
    let mut u = u0;
    for &y in z {
        let w = y + u;
        let code = alphabet.nearest(w);
        u = w - code;
        q.push(code);
        state.push(u);
    }
    let result = QuantizationResult::from_trace(q, state, false);
    let overload = result.max_state > bound;
    QuantizationResult { overload, ..result }
}

/// First-order Sigma-Delta started from `u0 ~ U[−1/(2K−1), 1/(2K−1)]`.
pub fn sigma_delta_randomized<R: Rng + ?Sized>(
    z: &[f64],
    alphabet: &Alphabet,
    rng: &mut R,
) -> QuantizationResult {
    let c = alphabet.half_step();
    let u0 = rng.random_range(-c..=c);
    sigma_delta_r1(z, alphabet, u0)
}

/// Coefficients of `(1 − t)^r`, the r-th backward difference.
pub(crate) fn difference_filter(order: usize) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (j, c) in coeffs.iter().enumerate() {
            next[j] += c;
            next[j + 1] -= c;
        }
        coeffs = next;
    }
    coeffs
}

pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Causal convolution truncated to the length of `signal`.
pub(crate) fn causal_filter(filter: &[f64], signal: &[f64]) -> Vec<f64> {
    (0..signal.len())
        .map(|i| {
            filter
                .iter()
                .take(i + 1)
                .enumerate()
                .map(|(j, f)| f * signal[i - j])
                .sum()
        })
        .collect()
}

/// Filtered r-th order Sigma-Delta.
///
/// With `H = D^r g` and `h = δ⁰ − H`, runs `q_i = Q((h∗v)_i + y_i)`,
/// `v_i = (h∗v)_i + y_i − q_i`, and reports the state `u = g∗v`, which
/// satisfies `D^r u = y − q`. `g = [1.0]` is the greedy scheme. The filter
/// must start with `g_0 = 1` so that `h_0 = 0` and the recursion is causal.
///
/// `overload` fires when some quantizer input lands outside
/// `[−1 − 1/(2K−1), 1 + 1/(2K−1)]`, i.e. `|v_i| > 1/(2K−1)`.
pub fn sigma_delta_general(
    z: &[f64],
    alphabet: &Alphabet,
    order: usize,
    filter: &[f64],
) -> Result<QuantizationResult> {
    if order < 1 {
        return Err(Error::invalid("order", "must be at least 1"));
    }
    if filter.is_empty() {
        return Err(Error::invalid("filter", "must be non-empty"));
    }
    if filter[0] != 1.0 {
        return Err(Error::invalid(
            "filter",
            format!("leading coefficient must be 1, got {}", filter[0]),
        ));
    }
    let shaping = convolve(&difference_filter(order), filter);
    // Feedback taps h_j = −H_j for j ≥ 1.
    let feedback: Vec<f64> = shaping[1..].iter().map(|c| -c).collect();
    let bound = alphabet.half_step() + STATE_TOLERANCE;

    let mut q = Vec::with_capacity(z.len());
    let mut v: Vec<f64> = Vec::with_capacity(z.len());
    let mut overload = false;
    for (i, &y) in z.iter().enumerate() {
        let mut acc = 0.0;
        for (j, h) in feedback.iter().enumerate().take(i) {
            acc += h * v[i - 1 - j];
        }
        let w = acc + y;
        let code = alphabet.nearest(w);
        let e = w - code;
        overload |= e.abs() > bound;
        q.push(code);
        v.push(e);
    }
    let state = if filter.len() == 1 {
        v
    } else {
        causal_filter(filter, &v)
    };
    Ok(QuantizationResult::from_trace(q, state, overload))
}

/// Distributed noise shaping with `H = I_p ⊗ H_β`.
///
/// Inside each block of length `lambda`: `q_i = Q(y_i + β u_{i−1})`,
/// `u_i = y_i + β u_{i−1} − q_i`, with the state reset to zero at every block
/// start. `overload` fires iff `max |u| > 1/(2K−1)`.
pub fn beta_quantize(
    z: &[f64],
    alphabet: &Alphabet,
    beta: f64,
    lambda: usize,
) -> Result<QuantizationResult> {
    check_beta(beta)?;
    if lambda == 0 {
        return Err(Error::invalid("lambda", "must be at least 1"));
    }
    if !z.len().is_multiple_of(lambda) {
        return Err(Error::invalid(
            "lambda",
            format!("input length {} is not a multiple of {lambda}", z.len()),
        ));
    }
    let mut q = Vec::with_capacity(z.len());
    let mut state = Vec::with_capacity(z.len());
    for block in z.chunks_exact(lambda) {
        let mut u = 0.0;
        for &y in block {
            let w = y + beta * u;
            let code = alphabet.nearest(w);
            u = w - code;
            q.push(code);
            state.push(u);
        }
    }
    let result = QuantizationResult::from_trace(q, state, false);
    let overload = result.max_state > alphabet.half_step() + STATE_TOLERANCE;
    Ok(QuantizationResult { overload, ..result })
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta < 2.0 {
        Ok(())
    } else {
        Err(Error::invalid("beta", format!("must lie in (1, 2), got {beta}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// r-th order Sigma-Delta with filter `g` (`[1.0]` is greedy), zero initial state.
    SigmaDelta { order: usize, filter: Vec<f64> },
    /// First-order Sigma-Delta with a uniformly random initial state.
    SigmaDeltaRandomized,
    /// Distributed noise shaping with `β ∈ (1, 2)`.
    Beta { beta: f64 },
}

impl Scheme {
    pub fn sigma_delta(order: usize) -> Self {
        Scheme::SigmaDelta {
            order,
            filter: vec![1.0],
        }
    }

    /// Sigma-Delta order; the β scheme reports 0.
    pub fn order(&self) -> usize {
        match self {
            Scheme::SigmaDelta { order, .. } => *order,
            Scheme::SigmaDeltaRandomized => 1,
            Scheme::Beta { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Prescale {
    #[default]
    None,
    /// Shrink β-scheme inputs by `(2K−β)/(2K−1)` so the stability hypothesis holds.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseShapingConfig {
    pub scheme: Scheme,
    pub lambda: usize,
    pub p: usize,
    pub alphabet: Alphabet,
    pub prescale: Prescale,
}

impl NoiseShapingConfig {
    pub fn new(scheme: Scheme, lambda: usize, p: usize, alphabet: Alphabet) -> Result<Self> {
        let config = NoiseShapingConfig {
            scheme,
            lambda,
            p,
            alphabet,
            prescale: Prescale::None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_prescale(mut self, prescale: Prescale) -> Self {
        self.prescale = prescale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::invalid("lambda", "must be at least 1"));
        }
        if self.p == 0 {
            return Err(Error::invalid("p", "must be at least 1"));
        }
        match &self.scheme {
            Scheme::SigmaDelta { order, filter } => {
                if *order == 0 {
                    return Err(Error::invalid("order", "must be at least 1"));
                }
                if filter.first() != Some(&1.0) {
                    return Err(Error::invalid("filter", "must be non-empty with leading 1"));
                }
                if !(self.lambda + order - 1).is_multiple_of(*order) {
                    return Err(Error::invalid(
                        "lambda",
                        format!("{} is not of the form r·λ̃ − r + 1 for r = {order}", self.lambda),
                    ));
                }
            }
            Scheme::SigmaDeltaRandomized => {}
            Scheme::Beta { beta } => check_beta(*beta)?,
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.lambda * self.p
    }

    /// `λ̃` with `λ = r·λ̃ − r + 1`; `None` for the β scheme.
    pub fn lambda_tilde(&self) -> Option<usize> {
        match self.scheme {
            Scheme::Beta { .. } => None,
            _ => {
                let r = self.scheme.order();
                Some(self.lambda.div_ceil(r))
            }
        }
    }

    /// Input scale applied before quantization.
    ///
    /// Only the β scheme has a constructive input hypothesis, so `Auto` is a
    /// no-op for Sigma-Delta.
    pub fn prescale_factor(&self) -> f64 {
        match (&self.scheme, self.prescale) {
            (Scheme::Beta { beta }, Prescale::Auto) => {
                let two_k = 2.0 * self.alphabet.half_count() as f64;
                (two_k - beta) / (two_k - 1.0)
            }
            _ => 1.0,
        }
    }

    /// Quantize one feature vector of length `λ·p`. The rng is consumed only
    /// by the randomized-initialization scheme.
    pub fn quantize<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Result<QuantizationResult> {
        check_len(self.m(), z.len())?;
        let scale = self.prescale_factor();
        let scaled;
        let input = if scale == 1.0 {
            z
        } else {
            scaled = z.iter().map(|v| v * scale).collect::<Vec<_>>();
            &scaled
        };
        let mut result = match &self.scheme {
            Scheme::SigmaDelta { order: 1, filter } if filter.len() == 1 => {
                sigma_delta_r1(input, &self.alphabet, 0.0)
            }
            Scheme::SigmaDelta { order, filter } => {
                sigma_delta_general(input, &self.alphabet, *order, filter)?
            }
            Scheme::SigmaDeltaRandomized => sigma_delta_randomized(input, &self.alphabet, rng),
            Scheme::Beta { beta } => beta_quantize(input, &self.alphabet, *beta, self.lambda)?,
        };
        result.prescale = scale;
        Ok(result)
    }
}
