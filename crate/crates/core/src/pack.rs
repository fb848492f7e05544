//! Binary container for quantized code vectors.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 8     | magic `QRFFPACK`                        |
//! | 1     | version (1)                             |
//! | 1     | scheme id (see [`SchemeId`])            |
//! | 1     | bits per symbol `b`                     |
//! | 4     | block length `λ`                        |
//! | 4     | block count `p`                         |
//! | 1     | Sigma-Delta order `r` (0 for others)    |
//! | 8     | `β` as IEEE-754 f64 (0 if unused)       |
//! | 8     | prescale factor as IEEE-754 f64         |
//! | …     | payload: `λ·p` symbols of `b` bits      |
//!
//! Symbol `a/(2K−1)` is stored as the index `(a + 2K − 1)/2`, packed LSB-first.

use crate::condense::{alphabet_index, condense_codes, CondensedFeature};
use crate::error::{check_len, Error, Result};
use crate::quantize::{Alphabet, NoiseShapingConfig, Prescale, Scheme};

pub const MAGIC: &[u8; 8] = b"QRFFPACK";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SchemeId {
    /// Codes with no condensation structure (MSQ, StocQ).
    Raw = 0,
    SigmaDelta = 1,
    SigmaDeltaRandomized = 2,
    Beta = 3,
}

impl TryFrom<u8> for SchemeId {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Ok(match v {
            0 => SchemeId::Raw,
            1 => SchemeId::SigmaDelta,
            2 => SchemeId::SigmaDeltaRandomized,
            3 => SchemeId::Beta,
            other => return Err(Error::CorruptHeader(format!("unknown scheme id {other}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackHeader {
    pub scheme: SchemeId,
    pub bits: u8,
    pub lambda: u32,
    pub p: u32,
    pub order: u8,
    pub beta: f64,
    pub prescale: f64,
}

impl PackHeader {
    /// Header for a plain code vector of length `len`.
    pub fn raw(bits: u8, len: usize) -> Self {
        PackHeader {
            scheme: SchemeId::Raw,
            bits,
            lambda: len as u32,
            p: 1,
            order: 0,
            beta: 0.0,
            prescale: 1.0,
        }
    }

    /// Header describing codes produced by a noise-shaping quantizer.
    pub fn for_config(config: &NoiseShapingConfig, prescale: f64) -> Self {
        let (scheme, order, beta) = match config.scheme {
            Scheme::SigmaDelta { order, .. } => (SchemeId::SigmaDelta, order as u8, 0.0),
            Scheme::SigmaDeltaRandomized => (SchemeId::SigmaDeltaRandomized, 1, 0.0),
            Scheme::Beta { beta } => (SchemeId::Beta, 0, beta),
        };
        PackHeader {
            scheme,
            bits: config.alphabet.bits(),
            lambda: config.lambda as u32,
            p: config.p as u32,
            order,
            beta,
            prescale,
        }
    }

    pub fn symbol_count(&self) -> usize {
        self.lambda as usize * self.p as usize
    }

    pub fn payload_len(&self) -> usize {
        (self.symbol_count() * self.bits as usize).div_ceil(8)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.scheme as u8);
        out.push(self.bits);
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.p.to_le_bytes());
        out.push(self.order);
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.extend_from_slice(&self.prescale.to_le_bytes());
    }

    fn read(raw: &[u8]) -> Result<Self> {
        if raw.len() < HEADER_LEN {
            return Err(Error::CorruptHeader(format!(
                "need {HEADER_LEN} header bytes, have {}",
                raw.len()
            )));
        }
        if &raw[..8] != MAGIC {
            return Err(Error::CorruptHeader("bad magic".into()));
        }
        if raw[8] != VERSION {
            return Err(Error::CorruptHeader(format!("unsupported version {}", raw[8])));
        }
        let u32_at = |i: usize| u32::from_le_bytes(raw[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(raw[i..i + 8].try_into().unwrap());
        let header = PackHeader {
            scheme: SchemeId::try_from(raw[9])?,
            bits: raw[10],
            lambda: u32_at(11),
            p: u32_at(15),
            order: raw[19],
            beta: f64_at(20),
            prescale: f64_at(28),
        };
        if header.bits == 0 || header.bits > crate::quantize::MAX_BITS {
            return Err(Error::CorruptHeader(format!("bits {} out of range", header.bits)));
        }
        if header.lambda == 0 || header.p == 0 {
            return Err(Error::CorruptHeader("zero block length or count".into()));
        }
        if !(header.prescale.is_finite() && header.prescale > 0.0) {
            return Err(Error::CorruptHeader(format!("bad prescale {}", header.prescale)));
        }
        Ok(header)
    }

    /// Rebuild the quantizer configuration the codes came from, if any.
    pub fn config(&self) -> Result<Option<NoiseShapingConfig>> {
        let scheme = match self.scheme {
            SchemeId::Raw => return Ok(None),
            SchemeId::SigmaDelta => Scheme::sigma_delta(self.order as usize),
            SchemeId::SigmaDeltaRandomized => Scheme::SigmaDeltaRandomized,
            SchemeId::Beta => Scheme::Beta { beta: self.beta },
        };
        let prescale = if self.prescale == 1.0 {
            Prescale::None
        } else {
            Prescale::Auto
        };
        let config = NoiseShapingConfig::new(
            scheme,
            self.lambda as usize,
            self.p as usize,
            Alphabet::from_bits(self.bits)?,
        )
        .map_err(|e| Error::CorruptHeader(e.to_string()))?;
        Ok(Some(config.with_prescale(prescale)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedStream {
    pub header: PackHeader,
    pub payload: Vec<u8>,
}

/// Pack codes over `alphabet` under `header`.
pub fn pack(codes: &[f64], alphabet: &Alphabet, header: PackHeader) -> Result<PackedStream> {
    if header.bits != alphabet.bits() {
        return Err(Error::invalid("bits", "header and alphabet disagree"));
    }
    check_len(header.symbol_count(), codes.len())?;
    let bits = alphabet.bits() as usize;
    let mut payload = vec![0u8; header.payload_len()];
    for (i, &code) in codes.iter().enumerate() {
        let index = alphabet_index(alphabet, code)?;
        for k in 0..bits {
            if (index >> k) & 1 == 1 {
                let pos = i * bits + k;
                payload[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    Ok(PackedStream { header, payload })
}

/// Pack a code vector with a raw header.
pub fn pack_codes(codes: &[f64], alphabet: &Alphabet) -> Result<PackedStream> {
    pack(codes, alphabet, PackHeader::raw(alphabet.bits(), codes.len()))
}

impl PackedStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        self.header.write(&mut out);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self> {
        let header = PackHeader::read(raw)?;
        let needed = header.payload_len();
        let body = &raw[HEADER_LEN..];
        if body.len() < needed {
            return Err(Error::TruncatedPayload {
                needed,
                available: body.len(),
            });
        }
        Ok(PackedStream {
            header,
            payload: body[..needed].to_vec(),
        })
    }

    /// Decode the code vector.
    pub fn unpack(&self) -> Result<Vec<f64>> {
        let needed = self.header.payload_len();
        if self.payload.len() < needed {
            return Err(Error::TruncatedPayload {
                needed,
                available: self.payload.len(),
            });
        }
        let alphabet = Alphabet::from_bits(self.header.bits)?;
        let bits = self.header.bits as usize;
        Ok((0..self.header.symbol_count())
            .map(|i| {
                let index = (0..bits).fold(0usize, |acc, k| {
                    let pos = i * bits + k;
                    acc | ((((self.payload[pos / 8] >> (pos % 8)) & 1) as usize) << k)
                });
                alphabet.value(index)
            })
            .collect())
    }

    /// Decode and condense with the operator described by the header.
    pub fn condensed(&self) -> Result<CondensedFeature> {
        let config = self
            .header
            .config()?
            .ok_or_else(|| Error::invalid("scheme", "raw streams carry no condensation operator"))?;
        condense_codes(&self.unpack()?, &config, self.header.prescale)
    }
}
