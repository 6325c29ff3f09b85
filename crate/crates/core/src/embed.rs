//! Binary embedding codes and Hamming distance.
//!
//! A vector `x` and its word's reference vector `c` are cut into `L` equal
//! contiguous parts; bit `i` is set when the mean of `x`'s part `i` is at
//! least the mean of `c`'s part `i`.
//!
//! Codes are packed little-endian by bit: bit `i` lives in bit `i % 8` of
//! byte `i / 8`. Pad bits in the last byte are always zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub code_length: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { code_length: 512 }
    }
}

impl EmbedConfig {
    pub fn code_bytes(&self) -> usize {
        self.code_length.div_ceil(8)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.code_length == 0 {
            return Err(Error::InvalidConfig("code length L must be >= 1".into()));
        }
        if !dim.is_multiple_of(self.code_length) {
            return Err(Error::InvalidConfig(format!(
                "dimension {dim} is not divisible by code length L = {}",
                self.code_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    bytes: Vec<u8>,
}

impl BinaryCode {
    pub fn zeros(bits: usize) -> Self {
        Self {
            bits,
            bytes: vec![0; bits.div_ceil(8)],
        }
    }

    /// Builds a code from individual bits, first bit first.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut code = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            code.set(i, b);
        }
        code
    }

    /// Wraps packed bytes. Fails when the byte count is wrong or pad bits
    /// are set.
    pub fn from_bytes(bits: usize, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != bits.div_ceil(8) {
            return Err(Error::InvalidInput(format!(
                "{} bytes cannot hold a {bits}-bit code",
                bytes.len()
            )));
        }
        if !bits.is_multiple_of(8) {
            let pad = bytes[bytes.len() - 1] >> (bits % 8);
            if pad != 0 {
                return Err(Error::InvalidInput("code has non-zero pad bits".into()));
            }
        }
        Ok(Self { bits, bytes })
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.bits);
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.bits);
        if on {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    /// Flips every meaningful bit.
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for b in out.bytes.iter_mut() {
            *b = !*b;
        }
        if !self.bits.is_multiple_of(8) {
            let last = out.bytes.len() - 1;
            out.bytes[last] &= (1u8 << (self.bits % 8)) - 1;
        }
        out
    }
}

/// Writes the code of `x` against `c` into `out` (`ceil(L / 8)` bytes).
pub(crate) fn encode_into(x: &[f32], c: &[f32], code_length: usize, out: &mut [u8]) {
    let part = x.len() / code_length;
    out.fill(0);
    for (i, (xs, cs)) in x.chunks_exact(part).zip(c.chunks_exact(part)).enumerate() {
        let mean_x = xs.iter().map(|&v| f64::from(v)).sum::<f64>() / part as f64;
        let mean_c = cs.iter().map(|&v| f64::from(v)).sum::<f64>() / part as f64;
        if mean_x >= mean_c {
            out[i / 8] |= 1 << (i % 8);
        }
    }
}

pub fn encode(x: &[f32], c: &[f32], cfg: &EmbedConfig) -> Result<BinaryCode> {
    if x.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: c.len(),
        });
    }
    cfg.validate(x.len())?;
    let mut code = BinaryCode::zeros(cfg.code_length);
    encode_into(x, c, cfg.code_length, &mut code.bytes);
    Ok(code)
}

/// Popcount of `a XOR b` over packed bytes of equal length.
#[inline]
pub fn hamming_bytes(a: &[u8], b: &[u8]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    let mut total = 0u32;
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x = u64::from_le_bytes(x.try_into().unwrap());
        let y = u64::from_le_bytes(y.try_into().unwrap());
        total += (x ^ y).count_ones();
    }
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        total += (x ^ y).count_ones();
    }
    total
}

pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(Error::InvalidInput(format!(
            "code lengths differ: {} vs {}",
            a.bits, b.bits
        )));
    }
    Ok(hamming_bytes(&a.bytes, &b.bytes))
}
