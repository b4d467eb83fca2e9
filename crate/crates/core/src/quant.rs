//! Weight quantizers.
//!
//! Both formats block each row into runs of `block_size` consecutive
//! elements (the final block of a row may be shorter) and share one scale
//! per block. Values are stored dequantized; the bit layout only matters for
//! [`effective_bitwidth`].

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrrError};
use crate::linalg::Matrix;

/// Bits of per-block overhead (shared exponent or quantized scale).
pub const BLOCK_OVERHEAD_BITS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantFamily {
    /// Shared power-of-two exponent with signed integer mantissas.
    Mxint,
    /// Symmetric absmax scale with signed integers.
    Uniform,
}

impl std::str::FromStr for QuantFamily {
    type Err = SrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mxint" => Ok(QuantFamily::Mxint),
            "uniform" => Ok(QuantFamily::Uniform),
            other => Err(SrrError::input(format!("unknown quantizer family '{other}'"))),
        }
    }
}

impl std::fmt::Display for QuantFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuantFamily::Mxint => "mxint",
            QuantFamily::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub family: QuantFamily,
    /// Integer bits including sign, in `[2, 8]`.
    pub bits: u32,
    /// One of 16, 32, 64, 128.
    pub block_size: usize,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig { family: QuantFamily::Mxint, bits: 3, block_size: 32 }
    }
}

impl QuantizerConfig {
    pub fn new(family: QuantFamily, bits: u32, block_size: usize) -> Result<Self> {
        let cfg = QuantizerConfig { family, bits, block_size };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mxint(bits: u32) -> Result<Self> {
        Self::new(QuantFamily::Mxint, bits, 32)
    }

    pub fn uniform(bits: u32) -> Result<Self> {
        Self::new(QuantFamily::Uniform, bits, 32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=8).contains(&self.bits) {
            return Err(SrrError::domain(format!("bits must be in [2, 8], got {}", self.bits)));
        }
        if ![16, 32, 64, 128].contains(&self.block_size) {
            return Err(SrrError::domain(format!(
                "block size must be one of 16, 32, 64, 128; got {}",
                self.block_size
            )));
        }
        Ok(())
    }

    /// Largest integer magnitude, `2^(bits-1) - 1`.
    pub fn qmax(&self) -> f64 {
        ((1u32 << (self.bits - 1)) - 1) as f64
    }
}

/// Anything that maps a weight matrix to a same-shaped quantized matrix.
///
/// Implementations must map the zero matrix to zero.
pub trait Quantizer: Sync {
    fn quantize_values(&self, w: &Matrix) -> Result<Matrix>;

    /// Short human-readable label recorded in decomposition provenance.
    fn describe(&self) -> String;
}

impl Quantizer for QuantizerConfig {
    fn quantize_values(&self, w: &Matrix) -> Result<Matrix> {
        quantize(w, self).map(|q| q.values)
    }

    fn describe(&self) -> String {
        format!("{}{}-b{}", self.family, self.bits, self.block_size)
    }
}

/// Dequantized representation of `Q(W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMatrix {
    pub values: Matrix,
    pub config: QuantizerConfig,
}

/// Quantizes `w` block by block along rows.
pub fn quantize(w: &Matrix, config: &QuantizerConfig) -> Result<QuantizedMatrix> {
    config.validate()?;
    w.ensure_finite("quantizer input")?;
    let mut values = w.clone();
    for i in 0..w.rows() {
        for block in values.row_mut(i).chunks_mut(config.block_size) {
            match config.family {
                QuantFamily::Mxint => quantize_block_mxint(block, config.qmax()),
                QuantFamily::Uniform => quantize_block_uniform(block, config.qmax()),
            }
        }
    }
    Ok(QuantizedMatrix { values, config: *config })
}

/// `E = W - Q`.
pub fn quantization_error(w: &Matrix, q: &QuantizedMatrix) -> Result<Matrix> {
    w.ensure_same_shape(&q.values, "quantization_error")?;
    Ok(w.sub(&q.values))
}

/// Average bits per element including per-block overhead.
pub fn effective_bitwidth(config: &QuantizerConfig) -> Result<f64> {
    config.validate()?;
    Ok(config.bits as f64 + BLOCK_OVERHEAD_BITS as f64 / config.block_size as f64)
}

/// Quantization step of one block under `config` (0 for an all-zero block).
pub fn block_step(block: &[f64], config: &QuantizerConfig) -> f64 {
    let amax = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if amax == 0.0 {
        return 0.0;
    }
    match config.family {
        QuantFamily::Mxint => mxint_step(amax, config.qmax()),
        QuantFamily::Uniform => uniform_scale(amax, config.qmax()),
    }
}

/// Smallest power of two `Δ` with `amax <= qmax·Δ`, so the largest element
/// never saturates the mantissa range.
fn mxint_step(amax: f64, qmax: f64) -> f64 {
    let target = amax / qmax;
    let mut e = target.log2().ceil() as i32;
    // log2 can be off by one near exact powers of two.
    while pow2(e) < target {
        e += 1;
    }
    while e > -1074 && pow2(e - 1) >= target {
        e -= 1;
    }
    pow2(e)
}

fn pow2(e: i32) -> f64 {
    if e >= -1022 {
        2f64.powi(e)
    } else {
        2f64.powi(-1022) * 2f64.powi(e + 1022)
    }
}

fn quantize_block_mxint(block: &mut [f64], qmax: f64) {
    let amax = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if amax == 0.0 {
        block.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let step = mxint_step(amax, qmax);
    for v in block.iter_mut() {
        let m = (*v / step).round_ties_even().clamp(-qmax, qmax);
        *v = m * step;
    }
}

/// Scale `amax / qmax` rounded to a 46-bit significand, so `qmax·scale` and
/// `q·scale` (|q| < 128) are exact and re-quantizing reproduces the scale.
fn uniform_scale(amax: f64, qmax: f64) -> f64 {
    let s = amax / qmax;
    let bits = s.to_bits();
    let drop = 7u32;
    let mask = (1u64 << drop) - 1;
    let half = 1u64 << (drop - 1);
    let low = bits & mask;
    let mut kept = bits & !mask;
    // round half to even on the kept significand
    if low > half || (low == half && (kept >> drop) & 1 == 1) {
        kept += 1 << drop;
    }
    f64::from_bits(kept)
}

fn quantize_block_uniform(block: &mut [f64], qmax: f64) {
    let amax = block.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if amax == 0.0 {
        block.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let scale = uniform_scale(amax, qmax);
    for v in block.iter_mut() {
        let q = (*v / amax * qmax).round_ties_even().clamp(-qmax, qmax);
        *v = q * scale;
    }
}
