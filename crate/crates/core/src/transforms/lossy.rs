//! Tunable near-lossless fixed-point cast.
//!
//! A parameter `θ` is scaled by the precision factor `2^b` and its magnitude
//! truncated to an integer: `q = sign(θ) · floor(|θ| · 2^b)`. Decoding divides
//! by the same factor. Quantities below `2^-b` are discarded and the
//! reconstruction error is strictly below `2^-b`.
//!
//! Rounding is toward zero on the magnitude, so a negative input like `-2.4`
//! (after scaling) becomes `-2`, not `floor(-2.4) = -3`. Reconstruction never
//! overshoots in magnitude.
//!
//! A layer whose scaled magnitudes reach `2^31`, or that holds NaN or an
//! infinity, cannot be cast and is reported as a fallback.

use crate::error::{Error, Result};
use crate::model::DType;

pub const MIN_PRECISION_BITS: u32 = 1;
pub const MAX_PRECISION_BITS: u32 = 30;

const INT_LIMIT: f64 = 2147483648.0; // 2^31

/// Precision exponent `b`; the precision factor is `2^b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LossyParams {
    bits: u8,
}

impl LossyParams {
    pub fn new(bits: u32) -> Result<Self> {
        if !(MIN_PRECISION_BITS..=MAX_PRECISION_BITS).contains(&bits) {
            return Err(Error::InvalidPrecision(bits));
        }
        Ok(LossyParams { bits: bits as u8 })
    }

    pub fn bits(&self) -> u32 {
        self.bits as u32
    }

    /// The precision factor `2^b`.
    pub fn factor(&self) -> u64 {
        1u64 << self.bits
    }

    /// Largest magnitude that still quantizes into the 32-bit range.
    pub fn max_magnitude(&self) -> f64 {
        (INT_LIMIT - 1.0) / self.factor() as f64
    }
}

/// Integers produced by [`lossy_encode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedLayer {
    /// Empty when `fallback` is set.
    pub q: Vec<i32>,
    pub params: LossyParams,
    /// The layer could not be cast and must be stored losslessly.
    pub fallback: bool,
}

pub fn lossy_encode(data: &[u8], dtype: DType, params: LossyParams) -> Result<QuantizedLayer> {
    if dtype != DType::F32 {
        return Err(Error::UnsupportedDtype(dtype.to_string()));
    }
    if !data.len().is_multiple_of(4) {
        return Err(Error::MisalignedLength {
            len: data.len(),
            width: 4,
        });
    }
    let values: Vec<f32> = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(quantize(&values, params))
}

pub fn quantize(values: &[f32], params: LossyParams) -> QuantizedLayer {
    let factor = params.factor() as f64;
    let mut q = Vec::with_capacity(values.len());
    for &v in values {
        // |v| * 2^b is exact in f64: a power-of-two scale of a 24-bit mantissa.
        let scaled = (v.abs() as f64) * factor;
        if !scaled.is_finite() || scaled >= INT_LIMIT {
            return QuantizedLayer {
                q: Vec::new(),
                params,
                fallback: true,
            };
        }
        let mag = scaled as i32;
        q.push(if v.is_sign_negative() { -mag } else { mag });
    }
    QuantizedLayer {
        q,
        params,
        fallback: false,
    }
}

pub fn lossy_decode(layer: &QuantizedLayer) -> Result<Vec<f32>> {
    if layer.fallback {
        return Err(Error::FallbackLayer);
    }
    Ok(dequantize(&layer.q, layer.params))
}

/// `q / 2^b` rounded to the nearest FP32.
///
/// The rounding is in fact always exact: whenever `q / 2^b` needs more than 24
/// significant bits the input had an ulp of at least `2^-b` and was an exact
/// multiple of it.
pub fn dequantize(q: &[i32], params: LossyParams) -> Vec<f32> {
    let factor = params.factor() as f64;
    q.iter().map(|&x| (x as f64 / factor) as f32).collect()
}

/// Sign-magnitude word for a quantized value; zero is always positive.
pub(crate) fn to_sign_magnitude(q: i32) -> u32 {
    if q < 0 {
        0x8000_0000 | q.unsigned_abs()
    } else {
        q as u32
    }
}

pub(crate) fn from_sign_magnitude(word: u32) -> Result<i32> {
    let mag = (word & 0x7fff_ffff) as i32;
    match (word >> 31, mag) {
        (0, m) => Ok(m),
        (_, 0) => Err(Error::NonCanonical(
            "negative zero in an integer stream".into(),
        )),
        (_, m) => Ok(-m),
    }
}
