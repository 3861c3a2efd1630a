//! Helpers shared by the integration suites: random models, a synthetic
//! "clean model" corpus and an exact arbitrary-precision model of the
//! fixed-point cast.

#![allow(dead_code)]

use mtc::model::{DType, LayerRecord, OpaqueDtype};
use num_bigint::BigInt;
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const ALL_DTYPES: [DType; 10] = [
    DType::F32,
    DType::F16,
    DType::BF16,
    DType::Raw8,
    DType::Opaque(OpaqueDtype::F64),
    DType::Opaque(OpaqueDtype::I64),
    DType::Opaque(OpaqueDtype::I32),
    DType::Opaque(OpaqueDtype::I16),
    DType::Opaque(OpaqueDtype::Bool),
    DType::Opaque(OpaqueDtype::F8E4M3),
];

/// Bit patterns that tend to break float handling.
const SPECIAL_F32: [u32; 8] = [
    0x0000_0000, // +0
    0x8000_0000, // -0
    0x7f80_0000, // +inf
    0xff80_0000, // -inf
    0x7fc0_0000, // quiet NaN
    0xffc0_0001, // negative NaN with payload
    0x7f80_0001, // signalling NaN
    0x0000_0001, // smallest subnormal
];

/// Random bytes for `n` elements of `dtype`, salted with special float
/// patterns for the float types.
pub fn random_data(rng: &mut impl Rng, dtype: DType, n: usize) -> Vec<u8> {
    let width = dtype.width();
    let mut data = vec![0u8; n * width];
    match rng.gen_range(0..3) {
        0 => rng.fill(&mut data[..]),
        // Weight-like: small magnitudes, so the high bytes repeat.
        1 => {
            for chunk in data.chunks_exact_mut(width) {
                let v: f32 = rng.gen_range(-0.5..0.5);
                let bits = v.to_bits().to_le_bytes();
                for (i, b) in chunk.iter_mut().enumerate() {
                    *b = bits[(i + 4 - width.min(4)) % 4];
                }
            }
        }
        _ => {}
    }
    if dtype == DType::F32 {
        for chunk in data.chunks_exact_mut(4) {
            if rng.gen_ratio(1, 8) {
                let s = SPECIAL_F32[rng.gen_range(0..SPECIAL_F32.len())];
                chunk.copy_from_slice(&s.to_le_bytes());
            }
        }
    } else if matches!(dtype, DType::F16 | DType::BF16) {
        let specials: [u16; 5] = if dtype == DType::F16 {
            [0x8000, 0x7c00, 0xfc00, 0x7e00, 0xfe01]
        } else {
            [0x8000, 0x7f80, 0xff80, 0x7fc0, 0xffc1]
        };
        for chunk in data.chunks_exact_mut(2) {
            if rng.gen_ratio(1, 8) {
                chunk.copy_from_slice(&specials[rng.gen_range(0..5)].to_le_bytes());
            }
        }
    }
    data
}

fn random_shape(rng: &mut impl Rng, max_elems: usize) -> Vec<u64> {
    match rng.gen_range(0..4) {
        0 => vec![],
        1 => vec![rng.gen_range(0..=max_elems as u64)],
        2 => {
            let a = rng.gen_range(1..=16u64);
            vec![a, rng.gen_range(0..=(max_elems as u64 / a))]
        }
        _ => vec![
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
            rng.gen_range(0..=8),
        ],
    }
}

pub fn random_layer(
    rng: &mut impl Rng,
    name: String,
    dtype: DType,
    max_elems: usize,
) -> LayerRecord {
    let shape = random_shape(rng, max_elems);
    let n = shape.iter().product::<u64>() as usize;
    LayerRecord::new(name, dtype, shape, random_data(rng, dtype, n)).unwrap()
}

/// A model of 1 to `max_layers` layers. With `uniform`, every layer shares
/// one dtype (as whole-model compression requires).
pub fn random_model(
    rng: &mut impl Rng,
    max_layers: usize,
    max_elems: usize,
    uniform: bool,
) -> Vec<LayerRecord> {
    let count = rng.gen_range(1..=max_layers);
    let first = ALL_DTYPES[rng.gen_range(0..ALL_DTYPES.len())];
    (0..count)
        .map(|i| {
            let dtype = if uniform {
                first
            } else {
                ALL_DTYPES[rng.gen_range(0..ALL_DTYPES.len())]
            };
            random_layer(rng, format!("layer.{i}.weight"), dtype, max_elems)
        })
        .collect()
}

/// Normally distributed FP32 weights with standard deviation `sigma`.
pub fn gaussian_weights(rng: &mut impl Rng, n: usize, sigma: f32) -> Vec<f32> {
    let u = Uniform::new(f32::EPSILON, 1.0f32);
    (0..n)
        .map(|_| {
            // Box-Muller.
            let (a, b) = (u.sample(rng), u.sample(rng));
            sigma * (-2.0 * a.ln()).sqrt() * (std::f32::consts::TAU * b).cos()
        })
        .collect()
}

/// FP32 weights whose low two bytes are zero and whose top byte takes at
/// most 32 distinct values: the shape of a model trained or stored at
/// reduced precision.
pub fn clean_weights(rng: &mut impl Rng, n: usize) -> Vec<f32> {
    gaussian_weights(rng, n, 0.05)
        .into_iter()
        .map(|v| {
            // Clamp magnitudes to [2^-13, 2^2) so the top byte (sign plus seven
            // exponent bits) has at most 2 * 8 values.
            let m = v.abs().clamp(2f32.powi(-13), 3.99);
            f32::from_bits(m.copysign(v).to_bits() & 0xffff_0000)
        })
        .collect()
}

/// Exact value of a finite f32 as `mantissa * 2^exponent`.
pub fn f32_parts(v: f32) -> (BigInt, i32) {
    let bits = v.to_bits();
    let sign = if bits >> 31 == 1 { -1 } else { 1 };
    let exp = ((bits >> 23) & 0xff) as i32;
    let frac = (bits & 0x7f_ffff) as i64;
    let (m, e) = if exp == 0 {
        (frac, -149)
    } else {
        (frac | 0x80_0000, exp - 150)
    };
    (BigInt::from(sign * m), e)
}

/// Common denominator exponent: every f32 and every `q / 2^b` is an integer
/// multiple of 2^-DENOM.
pub const DENOM: i32 = 200;

/// `v * 2^DENOM` as an exact integer.
pub fn scaled_f32(v: f32) -> BigInt {
    let (m, e) = f32_parts(v);
    m << (e + DENOM) as usize
}

/// Reference cast: `sign(v) * floor(|v| * 2^b)`, or `None` when it does not
/// fit in a signed 32-bit magnitude.
pub fn oracle_quantize(v: f32, b: u32) -> Option<i64> {
    if !v.is_finite() {
        return None;
    }
    let (m, e) = f32_parts(v);
    let negative = m < BigInt::from(0);
    let mag = if negative { -m } else { m };
    let shift = e + b as i32;
    let q = if shift >= 0 {
        mag << shift as usize
    } else {
        mag >> (-shift) as usize
    };
    let limit = BigInt::from(1u64 << 31);
    if q >= limit {
        return None;
    }
    let q = i64::try_from(q).unwrap();
    Some(if negative { -q } else { q })
}

/// True when `|decoded - original| < 2^-b` holds exactly.
pub fn within_bound(original: f32, decoded: f32, b: u32) -> bool {
    let diff = scaled_f32(decoded) - scaled_f32(original);
    let bound = BigInt::from(1) << (DENOM - b as i32) as usize;
    diff.magnitude() < bound.magnitude()
}
