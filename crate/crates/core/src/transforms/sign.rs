//! Sign-bit separation.
//!
//! Each word's top bit is moved into a packed bitstream (element `i` lands in
//! bit `i % 8` of byte `i / 8`, padding bits zero) and cleared in place,
//! leaving an unsigned magnitude stream. Everything happens on raw bits, so
//! NaN payloads, infinities and negative zero survive untouched.

use crate::error::{Error, Result};
use crate::model::DType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSplit {
    pub count: usize,
    pub signs: Vec<u8>,
    /// Little-endian words with the sign bit cleared.
    pub magnitudes: Vec<u8>,
}

pub fn split_sign(data: &[u8], dtype: DType) -> Result<SignSplit> {
    if !dtype.is_float() {
        return Err(Error::UnsupportedDtype(dtype.to_string()));
    }
    split_sign_words(data, dtype.width())
}

pub fn merge_sign(split: &SignSplit, dtype: DType) -> Result<Vec<u8>> {
    if !dtype.is_float() {
        return Err(Error::UnsupportedDtype(dtype.to_string()));
    }
    merge_sign_words(split, dtype.width())
}

pub(crate) fn sign_stream_len(count: usize) -> usize {
    count.div_ceil(8)
}

/// Splits any stream of `width`-byte words.
pub(crate) fn split_sign_words(data: &[u8], width: usize) -> Result<SignSplit> {
    if width == 0 || !data.len().is_multiple_of(width) {
        return Err(Error::MisalignedLength {
            len: data.len(),
            width,
        });
    }
    let count = data.len() / width;
    let mut signs = vec![0u8; sign_stream_len(count)];
    let mut magnitudes = data.to_vec();
    for (i, word) in magnitudes.chunks_exact_mut(width).enumerate() {
        let top = &mut word[width - 1];
        signs[i / 8] |= (*top >> 7) << (i % 8);
        *top &= 0x7f;
    }
    Ok(SignSplit {
        count,
        signs,
        magnitudes,
    })
}

pub(crate) fn merge_sign_words(split: &SignSplit, width: usize) -> Result<Vec<u8>> {
    let count = split.count;
    if split.magnitudes.len() != count * width {
        return Err(Error::CountMismatch {
            expected: count * width,
            found: split.magnitudes.len(),
        });
    }
    if split.signs.len() != sign_stream_len(count) {
        return Err(Error::CountMismatch {
            expected: sign_stream_len(count),
            found: split.signs.len(),
        });
    }
    if !count.is_multiple_of(8) {
        let last = split.signs[split.signs.len() - 1];
        if last >> (count % 8) != 0 {
            return Err(Error::NonCanonical(
                "sign stream padding bits are set".into(),
            ));
        }
    }
    let mut out = split.magnitudes.clone();
    for (i, word) in out.chunks_exact_mut(width).enumerate() {
        let top = &mut word[width - 1];
        if *top & 0x80 != 0 {
            return Err(Error::NonCanonical(format!(
                "magnitude {i} has its sign bit set"
            )));
        }
        *top |= ((split.signs[i / 8] >> (i % 8)) & 1) << 7;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn negative_one() {
        let s = split_sign(&0xBF80_0000u32.to_le_bytes(), DType::F32).unwrap();
        assert_eq!(s.signs, vec![1]);
        assert_eq!(s.magnitudes, 0x3F80_0000u32.to_le_bytes());
        assert_eq!(
            merge_sign(&s, DType::F32).unwrap(),
            0xBF80_0000u32.to_le_bytes()
        );
    }

    #[test]
    fn negative_zero() {
        let s = split_sign(&0x8000_0000u32.to_le_bytes(), DType::F32).unwrap();
        assert_eq!(s.signs, vec![1]);
        assert_eq!(s.magnitudes, vec![0; 4]);
        assert_eq!(
            merge_sign(&s, DType::F32).unwrap(),
            0x8000_0000u32.to_le_bytes()
        );
    }

    #[test]
    fn bf16_positive() {
        let s = split_sign(&0x3F80u16.to_le_bytes(), DType::BF16).unwrap();
        assert_eq!(s.signs, vec![0]);
        assert_eq!(s.magnitudes, 0x3F80u16.to_le_bytes());
        assert_eq!(
            merge_sign(&s, DType::BF16).unwrap(),
            0x3F80u16.to_le_bytes()
        );
    }

    #[test]
    fn raw_bytes_have_no_sign() {
        assert!(matches!(
            split_sign(&[1, 2], DType::Raw8),
            Err(Error::UnsupportedDtype(_))
        ));
    }

    #[test]
    fn bit_packing_order() {
        let words: Vec<u8> = [-1.0f32, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, 1.0, -0.5]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let s = split_sign(&words, DType::F32).unwrap();
        assert_eq!(s.signs, vec![0b0000_1001, 0b0000_0001]);
    }

    #[test]
    fn rejects_malformed_splits() {
        let mut s = split_sign(&[0u8; 12], DType::F32).unwrap();
        s.signs[0] = 0b1000;
        assert!(matches!(
            merge_sign(&s, DType::F32),
            Err(Error::NonCanonical(_))
        ));
        s.signs[0] = 0;
        s.magnitudes[3] = 0x80;
        assert!(matches!(
            merge_sign(&s, DType::F32),
            Err(Error::NonCanonical(_))
        ));
        s.magnitudes.pop();
        assert!(matches!(
            merge_sign(&s, DType::F32),
            Err(Error::CountMismatch { .. })
        ));
        let mut s = split_sign(&[0u8; 12], DType::F32).unwrap();
        s.signs.push(0);
        assert!(matches!(
            merge_sign(&s, DType::F32),
            Err(Error::CountMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn roundtrip_any_bits(words in proptest::collection::vec(any::<u32>(), 0..200)) {
            let data: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
            for dtype in [DType::F32, DType::F16, DType::BF16] {
                let s = split_sign(&data, dtype).unwrap();
                prop_assert_eq!(s.count, data.len() / dtype.width());
                let w = dtype.width();
                prop_assert!(s.magnitudes.chunks_exact(w).all(|m| m[w - 1] & 0x80 == 0));
                prop_assert_eq!(merge_sign(&s, dtype).unwrap(), data.clone());
            }
        }

        #[test]
        fn special_floats(pick in proptest::collection::vec(0usize..6, 0..64)) {
            let specials = [f32::NAN, -f32::NAN, f32::INFINITY, f32::NEG_INFINITY, -0.0, f32::from_bits(0xFFC0_1234)];
            let data: Vec<u8> = pick.iter().flat_map(|&i| specials[i].to_bits().to_le_bytes()).collect();
            let s = split_sign(&data, DType::F32).unwrap();
            prop_assert_eq!(merge_sign(&s, DType::F32).unwrap(), data);
        }
    }
}
