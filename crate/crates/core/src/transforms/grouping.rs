//! Byte grouping: splits a stream of little-endian words into one stream per
//! byte position. Group 0 holds the most significant byte of every word (sign
//! and high exponent bits for floats), the last group the least significant.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteGroups {
    /// Element width in bytes; also the number of groups.
    pub width: usize,
    /// Most-significant-byte group first, each holding one byte per element.
    pub groups: Vec<Vec<u8>>,
}

impl ByteGroups {
    pub fn element_count(&self) -> usize {
        self.groups.first().map_or(0, Vec::len)
    }
}

pub fn group_bytes(data: &[u8], width: usize) -> Result<ByteGroups> {
    if width == 0 || !data.len().is_multiple_of(width) {
        return Err(Error::MisalignedLength {
            len: data.len(),
            width,
        });
    }
    let n = data.len() / width;
    let mut groups = vec![Vec::with_capacity(n); width];
    for word in data.chunks_exact(width) {
        for (g, group) in groups.iter_mut().enumerate() {
            group.push(word[width - 1 - g]);
        }
    }
    Ok(ByteGroups { width, groups })
}

pub fn ungroup_bytes(groups: &ByteGroups) -> Result<Vec<u8>> {
    let width = groups.width;
    if groups.groups.len() != width {
        return Err(Error::CountMismatch {
            expected: width,
            found: groups.groups.len(),
        });
    }
    let n = groups.element_count();
    if groups.groups.iter().any(|g| g.len() != n) {
        return Err(Error::RaggedGroups);
    }
    let mut out = vec![0u8; n * width];
    for (g, group) in groups.groups.iter().enumerate() {
        let pos = width - 1 - g;
        for (word, &byte) in out.chunks_exact_mut(width).zip(group) {
            word[pos] = byte;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_byte_words() {
        let g = group_bytes(&[1, 2, 3, 4, 5, 6, 7, 8], 4).unwrap();
        assert_eq!(
            g.groups,
            vec![vec![4, 8], vec![3, 7], vec![2, 6], vec![1, 5]]
        );
        assert_eq!(ungroup_bytes(&g).unwrap(), vec![1, 2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn two_byte_words() {
        let g = group_bytes(&[0xAA, 0xBB, 0xCC, 0xDD], 2).unwrap();
        assert_eq!(g.groups, vec![vec![0xBB, 0xDD], vec![0xAA, 0xCC]]);
        assert_eq!(ungroup_bytes(&g).unwrap(), vec![0xAA, 0xBB, 0xCC, 0xDD]);
    }

    #[test]
    fn empty_stream() {
        let g = group_bytes(&[], 4).unwrap();
        assert_eq!(g.groups, vec![Vec::<u8>::new(); 4]);
        assert!(ungroup_bytes(&g).unwrap().is_empty());
    }

    #[test]
    fn misaligned_and_ragged() {
        assert!(matches!(
            group_bytes(&[0; 7], 4),
            Err(Error::MisalignedLength { len: 7, width: 4 })
        ));
        let ragged = ByteGroups {
            width: 2,
            groups: vec![vec![0; 2], vec![0; 3]],
        };
        assert!(matches!(ungroup_bytes(&ragged), Err(Error::RaggedGroups)));
        let short = ByteGroups {
            width: 4,
            groups: vec![vec![0; 2]; 3],
        };
        assert!(matches!(
            ungroup_bytes(&short),
            Err(Error::CountMismatch { .. })
        ));
    }

    #[test]
    fn one_mebibyte_roundtrip() {
        use rand::{RngCore, SeedableRng};
        let mut data = vec![0u8; 1 << 20];
        rand_chacha::ChaCha8Rng::seed_from_u64(11).fill_bytes(&mut data);
        let g = group_bytes(&data, 4).unwrap();
        assert_eq!(ungroup_bytes(&g).unwrap(), data);
    }

    proptest! {
        #[test]
        fn roundtrip_and_permutation(words in proptest::collection::vec(any::<u32>(), 0..256), wide in any::<bool>()) {
            let data: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
            let width = if wide { 4 } else { 2 };
            let g = group_bytes(&data, width).unwrap();
            prop_assert!(g.groups.iter().all(|x| x.len() == data.len() / width));
            let mut before = data.clone();
            let mut after: Vec<u8> = g.groups.concat();
            before.sort_unstable();
            after.sort_unstable();
            prop_assert_eq!(before, after);
            prop_assert_eq!(ungroup_bytes(&g).unwrap(), data);
        }
    }
}
