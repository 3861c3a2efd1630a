//! Reversible byte and bit transforms applied before entropy coding.

mod grouping;
mod lossy;
mod sign;

pub use grouping::{group_bytes, ungroup_bytes, ByteGroups};
pub use lossy::{
    dequantize, lossy_decode, lossy_encode, quantize, LossyParams, QuantizedLayer,
    MAX_PRECISION_BITS, MIN_PRECISION_BITS,
};
pub use sign::{merge_sign, split_sign, SignSplit};

pub(crate) use lossy::{from_sign_magnitude, to_sign_magnitude};
pub(crate) use sign::{merge_sign_words, sign_stream_len, split_sign_words};
