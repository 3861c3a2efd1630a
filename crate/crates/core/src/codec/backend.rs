//! Block compressors.
//!
//! Every call builds its own backend context, so blocks can be compressed
//! from many threads at once. Empty input always maps to an empty block.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_ZSTD_LEVEL: i32 = 3;
pub const MAX_LEVEL: i32 = 22;

/// Block compressor backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CodecId {
    /// zstd frames: entropy coding on top of repetition removal.
    #[default]
    Zstd,
    /// LZ4 raw blocks: repetition removal only. Lengths are carried by the caller.
    Lz4,
    /// Identity.
    Store,
}

impl CodecId {
    pub fn code(self) -> u8 {
        match self {
            CodecId::Zstd => 0,
            CodecId::Lz4 => 1,
            CodecId::Store => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(CodecId::Zstd),
            1 => Ok(CodecId::Lz4),
            2 => Ok(CodecId::Store),
            c => Err(Error::InvalidArchive(format!("unknown codec id {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Zstd => "zstd",
            CodecId::Lz4 => "lz4",
            CodecId::Store => "store",
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zstd" => Ok(CodecId::Zstd),
            "lz4" => Ok(CodecId::Lz4),
            "store" => Ok(CodecId::Store),
            other => Err(Error::InvalidArgument(format!("unknown codec `{other}`"))),
        }
    }
}

pub fn compress_block(data: &[u8], codec: CodecId, level: i32) -> Result<Vec<u8>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    match codec {
        CodecId::Zstd => zstd::bulk::compress(data, level)
            .map_err(|e| Error::BackendFailure(format!("zstd: {e}"))),
        CodecId::Lz4 => Ok(lz4_flex::block::compress(data)),
        CodecId::Store => Ok(data.to_vec()),
    }
}

fn corrupt(reason: impl Into<String>) -> Error {
    Error::CorruptPayload {
        layer: String::new(),
        reason: reason.into(),
    }
}

pub fn decompress_block(data: &[u8], codec: CodecId, expected_len: usize) -> Result<Vec<u8>> {
    if expected_len == 0 || data.is_empty() {
        return if expected_len == 0 && data.is_empty() {
            Ok(Vec::new())
        } else {
            Err(Error::LengthMismatch {
                expected: expected_len,
                found: 0,
            })
        };
    }
    let out = match codec {
        CodecId::Zstd => {
            // One extra byte of capacity exposes frames that decode too long.
            zstd::bulk::decompress(data, expected_len + 1)
                .map_err(|e| corrupt(format!("zstd: {e}")))?
        }
        CodecId::Lz4 => {
            let mut out = vec![0u8; expected_len];
            let n = lz4_flex::block::decompress_into(data, &mut out)
                .map_err(|e| corrupt(format!("lz4: {e}")))?;
            out.truncate(n);
            out
        }
        CodecId::Store => data.to_vec(),
    };
    if out.len() != expected_len {
        return Err(Error::LengthMismatch {
            expected: expected_len,
            found: out.len(),
        });
    }
    Ok(out)
}
