use std::io;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported dtype: {0}")]
    UnsupportedDtype(String),

    #[error("original size is zero; ratio undefined")]
    ZeroOriginal,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("tensor spans overlap: `{first}` and `{second}`")]
    OverlappingSpans { first: String, second: String },

    #[error("tensor `{name}` extends past the end of the data region")]
    TruncatedData { name: String },

    #[error("model failed validation: {0}")]
    ValidationFailed(ValidationReport),

    #[error("byte length {len} is not a multiple of element width {width}")]
    MisalignedLength { len: usize, width: usize },

    #[error("byte groups have unequal lengths")]
    RaggedGroups,

    #[error("count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-canonical encoding: {0}")]
    NonCanonical(String),

    #[error("precision exponent {0} outside 1..=30")]
    InvalidPrecision(u32),

    #[error("layer is marked as a lossy fallback and holds no quantized stream")]
    FallbackLayer,

    #[error("codec backend failure: {0}")]
    BackendFailure(String),

    #[error("decoded length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("corrupt payload in layer `{layer}`: {reason}")]
    CorruptPayload { layer: String, reason: String },

    #[error("checksum mismatch in layer `{layer}`: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch {
        layer: String,
        stored: u32,
        computed: u32,
    },

    #[error("whole-model granularity requires a single dtype across layers")]
    MixedDtypeWholeModel,

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("layer `{layer}` cannot be quantized at this precision and needs an XOR delta")]
    FallbackRequired { layer: String },

    #[error("base model hash does not match the one the delta was built against")]
    BaseHashMismatch,

    #[error("not an archive (bad magic)")]
    BadMagic,

    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u8),

    #[error("archive truncated inside entry `{layer}`")]
    TruncatedEntry { layer: String },

    #[error("invalid archive: {0}")]
    InvalidArchive(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
