//! Parameter dtypes, layer records, manifests and the compression-ratio metric.
//!
//! Multi-byte elements are little-endian words throughout the crate. Float
//! layouts follow IEEE-754 (FP32, FP16) and bfloat16; everything that is not a
//! float travels as opaque bytes and never sees a float transform.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Layout family of a dtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DTypeCode {
    Fp32,
    Fp16,
    Bf16,
    Raw8,
}

/// Bit widths of the sign, exponent and mantissa fields of one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DTypeLayout {
    pub code: DTypeCode,
    /// Bytes per element.
    pub element_width: usize,
    pub sign_bits: u32,
    pub exponent_bits: u32,
    pub mantissa_bits: u32,
}

impl DTypeLayout {
    pub fn is_float(&self) -> bool {
        self.code != DTypeCode::Raw8
    }
}

/// Non-float safetensors dtypes carried through the pipeline as opaque bytes.
///
/// They keep their element width and safetensors name so a decompressed file
/// declares the same dtype it was read with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpaqueDtype {
    F64,
    I64,
    I32,
    I16,
    I8,
    U64,
    U32,
    U16,
    Bool,
    F8E4M3,
    F8E5M2,
}

impl OpaqueDtype {
    const ALL: [OpaqueDtype; 11] = [
        OpaqueDtype::F64,
        OpaqueDtype::I64,
        OpaqueDtype::I32,
        OpaqueDtype::I16,
        OpaqueDtype::I8,
        OpaqueDtype::U64,
        OpaqueDtype::U32,
        OpaqueDtype::U16,
        OpaqueDtype::Bool,
        OpaqueDtype::F8E4M3,
        OpaqueDtype::F8E5M2,
    ];

    pub fn width(self) -> usize {
        match self {
            OpaqueDtype::F64 | OpaqueDtype::I64 | OpaqueDtype::U64 => 8,
            OpaqueDtype::I32 | OpaqueDtype::U32 => 4,
            OpaqueDtype::I16 | OpaqueDtype::U16 => 2,
            OpaqueDtype::I8 | OpaqueDtype::Bool | OpaqueDtype::F8E4M3 | OpaqueDtype::F8E5M2 => 1,
        }
    }

    pub fn safetensors_name(self) -> &'static str {
        match self {
            OpaqueDtype::F64 => "F64",
            OpaqueDtype::I64 => "I64",
            OpaqueDtype::I32 => "I32",
            OpaqueDtype::I16 => "I16",
            OpaqueDtype::I8 => "I8",
            OpaqueDtype::U64 => "U64",
            OpaqueDtype::U32 => "U32",
            OpaqueDtype::U16 => "U16",
            OpaqueDtype::Bool => "BOOL",
            OpaqueDtype::F8E4M3 => "F8_E4M3",
            OpaqueDtype::F8E5M2 => "F8_E5M2",
        }
    }

    fn index(self) -> u8 {
        Self::ALL.iter().position(|d| *d == self).unwrap() as u8
    }
}

/// Element type of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F16,
    BF16,
    /// Arbitrary bytes, one byte per element.
    Raw8,
    /// A non-float safetensors dtype treated as opaque bytes.
    Opaque(OpaqueDtype),
}

const OPAQUE_CODE_BASE: u8 = 0x10;

impl DType {
    /// Wire code used by the archive format.
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F16 => 1,
            DType::BF16 => 2,
            DType::Raw8 => 3,
            DType::Opaque(o) => OPAQUE_CODE_BASE + o.index(),
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::F16),
            2 => Ok(DType::BF16),
            3 => Ok(DType::Raw8),
            c if c >= OPAQUE_CODE_BASE => OpaqueDtype::ALL
                .get((c - OPAQUE_CODE_BASE) as usize)
                .map(|o| DType::Opaque(*o))
                .ok_or_else(|| Error::UnsupportedDtype(format!("code {c}"))),
            c => Err(Error::UnsupportedDtype(format!("code {c}"))),
        }
    }

    /// Maps a safetensors dtype string. Unknown strings yield `None`; callers
    /// treat those tensors as `Raw8` byte arrays.
    pub fn from_safetensors(name: &str) -> Option<Self> {
        match name {
            "F32" => Some(DType::F32),
            "F16" => Some(DType::F16),
            "BF16" => Some(DType::BF16),
            "U8" => Some(DType::Raw8),
            other => OpaqueDtype::ALL
                .iter()
                .find(|o| o.safetensors_name() == other)
                .map(|o| DType::Opaque(*o)),
        }
    }

    pub fn safetensors_name(self) -> &'static str {
        match self {
            DType::F32 => "F32",
            DType::F16 => "F16",
            DType::BF16 => "BF16",
            DType::Raw8 => "U8",
            DType::Opaque(o) => o.safetensors_name(),
        }
    }

    pub fn layout(self) -> DTypeLayout {
        describe_dtype(self)
    }

    pub fn width(self) -> usize {
        self.layout().element_width
    }

    pub fn is_float(self) -> bool {
        matches!(self, DType::F32 | DType::F16 | DType::BF16)
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.safetensors_name())
    }
}

/// Returns the fixed bit layout of `dtype`.
///
/// Opaque dtypes report the `Raw8` family with their own element width and no
/// float fields.
pub fn describe_dtype(dtype: DType) -> DTypeLayout {
    let (code, element_width, sign_bits, exponent_bits, mantissa_bits) = match dtype {
        DType::F32 => (DTypeCode::Fp32, 4, 1, 8, 23),
        DType::F16 => (DTypeCode::Fp16, 2, 1, 5, 10),
        DType::BF16 => (DTypeCode::Bf16, 2, 1, 8, 7),
        DType::Raw8 => (DTypeCode::Raw8, 1, 0, 0, 0),
        DType::Opaque(o) => (DTypeCode::Raw8, o.width(), 0, 0, 0),
    };
    DTypeLayout {
        code,
        element_width,
        sign_bits,
        exponent_bits,
        mantissa_bits,
    }
}

/// Product of the extents, `None` on overflow.
pub fn element_count(shape: &[u64]) -> Option<u64> {
    shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d))
}

/// One named tensor: the unit of compression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRecord {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<u64>,
    pub data: Vec<u8>,
}

impl LayerRecord {
    /// Builds a layer, checking the byte length against the shape.
    pub fn new(
        name: impl Into<String>,
        dtype: DType,
        shape: Vec<u64>,
        data: Vec<u8>,
    ) -> Result<Self> {
        let layer = LayerRecord {
            name: name.into(),
            dtype,
            shape,
            data,
        };
        layer.validate()?;
        Ok(layer)
    }

    /// Checks the name and the byte length against the shape.
    pub fn validate(&self) -> Result<()> {
        let mut report = ValidationReport::default();
        self.check_into(&mut report);
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::ValidationFailed(report))
        }
    }

    pub fn from_f32(name: impl Into<String>, shape: Vec<u64>, values: &[f32]) -> Result<Self> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(name, DType::F32, shape, data)
    }

    /// Reads the data as little-endian FP32 values.
    pub fn f32_values(&self) -> Result<Vec<f32>> {
        if self.dtype != DType::F32 {
            return Err(Error::UnsupportedDtype(self.dtype.to_string()));
        }
        Ok(self
            .data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn element_count(&self) -> u64 {
        (self.data.len() / self.dtype.width()) as u64
    }

    pub fn byte_len(&self) -> u64 {
        self.data.len() as u64
    }

    fn check_into(&self, report: &mut ValidationReport) {
        if self.name.is_empty() {
            report.push(Violation::EmptyName);
        }
        let expected =
            element_count(&self.shape).and_then(|n| n.checked_mul(self.dtype.width() as u64));
        if expected != Some(self.data.len() as u64) {
            report.push(Violation::LengthMismatch {
                name: self.name.clone(),
                expected,
                actual: self.data.len() as u64,
            });
        }
    }
}

/// Name, dtype and shape of one layer, without its data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<u64>,
}

/// Ordered description of a model's layers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelManifest {
    pub layers: Vec<ManifestEntry>,
    pub total_bytes: u64,
    /// Compact JSON text of the source file's `__metadata__` object, if any.
    pub metadata: Option<String>,
}

impl ModelManifest {
    pub fn from_layers(layers: &[LayerRecord]) -> Self {
        ModelManifest {
            layers: layers
                .iter()
                .map(|l| ManifestEntry {
                    name: l.name.clone(),
                    dtype: l.dtype,
                    shape: l.shape.clone(),
                })
                .collect(),
            total_bytes: layers.iter().map(LayerRecord::byte_len).sum(),
            metadata: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyName,
    DuplicateName(String),
    LengthMismatch {
        name: String,
        /// `None` when the shape product overflows.
        expected: Option<u64>,
        actual: u64,
    },
    LayerCount {
        manifest: usize,
        layers: usize,
    },
    EntryMismatch {
        index: usize,
        name: String,
    },
    TotalBytes {
        manifest: u64,
        actual: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyName => write!(f, "layer with empty name"),
            Violation::DuplicateName(n) => write!(f, "duplicate layer name `{n}`"),
            Violation::LengthMismatch {
                name,
                expected: Some(e),
                actual,
            } => write!(f, "layer `{name}` holds {actual} bytes, shape needs {e}"),
            Violation::LengthMismatch { name, .. } => {
                write!(f, "layer `{name}` has a shape whose size overflows")
            }
            Violation::LayerCount { manifest, layers } => {
                write!(f, "manifest lists {manifest} layers, got {layers}")
            }
            Violation::EntryMismatch { index, name } => {
                write!(
                    f,
                    "layer {index} (`{name}`) differs from its manifest entry"
                )
            }
            Violation::TotalBytes { manifest, actual } => {
                write!(f, "manifest total {manifest} bytes, layers hold {actual}")
            }
        }
    }
}

/// Problems found by [`validate_manifest`]; empty means valid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a manifest against the layers it describes.
///
/// Unknown dtypes cannot occur here: they are rejected when a `DType` is
/// decoded from a wire code and downgraded to `Raw8` during ingest.
pub fn validate_manifest(manifest: &ModelManifest, layers: &[LayerRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    for layer in layers {
        if !seen.insert(layer.name.as_str()) {
            report.push(Violation::DuplicateName(layer.name.clone()));
        }
        layer.check_into(&mut report);
    }
    if manifest.layers.len() != layers.len() {
        report.push(Violation::LayerCount {
            manifest: manifest.layers.len(),
            layers: layers.len(),
        });
    } else {
        for (index, (entry, layer)) in manifest.layers.iter().zip(layers).enumerate() {
            if entry.name != layer.name || entry.dtype != layer.dtype || entry.shape != layer.shape
            {
                report.push(Violation::EntryMismatch {
                    index,
                    name: entry.name.clone(),
                });
            }
        }
    }
    let actual: u64 = layers.iter().map(LayerRecord::byte_len).sum();
    if manifest.total_bytes != actual {
        report.push(Violation::TotalBytes {
            manifest: manifest.total_bytes,
            actual,
        });
    }
    report
}

/// Compressed size over original size; lower is better.
///
/// Both counts are kept so the ratio is exact until it is formatted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionRatio {
    pub compressed_bytes: u64,
    pub original_bytes: u64,
}

impl CompressionRatio {
    pub fn ratio(&self) -> f64 {
        self.compressed_bytes as f64 / self.original_bytes as f64
    }

    pub fn percent(&self) -> f64 {
        self.ratio() * 100.0
    }
}

impl fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_percent(self.ratio()))
    }
}

pub fn compute_ratio(compressed: u64, original: u64) -> Result<CompressionRatio> {
    if original == 0 {
        return Err(Error::ZeroOriginal);
    }
    Ok(CompressionRatio {
        compressed_bytes: compressed,
        original_bytes: original,
    })
}

/// Formats a fraction as a percentage: one decimal, or three below 1%.
pub fn format_percent(fraction: f64) -> String {
    let pct = fraction * 100.0;
    if pct > 0.0 && pct < 1.0 {
        format!("{pct:.3}%")
    } else {
        format!("{pct:.1}%")
    }
}
