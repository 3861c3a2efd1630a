//! Deltas between two versions of a model with identical structure.
//!
//! Two kinds of per-layer delta exist:
//!
//! * XOR of the raw bytes. Exact for any dtype; identical parameters become
//!   zero bytes, which compress to almost nothing.
//! * Residuals in the fixed-point domain: both versions are cast with the same
//!   precision exponent `b` and the integer difference is stored. Integer
//!   subtraction is exactly invertible, so the only loss is the cast itself.
//!   Layers that cannot be cast (or whose residuals overflow 32 bits) fall back
//!   to XOR.
//!
//! Deltas name their base by the SHA-256 of its layer data so they can never
//! be applied to the wrong model.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::codec::{
    compress_layer, compress_quantized, decompress_layer, decompress_quantized, CodecId,
    CompressedLayer, Granularity, Mode, PipelineConfig, DEFAULT_ZSTD_LEVEL,
};
use crate::container::{archive_from_bytes, archive_to_bytes, ArchiveHeader, ArchiveKind};
use crate::error::{Error, Result};
use crate::model::{DType, LayerRecord};
use crate::transforms::{dequantize, quantize, LossyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    Xor,
    LossyResidual(LossyParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaConfig {
    pub mode: DeltaMode,
    pub codec: CodecId,
    pub level: i32,
    pub byte_group: bool,
    pub sign_split: bool,
}

impl DeltaConfig {
    pub fn xor() -> Self {
        DeltaConfig {
            mode: DeltaMode::Xor,
            codec: CodecId::Zstd,
            level: DEFAULT_ZSTD_LEVEL,
            byte_group: true,
            sign_split: false,
        }
    }

    pub fn lossy(params: LossyParams) -> Self {
        DeltaConfig {
            mode: DeltaMode::LossyResidual(params),
            sign_split: true,
            ..Self::xor()
        }
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            mode: Mode::Lossless,
            byte_group: self.byte_group,
            sign_split: self.sign_split,
            codec: self.codec,
            level: self.level,
            granularity: Granularity::PerLayer,
        }
    }
}

fn check_structure(base: &LayerRecord, target: &LayerRecord) -> Result<()> {
    if base.name != target.name || base.dtype != target.dtype || base.shape != target.shape {
        return Err(Error::ManifestMismatch(format!(
            "base `{}` {} {:?} vs target `{}` {} {:?}",
            base.name, base.dtype, base.shape, target.name, target.dtype, target.shape
        )));
    }
    if base.data.len() != target.data.len() {
        return Err(Error::ManifestMismatch(format!(
            "layer `{}` byte lengths differ",
            base.name
        )));
    }
    Ok(())
}

pub fn diff_xor(base: &LayerRecord, target: &LayerRecord) -> Result<Vec<u8>> {
    check_structure(base, target)?;
    Ok(base
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| a ^ b)
        .collect())
}

pub fn apply_xor(base: &LayerRecord, delta: &[u8]) -> Result<LayerRecord> {
    if delta.len() != base.data.len() {
        return Err(Error::LengthMismatch {
            expected: base.data.len(),
            found: delta.len(),
        });
    }
    Ok(LayerRecord {
        data: base.data.iter().zip(delta).map(|(a, b)| a ^ b).collect(),
        ..base.clone()
    })
}

/// Result of diffing one layer in the fixed-point domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerDelta {
    Residual(Vec<i32>),
    /// The layer could not be expressed as residuals; holds the XOR delta.
    Xor(Vec<u8>),
}

pub fn diff_lossy(
    base: &LayerRecord,
    target: &LayerRecord,
    params: LossyParams,
) -> Result<LayerDelta> {
    check_structure(base, target)?;
    if base.dtype != DType::F32 {
        return Err(Error::UnsupportedDtype(base.dtype.to_string()));
    }
    let qb = quantize(&base.f32_values()?, params);
    let qt = quantize(&target.f32_values()?, params);
    if qb.fallback || qt.fallback {
        return Ok(LayerDelta::Xor(diff_xor(base, target)?));
    }
    let mut residual = Vec::with_capacity(qb.q.len());
    for (&b, &t) in qb.q.iter().zip(&qt.q) {
        match i32::try_from(t as i64 - b as i64) {
            Ok(r) if r != i32::MIN => residual.push(r),
            _ => return Ok(LayerDelta::Xor(diff_xor(base, target)?)),
        }
    }
    Ok(LayerDelta::Residual(residual))
}

pub fn apply_lossy(
    base: &LayerRecord,
    residual: &[i32],
    params: LossyParams,
) -> Result<LayerRecord> {
    if base.dtype != DType::F32 {
        return Err(Error::UnsupportedDtype(base.dtype.to_string()));
    }
    let qb = quantize(&base.f32_values()?, params);
    if qb.fallback {
        return Err(Error::FallbackRequired {
            layer: base.name.clone(),
        });
    }
    if residual.len() != qb.q.len() {
        return Err(Error::LengthMismatch {
            expected: qb.q.len(),
            found: residual.len(),
        });
    }
    let q =
        qb.q.iter()
            .zip(residual)
            .map(|(&b, &r)| {
                i32::try_from(b as i64 + r as i64)
                    .ok()
                    .filter(|q| *q != i32::MIN)
                    .ok_or_else(|| Error::CorruptPayload {
                        layer: base.name.clone(),
                        reason: "residual leaves the quantized range".into(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
    let data = dequantize(&q, params)
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    Ok(LayerRecord {
        data,
        ..base.clone()
    })
}

/// SHA-256 over the concatenated layer data, in layer order.
pub fn base_hash(layers: &[LayerRecord]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for layer in layers {
        hasher.update(&layer.data);
    }
    hasher.finalize().into()
}

/// A compressed delta from a base model to a target model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaDescriptor {
    pub base_id: [u8; 32],
    /// Not stored in archives.
    pub target_name: Option<String>,
    pub codec: CodecId,
    pub level: i32,
    /// One entry per layer. Entries with a lossy cast hold residuals, the rest
    /// hold XOR bytes.
    pub layers: Vec<CompressedLayer>,
}

impl DeltaDescriptor {
    /// The residual precision, if any layer is stored as residuals.
    pub fn mode(&self) -> DeltaMode {
        self.layers
            .iter()
            .find_map(|l| l.transforms.lossy)
            .map_or(DeltaMode::Xor, DeltaMode::LossyResidual)
    }

    pub fn payload_bytes(&self) -> u64 {
        self.layers.iter().map(CompressedLayer::payload_bytes).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = ArchiveHeader {
            kind: ArchiveKind::Delta,
            codec: self.codec,
            level: crate::container::format_level(self.level)?,
            granularity: Granularity::PerLayer,
            base_hash: self.base_id,
            layer_count: self.layers.len() as u64,
        };
        archive_to_bytes(&header, &self.layers)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, layers) = archive_from_bytes(bytes)?;
        if header.kind != ArchiveKind::Delta {
            return Err(Error::InvalidArchive(
                "expected a delta archive, found a model".into(),
            ));
        }
        Ok(DeltaDescriptor {
            base_id: header.base_hash,
            target_name: None,
            codec: header.codec,
            level: header.level as i32,
            layers,
        })
    }
}

pub fn build_delta(
    base: &[LayerRecord],
    target: &[LayerRecord],
    config: &DeltaConfig,
) -> Result<DeltaDescriptor> {
    if base.len() != target.len() {
        return Err(Error::ManifestMismatch(format!(
            "base has {} layers, target has {}",
            base.len(),
            target.len()
        )));
    }
    let pipeline = config.pipeline();
    let layers = base
        .par_iter()
        .zip(target)
        .map(|(b, t)| {
            b.validate()?;
            t.validate()?;
            let delta = match config.mode {
                DeltaMode::LossyResidual(params) if b.dtype == DType::F32 => {
                    diff_lossy(b, t, params)?
                }
                _ => LayerDelta::Xor(diff_xor(b, t)?),
            };
            match (delta, config.mode) {
                (LayerDelta::Residual(r), DeltaMode::LossyResidual(params)) => {
                    compress_quantized(&t.name, t.dtype, &t.shape, &r, params, &pipeline)
                }
                (LayerDelta::Residual(_), DeltaMode::Xor) => unreachable!(),
                (LayerDelta::Xor(x), _) => compress_layer(
                    &LayerRecord {
                        name: t.name.clone(),
                        dtype: t.dtype,
                        shape: t.shape.clone(),
                        data: x,
                    },
                    &pipeline,
                ),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaDescriptor {
        base_id: base_hash(base),
        target_name: None,
        codec: config.codec,
        level: config.level,
        layers,
    })
}

pub fn apply_delta(base: &[LayerRecord], delta: &DeltaDescriptor) -> Result<Vec<LayerRecord>> {
    if base_hash(base) != delta.base_id {
        return Err(Error::BaseHashMismatch);
    }
    if base.len() != delta.layers.len() {
        return Err(Error::ManifestMismatch(format!(
            "base has {} layers, delta has {}",
            base.len(),
            delta.layers.len()
        )));
    }
    base.par_iter()
        .zip(&delta.layers)
        .map(|(b, entry)| {
            if b.name != entry.name || b.dtype != entry.dtype || b.shape != entry.shape {
                return Err(Error::ManifestMismatch(format!(
                    "delta entry `{}` does not match base layer `{}`",
                    entry.name, b.name
                )));
            }
            match entry.transforms.lossy {
                Some(params) => apply_lossy(b, &decompress_quantized(entry)?, params),
                None => apply_xor(b, &decompress_layer(entry)?.data),
            }
        })
        .collect()
}
