//! Transform pipeline: lossy cast → sign split → byte grouping → block codec.
//!
//! Each stage is optional. The stages applied to a layer are recorded in its
//! [`TransformChain`], which is all a reader needs to invert them. Byte
//! groups are compressed as independent blocks so their individual ratios can
//! be reported and they can be decoded in parallel.

use std::fmt;

use rayon::prelude::*;

use super::backend::{compress_block, decompress_block, CodecId, DEFAULT_ZSTD_LEVEL};
use crate::error::{Error, Result};
use crate::model::{element_count, validate_manifest, DType, LayerRecord, ModelManifest};
use crate::transforms::{
    dequantize, from_sign_magnitude, group_bytes, lossy_encode, merge_sign_words, sign_stream_len,
    split_sign_words, to_sign_magnitude, ungroup_bytes, ByteGroups, LossyParams, SignSplit,
};

/// Name of the single data-bearing entry in a whole-model archive.
pub const WHOLE_MODEL_NAME: &str = "__whole__";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lossless,
    Lossy(LossyParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    #[default]
    PerLayer,
    WholeModel,
}

impl Granularity {
    pub fn code(self) -> u8 {
        match self {
            Granularity::PerLayer => 0,
            Granularity::WholeModel => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Granularity::PerLayer),
            1 => Ok(Granularity::WholeModel),
            c => Err(Error::InvalidArchive(format!("unknown granularity {c}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub byte_group: bool,
    pub sign_split: bool,
    pub codec: CodecId,
    pub level: i32,
    pub granularity: Granularity,
}

impl PipelineConfig {
    /// zstd level 3 with byte grouping; sign split off.
    pub fn lossless() -> Self {
        PipelineConfig {
            mode: Mode::Lossless,
            byte_group: true,
            sign_split: false,
            codec: CodecId::Zstd,
            level: DEFAULT_ZSTD_LEVEL,
            granularity: Granularity::PerLayer,
        }
    }

    /// Lossless defaults plus the fixed-point cast and sign split.
    pub fn lossy(params: LossyParams) -> Self {
        PipelineConfig {
            mode: Mode::Lossy(params),
            sign_split: true,
            ..Self::lossless()
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::lossless()
    }
}

/// One step of a transform chain, in application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    LossyCast(LossyParams),
    SignSplit,
    ByteGroup,
}

/// The transforms that were applied to one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransformChain {
    pub byte_group: bool,
    pub sign_split: bool,
    pub lossy: Option<LossyParams>,
    /// A lossy cast was requested but the layer did not fit the integer range.
    pub raw_fallback: bool,
}

const FLAG_BYTE_GROUP: u8 = 1;
const FLAG_SIGN_SPLIT: u8 = 1 << 1;
const FLAG_LOSSY: u8 = 1 << 2;
const FLAG_RAW_FALLBACK: u8 = 1 << 3;

impl TransformChain {
    pub fn steps(&self) -> Vec<Transform> {
        let mut steps = Vec::with_capacity(3);
        if let Some(p) = self.lossy {
            steps.push(Transform::LossyCast(p));
        }
        if self.sign_split {
            steps.push(Transform::SignSplit);
        }
        if self.byte_group {
            steps.push(Transform::ByteGroup);
        }
        steps
    }

    pub fn flags(&self) -> u8 {
        let mut f = 0;
        if self.byte_group {
            f |= FLAG_BYTE_GROUP;
        }
        if self.sign_split {
            f |= FLAG_SIGN_SPLIT;
        }
        if self.lossy.is_some() {
            f |= FLAG_LOSSY;
        }
        if self.raw_fallback {
            f |= FLAG_RAW_FALLBACK;
        }
        f
    }

    /// Precision byte stored next to the flags; 0 when unused.
    pub fn precision_bits(&self) -> u8 {
        self.lossy.map_or(0, |p| p.bits() as u8)
    }

    pub fn from_wire(flags: u8, b: u8) -> Result<Self> {
        if flags & !0x0f != 0 {
            return Err(Error::InvalidArchive(format!(
                "unknown transform flags {flags:#04x}"
            )));
        }
        let lossy =
            if flags & FLAG_LOSSY != 0 {
                Some(LossyParams::new(b as u32).map_err(|_| {
                    Error::InvalidArchive(format!("lossy entry with precision {b}"))
                })?)
            } else if b != 0 {
                return Err(Error::InvalidArchive(
                    "precision set without lossy flag".into(),
                ));
            } else {
                None
            };
        if lossy.is_some() && flags & FLAG_RAW_FALLBACK != 0 {
            return Err(Error::InvalidArchive(
                "entry is both lossy and a fallback".into(),
            ));
        }
        Ok(TransformChain {
            byte_group: flags & FLAG_BYTE_GROUP != 0,
            sign_split: flags & FLAG_SIGN_SPLIT != 0,
            lossy,
            raw_fallback: flags & FLAG_RAW_FALLBACK != 0,
        })
    }
}

impl fmt::Display for TransformChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .steps()
            .iter()
            .map(|s| match s {
                Transform::LossyCast(p) => format!("lossy(b={})", p.bits()),
                Transform::SignSplit => "sign-split".into(),
                Transform::ByteGroup => "byte-group".into(),
            })
            .collect();
        if self.raw_fallback {
            parts.push("fallback".into());
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// A compressed block together with the length it decodes to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Payload {
    pub uncompressed_len: u64,
    pub data: Vec<u8>,
}

impl Payload {
    pub fn compressed_len(&self) -> u64 {
        self.data.len() as u64
    }
}

/// Everything needed to rebuild one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedLayer {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<u64>,
    pub element_count: u64,
    pub transforms: TransformChain,
    pub codec: CodecId,
    pub level: i32,
    /// One payload per byte group, most significant group first.
    pub groups: Vec<Payload>,
    pub sign: Option<Payload>,
    /// CRC-32 of the original bytes, or of the little-endian `i32` stream for
    /// entries holding quantized integers.
    pub crc32: u32,
}

impl CompressedLayer {
    pub fn payload_bytes(&self) -> u64 {
        self.groups.iter().map(Payload::compressed_len).sum::<u64>()
            + self.sign.as_ref().map_or(0, Payload::compressed_len)
    }

    /// Size of the layer before compression.
    pub fn original_bytes(&self) -> u64 {
        self.element_count * self.dtype.width() as u64
    }

    fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::CorruptPayload {
            layer: self.name.clone(),
            reason: reason.into(),
        }
    }
}

fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

fn i32_le_bytes(q: &[i32]) -> Vec<u8> {
    q.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn f32_le_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn sign_magnitude_stream(q: &[i32]) -> Vec<u8> {
    q.iter()
        .flat_map(|&x| to_sign_magnitude(x).to_le_bytes())
        .collect()
}

struct StreamSpec<'a> {
    name: &'a str,
    dtype: DType,
    shape: &'a [u64],
    element_count: u64,
    word_width: usize,
    signable: bool,
    chain: TransformChain,
    crc32: u32,
}

fn encode_stream(
    spec: StreamSpec<'_>,
    stream: Vec<u8>,
    config: &PipelineConfig,
) -> Result<CompressedLayer> {
    let mut chain = spec.chain;
    let width = spec.word_width;
    let (stream, sign_raw) = if config.sign_split && spec.signable {
        chain.sign_split = true;
        let SignSplit {
            signs, magnitudes, ..
        } = split_sign_words(&stream, width)?;
        (magnitudes, Some(signs))
    } else {
        (stream, None)
    };
    let raw_groups = if config.byte_group && width > 1 {
        chain.byte_group = true;
        group_bytes(&stream, width)?.groups
    } else {
        vec![stream]
    };
    let groups = raw_groups
        .par_iter()
        .map(|g| {
            Ok(Payload {
                uncompressed_len: g.len() as u64,
                data: compress_block(g, config.codec, config.level)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sign = sign_raw
        .map(|s| {
            Ok::<_, Error>(Payload {
                uncompressed_len: s.len() as u64,
                data: compress_block(&s, config.codec, config.level)?,
            })
        })
        .transpose()?;
    Ok(CompressedLayer {
        name: spec.name.to_string(),
        dtype: spec.dtype,
        shape: spec.shape.to_vec(),
        element_count: spec.element_count,
        transforms: chain,
        codec: config.codec,
        level: config.level,
        groups,
        sign,
        crc32: spec.crc32,
    })
}

/// Compresses one layer.
///
/// In lossy mode only FP32 layers are cast; other dtypes go through the
/// lossless path. An FP32 layer that cannot be cast is stored losslessly with
/// `raw_fallback` set.
pub fn compress_layer(layer: &LayerRecord, config: &PipelineConfig) -> Result<CompressedLayer> {
    layer.validate()?;
    let mut chain = TransformChain::default();
    if let Mode::Lossy(params) = config.mode {
        if layer.dtype == DType::F32 {
            let quantized = lossy_encode(&layer.data, layer.dtype, params)?;
            if quantized.fallback {
                chain.raw_fallback = true;
            } else {
                return compress_quantized(
                    &layer.name,
                    layer.dtype,
                    &layer.shape,
                    &quantized.q,
                    params,
                    config,
                );
            }
        }
    }
    let spec = StreamSpec {
        name: &layer.name,
        dtype: layer.dtype,
        shape: &layer.shape,
        element_count: layer.element_count(),
        word_width: layer.dtype.width(),
        signable: layer.dtype.is_float(),
        chain,
        crc32: crc32(&layer.data),
    };
    encode_stream(spec, layer.data.clone(), config)
}

/// Compresses a stream of quantized integers as a lossy-cast entry.
pub fn compress_quantized(
    name: &str,
    dtype: DType,
    shape: &[u64],
    q: &[i32],
    params: LossyParams,
    config: &PipelineConfig,
) -> Result<CompressedLayer> {
    let spec = StreamSpec {
        name,
        dtype,
        shape,
        element_count: q.len() as u64,
        word_width: 4,
        signable: true,
        chain: TransformChain {
            lossy: Some(params),
            ..TransformChain::default()
        },
        crc32: crc32(&i32_le_bytes(q)),
    };
    encode_stream(spec, sign_magnitude_stream(q), config)
}

/// Undoes codec, byte grouping and sign split, yielding the pre-transform
/// word stream. The checksum is not verified here.
fn decode_stream(cl: &CompressedLayer) -> Result<Vec<u8>> {
    let chain = &cl.transforms;
    let width = if chain.lossy.is_some() {
        4
    } else {
        cl.dtype.width()
    };
    let n = usize::try_from(cl.element_count).map_err(|_| cl.corrupt("element count too large"))?;
    let total = n
        .checked_mul(width)
        .ok_or_else(|| cl.corrupt("element count too large"))?;

    let group_count = if chain.byte_group { width } else { 1 };
    if cl.groups.len() != group_count {
        return Err(cl.corrupt(format!(
            "expected {group_count} byte groups, found {}",
            cl.groups.len()
        )));
    }
    let group_len = if chain.byte_group { n } else { total };
    if cl
        .groups
        .iter()
        .any(|g| g.uncompressed_len != group_len as u64)
    {
        return Err(cl.corrupt("byte group lengths disagree with the element count"));
    }
    let decoded = cl
        .groups
        .par_iter()
        .map(|g| decompress_block(&g.data, cl.codec, group_len))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| cl.corrupt(e.to_string()))?;
    let stream = if chain.byte_group {
        ungroup_bytes(&ByteGroups {
            width,
            groups: decoded,
        })
        .map_err(|e| cl.corrupt(e.to_string()))?
    } else {
        decoded.into_iter().next().unwrap_or_default()
    };

    match (&cl.sign, chain.sign_split) {
        (Some(sign), true) => {
            let sign_len = sign_stream_len(n);
            if sign.uncompressed_len != sign_len as u64 {
                return Err(cl.corrupt("sign stream length disagrees with the element count"));
            }
            let signs = decompress_block(&sign.data, cl.codec, sign_len)
                .map_err(|e| cl.corrupt(e.to_string()))?;
            merge_sign_words(
                &SignSplit {
                    count: n,
                    signs,
                    magnitudes: stream,
                },
                width,
            )
            .map_err(|e| cl.corrupt(e.to_string()))
        }
        (None, false) => Ok(stream),
        _ => Err(cl.corrupt("sign payload presence disagrees with the transform flags")),
    }
}

fn verify_crc(cl: &CompressedLayer, bytes: &[u8]) -> Result<()> {
    let computed = crc32(bytes);
    if computed != cl.crc32 {
        return Err(Error::ChecksumMismatch {
            layer: cl.name.clone(),
            stored: cl.crc32,
            computed,
        });
    }
    Ok(())
}

/// Recovers the integer stream of a lossy-cast entry, checksum verified.
pub fn decompress_quantized(cl: &CompressedLayer) -> Result<Vec<i32>> {
    if cl.transforms.lossy.is_none() {
        return Err(cl.corrupt("entry does not hold quantized integers"));
    }
    let words = decode_stream(cl)?;
    let q = words
        .chunks_exact(4)
        .map(|c| from_sign_magnitude(u32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| cl.corrupt(e.to_string()))?;
    verify_crc(cl, &i32_le_bytes(&q))?;
    Ok(q)
}

/// Rebuilds a layer. Lossless entries come back bit-exact; lossy entries come
/// back as `q / 2^b`.
pub fn decompress_layer(cl: &CompressedLayer) -> Result<LayerRecord> {
    let data = match cl.transforms.lossy {
        Some(params) => {
            if cl.dtype != DType::F32 {
                return Err(cl.corrupt("lossy entry with a non-FP32 dtype"));
            }
            f32_le_bytes(&dequantize(&decompress_quantized(cl)?, params))
        }
        None => {
            let data = decode_stream(cl)?;
            verify_crc(cl, &data)?;
            data
        }
    };
    if element_count(&cl.shape) != Some(cl.element_count) {
        return Err(cl.corrupt("shape disagrees with the element count"));
    }
    Ok(LayerRecord {
        name: cl.name.clone(),
        dtype: cl.dtype,
        shape: cl.shape.clone(),
        data,
    })
}

/// A compressed model.
///
/// Per-layer models hold one entry per layer. Whole-model models hold one
/// data-bearing entry named [`WHOLE_MODEL_NAME`] followed by one payload-free
/// entry per layer that records its name, shape and checksum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedModel {
    pub granularity: Granularity,
    pub entries: Vec<CompressedLayer>,
}

impl CompressedModel {
    /// Entries that carry payload.
    pub fn data_entries(&self) -> &[CompressedLayer] {
        match self.granularity {
            Granularity::PerLayer => &self.entries,
            Granularity::WholeModel => &self.entries[..self.entries.len().min(1)],
        }
    }
}

pub fn compress_model(layers: &[LayerRecord], config: &PipelineConfig) -> Result<CompressedModel> {
    let report = validate_manifest(&ModelManifest::from_layers(layers), layers);
    if !report.is_valid() {
        return Err(Error::ValidationFailed(report));
    }
    let entries = match config.granularity {
        Granularity::PerLayer => layers
            .par_iter()
            .map(|l| compress_layer(l, config))
            .collect::<Result<Vec<_>>>()?,
        Granularity::WholeModel => compress_whole(layers, config)?,
    };
    Ok(CompressedModel {
        granularity: config.granularity,
        entries,
    })
}

fn compress_whole(layers: &[LayerRecord], config: &PipelineConfig) -> Result<Vec<CompressedLayer>> {
    let Some(first) = layers.first() else {
        return Ok(Vec::new());
    };
    let dtype = first.dtype;
    if layers.iter().any(|l| l.dtype != dtype) {
        return Err(Error::MixedDtypeWholeModel);
    }
    let data: Vec<u8> = layers.iter().flat_map(|l| l.data.iter().copied()).collect();
    let whole = LayerRecord {
        name: WHOLE_MODEL_NAME.to_string(),
        dtype,
        shape: vec![(data.len() / dtype.width()) as u64],
        data,
    };
    let head = compress_layer(&whole, config)?;

    // Layer checksums cover what decompression will hand back.
    let reconstructed = match head.transforms.lossy {
        Some(params) => {
            let q = crate::transforms::quantize(&whole.f32_values()?, params).q;
            f32_le_bytes(&dequantize(&q, params))
        }
        None => whole.data,
    };
    let mut entries = Vec::with_capacity(layers.len() + 1);
    entries.push(head);
    let mut offset = 0;
    for layer in layers {
        let len = layer.data.len();
        entries.push(CompressedLayer {
            name: layer.name.clone(),
            dtype,
            shape: layer.shape.clone(),
            element_count: layer.element_count(),
            transforms: TransformChain::default(),
            codec: config.codec,
            level: config.level,
            groups: Vec::new(),
            sign: None,
            crc32: crc32(&reconstructed[offset..offset + len]),
        });
        offset += len;
    }
    Ok(entries)
}

pub fn decompress_model(model: &CompressedModel) -> Result<Vec<LayerRecord>> {
    match model.granularity {
        Granularity::PerLayer => model.entries.par_iter().map(decompress_layer).collect(),
        Granularity::WholeModel => {
            let Some((head, slices)) = model.entries.split_first() else {
                return Ok(Vec::new());
            };
            let whole = decompress_layer(head)?;
            let width = head.dtype.width();
            let total: Option<u64> = slices
                .iter()
                .try_fold(0u64, |acc, s| acc.checked_add(s.element_count));
            if total != Some(head.element_count) {
                return Err(head.corrupt("layer sizes do not add up to the stream length"));
            }
            let mut offset = 0usize;
            let mut out = Vec::with_capacity(slices.len());
            for s in slices {
                if s.dtype != head.dtype || element_count(&s.shape) != Some(s.element_count) {
                    return Err(s.corrupt("manifest entry disagrees with the stream"));
                }
                let len = s.element_count as usize * width;
                let data = whole.data[offset..offset + len].to_vec();
                verify_crc(s, &data)?;
                offset += len;
                out.push(LayerRecord {
                    name: s.name.clone(),
                    dtype: s.dtype,
                    shape: s.shape.clone(),
                    data,
                });
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossy(b: u32) -> PipelineConfig {
        PipelineConfig::lossy(LossyParams::new(b).unwrap())
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert!(c.byte_group && !c.sign_split);
        assert_eq!(
            (c.codec, c.level, c.granularity),
            (CodecId::Zstd, 3, Granularity::PerLayer)
        );
        assert!(lossy(10).sign_split);
    }

    #[test]
    fn constant_layer_groups_collapse() {
        let layer = LayerRecord::from_f32("half", vec![1024], &[0.5; 1024]).unwrap();
        let cl = compress_layer(&layer, &PipelineConfig::lossless()).unwrap();
        assert_eq!(cl.groups.len(), 4);
        assert_eq!(cl.transforms.steps(), vec![Transform::ByteGroup]);
        // Pinned: four 1024-byte constant groups, zstd level 3.
        let sizes: Vec<_> = cl.groups.iter().map(|g| g.data.len()).collect();
        assert_eq!(sizes, vec![19, 19, 19, 19]);
        assert!(cl.payload_bytes() * 20 < layer.byte_len());
        assert_eq!(decompress_layer(&cl).unwrap(), layer);
    }

    #[test]
    fn empty_layer() {
        let layer = LayerRecord::from_f32("e", vec![0], &[]).unwrap();
        let cl = compress_layer(&layer, &PipelineConfig::lossless()).unwrap();
        assert_eq!(cl.payload_bytes(), 0);
        assert!(cl.groups.iter().all(|g| g.data.is_empty()));
        assert_eq!(decompress_layer(&cl).unwrap(), layer);
    }

    #[test]
    fn overflow_falls_back() {
        let layer = LayerRecord::from_f32("big", vec![2], &[0.5, 300.0]).unwrap();
        let cl = compress_layer(&layer, &lossy(23)).unwrap();
        assert!(cl.transforms.raw_fallback);
        assert!(cl.transforms.lossy.is_none());
        assert_eq!(decompress_layer(&cl).unwrap(), layer);
    }

    #[test]
    fn lossy_reconstruction() {
        let layer = LayerRecord::from_f32("l", vec![2], &[0.75, -0.3]).unwrap();
        let cl = compress_layer(&layer, &lossy(2)).unwrap();
        assert_eq!(
            cl.transforms.steps(),
            vec![
                Transform::LossyCast(LossyParams::new(2).unwrap()),
                Transform::SignSplit,
                Transform::ByteGroup
            ]
        );
        let out = decompress_layer(&cl).unwrap();
        assert_eq!(out.f32_values().unwrap(), vec![0.75, -0.25]);
    }

    #[test]
    fn lossy_skips_non_fp32() {
        let layer =
            LayerRecord::new("h", DType::BF16, vec![2], vec![0x80, 0x3f, 0x80, 0xbf]).unwrap();
        let cl = compress_layer(&layer, &lossy(8)).unwrap();
        assert!(cl.transforms.lossy.is_none() && !cl.transforms.raw_fallback);
        assert!(cl.transforms.sign_split);
        assert_eq!(decompress_layer(&cl).unwrap(), layer);
    }

    #[test]
    fn tampering_detected() {
        let values: Vec<f32> = (0..512).map(|i| (i as f32 * 0.37).sin()).collect();
        let layer = LayerRecord::from_f32("t", vec![512], &values).unwrap();
        let config = PipelineConfig {
            codec: CodecId::Store,
            ..PipelineConfig::lossless()
        };
        let mut cl = compress_layer(&layer, &config).unwrap();
        cl.groups[2].data[100] ^= 0x10;
        assert!(
            matches!(decompress_layer(&cl), Err(Error::ChecksumMismatch { layer, .. }) if layer == "t")
        );
    }

    #[test]
    fn raw_layers_use_one_group() {
        let layer = LayerRecord::new("r", DType::Raw8, vec![6], vec![1, 2, 3, 4, 5, 6]).unwrap();
        let mut config = PipelineConfig::lossless();
        config.sign_split = true;
        let cl = compress_layer(&layer, &config).unwrap();
        assert_eq!(cl.groups.len(), 1);
        assert_eq!(cl.transforms, TransformChain::default());
        assert_eq!(decompress_layer(&cl).unwrap(), layer);
    }

    fn two_layers() -> Vec<LayerRecord> {
        vec![
            LayerRecord::from_f32("a", vec![2, 2], &[1.0, -2.0, 0.25, 8.0]).unwrap(),
            LayerRecord::from_f32("b", vec![3], &[0.1, 0.2, 0.3]).unwrap(),
        ]
    }

    #[test]
    fn per_layer_model() {
        let layers = two_layers();
        let m = compress_model(&layers, &PipelineConfig::lossless()).unwrap();
        let names: Vec<_> = m.entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(decompress_model(&m).unwrap(), layers);
    }

    #[test]
    fn whole_model() {
        let layers = two_layers();
        let config = PipelineConfig {
            granularity: Granularity::WholeModel,
            ..PipelineConfig::lossless()
        };
        let m = compress_model(&layers, &config).unwrap();
        assert_eq!(m.data_entries().len(), 1);
        let head = &m.entries[0];
        assert_eq!(head.name, WHOLE_MODEL_NAME);
        assert_eq!(head.original_bytes(), 28);
        assert_eq!(
            head.groups.iter().map(|g| g.uncompressed_len).sum::<u64>(),
            28
        );
        assert_eq!(decompress_model(&m).unwrap(), layers);

        let lossy_whole = PipelineConfig {
            granularity: Granularity::WholeModel,
            ..lossy(20)
        };
        let m = compress_model(&layers, &lossy_whole).unwrap();
        let out = decompress_model(&m).unwrap();
        assert_eq!(out.len(), 2);
        for (a, b) in out.iter().zip(&layers) {
            for (x, y) in a.f32_values().unwrap().iter().zip(b.f32_values().unwrap()) {
                assert!((x - y).abs() < 2f32.powi(-20));
            }
        }
    }

    #[test]
    fn whole_model_needs_one_dtype() {
        let mut layers = two_layers();
        layers.push(LayerRecord::new("c", DType::BF16, vec![1], vec![0, 0]).unwrap());
        let config = PipelineConfig {
            granularity: Granularity::WholeModel,
            ..PipelineConfig::lossless()
        };
        assert!(matches!(
            compress_model(&layers, &config),
            Err(Error::MixedDtypeWholeModel)
        ));
    }

    #[test]
    fn invalid_model_rejected() {
        let mut layers = two_layers();
        layers[1].name = "a".into();
        assert!(matches!(
            compress_model(&layers, &PipelineConfig::lossless()),
            Err(Error::ValidationFailed(_))
        ));
    }

    #[test]
    fn wire_flags() {
        let chain = TransformChain {
            byte_group: true,
            sign_split: true,
            lossy: Some(LossyParams::new(23).unwrap()),
            raw_fallback: false,
        };
        assert_eq!(chain.flags(), 0b0111);
        assert_eq!(TransformChain::from_wire(chain.flags(), 23).unwrap(), chain);
        assert!(TransformChain::from_wire(0b0100, 0).is_err());
        assert!(TransformChain::from_wire(0b0001, 5).is_err());
        assert!(TransformChain::from_wire(0b1100, 5).is_err());
        assert!(TransformChain::from_wire(0x10, 0).is_err());
        assert_eq!(chain.to_string(), "lossy(b=23)+sign-split+byte-group");
    }
}
