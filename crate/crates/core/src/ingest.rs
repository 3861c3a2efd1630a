//! Reading and writing model weight files.
//!
//! The container is the safetensors layout: an 8-byte little-endian header
//! length `N`, `N` bytes of UTF-8 JSON, then the data region. Each JSON entry
//! maps a tensor name to `{"dtype", "shape", "data_offsets": [begin, end)}`
//! with offsets relative to the data region. An optional `__metadata__` value
//! is carried through as compact JSON text.
//!
//! Layers are returned in header order. On write the header is emitted
//! without whitespace, one entry per layer in manifest order with the data
//! laid out contiguously in that same order, so `parse(write(m, l))` gives
//! back exactly `(m, l)`.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{element_count, validate_manifest, DType, LayerRecord, ModelManifest};

const METADATA_KEY: &str = "__metadata__";

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedHeader(msg.into())
}

struct Span<'a> {
    name: &'a str,
    begin: u64,
    end: u64,
}

/// Parses a safetensors-style file into its manifest and layers.
pub fn parse_model_file(bytes: &[u8]) -> Result<(ModelManifest, Vec<LayerRecord>)> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .ok_or_else(|| malformed("file shorter than the 8-byte header length"))?
        .try_into()
        .unwrap();
    let header_len = u64::from_le_bytes(len_bytes);
    let header_end = 8u64
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len() as u64)
        .ok_or_else(|| malformed(format!("header length {header_len} exceeds file size")))?
        as usize;
    let header: Map<String, Value> = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| malformed(format!("header is not a JSON object: {e}")))?;
    let data = &bytes[header_end..];

    let mut metadata = None;
    let mut layers = Vec::with_capacity(header.len());
    let mut spans = Vec::with_capacity(header.len());
    for (name, entry) in &header {
        if name == METADATA_KEY {
            metadata = Some(entry.to_string());
            continue;
        }
        if name.is_empty() {
            return Err(malformed("tensor with empty name"));
        }
        let (dtype_str, shape, begin, end) = parse_entry(name, entry)?;
        if begin > end {
            return Err(malformed(format!("tensor `{name}` has begin > end")));
        }
        if end > data.len() as u64 {
            return Err(Error::TruncatedData { name: name.clone() });
        }
        let span_len = end - begin;
        let (dtype, shape) = match DType::from_safetensors(dtype_str) {
            Some(dtype) => {
                let expected =
                    element_count(&shape).and_then(|n| n.checked_mul(dtype.width() as u64));
                if expected != Some(span_len) {
                    return Err(malformed(format!(
                        "tensor `{name}` spans {span_len} bytes, its shape and dtype need {expected:?}"
                    )));
                }
                (dtype, shape)
            }
            // Unknown dtypes pass through as a flat byte array.
            None => (DType::Raw8, vec![span_len]),
        };
        spans.push(Span { name, begin, end });
        layers.push(LayerRecord {
            name: name.clone(),
            dtype,
            shape,
            data: data[begin as usize..end as usize].to_vec(),
        });
    }
    check_overlaps(&mut spans)?;

    let mut manifest = ModelManifest::from_layers(&layers);
    manifest.metadata = metadata;
    Ok((manifest, layers))
}

fn parse_entry<'a>(name: &str, entry: &'a Value) -> Result<(&'a str, Vec<u64>, u64, u64)> {
    let bad = |what: &str| malformed(format!("tensor `{name}`: {what}"));
    let obj = entry
        .as_object()
        .ok_or_else(|| bad("entry is not an object"))?;
    let dtype = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing dtype string"))?;
    let shape = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing shape array"))?
        .iter()
        .map(|d| {
            d.as_u64()
                .ok_or_else(|| bad("shape extent is not an unsigned integer"))
        })
        .collect::<Result<Vec<_>>>()?;
    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| bad("data_offsets must be a pair"))?;
    let begin = offsets[0].as_u64().ok_or_else(|| bad("bad begin offset"))?;
    let end = offsets[1].as_u64().ok_or_else(|| bad("bad end offset"))?;
    Ok((dtype, shape, begin, end))
}

fn check_overlaps(spans: &mut [Span<'_>]) -> Result<()> {
    spans.sort_by_key(|s| (s.begin, s.end));
    let mut prev: Option<&Span<'_>> = None;
    for span in spans.iter().filter(|s| s.end > s.begin) {
        if let Some(p) = prev {
            if span.begin < p.end {
                return Err(Error::OverlappingSpans {
                    first: p.name.to_string(),
                    second: span.name.to_string(),
                });
            }
        }
        prev = Some(span);
    }
    Ok(())
}

/// Serializes a validated model into a safetensors-style file.
pub fn write_model_file(manifest: &ModelManifest, layers: &[LayerRecord]) -> Result<Vec<u8>> {
    let report = validate_manifest(manifest, layers);
    if !report.is_valid() {
        return Err(Error::ValidationFailed(report));
    }

    let mut header = String::from("{");
    let mut first = true;
    if let Some(meta) = &manifest.metadata {
        let value: Value = serde_json::from_str(meta)
            .map_err(|e| malformed(format!("metadata is not valid JSON: {e}")))?;
        header.push_str(&format!("\"{METADATA_KEY}\":{value}"));
        first = false;
    }
    let mut offset = 0u64;
    for layer in layers {
        if !first {
            header.push(',');
        }
        first = false;
        let end = offset + layer.byte_len();
        let entry = serde_json::json!({
            "data_offsets": [offset, end],
            "dtype": layer.dtype.safetensors_name(),
            "shape": layer.shape,
        });
        header.push_str(&Value::String(layer.name.clone()).to_string());
        header.push(':');
        header.push_str(&entry.to_string());
        offset = end;
    }
    header.push('}');

    let mut out = Vec::with_capacity(8 + header.len() + offset as usize);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for layer in layers {
        out.extend_from_slice(&layer.data);
    }
    Ok(out)
}

/// Wraps a headerless binary blob as a single one-dimensional layer.
pub fn parse_raw_blob(bytes: &[u8], dtype: DType, name: &str) -> Result<LayerRecord> {
    let width = dtype.width();
    if !bytes.len().is_multiple_of(width) {
        return Err(Error::MisalignedLength {
            len: bytes.len(),
            width,
        });
    }
    LayerRecord::new(
        name,
        dtype,
        vec![(bytes.len() / width) as u64],
        bytes.to_vec(),
    )
}
