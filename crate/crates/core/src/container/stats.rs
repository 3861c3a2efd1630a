//! Per-layer and per-byte-group compression statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::format::{entry_overhead, ArchiveHeader, ArchiveKind, HEADER_LEN};
use crate::codec::{CompressedLayer, Granularity};
use crate::error::Result;
use crate::model::{compute_ratio, format_percent, CompressionRatio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockStat {
    pub uncompressed_bytes: u64,
    pub compressed_bytes: u64,
}

impl BlockStat {
    pub fn ratio(&self) -> Option<f64> {
        (self.uncompressed_bytes > 0)
            .then(|| self.compressed_bytes as f64 / self.uncompressed_bytes as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerStats {
    pub name: String,
    pub dtype: String,
    pub transforms: String,
    pub fallback: bool,
    pub original_bytes: u64,
    pub payload_bytes: u64,
    pub overhead_bytes: u64,
    pub groups: Vec<BlockStat>,
    pub sign: Option<BlockStat>,
}

impl LayerStats {
    fn from_entry(entry: &CompressedLayer) -> Self {
        LayerStats {
            name: entry.name.clone(),
            dtype: entry.dtype.to_string(),
            transforms: entry.transforms.to_string(),
            fallback: entry.transforms.raw_fallback,
            original_bytes: entry.original_bytes(),
            payload_bytes: entry.payload_bytes(),
            overhead_bytes: entry_overhead(entry),
            groups: entry
                .groups
                .iter()
                .map(|g| BlockStat {
                    uncompressed_bytes: g.uncompressed_len,
                    compressed_bytes: g.compressed_len(),
                })
                .collect(),
            sign: entry.sign.as_ref().map(|s| BlockStat {
                uncompressed_bytes: s.uncompressed_len,
                compressed_bytes: s.compressed_len(),
            }),
        }
    }

    pub fn compressed_bytes(&self, payload_only: bool) -> u64 {
        if payload_only {
            self.payload_bytes
        } else {
            self.payload_bytes + self.overhead_bytes
        }
    }

    /// `None` for empty layers.
    pub fn ratio(&self, payload_only: bool) -> Option<CompressionRatio> {
        compute_ratio(self.compressed_bytes(payload_only), self.original_bytes).ok()
    }
}

/// Statistics for a whole archive.
///
/// Unless `payload_only` is requested, ratios count every byte of the file:
/// the archive header, per-entry headers and names, and whole-model manifest
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveStats {
    pub kind: &'static str,
    pub codec: String,
    pub level: u8,
    pub granularity: &'static str,
    pub layers: Vec<LayerStats>,
    /// Bytes of manifest-only entries (whole-model archives).
    pub manifest_bytes: u64,
    pub file_bytes: u64,
}

impl ArchiveStats {
    pub fn collect<I>(header: &ArchiveHeader, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<CompressedLayer>>,
    {
        let mut layers = Vec::new();
        let mut manifest_bytes = 0;
        for (i, entry) in entries.into_iter().enumerate() {
            let entry = entry?;
            if header.granularity == Granularity::WholeModel && i > 0 {
                manifest_bytes += entry_overhead(&entry);
            } else {
                layers.push(LayerStats::from_entry(&entry));
            }
        }
        let file_bytes = HEADER_LEN
            + manifest_bytes
            + layers
                .iter()
                .map(|l| l.payload_bytes + l.overhead_bytes)
                .sum::<u64>();
        Ok(ArchiveStats {
            kind: match header.kind {
                ArchiveKind::Model => "model",
                ArchiveKind::Delta => "delta",
            },
            codec: header.codec.to_string(),
            level: header.level,
            granularity: match header.granularity {
                Granularity::PerLayer => "layer",
                Granularity::WholeModel => "model",
            },
            layers,
            manifest_bytes,
            file_bytes,
        })
    }

    pub fn original_bytes(&self) -> u64 {
        self.layers.iter().map(|l| l.original_bytes).sum()
    }

    pub fn compressed_bytes(&self, payload_only: bool) -> u64 {
        if payload_only {
            self.layers.iter().map(|l| l.payload_bytes).sum()
        } else {
            self.file_bytes
        }
    }

    pub fn total_ratio(&self, payload_only: bool) -> Option<CompressionRatio> {
        compute_ratio(self.compressed_bytes(payload_only), self.original_bytes()).ok()
    }

    /// Byte-weighted per-group ratios, bucketed by group count.
    pub fn aggregate_groups(&self) -> BTreeMap<usize, Vec<BlockStat>> {
        let mut out: BTreeMap<usize, Vec<BlockStat>> = BTreeMap::new();
        for layer in &self.layers {
            let acc = out.entry(layer.groups.len()).or_insert_with(|| {
                vec![
                    BlockStat {
                        uncompressed_bytes: 0,
                        compressed_bytes: 0
                    };
                    layer.groups.len()
                ]
            });
            for (a, g) in acc.iter_mut().zip(&layer.groups) {
                a.uncompressed_bytes += g.uncompressed_bytes;
                a.compressed_bytes += g.compressed_bytes;
            }
        }
        out
    }

    pub fn fallback_layers(&self) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| l.fallback)
            .map(|l| l.name.as_str())
            .collect()
    }

    pub fn to_table(&self, payload_only: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<40} {:>6} {:>14} {:>14} {:>9}  groups",
            "layer", "dtype", "original", "compressed", "ratio"
        );
        for l in &self.layers {
            let _ = writeln!(
                out,
                "{:<40} {:>6} {:>14} {:>14} {:>9}  {}{}",
                l.name,
                l.dtype,
                l.original_bytes,
                l.compressed_bytes(payload_only),
                opt_ratio(l.ratio(payload_only)),
                format_group_ratios(&l.groups),
                l.sign
                    .map(|s| format!(" sign {}", opt_pct(s.ratio())))
                    .unwrap_or_default(),
            );
        }
        let _ = write!(
            out,
            "{:<40} {:>6} {:>14} {:>14} {:>9}",
            "TOTAL",
            "",
            self.original_bytes(),
            self.compressed_bytes(payload_only),
            opt_ratio(self.total_ratio(payload_only)),
        );
        for groups in self.aggregate_groups().values() {
            let _ = write!(out, "  {}", format_group_ratios(groups));
        }
        out.push('\n');
        let fallbacks = self.fallback_layers();
        if !fallbacks.is_empty() {
            let _ = writeln!(out, "fallback layers: {}", fallbacks.join(", "));
        }
        out
    }

    /// One row per block: `layer,block,uncompressed_bytes,compressed_bytes,ratio`.
    pub fn to_csv(&self, payload_only: bool) -> String {
        let mut out = String::from("layer,block,uncompressed_bytes,compressed_bytes,ratio\n");
        let mut row = |layer: &str, block: &str, raw: u64, comp: u64| {
            let ratio = if raw > 0 {
                format!("{:.6}", comp as f64 / raw as f64)
            } else {
                String::new()
            };
            let _ = writeln!(out, "{},{block},{raw},{comp},{ratio}", csv_field(layer));
        };
        for l in &self.layers {
            row(
                &l.name,
                "total",
                l.original_bytes,
                l.compressed_bytes(payload_only),
            );
            for (i, g) in l.groups.iter().enumerate() {
                row(
                    &l.name,
                    &format!("group{i}"),
                    g.uncompressed_bytes,
                    g.compressed_bytes,
                );
            }
            if let Some(s) = l.sign {
                row(&l.name, "sign", s.uncompressed_bytes, s.compressed_bytes);
            }
        }
        row(
            "*",
            "total",
            self.original_bytes(),
            self.compressed_bytes(payload_only),
        );
        out
    }

    pub fn to_json(&self, payload_only: bool) -> serde_json::Value {
        let layers: Vec<_> = self
            .layers
            .iter()
            .map(|l| {
                serde_json::json!({
                    "name": l.name,
                    "dtype": l.dtype,
                    "transforms": l.transforms,
                    "fallback": l.fallback,
                    "original_bytes": l.original_bytes,
                    "payload_bytes": l.payload_bytes,
                    "overhead_bytes": l.overhead_bytes,
                    "compressed_bytes": l.compressed_bytes(payload_only),
                    "ratio": l.ratio(payload_only).map(|r| r.ratio()),
                    "groups": l.groups.iter().map(block_json).collect::<Vec<_>>(),
                    "sign": l.sign.as_ref().map(block_json),
                })
            })
            .collect();
        let aggregate: Vec<_> = self
            .aggregate_groups()
            .into_iter()
            .map(|(count, groups)| {
                serde_json::json!({
                    "group_count": count,
                    "groups": groups.iter().map(block_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "kind": self.kind,
            "codec": self.codec,
            "level": self.level,
            "granularity": self.granularity,
            "payload_only": payload_only,
            "total": {
                "original_bytes": self.original_bytes(),
                "compressed_bytes": self.compressed_bytes(payload_only),
                "ratio": self.total_ratio(payload_only).map(|r| r.ratio()),
                "groups": aggregate,
            },
            "layers": layers,
        })
    }
}

fn block_json(b: &BlockStat) -> serde_json::Value {
    serde_json::json!({
        "uncompressed_bytes": b.uncompressed_bytes,
        "compressed_bytes": b.compressed_bytes,
        "ratio": b.ratio(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_pct(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), format_percent)
}

fn opt_ratio(r: Option<CompressionRatio>) -> String {
    r.map_or_else(|| "n/a".to_string(), |r| r.to_string())
}

/// `(42.9%, 99.9%, 44.7%, 0.005%)`
pub fn format_group_ratios(groups: &[BlockStat]) -> String {
    let parts: Vec<_> = groups.iter().map(|g| opt_pct(g.ratio())).collect();
    format!("({})", parts.join(", "))
}

/// Reads an archive's entries and summarizes them.
pub fn archive_stats<R: std::io::Read>(source: R) -> Result<ArchiveStats> {
    let reader = super::format::read_archive(source)?;
    let header = reader.header().clone();
    ArchiveStats::collect(&header, reader)
}
