//! The `.mtc` archive: a fixed header followed by self-describing layer entries.

mod format;
mod stats;

pub use format::{
    archive_from_bytes, archive_to_bytes, entry_len, entry_overhead, format_level, read_archive,
    write_archive, ArchiveHeader, ArchiveKind, ArchiveReader, ENTRY_FIXED_LEN, HEADER_LEN, MAGIC,
    VERSION,
};
pub use stats::{archive_stats, format_group_ratios, ArchiveStats, BlockStat, LayerStats};

use crate::codec::{CompressedModel, PipelineConfig};
use crate::error::Result;

/// Serializes a compressed model produced with `config`.
pub fn model_to_bytes(model: &CompressedModel, config: &PipelineConfig) -> Result<Vec<u8>> {
    let header = ArchiveHeader::for_model(config, model.entries.len())?;
    archive_to_bytes(&header, &model.entries)
}

/// Parses a model archive; delta archives are rejected.
pub fn model_from_bytes(bytes: &[u8]) -> Result<CompressedModel> {
    let (header, entries) = archive_from_bytes(bytes)?;
    if header.kind != ArchiveKind::Model {
        return Err(crate::Error::InvalidArchive(
            "expected a model archive, found a delta".into(),
        ));
    }
    Ok(CompressedModel {
        granularity: header.granularity,
        entries,
    })
}
