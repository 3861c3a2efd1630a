//! The `.mtc` wire format. All integers are little-endian.
//!
//! ```text
//! header (51 bytes)
//!   magic        4   "MTC1"
//!   version      u8  1
//!   kind         u8  0 = model, 1 = delta
//!   codec        u8  0 = zstd, 1 = lz4, 2 = store
//!   level        u8
//!   granularity  u8  0 = per layer, 1 = whole model
//!   reserved     2   zero
//!   base_hash    32  SHA-256 of the base model (delta only, else zero)
//!   layer_count  u64
//! entry (repeated layer_count times)
//!   name_len u16, name, dtype u8, transform_flags u8, b u8, ndim u8,
//!   dims ndim×u64, element_count u64, crc32 u32, group_count u8,
//!   group_count × (uncompressed_len u64, compressed_len u64),
//!   sign (uncompressed_len u64, compressed_len u64),
//!   group payloads in order, then the sign payload
//! ```
//!
//! The file ends exactly after the last payload.

use std::io::{self, Read, Write};

use crate::codec::{
    CodecId, CompressedLayer, Granularity, Payload, PipelineConfig, TransformChain,
};
use crate::error::{Error, Result};
use crate::model::{element_count, DType};

pub const MAGIC: [u8; 4] = *b"MTC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: u64 = 51;
/// Entry bytes besides name, dims and group lengths.
pub const ENTRY_FIXED_LEN: u64 = 2 + 1 + 1 + 1 + 1 + 8 + 4 + 1 + 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    Model,
    Delta,
}

impl ArchiveKind {
    fn code(self) -> u8 {
        match self {
            ArchiveKind::Model => 0,
            ArchiveKind::Delta => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub kind: ArchiveKind,
    pub codec: CodecId,
    pub level: u8,
    pub granularity: Granularity,
    pub base_hash: [u8; 32],
    pub layer_count: u64,
}

impl ArchiveHeader {
    pub fn for_model(config: &PipelineConfig, layer_count: usize) -> Result<Self> {
        Ok(ArchiveHeader {
            kind: ArchiveKind::Model,
            codec: config.codec,
            level: format_level(config.level)?,
            granularity: config.granularity,
            base_hash: [0; 32],
            layer_count: layer_count as u64,
        })
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[..4].copy_from_slice(&MAGIC);
        out[4] = VERSION;
        out[5] = self.kind.code();
        out[6] = self.codec.code();
        out[7] = self.level;
        out[8] = self.granularity.code();
        // 9..11 reserved
        out[11..43].copy_from_slice(&self.base_hash);
        out[43..51].copy_from_slice(&self.layer_count.to_le_bytes());
        out
    }

    fn parse(bytes: &[u8; HEADER_LEN as usize]) -> Result<Self> {
        if bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        let kind = match bytes[5] {
            0 => ArchiveKind::Model,
            1 => ArchiveKind::Delta,
            k => return Err(Error::InvalidArchive(format!("unknown archive kind {k}"))),
        };
        if bytes[9..11] != [0, 0] {
            return Err(Error::InvalidArchive(
                "reserved header bytes are not zero".into(),
            ));
        }
        let header = ArchiveHeader {
            kind,
            codec: CodecId::from_code(bytes[6])?,
            level: bytes[7],
            granularity: Granularity::from_code(bytes[8])?,
            base_hash: bytes[11..43].try_into().unwrap(),
            layer_count: u64::from_le_bytes(bytes[43..51].try_into().unwrap()),
        };
        header.check()?;
        Ok(header)
    }

    fn check(&self) -> Result<()> {
        match self.kind {
            ArchiveKind::Model if self.base_hash != [0; 32] => Err(Error::InvalidArchive(
                "model archive carries a base hash".into(),
            )),
            ArchiveKind::Delta if self.granularity != Granularity::PerLayer => {
                Err(Error::InvalidArchive("delta archives are per-layer".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Converts a pipeline compression level to its header byte.
pub fn format_level(level: i32) -> Result<u8> {
    u8::try_from(level)
        .ok()
        .filter(|l| *l as i32 <= crate::codec::MAX_LEVEL)
        .ok_or_else(|| Error::InvalidArgument(format!("compression level {level} outside 0..=22")))
}

/// Bytes an entry occupies besides its payloads.
pub fn entry_overhead(entry: &CompressedLayer) -> u64 {
    ENTRY_FIXED_LEN
        + entry.name.len() as u64
        + 8 * entry.shape.len() as u64
        + 16 * entry.groups.len() as u64
}

/// Total bytes an entry occupies on disk.
pub fn entry_len(entry: &CompressedLayer) -> u64 {
    entry_overhead(entry) + entry.payload_bytes()
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArchive(msg.into())
}

fn write_entry<W: Write>(entry: &CompressedLayer, sink: &mut W) -> Result<()> {
    let name_len = u16::try_from(entry.name.len()).map_err(|_| {
        invalid(format!(
            "layer name of {} bytes is too long",
            entry.name.len()
        ))
    })?;
    let ndim = u8::try_from(entry.shape.len())
        .map_err(|_| invalid(format!("layer `{}` has too many dimensions", entry.name)))?;
    let group_count = u8::try_from(entry.groups.len())
        .map_err(|_| invalid(format!("layer `{}` has too many groups", entry.name)))?;
    if entry.sign.is_some() != entry.transforms.sign_split {
        return Err(invalid(format!(
            "layer `{}`: sign payload and flags disagree",
            entry.name
        )));
    }

    let mut head = Vec::with_capacity(entry_overhead(entry) as usize);
    head.extend_from_slice(&name_len.to_le_bytes());
    head.extend_from_slice(entry.name.as_bytes());
    head.push(entry.dtype.code());
    head.push(entry.transforms.flags());
    head.push(entry.transforms.precision_bits());
    head.push(ndim);
    for d in &entry.shape {
        head.extend_from_slice(&d.to_le_bytes());
    }
    head.extend_from_slice(&entry.element_count.to_le_bytes());
    head.extend_from_slice(&entry.crc32.to_le_bytes());
    head.push(group_count);
    for g in &entry.groups {
        head.extend_from_slice(&g.uncompressed_len.to_le_bytes());
        head.extend_from_slice(&g.compressed_len().to_le_bytes());
    }
    let (sign_raw, sign_comp) = entry
        .sign
        .as_ref()
        .map_or((0, 0), |s| (s.uncompressed_len, s.compressed_len()));
    head.extend_from_slice(&sign_raw.to_le_bytes());
    head.extend_from_slice(&sign_comp.to_le_bytes());
    sink.write_all(&head)?;
    for g in &entry.groups {
        sink.write_all(&g.data)?;
    }
    if let Some(s) = &entry.sign {
        sink.write_all(&s.data)?;
    }
    Ok(())
}

/// Writes a complete archive and returns the number of bytes written.
pub fn write_archive<W: Write>(
    header: &ArchiveHeader,
    entries: &[CompressedLayer],
    sink: &mut W,
) -> Result<u64> {
    header.check()?;
    if header.layer_count != entries.len() as u64 {
        return Err(invalid(format!(
            "header announces {} layers, got {}",
            header.layer_count,
            entries.len()
        )));
    }
    if let Some(e) = entries
        .iter()
        .find(|e| e.codec != header.codec || e.level != header.level as i32)
    {
        return Err(invalid(format!(
            "layer `{}` was compressed with other codec settings",
            e.name
        )));
    }
    sink.write_all(&header.to_bytes())?;
    let mut written = HEADER_LEN;
    for entry in entries {
        write_entry(entry, sink)?;
        written += entry_len(entry);
    }
    sink.flush()?;
    Ok(written)
}

pub fn archive_to_bytes(header: &ArchiveHeader, entries: &[CompressedLayer]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_archive(header, entries, &mut out)?;
    Ok(out)
}

/// Reads the header; entries are then decoded one at a time by iterating.
pub fn read_archive<R: Read>(mut source: R) -> Result<ArchiveReader<R>> {
    let mut magic = [0u8; 4];
    read_full(&mut source, &mut magic).map_err(|e| match e {
        ReadError::Eof => Error::BadMagic,
        ReadError::Io(e) => Error::Io(e),
    })?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut bytes = [0u8; HEADER_LEN as usize];
    bytes[..4].copy_from_slice(&magic);
    read_full(&mut source, &mut bytes[4..]).map_err(|e| match e {
        ReadError::Eof => invalid("truncated archive header"),
        ReadError::Io(e) => Error::Io(e),
    })?;
    let header = ArchiveHeader::parse(&bytes)?;
    Ok(ArchiveReader {
        header,
        source,
        next_index: 0,
        done: false,
    })
}

/// Parses a whole in-memory archive.
pub fn archive_from_bytes(bytes: &[u8]) -> Result<(ArchiveHeader, Vec<CompressedLayer>)> {
    let reader = read_archive(bytes)?;
    let header = reader.header().clone();
    let entries = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, entries))
}

enum ReadError {
    Eof,
    Io(io::Error),
}

fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> std::result::Result<(), ReadError> {
    source.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ReadError::Eof
        } else {
            ReadError::Io(e)
        }
    })
}

/// Lazy entry iterator over an archive.
///
/// Only one entry's payloads are held in memory at a time. Iteration stops
/// after the first error.
pub struct ArchiveReader<R> {
    header: ArchiveHeader,
    source: R,
    next_index: u64,
    done: bool,
}

impl<R: Read> ArchiveReader<R> {
    pub fn header(&self) -> &ArchiveHeader {
        &self.header
    }

    fn read_entry(&mut self) -> Result<CompressedLayer> {
        let index = self.next_index;
        let mut label = format!("#{index}");

        let mut u16buf = [0u8; 2];
        self.read(&mut u16buf, &label)?;
        let mut name = vec![0u8; u16::from_le_bytes(u16buf) as usize];
        self.read(&mut name, &label)?;
        let name = String::from_utf8(name)
            .map_err(|_| invalid(format!("entry {label}: name is not UTF-8")))?;
        label = name.clone();

        let mut fixed = [0u8; 4];
        self.read(&mut fixed, &label)?;
        let [dtype, flags, b, ndim] = fixed;
        let dtype = DType::from_code(dtype)?;
        let transforms = TransformChain::from_wire(flags, b)?;
        let mut shape = Vec::with_capacity(ndim as usize);
        for _ in 0..ndim {
            shape.push(self.read_u64(&label)?);
        }
        let element_count_field = self.read_u64(&label)?;
        if element_count(&shape) != Some(element_count_field) {
            return Err(invalid(format!(
                "layer `{label}`: element count disagrees with its shape"
            )));
        }
        let mut crc = [0u8; 4];
        self.read(&mut crc, &label)?;
        let mut gc = [0u8; 1];
        self.read(&mut gc, &label)?;
        let mut lens = Vec::with_capacity(gc[0] as usize);
        for _ in 0..gc[0] {
            lens.push((self.read_u64(&label)?, self.read_u64(&label)?));
        }
        let sign_lens = (self.read_u64(&label)?, self.read_u64(&label)?);
        if !transforms.sign_split && sign_lens != (0, 0) {
            return Err(invalid(format!(
                "layer `{label}`: sign lengths without sign split"
            )));
        }

        let mut groups = Vec::with_capacity(lens.len());
        for (uncompressed_len, compressed_len) in lens {
            let data = self.read_payload(compressed_len, &label)?;
            groups.push(Payload {
                uncompressed_len,
                data,
            });
        }
        let sign = if transforms.sign_split {
            Some(Payload {
                uncompressed_len: sign_lens.0,
                data: self.read_payload(sign_lens.1, &label)?,
            })
        } else {
            None
        };
        Ok(CompressedLayer {
            name,
            dtype,
            shape,
            element_count: element_count_field,
            transforms,
            codec: self.header.codec,
            level: self.header.level as i32,
            groups,
            sign,
            crc32: u32::from_le_bytes(crc),
        })
    }

    fn read(&mut self, buf: &mut [u8], label: &str) -> Result<()> {
        read_full(&mut self.source, buf).map_err(|e| match e {
            ReadError::Eof => Error::TruncatedEntry {
                layer: label.to_string(),
            },
            ReadError::Io(e) => Error::Io(e),
        })
    }

    fn read_u64(&mut self, label: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read(&mut b, label)?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_payload(&mut self, len: u64, label: &str) -> Result<Vec<u8>> {
        // Grow with the data actually present instead of trusting `len`.
        let mut data = Vec::new();
        (&mut self.source).take(len).read_to_end(&mut data)?;
        if data.len() as u64 != len {
            return Err(Error::TruncatedEntry {
                layer: label.to_string(),
            });
        }
        Ok(data)
    }

    fn check_end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        loop {
            match self.source.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => return Err(invalid("trailing bytes after the last entry")),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(Error::Io(e)),
            }
        }
    }
}

impl<R: Read> Iterator for ArchiveReader<R> {
    type Item = Result<CompressedLayer>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.next_index == self.header.layer_count {
            self.done = true;
            return self.check_end().err().map(Err);
        }
        let entry = self.read_entry();
        self.next_index += 1;
        if entry.is_err() {
            self.done = true;
        }
        Some(entry)
    }
}
