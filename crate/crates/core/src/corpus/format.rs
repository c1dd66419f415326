//! Binary index file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header   magic "FSCANIDX" | version u32 | body_len u64
//! body     num_docs u64 | num_clauses u32 | max_num_attr u32 | dim u32
//!          num_bits u32 | codec_seed u64
//!          clause names   (u32 len + utf-8 bytes) * num_clauses
//!          codec rounds   u32 count, then per round:
//!                         perm u32*dim | signs i8*dim | u32 bins | bounds u32*(bins+1)
//!          attributes     u32 * num_docs * max_num_attr
//!          offsets        u32 * num_docs * (num_clauses + 1)
//!          embeddings     f64 * num_docs * dim
//!          zero rows      u32 count | u32 * count
//!          signatures     u64 * num_docs * ceil(num_bits / 64)
//!          doc ids        (u32 len + utf-8 bytes) * num_docs
//! trailer  crc64 of header and body, u64
//! ```

use crc::{Crc, CRC_64_XZ};

use super::{CorpusError, FrozenIndex, IndexSchema};
use crate::quantizer::QuantCodec;

const MAGIC: &[u8; 8] = b"FSCANIDX";
pub(crate) const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;
const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn u32s(&mut self, vs: &[u32]) {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.u32(*v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CorpusError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CorpusError::Malformed(format!("section overruns body at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, CorpusError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CorpusError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, what: &str) -> Result<usize, CorpusError> {
        usize::try_from(self.u64()?).map_err(|_| CorpusError::Malformed(format!("{what} too large")))
    }
    fn str(&mut self) -> Result<String, CorpusError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CorpusError::Malformed("invalid utf-8 string".into()))
    }
    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, CorpusError> {
        let bytes = self.take(checked_mul(n, 4)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn u64s(&mut self, n: usize) -> Result<Vec<u64>, CorpusError> {
        let bytes = self.take(checked_mul(n, 8)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn checked_mul(a: usize, b: usize) -> Result<usize, CorpusError> {
    a.checked_mul(b)
        .ok_or_else(|| CorpusError::Malformed("array size overflows".into()))
}

impl FrozenIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u64(0); // body_len, patched below

        w.u64(self.num_docs as u64);
        w.u32(self.num_clauses() as u32);
        w.u32(self.max_num_attr() as u32);
        w.u32(self.dim() as u32);
        w.u32(self.codec.num_bits() as u32);
        w.u64(self.codec.seed());
        for name in self.schema.clause_names() {
            w.str(name);
        }
        w.u32(self.codec.rounds().len() as u32);
        for round in self.codec.rounds() {
            w.u32s(round.permutation());
            w.buf.extend(round.signs().iter().map(|&s| s as u8));
            w.u32(round.num_bins() as u32);
            w.u32s(round.bin_bounds());
        }
        w.u32s(&self.attributes);
        w.u32s(&self.offsets);
        w.buf.reserve(self.embeddings.len() * 8);
        for x in &self.embeddings {
            w.buf.extend_from_slice(&x.to_le_bytes());
        }
        w.u32(self.zero_rows.len() as u32);
        w.u32s(&self.zero_rows);
        for s in &self.signatures {
            w.u64(*s);
        }
        for id in &self.doc_ids {
            w.str(id);
        }

        let body_len = (w.buf.len() - HEADER_LEN) as u64;
        w.buf[12..20].copy_from_slice(&body_len.to_le_bytes());
        let sum = CHECKSUM.checksum(&w.buf);
        w.u64(sum);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CorpusError> {
        let available = bytes.len() as u64;
        if bytes.len() < HEADER_LEN {
            return Err(CorpusError::Truncated {
                needed: HEADER_LEN as u64 + 8,
                available,
            });
        }
        if &bytes[..8] != MAGIC {
            return Err(CorpusError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(CorpusError::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let body_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let needed = (HEADER_LEN as u64).saturating_add(body_len).saturating_add(8);
        if available < needed {
            return Err(CorpusError::Truncated { needed, available });
        }
        if available > needed {
            return Err(CorpusError::Malformed(format!(
                "{} trailing bytes after checksum",
                available - needed
            )));
        }
        let split = bytes.len() - 8;
        let stored = u64::from_le_bytes(bytes[split..].try_into().unwrap());
        let computed = CHECKSUM.checksum(&bytes[..split]);
        if stored != computed {
            return Err(CorpusError::ChecksumMismatch { stored, computed });
        }

        let mut r = Reader {
            buf: &bytes[HEADER_LEN..split],
            pos: 0,
        };
        let num_docs = r.len("num_docs")?;
        let num_clauses = r.u32()? as usize;
        let max_num_attr = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let num_bits = r.u32()? as usize;
        let seed = r.u64()?;
        let clause_names = (0..num_clauses).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
        let schema = IndexSchema::new(clause_names, max_num_attr, dim)?;

        let num_rounds = r.u32()? as usize;
        let mut rounds = Vec::with_capacity(num_rounds.min(1 << 16));
        for _ in 0..num_rounds {
            let perm = r.u32s(dim)?;
            let signs = r.take(dim)?.iter().map(|&b| b as i8).collect();
            let bins = r.u32()? as usize;
            let bounds = r.u32s(bins + 1)?;
            rounds.push((perm, signs, bounds));
        }
        let codec = QuantCodec::from_parts(dim, num_bits, seed, rounds)?;

        let attributes = r.u32s(checked_mul(num_docs, max_num_attr)?)?;
        let offsets = r.u32s(checked_mul(num_docs, num_clauses + 1)?)?;
        let emb_bytes = r.take(checked_mul(checked_mul(num_docs, dim)?, 8)?)?;
        let embeddings = emb_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let zero_count = r.u32()? as usize;
        let zero_rows = r.u32s(zero_count)?;
        let signatures = r.u64s(checked_mul(num_docs, codec.words())?)?;
        let doc_ids = (0..num_docs).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
        if r.pos != r.buf.len() {
            return Err(CorpusError::Malformed("unread bytes at end of body".into()));
        }

        let index = FrozenIndex::from_raw(
            schema, attributes, offsets, embeddings, zero_rows, signatures, codec, doc_ids,
        );
        index.check_structure()?;
        Ok(index)
    }

    /// Structural checks on a loaded index: offsets in range and
    /// non-decreasing, clause slices strictly increasing, ids unique.
    fn check_structure(&self) -> Result<(), CorpusError> {
        let nc = self.num_clauses();
        for row in 0..self.num_docs as u32 {
            let offs = self.offsets_row(row);
            if offs[0] != 0
                || offs[nc] as usize > self.max_num_attr()
                || offs.windows(2).any(|w| w[0] > w[1])
            {
                return Err(CorpusError::Malformed(format!("bad offsets in row {row}")));
            }
            for slot in 0..nc {
                let s = self.clause_slice(row, slot);
                if s.windows(2).any(|w| w[0] >= w[1]) || s.contains(&0) {
                    return Err(CorpusError::Malformed(format!(
                        "row {row} clause {slot} is not strictly increasing"
                    )));
                }
            }
        }
        if self.rows.len() != self.num_docs {
            return Err(CorpusError::Malformed("duplicate doc ids".into()));
        }
        if self.zero_rows.windows(2).any(|w| w[0] >= w[1])
            || self.zero_rows.last().is_some_and(|&r| r as usize >= self.num_docs)
        {
            return Err(CorpusError::Malformed("bad zero-embedding row list".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::two_doc_index;

    #[test]
    fn round_trip_is_identical() {
        let idx = two_doc_index();
        let bytes = idx.to_bytes();
        let back = FrozenIndex::from_bytes(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn empty_file_is_truncated() {
        assert!(matches!(
            FrozenIndex::from_bytes(&[]),
            Err(CorpusError::Truncated { .. })
        ));
    }

    #[test]
    fn cut_file_is_truncated() {
        let bytes = two_doc_index().to_bytes();
        assert!(matches!(
            FrozenIndex::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CorpusError::Truncated { .. })
        ));
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let mut bytes = two_doc_index().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            FrozenIndex::from_bytes(&bytes),
            Err(CorpusError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn wrong_version_reported() {
        let mut bytes = two_doc_index().to_bytes();
        bytes[8] = 9;
        assert!(matches!(
            FrozenIndex::from_bytes(&bytes),
            Err(CorpusError::VersionMismatch { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn wrong_magic_reported() {
        let mut bytes = two_doc_index().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(FrozenIndex::from_bytes(&bytes), Err(CorpusError::BadMagic)));
    }
}
