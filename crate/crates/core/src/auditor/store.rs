use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::AuditError;
use crate::btcwire::{check_pow, BlockHeader, HEADER_SIZE};
use crate::hashmerkle::Digest32;
use crate::simchain::HeaderSource;

/// Bytes per persisted record: height (u64 LE), block hash, arrival (u64 LE).
pub const RECORD_SIZE: usize = 8 + 32 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeaderRecord {
    pub height: u64,
    pub hash: Digest32,
    /// Local receipt time, not the header's own timestamp.
    pub arrival: u64,
}

impl HeaderRecord {
    fn to_bytes(self) -> [u8; RECORD_SIZE] {
        let mut out = [0u8; RECORD_SIZE];
        out[..8].copy_from_slice(&self.height.to_le_bytes());
        out[8..40].copy_from_slice(self.hash.as_bytes());
        out[40..].copy_from_slice(&self.arrival.to_le_bytes());
        out
    }

    fn from_bytes(b: &[u8]) -> Self {
        HeaderRecord {
            height: u64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
            hash: Digest32::from_slice(&b[8..40]).expect("32 bytes"),
            arrival: u64::from_le_bytes(b[40..48].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SyncReport {
    pub added: u64,
    pub downloaded_bytes: u64,
}

/// The auditor's verified header set, contiguous from a trusted checkpoint.
/// Only hashes are kept; full headers are dropped after verification.
#[derive(Clone, Debug)]
pub struct HeaderStore {
    records: Vec<HeaderRecord>,
    by_hash: HashMap<Digest32, u64>,
}

impl HeaderStore {
    /// Start from a trusted `(hash, height)` pair, e.g. genesis at 0.
    pub fn from_checkpoint(hash: Digest32, height: u64) -> Self {
        Self::from_checkpoint_at(hash, height, 0)
    }

    pub fn from_checkpoint_at(hash: Digest32, height: u64, arrival: u64) -> Self {
        let rec = HeaderRecord { height, hash, arrival };
        HeaderStore { records: vec![rec], by_hash: HashMap::from([(hash, height)]) }
    }

    pub fn checkpoint(&self) -> HeaderRecord {
        self.records[0]
    }

    pub fn tip(&self) -> HeaderRecord {
        *self.records.last().expect("store holds its checkpoint")
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn records(&self) -> &[HeaderRecord] {
        &self.records
    }

    pub fn contains(&self, hash: &Digest32) -> bool {
        self.by_hash.contains_key(hash)
    }

    pub fn height_of(&self, hash: &Digest32) -> Option<u64> {
        self.by_hash.get(hash).copied()
    }

    pub fn hash_at(&self, height: u64) -> Option<Digest32> {
        let first = self.records[0].height;
        let idx = height.checked_sub(first)?;
        self.records.get(idx as usize).map(|r| r.hash)
    }

    /// Verify `header` against the tip and append it.
    pub fn append(&mut self, header: &BlockHeader, arrival: u64) -> Result<(), AuditError> {
        let tip = self.tip();
        let hash = header.block_hash();
        if header.prev_hash != tip.hash {
            return Err(AuditError::ChainMismatch { height: self.conflict_height(header), hash });
        }
        if self.by_hash.contains_key(&hash) {
            return Err(AuditError::ChainMismatch { height: tip.height + 1, hash });
        }
        match check_pow(header) {
            Ok(true) => {}
            _ => return Err(AuditError::InvalidHeader { height: tip.height + 1, hash }),
        }
        let height = tip.height + 1;
        self.records.push(HeaderRecord { height, hash, arrival });
        self.by_hash.insert(hash, height);
        Ok(())
    }

    fn conflict_height(&self, header: &BlockHeader) -> u64 {
        // a header whose parent we hold below the tip would overwrite history
        self.height_of(&header.prev_hash).map_or(self.tip().height + 1, |h| h + 1)
    }

    /// Pull and verify every header the source has after our tip. On error
    /// the store keeps everything verified up to the bad header.
    pub fn sync<S: HeaderSource + ?Sized>(&mut self, source: &S, now: u64) -> Result<SyncReport, AuditError> {
        let headers = source.headers_after(&self.tip().hash)?;
        let mut report = SyncReport { added: 0, downloaded_bytes: (headers.len() * HEADER_SIZE) as u64 };
        for header in &headers {
            self.append(header, now)?;
            report.added += 1;
        }
        Ok(report)
    }

    /// Bytes retained per block beyond sync: the hash plus fixed metadata.
    pub fn stored_bytes(&self) -> usize {
        self.records.len() * RECORD_SIZE
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.records.iter().flat_map(|r| r.to_bytes()).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AuditError> {
        if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD_SIZE) {
            return Err(AuditError::CorruptStore(format!("length {} is not a positive multiple of {RECORD_SIZE}", bytes.len())));
        }
        let records: Vec<HeaderRecord> = bytes.chunks(RECORD_SIZE).map(HeaderRecord::from_bytes).collect();
        let mut by_hash = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.height != records[0].height + i as u64 {
                return Err(AuditError::CorruptStore(format!("record {i} breaks height contiguity")));
            }
            if by_hash.insert(r.hash, r.height).is_some() {
                return Err(AuditError::CorruptStore(format!("record {i} repeats a hash")));
            }
        }
        Ok(HeaderStore { records, by_hash })
    }

    pub fn save(&self, path: &Path) -> Result<(), AuditError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AuditError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
