//! Availability layer: mirrors every committed batch after checking it
//! against the chain, and reports the highest block it fully covers.
//!
//! On-disk layout under the root directory:
//!
//! ```text
//! objects/<first 2 hex>/<digest hex>   statement files, content addressed
//! manifests/<root hex>.manifest        batch manifests
//! state                                covered tip and per-commitment ledger (JSON)
//! ```

mod http;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auditor::ArchState;
use crate::authority::{manifest_file_name, render_manifest, BatchEntry};
use crate::btcwire::AuthorityAddress;
use crate::hashmerkle::{sha256, Digest32};
use crate::monitor::{fetch_verified_manifest, get_commits, CommitmentRecord, DataSource, MonitorError};
use crate::par::{self, Execution};
use crate::simchain::{BlockSource, SimError};

pub use http::ArchiveServer;

#[derive(Debug, Error)]
pub enum ArchivistError {
    #[error("object {0} not stored")]
    NotFound(Digest32),
    #[error("stored object {0} fails its integrity check")]
    Integrity(Digest32),
    #[error("corrupt state file: {0}")]
    State(String),
    #[error(transparent)]
    Scan(#[from] MonitorError),
    #[error(transparent)]
    Chain(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    RootMismatch,
    BadFile { digest: Digest32, filename: String },
    Unreachable { detail: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum IngestOutcome {
    Stored { new_objects: usize },
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub txid: Digest32,
    pub height: u64,
    pub stored: bool,
}

/// Persisted archivist state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivalState {
    pub covered_tip: ArchState,
    /// Keyed by batch root.
    pub ledger: BTreeMap<Digest32, LedgerEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundReport {
    pub scanned_to: u64,
    pub stored: usize,
    pub rejected: Vec<(Digest32, RejectReason)>,
    pub covered_height: u64,
}

#[derive(Debug)]
pub struct Archive {
    root_dir: PathBuf,
    state: ArchivalState,
}

fn object_path(root: &Path, digest: &Digest32) -> PathBuf {
    let hex = digest.to_hex();
    root.join("objects").join(&hex[..2]).join(hex)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl Archive {
    /// Open the archive at `root_dir`, creating it at `checkpoint` if new.
    pub fn open(root_dir: impl Into<PathBuf>, checkpoint: ArchState) -> Result<Self, ArchivistError> {
        let root_dir = root_dir.into();
        let state_path = root_dir.join("state");
        let state = if state_path.exists() {
            let text = fs::read(&state_path)?;
            serde_json::from_slice(&text).map_err(|e| ArchivistError::State(e.to_string()))?
        } else {
            fs::create_dir_all(root_dir.join("objects"))?;
            fs::create_dir_all(root_dir.join("manifests"))?;
            let state = ArchivalState { covered_tip: checkpoint, ledger: BTreeMap::new() };
            write_atomic(&state_path, &serde_json::to_vec_pretty(&state).expect("state serializes"))?;
            state
        };
        Ok(Archive { root_dir, state })
    }

    pub fn root_dir(&self) -> &Path {
        &self.root_dir
    }

    pub fn state(&self) -> &ArchivalState {
        &self.state
    }

    pub fn serve_state(&self) -> ArchState {
        self.state.covered_tip
    }

    fn persist(&self) -> Result<(), ArchivistError> {
        let bytes = serde_json::to_vec_pretty(&self.state).expect("state serializes");
        write_atomic(&self.root_dir.join("state"), &bytes)?;
        Ok(())
    }

    fn store_object(&self, digest: &Digest32, bytes: &[u8]) -> Result<bool, ArchivistError> {
        let path = object_path(&self.root_dir, digest);
        if path.exists() {
            return Ok(false);
        }
        write_atomic(&path, bytes)?;
        Ok(true)
    }

    /// Verify and mirror one commitment's manifest and files. Nothing is
    /// written unless every check passes; covered_tip is not touched here.
    pub fn ingest<D: DataSource + ?Sized>(
        &mut self,
        record: &CommitmentRecord,
        data: &D,
        exec: Execution,
    ) -> Result<IngestOutcome, ArchivistError> {
        let entries = match fetch_verified_manifest(data, &record.root) {
            Ok(Some(e)) => e,
            Ok(None) => {
                return Ok(self.reject(record, RejectReason::Unreachable { detail: "manifest unavailable".into() }))
            }
            Err(_) => return Ok(self.reject(record, RejectReason::RootMismatch)),
        };
        let fetched = par::map_range_coarse(exec, entries.len(), |i| {
            let e = &entries[i];
            if object_path(&self.root_dir, &e.digest).exists() {
                return Ok(None);
            }
            let bytes = data
                .fetch_object(&e.digest, &e.filename)
                .map_err(|err| RejectReason::Unreachable { detail: err.to_string() })?;
            if sha256(&bytes) != e.digest {
                return Err(RejectReason::BadFile { digest: e.digest, filename: e.filename.clone() });
            }
            Ok(Some(bytes))
        });
        let mut verified = Vec::with_capacity(entries.len());
        for (entry, result) in entries.iter().zip(fetched) {
            match result {
                Ok(bytes) => verified.push((entry, bytes)),
                Err(reason) => return Ok(self.reject(record, reason)),
            }
        }
        let mut new_objects = 0;
        for (entry, bytes) in verified {
            if let Some(bytes) = bytes {
                new_objects += usize::from(self.store_object(&entry.digest, &bytes)?);
            }
        }
        let manifest_path = self.root_dir.join("manifests").join(manifest_file_name(&record.root));
        if !manifest_path.exists() {
            write_atomic(&manifest_path, render_manifest(&entries).as_bytes())?;
        }
        self.state.ledger.insert(record.root, LedgerEntry { txid: record.txid, height: record.height, stored: true });
        self.persist()?;
        Ok(IngestOutcome::Stored { new_objects })
    }

    fn reject(&mut self, record: &CommitmentRecord, reason: RejectReason) -> IngestOutcome {
        log::warn!("rejected commitment {} at height {}: {reason:?}", record.root, record.height);
        self.state
            .ledger
            .entry(record.root)
            .or_insert(LedgerEntry { txid: record.txid, height: record.height, stored: false });
        IngestOutcome::Rejected(reason)
    }

    /// Scan new blocks for commitments, ingest them, and advance covered_tip
    /// to just below the first commitment that could not be stored.
    pub fn run_round<S, D>(
        &mut self,
        chain: &S,
        addr: &AuthorityAddress,
        data: &D,
        exec: Execution,
    ) -> Result<RoundReport, ArchivistError>
    where
        S: BlockSource + Sync + ?Sized,
        D: DataSource + ?Sized,
    {
        let from = self.state.covered_tip.height + 1;
        let tip = chain.tip_height()?;
        let mut report = RoundReport { scanned_to: tip, covered_height: self.state.covered_tip.height, ..Default::default() };
        if from > tip {
            return Ok(report);
        }
        let records = get_commits(chain, addr, from, tip, exec)?;
        let mut blocked_at: Option<u64> = None;
        for record in &records {
            let already = self.state.ledger.get(&record.root).is_some_and(|e| e.stored);
            let outcome = if already { IngestOutcome::Stored { new_objects: 0 } } else { self.ingest(record, data, exec)? };
            match outcome {
                IngestOutcome::Stored { .. } => report.stored += 1,
                IngestOutcome::Rejected(reason) => {
                    blocked_at.get_or_insert(record.height);
                    report.rejected.push((record.root, reason));
                }
            }
        }
        let covered = blocked_at.map_or(tip, |h| h - 1);
        if covered > self.state.covered_tip.height {
            let block_hash = chain.block_at(covered)?.hash();
            self.state.covered_tip = ArchState { block_hash, height: covered };
        }
        self.persist()?;
        report.covered_height = self.state.covered_tip.height;
        Ok(report)
    }

    /// Stored bytes for `digest`, re-hashed on every read.
    pub fn serve_object(&self, digest: &Digest32) -> Result<Vec<u8>, ArchivistError> {
        let path = object_path(&self.root_dir, digest);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ArchivistError::NotFound(*digest)),
            Err(e) => return Err(e.into()),
        };
        if sha256(&bytes) != *digest {
            log::error!("integrity failure for stored object {digest} at {}", path.display());
            return Err(ArchivistError::Integrity(*digest));
        }
        Ok(bytes)
    }

    pub fn serve_manifest(&self, root: &Digest32) -> Result<String, ArchivistError> {
        let path = self.root_dir.join("manifests").join(manifest_file_name(root));
        fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ArchivistError::NotFound(*root),
            _ => e.into(),
        })
    }

    pub fn manifest_entries(&self, root: &Digest32) -> Result<Vec<BatchEntry>, ArchivistError> {
        crate::authority::parse_manifest(&self.serve_manifest(root)?).map_err(|e| ArchivistError::State(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authority::{write_manifest, Batch, Disclosure, Wallet};
    use crate::monitor::{DirSource, Layout};
    use crate::simchain::{Chain, SimChainConfig};

    struct Setup {
        chain: Chain,
        wallet: Wallet,
        publish: tempfile::TempDir,
        archive_dir: tempfile::TempDir,
    }

    fn setup() -> Setup {
        let mut chain = Chain::new(SimChainConfig { rng_seed: 33, ..Default::default() }).unwrap();
        let key = chain.scenario_key(1);
        let f = chain.faucet(&key.address(), 1_000_000);
        chain.advance(1, 600);
        Setup { chain, wallet: Wallet::new(key, Some(f)), publish: tempfile::tempdir().unwrap(), archive_dir: tempfile::tempdir().unwrap() }
    }

    /// Commit `n` files, publish them (unless `withhold`), mine one block.
    fn publish_batch(s: &mut Setup, tag: &str, n: usize, withhold: bool) -> Batch {
        let mut batch = Batch::new();
        for i in 0..n {
            let name = format!("pool/{tag}_{i}.deb");
            let bytes = format!("contents of {tag} {i}").into_bytes();
            batch.add_statement(sha256(&bytes), name.clone()).unwrap();
            if !withhold {
                let path = s.publish.path().join(&name);
                fs::create_dir_all(path.parent().unwrap()).unwrap();
                fs::write(path, bytes).unwrap();
            }
        }
        batch.commit(&mut s.chain, &mut s.wallet, 1_000).unwrap();
        s.chain.advance(1, 600);
        if !withhold {
            write_manifest(&batch, s.publish.path(), Disclosure::Immediate, 0).unwrap();
        }
        batch
    }

    fn open(s: &Setup) -> Archive {
        let genesis = ArchState { block_hash: s.chain.genesis_hash(), height: 0 };
        Archive::open(s.archive_dir.path(), genesis).unwrap()
    }

    #[test]
    fn honest_batch_advances_tip_and_replay_is_idempotent() {
        let mut s = setup();
        let batch = publish_batch(&mut s, "a", 4, false);
        let mut ar = open(&s);
        assert_eq!(ar.serve_state().height, 0);
        let data = DirSource::new(s.publish.path(), Layout::Authority);
        let r = ar.run_round(&s.chain, &s.wallet.address(), &data, Execution::Parallel).unwrap();
        assert_eq!(r.stored, 1);
        assert_eq!(ar.serve_state().height, s.chain.height());
        assert_eq!(ar.serve_state().block_hash, s.chain.tip_hash());
        for e in batch.entries() {
            assert_eq!(sha256(&ar.serve_object(&e.digest).unwrap()), e.digest);
        }

        let records = get_commits(&s.chain, &s.wallet.address(), 0, s.chain.height(), Execution::Sequential).unwrap();
        let again = ar.ingest(&records[0], &data, Execution::Sequential).unwrap();
        assert_eq!(again, IngestOutcome::Stored { new_objects: 0 });

        // state survives restart
        drop(ar);
        let ar = open(&s);
        assert_eq!(ar.serve_state().block_hash, s.chain.tip_hash());
        assert!(matches!(ar.serve_object(&Digest32([7; 32])), Err(ArchivistError::NotFound(_))));
    }

    #[test]
    fn altered_file_rejected_and_tip_frozen() {
        let mut s = setup();
        let batch = publish_batch(&mut s, "b", 3, false);
        fs::write(s.publish.path().join(&batch.entries()[1].filename), b"tampered").unwrap();
        let mut ar = open(&s);
        let data = DirSource::new(s.publish.path(), Layout::Authority);
        let r = ar.run_round(&s.chain, &s.wallet.address(), &data, Execution::Sequential).unwrap();
        assert!(matches!(r.rejected[0].1, RejectReason::BadFile { .. }));
        let commit_height = s.chain.height();
        assert_eq!(ar.serve_state().height, commit_height - 1);
        // nothing from the rejected batch was stored
        assert!(matches!(ar.serve_object(&batch.entries()[0].digest), Err(ArchivistError::NotFound(_))));
    }

    #[test]
    fn withheld_batch_blocks_later_coverage() {
        let mut s = setup();
        publish_batch(&mut s, "c", 2, false);
        let mut ar = open(&s);
        let data = DirSource::new(s.publish.path(), Layout::Authority);
        ar.run_round(&s.chain, &s.wallet.address(), &data, Execution::Sequential).unwrap();
        let before = ar.serve_state();
        publish_batch(&mut s, "d", 2, true);
        let withheld_height = s.chain.height();
        publish_batch(&mut s, "e", 2, false);
        let r = ar.run_round(&s.chain, &s.wallet.address(), &data, Execution::Sequential).unwrap();
        assert_eq!(r.stored, 1);
        assert!(matches!(r.rejected[0].1, RejectReason::Unreachable { .. }));
        assert_eq!(ar.serve_state().height, withheld_height - 1);
        assert!(ar.serve_state().height >= before.height);
    }

    #[test]
    fn corrupted_object_detected_on_serve() {
        let mut s = setup();
        let batch = publish_batch(&mut s, "f", 1, false);
        let mut ar = open(&s);
        let data = DirSource::new(s.publish.path(), Layout::Authority);
        ar.run_round(&s.chain, &s.wallet.address(), &data, Execution::Sequential).unwrap();
        let d = batch.entries()[0].digest;
        let path = object_path(ar.root_dir(), &d);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(ar.serve_object(&d), Err(ArchivistError::Integrity(_))));
    }
}
