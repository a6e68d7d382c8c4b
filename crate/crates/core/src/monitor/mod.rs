//! Full-chain watcher: finds every authority commitment and checks the
//! data behind it was published.

mod source;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authority::{manifest_root, parse_manifest, BatchEntry};
use crate::btcwire::{extract_commit_root, tx_spends_from, AuthorityAddress};
use crate::hashmerkle::Digest32;
use crate::par::{self, Execution};
use crate::simchain::{BlockSource, SimError};

pub use source::{open_source, DataSource, DirSource, FetchError, HttpSource, Layout};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("scan incomplete: block {height} unavailable ({reason}); {} records before it", partial.len())]
    IncompleteScan { height: u64, reason: String, partial: Vec<CommitmentRecord> },
    #[error("invalid range {from}..={to}")]
    Range { from: u64, to: u64 },
    #[error(transparent)]
    Source(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    Available,
    MissingData,
    RootMismatch,
}

impl Availability {
    pub fn as_str(self) -> &'static str {
        match self {
            Availability::Available => "available",
            Availability::MissingData => "missing_data",
            Availability::RootMismatch => "root_mismatch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentRecord {
    pub root: Digest32,
    pub txid: Digest32,
    pub block_hash: Digest32,
    pub height: u64,
    /// Position of the transaction within its block.
    pub position: usize,
    /// `None` until [`check_availability`] has run.
    pub availability: Option<Availability>,
}

/// All commitments from `addr` in blocks `from..=to`, in chain order.
///
/// Blocks are fetched and scanned in parallel. A missing block stops the
/// scan with the records found below it.
pub fn get_commits<S: BlockSource + Sync + ?Sized>(
    source: &S,
    addr: &AuthorityAddress,
    from: u64,
    to: u64,
    exec: Execution,
) -> Result<Vec<CommitmentRecord>, MonitorError> {
    if from > to {
        return Err(MonitorError::Range { from, to });
    }
    let count = (to - from + 1) as usize;
    let per_block = par::map_range_coarse(exec, count, |i| {
        let height = from + i as u64;
        source.block_at(height).map(|block| {
            let block_hash = block.hash();
            block
                .transactions
                .iter()
                .enumerate()
                .filter(|(_, tx)| tx_spends_from(tx, addr))
                .filter_map(|(position, tx)| {
                    let root = extract_commit_root(tx).ok()?;
                    Some(CommitmentRecord { root, txid: tx.txid(), block_hash, height, position, availability: None })
                })
                .collect::<Vec<_>>()
        })
    });
    let mut records = Vec::new();
    for (i, result) in per_block.into_iter().enumerate() {
        match result {
            Ok(mut found) => records.append(&mut found),
            Err(e) => {
                return Err(MonitorError::IncompleteScan { height: from + i as u64, reason: e.to_string(), partial: records })
            }
        }
    }
    Ok(records)
}

/// Fetch and parse the manifest for `root`, rebuilding its statement root.
/// `Ok(None)` means the manifest is unavailable.
pub fn fetch_verified_manifest<D: DataSource + ?Sized>(
    source: &D,
    root: &Digest32,
) -> Result<Option<Vec<BatchEntry>>, Availability> {
    let text = match source.fetch_manifest(root) {
        Ok(t) => t,
        Err(_) => return Ok(None),
    };
    let entries = parse_manifest(&text).map_err(|_| Availability::RootMismatch)?;
    match manifest_root(&entries) {
        Ok(r) if r == *root => Ok(Some(entries)),
        _ => Err(Availability::RootMismatch),
    }
}

pub fn check_availability<D: DataSource + ?Sized>(record: &CommitmentRecord, source: &D) -> CommitmentRecord {
    let availability = match fetch_verified_manifest(source, &record.root) {
        Ok(Some(_)) => Availability::Available,
        Ok(None) => Availability::MissingData,
        Err(a) => a,
    };
    CommitmentRecord { availability: Some(availability), ..record.clone() }
}

/// [`check_availability`] over many records, concurrently.
pub fn check_all<D: DataSource + ?Sized>(records: &[CommitmentRecord], source: &D, exec: Execution) -> Vec<CommitmentRecord> {
    par::map_range_coarse(exec, records.len(), |i| check_availability(&records[i], source))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub height: u64,
    pub txid: Digest32,
    pub root: Digest32,
    pub status: Availability,
}

/// A client saw updates at `seen_before` and `seen_after` but the log has
/// commitments in between that it never saw.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateGap {
    pub key: String,
    pub seen_before: u64,
    pub missed: Vec<u64>,
    pub seen_after: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<CommitmentRecord>,
    pub alerts: Vec<Alert>,
    /// Heights at which each package key appears in a published manifest.
    pub updates: BTreeMap<String, Vec<u64>>,
}

/// Group key for a statement filename: the Debian package name
/// (`name_version_arch.deb`) or, failing that, the whole name.
pub fn update_key(filename: &str) -> String {
    let base = filename.rsplit('/').next().unwrap_or(filename);
    match base.split_once('_') {
        Some((name, _)) if !name.is_empty() => name.to_string(),
        _ => filename.to_string(),
    }
}

/// Summarise checked records. `manifests` maps a root to its published
/// entries, for the per-package update sequences.
pub fn report(records: &[CommitmentRecord], manifests: &BTreeMap<Digest32, Vec<BatchEntry>>) -> Report {
    let alerts = records
        .iter()
        .filter_map(|r| match r.availability {
            Some(Availability::Available) => None,
            status => Some(Alert {
                height: r.height,
                txid: r.txid,
                root: r.root,
                status: status.unwrap_or(Availability::MissingData),
            }),
        })
        .collect();
    let mut updates: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for r in records {
        for e in manifests.get(&r.root).into_iter().flatten() {
            let heights = updates.entry(update_key(&e.filename)).or_default();
            if heights.last() != Some(&r.height) {
                heights.push(r.height);
            }
        }
    }
    Report { records: records.to_vec(), alerts, updates }
}

impl Report {
    /// One line per record: `<height> <txid> <root> <status>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let status = r.availability.map_or("unchecked", Availability::as_str);
            let _ = writeln!(out, "{} {} {} {}", r.height, r.txid.to_reversed_hex(), r.root.to_hex(), status);
        }
        for a in &self.alerts {
            let _ = writeln!(out, "ALERT {} {} {}", a.height, a.root.to_hex(), a.status.as_str());
        }
        out
    }

    /// Updates the log holds between consecutive heights a client observed.
    pub fn gaps(&self, key: &str, observed: &[u64]) -> Option<UpdateGap> {
        let logged = self.updates.get(key)?;
        let mut seen: Vec<u64> = observed.to_vec();
        seen.sort_unstable();
        seen.windows(2).find_map(|w| {
            let missed: Vec<u64> = logged.iter().copied().filter(|h| *h > w[0] && *h < w[1]).collect();
            (!missed.is_empty()).then(|| UpdateGap { key: key.to_string(), seen_before: w[0], missed, seen_after: w[1] })
        })
    }
}
