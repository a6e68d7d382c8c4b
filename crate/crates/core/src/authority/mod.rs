//! The log operator: batches statements, commits batch roots on chain,
//! hands out inclusion proofs and publishes per-batch manifests.

mod manifest;

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::btcwire::{build_commit_tx, AuthorityAddress, AuthorityKey, Funding, OutPoint, RawTransaction, WireError};
use crate::hashmerkle::{Digest32, MerkleError, StatementTree, TxTree};
use crate::par::{self, Execution};
use crate::proof::InclusionProof;
use crate::simchain::{Block, BlockSource, SimError, TxSubmitter};

pub use manifest::{
    manifest_file_name, manifest_root, parse_manifest, read_manifest, render_manifest, write_manifest, Disclosure,
};

/// Default confirmation depth before proofs are handed out.
pub const DEFAULT_CONFIRMATIONS: u64 = 6;

#[derive(Debug, Error)]
pub enum AuthorityError {
    #[error("statement {0} already in this batch")]
    DuplicateStatement(Digest32),
    #[error("batch is sealed")]
    BatchSealed,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("commit failed: {0}")]
    CommitFailed(String),
    #[error("statement or transaction not committed in the given block")]
    NotCommitted,
    #[error("block is {depth} deep, need {required}")]
    NotYetConfirmed { depth: u64, required: u64 },
    #[error("wallet has no spendable output")]
    NoFunds,
    #[error("filename {0:?} contains a newline")]
    BadFilename(String),
    #[error("manifest line {line}: {reason}")]
    InvalidManifest { line: usize, reason: String },
    #[error("publishing failed: {0}")]
    Publish(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Merkle(#[from] MerkleError),
    #[error(transparent)]
    Chain(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BatchEntry {
    pub digest: Digest32,
    pub filename: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum BatchStatus {
    Open,
    Committed { txid: Digest32 },
    Confirmed { txid: Digest32, block_hash: Digest32, height: u64 },
}

/// An ordered set of statements plus its commit status.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "BatchRecord", into = "BatchRecord")]
pub struct Batch {
    entries: Vec<BatchEntry>,
    digests: HashSet<Digest32>,
    status: Option<BatchStatus>,
    tree: OnceLock<StatementTree>,
}

#[derive(Serialize, Deserialize)]
struct BatchRecord {
    entries: Vec<BatchEntry>,
    status: BatchStatus,
}

impl From<BatchRecord> for Batch {
    fn from(r: BatchRecord) -> Self {
        let digests = r.entries.iter().map(|e| e.digest).collect();
        Batch { entries: r.entries, digests, status: Some(r.status), tree: OnceLock::new() }
    }
}

impl From<Batch> for BatchRecord {
    fn from(b: Batch) -> Self {
        BatchRecord { status: b.status(), entries: b.entries }
    }
}

/// The committed transaction and where the batch root sits in it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub txid: Digest32,
    pub root: Digest32,
    pub tx: RawTransaction,
}

impl Commitment {
    pub fn raw_bytes(&self) -> Vec<u8> {
        self.tx.to_bytes()
    }
}

impl Batch {
    pub fn new() -> Self {
        Self::default()
    }

    /// An open batch holding `entries` in order.
    pub fn from_entries<I: IntoIterator<Item = BatchEntry>>(entries: I) -> Result<Self, AuthorityError> {
        let mut batch = Batch::new();
        for e in entries {
            batch.add_statement(e.digest, e.filename)?;
        }
        Ok(batch)
    }

    pub fn add_statement(&mut self, digest: Digest32, filename: impl Into<String>) -> Result<(), AuthorityError> {
        if self.status() != BatchStatus::Open {
            return Err(AuthorityError::BatchSealed);
        }
        let filename = filename.into();
        if filename.contains('\n') || filename.contains('\r') {
            return Err(AuthorityError::BadFilename(filename));
        }
        if !self.digests.insert(digest) {
            return Err(AuthorityError::DuplicateStatement(digest));
        }
        self.entries.push(BatchEntry { digest, filename });
        self.tree = OnceLock::new();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BatchEntry] {
        &self.entries
    }

    pub fn status(&self) -> BatchStatus {
        self.status.unwrap_or(BatchStatus::Open)
    }

    pub fn txid(&self) -> Option<Digest32> {
        match self.status() {
            BatchStatus::Open => None,
            BatchStatus::Committed { txid } | BatchStatus::Confirmed { txid, .. } => Some(txid),
        }
    }

    pub fn index_of(&self, digest: &Digest32) -> Option<usize> {
        if !self.digests.contains(digest) {
            return None;
        }
        self.entries.iter().position(|e| e.digest == *digest)
    }

    /// The statement tree; built on first use.
    pub fn tree(&self) -> Result<&StatementTree, AuthorityError> {
        if self.entries.is_empty() {
            return Err(AuthorityError::EmptyBatch);
        }
        if let Some(t) = self.tree.get() {
            return Ok(t);
        }
        let digests = self.entries.iter().map(|e| e.digest).collect();
        let tree = StatementTree::build(digests)?;
        Ok(self.tree.get_or_init(|| tree))
    }

    pub fn root(&self) -> Result<Digest32, AuthorityError> {
        Ok(self.tree()?.root())
    }

    /// Build, sign and submit the commitment transaction. On any failure the
    /// batch stays open and the wallet keeps its output.
    pub fn commit<C: TxSubmitter + ?Sized>(
        &mut self,
        chain: &mut C,
        wallet: &mut Wallet,
        fee: u64,
    ) -> Result<Commitment, AuthorityError> {
        if self.status() != BatchStatus::Open {
            return Err(AuthorityError::BatchSealed);
        }
        let root = self.root()?;
        let funding = wallet.funding.ok_or(AuthorityError::NoFunds)?;
        let tx = build_commit_tx(root.as_bytes(), &funding, &wallet.key, &wallet.key.address(), fee)?;
        let txid = chain.submit_tx(&tx).map_err(|e| AuthorityError::CommitFailed(e.to_string()))?;
        wallet.funding = Some(Funding { outpoint: OutPoint { txid, vout: 1 }, value: tx.outputs[1].value });
        self.status = Some(BatchStatus::Committed { txid });
        Ok(Commitment { txid, root, tx })
    }

    /// Record the block that confirmed the commitment.
    pub fn mark_confirmed(&mut self, block_hash: Digest32, height: u64) -> Result<(), AuthorityError> {
        let txid = self.txid().ok_or(AuthorityError::NotCommitted)?;
        self.status = Some(BatchStatus::Confirmed { txid, block_hash, height });
        Ok(())
    }

    /// Look for the commitment in `source` starting at `from_height`, marking
    /// the batch confirmed when found. Returns the block.
    pub fn locate<S: BlockSource + ?Sized>(&mut self, source: &S, from_height: u64) -> Result<Option<Block>, AuthorityError> {
        let txid = self.txid().ok_or(AuthorityError::NotCommitted)?;
        if let Some((_, height)) = self.confirmed_at() {
            return Ok(Some(source.block_at(height)?));
        }
        let tip = source.tip_height()?;
        for height in from_height..=tip {
            let block = source.block_at(height)?;
            if block.transactions.iter().any(|tx| tx.txid() == txid) {
                self.mark_confirmed(block.hash(), height)?;
                return Ok(Some(block));
            }
        }
        Ok(None)
    }

    pub fn confirmed_at(&self) -> Option<(Digest32, u64)> {
        match self.status() {
            BatchStatus::Confirmed { block_hash, height, .. } => Some((block_hash, height)),
            _ => None,
        }
    }

    fn block_tx_position(&self, block: &Block) -> Result<(usize, Vec<Digest32>), AuthorityError> {
        let txid = self.txid().ok_or(AuthorityError::NotCommitted)?;
        let txids = block.txids();
        let pos = txids.iter().position(|t| *t == txid).ok_or(AuthorityError::NotCommitted)?;
        Ok((pos, txids))
    }

    /// Proof for the statement at `index`, anchored in `block`.
    pub fn prove_inclusion(&self, block: &Block, index: usize) -> Result<InclusionProof, AuthorityError> {
        let (pos, txids) = self.block_tx_position(block)?;
        let tx_tree = TxTree::build(&txids)?;
        self.proof_from(block, pos, &tx_tree, index)
    }

    fn proof_from(&self, block: &Block, pos: usize, tx_tree: &TxTree, index: usize) -> Result<InclusionProof, AuthorityError> {
        let stmt_branch = self.tree()?.branch(index).map_err(|_| AuthorityError::NotCommitted)?;
        Ok(InclusionProof {
            header: block.header,
            tx: block.transactions[pos].clone(),
            tx_branch: tx_tree.branch(pos)?,
            stmt_branch,
        })
    }

    /// Proof for `digest`; [`AuthorityError::NotCommitted`] if it is not in the batch.
    pub fn prove_digest(&self, block: &Block, digest: &Digest32) -> Result<InclusionProof, AuthorityError> {
        let index = self.index_of(digest).ok_or(AuthorityError::NotCommitted)?;
        self.prove_inclusion(block, index)
    }

    /// As [`Batch::prove_inclusion`], refusing blocks fewer than `k` deep
    /// below `tip_height`.
    pub fn prove_confirmed(
        &self,
        block: &Block,
        block_height: u64,
        tip_height: u64,
        index: usize,
        k: u64,
    ) -> Result<InclusionProof, AuthorityError> {
        let depth = tip_height.saturating_sub(block_height);
        if depth < k {
            return Err(AuthorityError::NotYetConfirmed { depth, required: k });
        }
        self.prove_inclusion(block, index)
    }

    /// Proofs for every statement, in leaf order.
    pub fn prove_all(&self, block: &Block, exec: Execution) -> Result<Vec<InclusionProof>, AuthorityError> {
        let (pos, txids) = self.block_tx_position(block)?;
        let tx_tree = TxTree::build_with(&txids, exec)?;
        self.tree()?;
        par::map_range(exec, self.len(), |i| self.proof_from(block, pos, &tx_tree, i)).into_iter().collect()
    }
}

/// The authority key and the single output it currently spends from.
#[derive(Clone, Debug)]
pub struct Wallet {
    pub key: AuthorityKey,
    pub funding: Option<Funding>,
}

#[derive(Serialize, Deserialize)]
struct WalletFile {
    secret_key: String,
    address: AuthorityAddress,
    funding: Option<Funding>,
}

impl Wallet {
    pub fn new(key: AuthorityKey, funding: Option<Funding>) -> Self {
        Wallet { key, funding }
    }

    pub fn address(&self) -> AuthorityAddress {
        self.key.address()
    }

    pub fn to_json(&self) -> String {
        let f = WalletFile { secret_key: self.key.secret_hex(), address: self.address(), funding: self.funding };
        serde_json::to_string_pretty(&f).expect("wallet serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AuthorityError> {
        let f: WalletFile = serde_json::from_str(text).map_err(|e| WireError::Format(e.to_string()))?;
        let key = AuthorityKey::from_secret_hex(&f.secret_key)?;
        if key.address() != f.address {
            return Err(WireError::Key("wallet address does not match its key".into()).into());
        }
        Ok(Wallet { key, funding: f.funding })
    }
}

/// When to close the open batch: at `max_size` statements or once
/// `max_interval` seconds have passed since it opened, whichever is first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPolicy {
    pub max_size: usize,
    pub max_interval: u64,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        // four batches a day
        BatchPolicy { max_size: 1_000_000, max_interval: 6 * 3600 }
    }
}

impl BatchPolicy {
    pub fn should_close(&self, batch: &Batch, opened_at: u64, now: u64) -> bool {
        !batch.is_empty() && (batch.len() >= self.max_size || now.saturating_sub(opened_at) >= self.max_interval)
    }
}
