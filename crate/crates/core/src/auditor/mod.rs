//! Client-side verification: header sync, offline proof checks, the
//! confirmation-depth and block-staleness policy, and archivist coverage.
//!
//! [`check_inclusion`] takes only in-memory values. Nothing here sends a
//! statement digest anywhere: sync requests carry the store tip and the
//! arch-state request is a fixed path.

mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::btcwire::{extract_commit_root, tx_spends_from, AuthorityAddress};
use crate::hashmerkle::{verify_bitcoin_tx_branch, verify_statement_branch, Digest32};
use crate::proof::InclusionProof;
use crate::simchain::SimError;

pub use store::{HeaderRecord, HeaderStore, SyncReport, RECORD_SIZE};

/// Default maximum gap between block arrivals: three hours.
pub const DEFAULT_MAX_BLOCK_INTERVAL: u64 = 3 * 3600;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("header at height {height} ({hash}) does not extend the stored chain")]
    ChainMismatch { height: u64, hash: Digest32 },
    #[error("header at height {height} ({hash}) fails proof of work")]
    InvalidHeader { height: u64, hash: Digest32 },
    #[error("archivist state {hash} at height {height} is not on the verified chain")]
    UntrustedArchState { hash: Digest32, height: u64 },
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("malformed archivist state: {0}")]
    BadArchState(String),
    #[error("corrupt header store: {0}")]
    CorruptStore(String),
    #[error("http: {0}")]
    Http(String),
    #[error(transparent)]
    Source(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a proof was refused. Checks run in declaration order and the first
/// failure wins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum Reject {
    #[error("block header is not in the verified header set")]
    UnknownHeader,
    #[error("statement branch does not lead to the committed root")]
    BadStatementPath,
    #[error("transaction branch does not lead to the block's merkle root")]
    BadTxPath,
    #[error("commitment was not spent from the authority address")]
    WrongAuthority,
    #[error("block is not yet buried deep enough")]
    Unconfirmed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditorPolicy {
    pub k_confirmations: u64,
    pub max_block_interval: u64,
    pub authority_address: AuthorityAddress,
}

impl AuditorPolicy {
    pub fn new(authority_address: AuthorityAddress) -> Self {
        AuditorPolicy {
            k_confirmations: crate::authority::DEFAULT_CONFIRMATIONS,
            max_block_interval: DEFAULT_MAX_BLOCK_INTERVAL,
            authority_address,
        }
    }

    pub fn validate(&self) -> Result<(), AuditError> {
        if self.k_confirmations < 1 {
            return Err(AuditError::Policy("confirmations must be at least 1".into()));
        }
        if self.max_block_interval == 0 {
            return Err(AuditError::Policy("max block interval must be positive".into()));
        }
        Ok(())
    }
}

/// Accept `proof` for `digest` or say why not. Pure: no I/O.
pub fn check_inclusion(
    store: &HeaderStore,
    policy: &AuditorPolicy,
    digest: &Digest32,
    proof: &InclusionProof,
) -> Result<(), Reject> {
    let Some(height) = store.height_of(&proof.header.block_hash()) else {
        return Err(Reject::UnknownHeader);
    };
    let root = extract_commit_root(&proof.tx).map_err(|_| Reject::BadStatementPath)?;
    if !verify_statement_branch(digest, &proof.stmt_branch, &root) {
        return Err(Reject::BadStatementPath);
    }
    if !verify_bitcoin_tx_branch(&proof.tx.txid(), &proof.tx_branch, &proof.header.merkle_root) {
        return Err(Reject::BadTxPath);
    }
    if !tx_spends_from(&proof.tx, &policy.authority_address) {
        return Err(Reject::WrongAuthority);
    }
    if store.tip().height - height < policy.k_confirmations {
        return Err(Reject::Unconfirmed);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Staleness {
    Ok { gap: u64 },
    EclipseSuspected { gap: u64 },
}

/// Eclipse suspected when the last header arrived more than
/// `max_block_interval` seconds before `now` (the boundary itself is fine).
pub fn staleness_alarm(store: &HeaderStore, policy: &AuditorPolicy, now: u64) -> Staleness {
    let gap = now.saturating_sub(store.tip().arrival);
    if gap > policy.max_block_interval {
        Staleness::EclipseSuspected { gap }
    } else {
        Staleness::Ok { gap }
    }
}

/// An archivist's claim: it holds all data committed up to this block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchState {
    pub block_hash: Digest32,
    pub height: u64,
}

impl fmt::Display for ArchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.block_hash.to_hex(), self.height)
    }
}

impl FromStr for ArchState {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| AuditError::BadArchState(m.to_string());
        let line = s.strip_suffix('\n').unwrap_or(s);
        let (hash, height) = line.split_once(' ').ok_or_else(|| bad("expected `<hash> <height>`"))?;
        let block_hash = Digest32::from_hex(hash).map_err(|e| bad(&e.to_string()))?;
        let height = height.parse().map_err(|_| bad("height is not an integer"))?;
        Ok(ArchState { block_hash, height })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Covered,
    NotCovered,
}

/// Whether the archivist has mirrored the batch behind `proof`. The state
/// must name a block on our own verified chain.
pub fn check_arch_state(store: &HeaderStore, state: &ArchState, proof: &InclusionProof) -> Result<Coverage, AuditError> {
    if store.hash_at(state.height) != Some(state.block_hash) {
        return Err(AuditError::UntrustedArchState { hash: state.block_hash, height: state.height });
    }
    let proof_hash = proof.header.block_hash();
    match store.height_of(&proof_hash) {
        Some(h) if state.height >= h => Ok(Coverage::Covered),
        _ => Ok(Coverage::NotCovered),
    }
}

/// `GET <base>/state` from an archivist.
pub fn fetch_arch_state(base_url: &str) -> Result<ArchState, AuditError> {
    let url = format!("{}/state", base_url.trim_end_matches('/'));
    let body = ureq::get(&url)
        .call()
        .map_err(|e| AuditError::Http(e.to_string()))?
        .into_string()
        .map_err(|e| AuditError::Http(e.to_string()))?;
    body.parse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authority::{Batch, BatchEntry, Wallet};
    use crate::hashmerkle::sha256;
    use crate::simchain::{Chain, SimChainConfig};

    struct Fixture {
        chain: Chain,
        wallet: Wallet,
        batch: Batch,
        height: u64,
    }

    fn fixture(extra_blocks: u64) -> Fixture {
        let mut chain = Chain::new(SimChainConfig { rng_seed: 5, ..Default::default() }).unwrap();
        let key = chain.scenario_key(1);
        let f = chain.faucet(&key.address(), 1_000_000);
        chain.advance(1, 600);
        let mut wallet = Wallet::new(key, Some(f));
        let mut batch = Batch::from_entries((0..5).map(|i| BatchEntry {
            digest: sha256(&[i]),
            filename: format!("f{i}"),
        }))
        .unwrap();
        batch.commit(&mut chain, &mut wallet, 1_000).unwrap();
        chain.advance(1, 600);
        let height = chain.height();
        batch.locate(&chain, height).unwrap().unwrap();
        chain.advance(extra_blocks, 600);
        Fixture { chain, wallet, batch, height }
    }

    fn synced(c: &Chain) -> HeaderStore {
        let mut s = HeaderStore::from_checkpoint(c.genesis_hash(), 0);
        s.sync(c, 1_000).unwrap();
        s
    }

    #[test]
    fn honest_proof_accepted_at_depth_six() {
        let f = fixture(6);
        let store = synced(&f.chain);
        let policy = AuditorPolicy::new(f.wallet.address());
        let block = f.chain.block_ref_at(f.height).unwrap();
        let proof = f.batch.prove_inclusion(block, 2).unwrap();
        assert_eq!(check_inclusion(&store, &policy, &f.batch.entries()[2].digest, &proof), Ok(()));
        // the statement must match its own branch
        assert_eq!(
            check_inclusion(&store, &policy, &f.batch.entries()[3].digest, &proof),
            Err(Reject::BadStatementPath)
        );
    }

    #[test]
    fn shallow_proof_unconfirmed() {
        let f = fixture(3);
        let store = synced(&f.chain);
        let policy = AuditorPolicy::new(f.wallet.address());
        let block = f.chain.block_ref_at(f.height).unwrap();
        let proof = f.batch.prove_inclusion(block, 0).unwrap();
        assert_eq!(check_inclusion(&store, &policy, &f.batch.entries()[0].digest, &proof), Err(Reject::Unconfirmed));
    }

    #[test]
    fn rogue_committer_wrong_authority() {
        let f = fixture(6);
        let store = synced(&f.chain);
        let rogue = f.chain.scenario_key(77).address();
        let policy = AuditorPolicy::new(rogue);
        let block = f.chain.block_ref_at(f.height).unwrap();
        let proof = f.batch.prove_inclusion(block, 0).unwrap();
        assert_eq!(check_inclusion(&store, &policy, &f.batch.entries()[0].digest, &proof), Err(Reject::WrongAuthority));
    }

    #[test]
    fn staleness_boundary() {
        let f = fixture(0);
        let store = synced(&f.chain);
        let policy = AuditorPolicy::new(f.wallet.address());
        assert_eq!(staleness_alarm(&store, &policy, 1_600), Staleness::Ok { gap: 600 });
        assert_eq!(staleness_alarm(&store, &policy, 1_000 + 10_800), Staleness::Ok { gap: 10_800 });
        assert_eq!(staleness_alarm(&store, &policy, 1_000 + 10_801), Staleness::EclipseSuspected { gap: 10_801 });
        assert!(matches!(staleness_alarm(&store, &policy, 1_000 + 120_960), Staleness::EclipseSuspected { .. }));
    }

    #[test]
    fn arch_state_coverage() {
        let f = fixture(6);
        let store = synced(&f.chain);
        let block = f.chain.block_ref_at(f.height).unwrap();
        let proof = f.batch.prove_inclusion(block, 0).unwrap();
        let at = |h: u64| ArchState { block_hash: f.chain.hash_at(h).unwrap(), height: h };
        assert_eq!(check_arch_state(&store, &at(f.chain.height()), &proof).unwrap(), Coverage::Covered);
        assert_eq!(check_arch_state(&store, &at(f.height), &proof).unwrap(), Coverage::Covered);
        assert_eq!(check_arch_state(&store, &at(f.height - 1), &proof).unwrap(), Coverage::NotCovered);

        let mut fork = f.chain.fork_at(1).unwrap();
        fork.advance(1, 1);
        let forged = ArchState { block_hash: fork.tip_hash(), height: 2 };
        assert!(matches!(check_arch_state(&store, &forged, &proof), Err(AuditError::UntrustedArchState { .. })));
    }

    #[test]
    fn arch_state_text() {
        let s = ArchState { block_hash: Digest32([0xab; 32]), height: 17 };
        let text = s.to_string();
        assert_eq!(text, format!("{} 17\n", "ab".repeat(32)));
        assert_eq!(text.parse::<ArchState>().unwrap(), s);
        assert!("zz 1".parse::<ArchState>().is_err());
        assert!(format!("{} x", "ab".repeat(32)).parse::<ArchState>().is_err());
    }

    #[test]
    fn policy_validation() {
        let mut p = AuditorPolicy::new(AuthorityAddress::from_pubkey_hash([0; 20]));
        p.validate().unwrap();
        p.k_confirmations = 0;
        assert!(p.validate().is_err());
    }
}
