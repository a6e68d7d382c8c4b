//! Deterministic in-process blockchain.
//!
//! Mines Bitcoin-format blocks at a fixed (low) difficulty against a
//! simulated clock, keeps a UTXO set with P2PKH signature checks, and can
//! fork at any height so tests can script split-view and eclipse scenarios.
//! Difficulty never retargets.

mod block;
pub mod net;
mod store;

use std::collections::{HashMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::btcwire::{
    push_data, verify_p2pkh_input, p2pkh_pubkey_hash, AuthorityAddress, AuthorityKey, BlockHeader,
    Funding, OutPoint, RawTransaction, Target, TxIn, TxOut, WireError,
};
use crate::hashmerkle::{bitcoin_tx_root, hash160, sha256, Digest32};

pub use block::Block;
pub use store::BlockDir;

/// Coinbase subsidy paid to the simulated miner.
pub const BLOCK_SUBSIDY: u64 = 50 * 100_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("transaction rejected: {0}")]
    Rejected(String),
    #[error("unknown block {0}")]
    NotFound(Digest32),
    #[error("height {height} beyond tip {tip}")]
    Range { height: u64, tip: u64 },
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error("invalid block at height {height}: {reason}")]
    InvalidBlock { height: u64, reason: String },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serves headers in height order (the SPV transport).
pub trait HeaderSource {
    /// Headers strictly after `from`, in height order.
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError>;
}

/// Serves full blocks (the full-node transport).
pub trait BlockSource {
    fn tip_height(&self) -> Result<u64, SimError>;
    fn block_at(&self, height: u64) -> Result<Block, SimError>;
}

/// Accepts transactions for the next block.
pub trait TxSubmitter {
    fn submit_tx(&mut self, tx: &RawTransaction) -> Result<Digest32, SimError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimChainConfig {
    /// Compact difficulty target used for every block.
    pub target_bits: u32,
    /// Simulated seconds between blocks when a scenario just "advances".
    pub block_interval: u32,
    pub genesis_time: u32,
    pub rng_seed: u64,
}

impl Default for SimChainConfig {
    fn default() -> Self {
        // about one block in 4,096 hashes meets 0x1f0fffff
        SimChainConfig { target_bits: 0x1f0f_ffff, block_interval: 600, genesis_time: 1_512_432_000, rng_seed: 0 }
    }
}

impl SimChainConfig {
    pub fn validate(&self) -> Result<Target, SimError> {
        if self.block_interval == 0 {
            return Err(SimError::Config("block_interval must be positive".into()));
        }
        Target::from_compact(self.target_bits).map_err(|e| SimError::Config(e.to_string()))
    }
}

/// Inputs that reference this txid are faucet grants, not spends.
pub fn faucet_txid() -> Digest32 {
    sha256(b"contour simchain faucet")
}

/// A linear chain with a mempool. Forks are independent `Chain` values.
#[derive(Clone, Debug)]
pub struct Chain {
    config: SimChainConfig,
    target: Target,
    blocks: Vec<Block>,
    hashes: Vec<Digest32>,
    by_hash: HashMap<Digest32, u64>,
    utxos: HashMap<OutPoint, TxOut>,
    mempool: Vec<RawTransaction>,
    pending_outputs: HashMap<OutPoint, TxOut>,
    pending_spent: HashSet<OutPoint>,
    faucet_nonce: u32,
    miner_script: Vec<u8>,
}

impl Chain {
    pub fn new(config: SimChainConfig) -> Result<Self, SimError> {
        let mut chain = Self::empty(config)?;
        chain.mine_block(config.genesis_time);
        Ok(chain)
    }

    fn empty(config: SimChainConfig) -> Result<Self, SimError> {
        let target = config.validate()?;
        let miner_pkh = hash160(&config.rng_seed.to_le_bytes());
        Ok(Chain {
            config,
            target,
            blocks: Vec::new(),
            hashes: Vec::new(),
            by_hash: HashMap::new(),
            utxos: HashMap::new(),
            mempool: Vec::new(),
            pending_outputs: HashMap::new(),
            pending_spent: HashSet::new(),
            faucet_nonce: 0,
            miner_script: AuthorityAddress::from_pubkey_hash(miner_pkh).script_pubkey(),
        })
    }

    /// Rebuild a chain by replaying `blocks`, validating each one.
    pub fn from_blocks(config: SimChainConfig, blocks: Vec<Block>) -> Result<Self, SimError> {
        let mut chain = Self::empty(config)?;
        for block in blocks {
            chain.connect(block)?;
        }
        if chain.blocks.is_empty() {
            return Err(SimError::Config("no genesis block".into()));
        }
        Ok(chain)
    }

    pub fn config(&self) -> &SimChainConfig {
        &self.config
    }

    /// Deterministic RNG for scenario setup (keys, filler data).
    pub fn scenario_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.rng_seed);
        rng.set_stream(stream);
        rng
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always has genesis")
    }

    pub fn tip_hash(&self) -> Digest32 {
        *self.hashes.last().expect("chain always has genesis")
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn genesis_hash(&self) -> Digest32 {
        self.hashes[0]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, hash: &Digest32) -> Result<&Block, SimError> {
        let height = self.height_of(hash).ok_or(SimError::NotFound(*hash))?;
        Ok(&self.blocks[height as usize])
    }

    pub fn block_ref_at(&self, height: u64) -> Result<&Block, SimError> {
        self.blocks.get(height as usize).ok_or(SimError::Range { height, tip: self.height() })
    }

    pub fn hash_at(&self, height: u64) -> Option<Digest32> {
        self.hashes.get(height as usize).copied()
    }

    pub fn height_of(&self, hash: &Digest32) -> Option<u64> {
        self.by_hash.get(hash).copied()
    }

    pub fn mempool(&self) -> &[RawTransaction] {
        &self.mempool
    }

    /// Location of a confirmed transaction: (height, position in block).
    pub fn find_tx(&self, txid: &Digest32) -> Option<(u64, usize)> {
        self.blocks.iter().enumerate().rev().find_map(|(h, b)| {
            b.transactions.iter().position(|tx| tx.txid() == *txid).map(|i| (h as u64, i))
        })
    }

    /// Confirmed or pending unspent output.
    pub fn unspent(&self, outpoint: &OutPoint) -> Option<&TxOut> {
        if self.pending_spent.contains(outpoint) {
            return None;
        }
        self.utxos.get(outpoint).or_else(|| self.pending_outputs.get(outpoint))
    }

    /// Unspent P2PKH outputs paying `addr`, including pending ones.
    pub fn spendable(&self, addr: &AuthorityAddress) -> Vec<Funding> {
        let mut found: Vec<Funding> = self
            .utxos
            .iter()
            .chain(self.pending_outputs.iter())
            .filter(|(op, out)| {
                !self.pending_spent.contains(op)
                    && p2pkh_pubkey_hash(&out.script_pubkey).as_ref() == Some(addr.pubkey_hash())
            })
            .map(|(op, out)| Funding { outpoint: *op, value: out.value })
            .collect();
        found.sort_by_key(|f| (f.outpoint.txid, f.outpoint.vout));
        found
    }

    /// Queue a grant of `value` satoshis to `addr` for the next block.
    pub fn faucet(&mut self, addr: &AuthorityAddress, value: u64) -> Funding {
        let nonce = self.faucet_nonce;
        self.faucet_nonce += 1;
        let mut script_sig = Vec::new();
        push_data(&mut script_sig, b"faucet");
        let tx = RawTransaction {
            version: 1,
            inputs: vec![TxIn {
                prev_out: OutPoint { txid: faucet_txid(), vout: nonce },
                script_sig,
                sequence: u32::MAX,
            }],
            outputs: vec![TxOut { value, script_pubkey: addr.script_pubkey() }],
            lock_time: 0,
        };
        let outpoint = OutPoint { txid: tx.txid(), vout: 0 };
        self.pending_outputs.insert(outpoint, tx.outputs[0].clone());
        self.mempool.push(tx);
        Funding { outpoint, value }
    }

    /// Put a previously pending transaction back in the mempool (used when
    /// reloading a saved chain). Faucet grants skip signature checks.
    fn requeue(&mut self, tx: RawTransaction) -> Result<(), SimError> {
        let faucet_nonce = tx.inputs.iter().filter(|i| Self::is_faucet_input(i)).map(|i| i.prev_out.vout).max();
        let Some(nonce) = faucet_nonce else {
            return self.submit(&tx).map(|_| ());
        };
        self.faucet_nonce = self.faucet_nonce.max(nonce + 1);
        let txid = tx.txid();
        for (vout, out) in tx.outputs.iter().enumerate() {
            self.pending_outputs.insert(OutPoint { txid, vout: vout as u32 }, out.clone());
        }
        self.mempool.push(tx);
        Ok(())
    }

    fn is_faucet_input(input: &TxIn) -> bool {
        input.prev_out.txid == faucet_txid()
    }

    /// Validate and queue `tx`. Returns its txid.
    pub fn submit(&mut self, tx: &RawTransaction) -> Result<Digest32, SimError> {
        if tx.inputs.is_empty() || tx.outputs.is_empty() {
            return Err(SimError::Rejected("transaction needs inputs and outputs".into()));
        }
        if tx.is_coinbase() || tx.inputs.iter().any(Self::is_faucet_input) {
            return Err(SimError::Rejected("coinbase and faucet inputs cannot be submitted".into()));
        }
        let mut seen = HashSet::new();
        let mut input_value: u64 = 0;
        for (i, input) in tx.inputs.iter().enumerate() {
            let op = input.prev_out;
            if !seen.insert(op) {
                return Err(SimError::Rejected(format!("input {i} spends {op:?} twice")));
            }
            if self.pending_spent.contains(&op) {
                return Err(SimError::Rejected(format!("double spend of {}:{}", op.txid.to_reversed_hex(), op.vout)));
            }
            let prev = self
                .utxos
                .get(&op)
                .or_else(|| self.pending_outputs.get(&op))
                .ok_or_else(|| SimError::Rejected(format!("unknown or spent outpoint {}:{}", op.txid.to_reversed_hex(), op.vout)))?;
            if p2pkh_pubkey_hash(&prev.script_pubkey).is_some() && !verify_p2pkh_input(tx, i, &prev.script_pubkey) {
                return Err(SimError::Rejected(format!("input {i} fails P2PKH verification")));
            }
            input_value = input_value.saturating_add(prev.value);
        }
        if tx.output_value() > input_value {
            return Err(SimError::Rejected("outputs exceed inputs".into()));
        }
        let txid = tx.txid();
        for input in &tx.inputs {
            self.pending_spent.insert(input.prev_out);
        }
        for (vout, out) in tx.outputs.iter().enumerate() {
            self.pending_outputs.insert(OutPoint { txid, vout: vout as u32 }, out.clone());
        }
        self.mempool.push(tx.clone());
        Ok(txid)
    }

    /// Mine the mempool into a new block at `at_time` (clamped to the tip's
    /// timestamp so time never runs backwards).
    pub fn mine_block(&mut self, at_time: u32) -> Block {
        let height = self.blocks.len() as u64;
        let time = self.blocks.last().map_or(at_time, |b| at_time.max(b.header.timestamp));
        let fees = self.mempool_fees();
        let mut script_sig = Vec::new();
        push_data(&mut script_sig, &height.to_le_bytes());
        push_data(&mut script_sig, b"contour-sim");
        let coinbase = RawTransaction {
            version: 1,
            inputs: vec![TxIn { prev_out: OutPoint::NULL, script_sig, sequence: u32::MAX }],
            outputs: vec![TxOut { value: BLOCK_SUBSIDY + fees, script_pubkey: self.miner_script.clone() }],
            lock_time: 0,
        };
        let mut transactions = vec![coinbase];
        transactions.append(&mut self.mempool);
        let txids: Vec<Digest32> = transactions.iter().map(RawTransaction::txid).collect();
        let mut header = BlockHeader {
            version: 4,
            prev_hash: self.hashes.last().copied().unwrap_or(Digest32::ZERO),
            merkle_root: bitcoin_tx_root(&txids).expect("coinbase present"),
            timestamp: time,
            bits: self.config.target_bits,
            nonce: 0,
        };
        while !self.target.is_met_by(&header.block_hash()) {
            header.nonce = header.nonce.checked_add(1).unwrap_or_else(|| {
                header.timestamp += 1;
                0
            });
        }
        let block = Block { header, transactions };
        self.pending_outputs.clear();
        self.pending_spent.clear();
        self.connect(block.clone()).expect("freshly mined block connects");
        block
    }

    /// Mine `count` blocks spaced `interval` seconds after the tip.
    pub fn advance(&mut self, count: u64, interval: u32) -> Vec<Block> {
        (0..count)
            .map(|_| {
                let t = self.tip().header.timestamp + interval;
                self.mine_block(t)
            })
            .collect()
    }

    /// Mine `count` blocks at the configured interval.
    pub fn advance_default(&mut self, count: u64) -> Vec<Block> {
        self.advance(count, self.config.block_interval)
    }

    fn mempool_fees(&self) -> u64 {
        // faucet grants create value; only signed spends pay fees
        let mut available: HashMap<OutPoint, u64> =
            self.utxos.iter().map(|(op, o)| (*op, o.value)).collect();
        let mut fees = 0u64;
        for tx in &self.mempool {
            let txid = tx.txid();
            if !tx.inputs.iter().any(Self::is_faucet_input) {
                let inputs: u64 = tx.inputs.iter().filter_map(|i| available.get(&i.prev_out)).sum();
                fees += inputs.saturating_sub(tx.output_value());
            }
            for (vout, out) in tx.outputs.iter().enumerate() {
                available.insert(OutPoint { txid, vout: vout as u32 }, out.value);
            }
        }
        fees
    }

    /// Validate a block against this chain's tip and apply it.
    fn connect(&mut self, block: Block) -> Result<(), SimError> {
        let height = self.blocks.len() as u64;
        let invalid = |reason: String| SimError::InvalidBlock { height, reason };
        let expected_prev = self.hashes.last().copied().unwrap_or(Digest32::ZERO);
        if block.header.prev_hash != expected_prev {
            return Err(invalid("does not extend the tip".into()));
        }
        block.check().map_err(|e| invalid(e.to_string()))?;
        if let Some(parent) = self.blocks.last() {
            if block.header.timestamp < parent.header.timestamp {
                return Err(invalid("timestamp earlier than parent".into()));
            }
        }
        let mut spent_here = HashSet::new();
        for tx in block.transactions.iter().skip(1) {
            let txid = tx.txid();
            for input in &tx.inputs {
                if Self::is_faucet_input(input) {
                    continue;
                }
                if !spent_here.insert(input.prev_out) {
                    return Err(invalid("double spend inside block".into()));
                }
                if self.utxos.remove(&input.prev_out).is_none() {
                    return Err(invalid(format!("spends missing output {:?}", input.prev_out)));
                }
            }
            for (vout, out) in tx.outputs.iter().enumerate() {
                self.utxos.insert(OutPoint { txid, vout: vout as u32 }, out.clone());
            }
            if let Some(nonce) = tx.inputs.iter().filter(|i| Self::is_faucet_input(i)).map(|i| i.prev_out.vout).max() {
                self.faucet_nonce = self.faucet_nonce.max(nonce + 1);
            }
        }
        let coinbase = &block.transactions[0];
        let cb_txid = coinbase.txid();
        for (vout, out) in coinbase.outputs.iter().enumerate() {
            self.utxos.insert(OutPoint { txid: cb_txid, vout: vout as u32 }, out.clone());
        }
        let hash = block.hash();
        self.by_hash.insert(hash, height);
        self.hashes.push(hash);
        self.blocks.push(block);
        Ok(())
    }

    /// An independent branch sharing this chain's history up to `height`.
    /// The original chain is unaffected; mine on the returned value to
    /// extend the fork.
    pub fn fork_at(&self, height: u64) -> Result<Chain, SimError> {
        if height > self.height() {
            return Err(SimError::Range { height, tip: self.height() });
        }
        Chain::from_blocks(self.config, self.blocks[..=height as usize].to_vec())
    }

    pub fn header_stream(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        let start = self.height_of(from).ok_or(SimError::NotFound(*from))?;
        Ok(self.blocks[start as usize + 1..].iter().map(|b| b.header).collect())
    }

    /// View of this chain that stops at `stall_height`, as seen by an eclipsed node.
    pub fn stalled_at(&self, stall_height: u64) -> StalledView<'_> {
        StalledView { chain: self, stall_height }
    }

    /// A fresh key drawn from the scenario RNG.
    pub fn scenario_key(&self, stream: u64) -> AuthorityKey {
        let mut rng = self.scenario_rng(stream);
        AuthorityKey::generate(&mut rng)
    }

    /// A random 32-byte value from the scenario RNG.
    pub fn scenario_digest(rng: &mut ChaCha8Rng) -> Digest32 {
        let mut d = [0u8; 32];
        rng.fill_bytes(&mut d);
        Digest32(d)
    }
}

impl HeaderSource for Chain {
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        self.header_stream(from)
    }
}

impl BlockSource for Chain {
    fn tip_height(&self) -> Result<u64, SimError> {
        Ok(self.height())
    }

    fn block_at(&self, height: u64) -> Result<Block, SimError> {
        self.block_ref_at(height).cloned()
    }
}

impl TxSubmitter for Chain {
    fn submit_tx(&mut self, tx: &RawTransaction) -> Result<Digest32, SimError> {
        self.submit(tx)
    }
}

impl<T: HeaderSource + ?Sized> HeaderSource for &T {
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        (**self).headers_after(from)
    }
}

impl<T: BlockSource + ?Sized> BlockSource for &T {
    fn tip_height(&self) -> Result<u64, SimError> {
        (**self).tip_height()
    }

    fn block_at(&self, height: u64) -> Result<Block, SimError> {
        (**self).block_at(height)
    }
}

/// A chain as served to an eclipsed node: nothing past `stall_height`.
#[derive(Clone, Copy, Debug)]
pub struct StalledView<'a> {
    chain: &'a Chain,
    stall_height: u64,
}

impl HeaderSource for StalledView<'_> {
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        let start = self.chain.height_of(from).ok_or(SimError::NotFound(*from))?;
        if start > self.stall_height {
            return Err(SimError::NotFound(*from));
        }
        let end = self.stall_height.min(self.chain.height());
        Ok(self.chain.blocks[start as usize + 1..=end as usize].iter().map(|b| b.header).collect())
    }
}

impl BlockSource for StalledView<'_> {
    fn tip_height(&self) -> Result<u64, SimError> {
        Ok(self.stall_height.min(self.chain.height()))
    }

    fn block_at(&self, height: u64) -> Result<Block, SimError> {
        if height > self.stall_height {
            return Err(SimError::Range { height, tip: self.stall_height });
        }
        self.chain.block_at(height)
    }
}
