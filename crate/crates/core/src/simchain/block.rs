use serde::{Deserialize, Serialize};

use crate::btcwire::{check_pow, write_varint, BlockHeader, RawTransaction, Reader, WireError};
use crate::hashmerkle::{bitcoin_tx_root, Digest32};

const MAX_BLOCK_TXS: u64 = 1_000_000;

/// A header plus its ordered transactions (coinbase first).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<RawTransaction>,
}

impl Block {
    pub fn hash(&self) -> Digest32 {
        self.header.block_hash()
    }

    pub fn txids(&self) -> Vec<Digest32> {
        self.transactions.iter().map(RawTransaction::txid).collect()
    }

    /// Bitcoin `block` message body: header, varint count, transactions.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(80 + 9 + self.transactions.iter().map(|t| t.encoded_len()).sum::<usize>());
        out.extend_from_slice(&self.header.to_bytes());
        write_varint(&mut out, self.transactions.len() as u64);
        for tx in &self.transactions {
            tx.write(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let header = BlockHeader::read(&mut r)?;
        let count = r.length(MAX_BLOCK_TXS)?;
        let mut transactions = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            transactions.push(RawTransaction::read(&mut r)?);
        }
        r.finish()?;
        Ok(Block { header, transactions })
    }

    /// Self-contained validity: coinbase first, PoW met, merkle root matches.
    /// Linkage to a parent is the caller's concern.
    pub fn check(&self) -> Result<(), WireError> {
        let first = self.transactions.first().ok_or_else(|| WireError::Format("block has no transactions".into()))?;
        if !first.is_coinbase() || self.transactions[1..].iter().any(RawTransaction::is_coinbase) {
            return Err(WireError::Format("coinbase must be exactly the first transaction".into()));
        }
        if !check_pow(&self.header)? {
            return Err(WireError::Format("header misses its proof-of-work target".into()));
        }
        let root = bitcoin_tx_root(&self.txids()).map_err(|e| WireError::Format(e.to_string()))?;
        if root != self.header.merkle_root {
            return Err(WireError::Format("merkle root does not match transactions".into()));
        }
        Ok(())
    }
}
