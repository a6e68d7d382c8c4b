//! Hash primitives and the two Merkle trees the system relies on.
//!
//! The *statement tree* is ours: SHA-256 with `0x00`/`0x01` leaf/node
//! prefixes, and an unpaired last node is promoted unchanged to the next
//! level. The *transaction tree* is Bitcoin's: double SHA-256 with the last
//! node of an odd level paired with itself.

mod bitcoin;
mod statement;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bitcoin::{bitcoin_tx_branch, bitcoin_tx_root, verify_bitcoin_tx_branch, TxTree};
pub use statement::{statement_root, verify_statement_branch, StatementTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("statement batch is empty")]
    EmptyBatch,
    #[error("block has no transactions")]
    EmptyBlock,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DigestError {
    #[error("expected 32 bytes, got {0}")]
    Length(usize),
    #[error("invalid hex: {0}")]
    Hex(String),
}

/// A 32-byte hash.
///
/// `Display` and [`Digest32::to_hex`] print the bytes in storage order.
/// Bitcoin tools print txids and block hashes byte-reversed; use
/// [`Digest32::to_reversed_hex`] for that convention.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; 32]);

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DigestError> {
        let arr: [u8; 32] = bytes.try_into().map_err(|_| DigestError::Length(bytes.len()))?;
        Ok(Digest32(arr))
    }

    pub fn from_hex(s: &str) -> Result<Self, DigestError> {
        let bytes = hex::decode(s.trim()).map_err(|e| DigestError::Hex(e.to_string()))?;
        Self::from_slice(&bytes)
    }

    pub fn from_reversed_hex(s: &str) -> Result<Self, DigestError> {
        let mut d = Self::from_hex(s)?;
        d.0.reverse();
        Ok(d)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn to_reversed_hex(&self) -> String {
        let mut b = self.0;
        b.reverse();
        hex::encode(b)
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl FromStr for Digest32 {
    type Err = DigestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

impl AsRef<[u8]> for Digest32 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl From<[u8; 32]> for Digest32 {
    fn from(b: [u8; 32]) -> Self {
        Digest32(b)
    }
}

impl Serialize for Digest32 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest32::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A Merkle authentication path.
///
/// `siblings` run bottom-up. Side information is carried by `leaf_index`
/// alone; see [`verify_statement_branch`] for how promoted levels are
/// recovered without the tree size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleBranch {
    pub leaf_index: u64,
    pub siblings: Vec<Digest32>,
}

pub fn sha256(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

pub fn sha256d(data: &[u8]) -> Digest32 {
    sha256(sha256(data).as_bytes())
}

/// RIPEMD-160 of SHA-256.
pub fn hash160(data: &[u8]) -> [u8; 20] {
    use ripemd::Ripemd160;
    let inner = Sha256::digest(data);
    Ripemd160::digest(inner).into()
}

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

/// Statement-tree leaf hash: `SHA-256(0x00 || digest)`.
pub fn leaf_hash(digest: &Digest32) -> Digest32 {
    let mut h = Sha256::new();
    h.update([LEAF_PREFIX]);
    h.update(digest.0);
    Digest32(h.finalize().into())
}

/// Statement-tree interior hash: `SHA-256(0x01 || left || right)`.
pub fn node_hash(left: &Digest32, right: &Digest32) -> Digest32 {
    let mut h = Sha256::new();
    h.update([NODE_PREFIX]);
    h.update(left.0);
    h.update(right.0);
    Digest32(h.finalize().into())
}

/// Bitcoin interior hash: `SHA-256d(left || right)`.
pub fn tx_node_hash(left: &Digest32, right: &Digest32) -> Digest32 {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(&left.0);
    buf[32..].copy_from_slice(&right.0);
    sha256d(&buf)
}

/// `ceil(log2(n))`, with 0 for `n <= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}
