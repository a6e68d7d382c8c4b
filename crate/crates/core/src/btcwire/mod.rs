//! Bit-exact Bitcoin data formats.
//!
//! Legacy (pre-segwit) serialization only: 80-byte headers, little-endian
//! integers, CompactSize varints, P2PKH and `OP_RETURN` scripts, Base58Check
//! addresses with version byte `0x00`.

mod address;
mod encode;
mod header;
mod keys;
mod script;
mod tx;

use thiserror::Error;

pub use address::AuthorityAddress;
pub use encode::{read_varint, varint_len, write_varint, Reader};
pub use header::{check_pow, BlockHeader, Target, HEADER_SIZE};
pub use keys::{
    build_commit_tx, legacy_sighash, sign_p2pkh_input, verify_p2pkh_input, AuthorityKey, Funding,
    SIGHASH_ALL,
};
pub use script::{op_return_payload, op_return_script, p2pkh_pubkey_hash, p2pkh_script, push_data, script_pushes};
pub use tx::{extract_commit_root, tx_spends_from, OutPoint, RawTransaction, TxIn, TxOut};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("unexpected end of data (wanted {wanted} more bytes)")]
    Truncated { wanted: usize },
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("non-canonical varint encoding")]
    NonCanonicalVarint,
    #[error("length {0} exceeds limit")]
    TooLarge(u64),
    #[error("invalid compact target 0x{0:08x}")]
    InvalidTarget(u32),
    #[error("insufficient funds: have {available} sat, need {required} sat")]
    Funding { available: u64, required: u64 },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("transaction carries no 32-byte OP_RETURN commitment")]
    NotACommitment,
    #[error("bad address: {0}")]
    Address(String),
    #[error("bad key: {0}")]
    Key(String),
}
