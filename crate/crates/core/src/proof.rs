//! Inclusion proofs and their binary file format.
//!
//! ```text
//! "CNTR" 0x01
//! header            80 bytes
//! varint len, tx    raw transaction
//! varint index, varint count, count * 32 bytes    transaction branch
//! varint index, varint count, count * 32 bytes    statement branch
//! ```

use serde::{Deserialize, Serialize};

use crate::btcwire::{extract_commit_root, varint_len, write_varint, BlockHeader, RawTransaction, Reader, WireError};
use crate::hashmerkle::{Digest32, MerkleBranch};

pub const PROOF_MAGIC: &[u8; 4] = b"CNTR";
pub const PROOF_VERSION: u8 = 0x01;

// a statement tree of 2^64 leaves is the deepest branch an index can address
const MAX_SIBLINGS: u64 = 64;
const MAX_TX_LEN: u64 = 1_000_000;

/// Everything an auditor needs to check one statement offline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    pub header: BlockHeader,
    pub tx: RawTransaction,
    pub tx_branch: MerkleBranch,
    pub stmt_branch: MerkleBranch,
}

fn write_branch(out: &mut Vec<u8>, b: &MerkleBranch) {
    write_varint(out, b.leaf_index);
    write_varint(out, b.siblings.len() as u64);
    for s in &b.siblings {
        out.extend_from_slice(s.as_bytes());
    }
}

fn read_branch(r: &mut Reader<'_>) -> Result<MerkleBranch, WireError> {
    let leaf_index = r.varint()?;
    let count = r.length(MAX_SIBLINGS)?;
    let siblings = (0..count).map(|_| r.digest()).collect::<Result<_, _>>()?;
    Ok(MerkleBranch { leaf_index, siblings })
}

fn branch_len(b: &MerkleBranch) -> usize {
    varint_len(b.leaf_index) + varint_len(b.siblings.len() as u64) + 32 * b.siblings.len()
}

impl InclusionProof {
    /// The batch root carried by the commitment transaction.
    pub fn committed_root(&self) -> Result<Digest32, WireError> {
        extract_commit_root(&self.tx)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(PROOF_MAGIC);
        out.push(PROOF_VERSION);
        out.extend_from_slice(&self.header.to_bytes());
        let tx = self.tx.to_bytes();
        write_varint(&mut out, tx.len() as u64);
        out.extend_from_slice(&tx);
        write_branch(&mut out, &self.tx_branch);
        write_branch(&mut out, &self.stmt_branch);
        out
    }

    pub fn encoded_len(&self) -> usize {
        let tx = self.tx.encoded_len();
        5 + 80 + varint_len(tx as u64) + tx + branch_len(&self.tx_branch) + branch_len(&self.stmt_branch)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != PROOF_MAGIC {
            return Err(WireError::Format("not a proof file (bad magic)".into()));
        }
        let version = r.u8()?;
        if version != PROOF_VERSION {
            return Err(WireError::Format(format!("unsupported proof version {version}")));
        }
        let header = BlockHeader::read(&mut r)?;
        let tx_bytes = r.var_bytes(MAX_TX_LEN)?;
        let tx = RawTransaction::from_bytes(tx_bytes)?;
        let tx_branch = read_branch(&mut r)?;
        let stmt_branch = read_branch(&mut r)?;
        r.finish()?;
        Ok(InclusionProof { header, tx, tx_branch, stmt_branch })
    }
}
