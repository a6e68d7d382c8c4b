use super::{tx_node_hash, Digest32, MerkleBranch, MerkleError};
use crate::par::{self, Execution};

/// Bitcoin's transaction Merkle tree, in consensus form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxTree {
    levels: Vec<Vec<Digest32>>,
}

impl TxTree {
    pub fn build(txids: &[Digest32]) -> Result<Self, MerkleError> {
        Self::build_with(txids, Execution::default())
    }

    pub fn build_with(txids: &[Digest32], exec: Execution) -> Result<Self, MerkleError> {
        if txids.is_empty() {
            return Err(MerkleError::EmptyBlock);
        }
        let mut levels = vec![txids.to_vec()];
        while levels.last().map_or(0, Vec::len) > 1 {
            let prev = levels.last().expect("at least one level");
            let next = par::map_pairs(exec, prev, |pair| match pair {
                [l, r] => tx_node_hash(l, r),
                [single] => tx_node_hash(single, single),
                _ => unreachable!("chunks(2) yields one or two items"),
            });
            levels.push(next);
        }
        Ok(TxTree { levels })
    }

    pub fn root(&self) -> Digest32 {
        self.levels.last().expect("tree has a root level")[0]
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels[0].is_empty()
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn branch(&self, index: usize) -> Result<MerkleBranch, MerkleError> {
        let len = self.len();
        if index >= len {
            return Err(MerkleError::IndexOutOfRange { index, len });
        }
        let mut siblings = Vec::with_capacity(self.depth());
        let mut pos = index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = pos ^ 1;
            // An odd level pairs its last node with itself.
            siblings.push(if sib < level.len() { level[sib] } else { level[pos] });
            pos >>= 1;
        }
        Ok(MerkleBranch { leaf_index: index as u64, siblings })
    }
}

pub fn bitcoin_tx_root(tx_hashes: &[Digest32]) -> Result<Digest32, MerkleError> {
    Ok(TxTree::build(tx_hashes)?.root())
}

pub fn bitcoin_tx_branch(tx_hashes: &[Digest32], index: usize) -> Result<MerkleBranch, MerkleError> {
    TxTree::build(tx_hashes)?.branch(index)
}

pub fn verify_bitcoin_tx_branch(txid: &Digest32, branch: &MerkleBranch, root: &Digest32) -> bool {
    let depth = branch.siblings.len();
    if depth < 64 && branch.leaf_index >> depth != 0 {
        return false;
    }
    let mut node = *txid;
    let mut idx = branch.leaf_index;
    for sib in &branch.siblings {
        node = if idx & 1 == 1 { tx_node_hash(sib, &node) } else { tx_node_hash(&node, sib) };
        idx >>= 1;
    }
    node == *root
}
