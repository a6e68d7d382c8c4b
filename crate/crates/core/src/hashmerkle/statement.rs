use super::{leaf_hash, node_hash, Digest32, MerkleBranch, MerkleError};
use crate::par::{self, Execution};

/// Merkle tree over a batch of statement digests.
///
/// Leaves keep insertion order, so a leaf's position is its proof index.
/// Levels are stored bottom-up; `levels[0]` holds the prefixed leaf hashes
/// and the last level holds the root alone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatementTree {
    leaves: Vec<Digest32>,
    levels: Vec<Vec<Digest32>>,
}

impl StatementTree {
    pub fn build(leaves: Vec<Digest32>) -> Result<Self, MerkleError> {
        Self::build_with(leaves, Execution::default())
    }

    pub fn build_with(leaves: Vec<Digest32>, exec: Execution) -> Result<Self, MerkleError> {
        if leaves.is_empty() {
            return Err(MerkleError::EmptyBatch);
        }
        let mut levels = vec![par::map(exec, &leaves, leaf_hash)];
        while levels.last().map_or(0, Vec::len) > 1 {
            let prev = levels.last().expect("at least one level");
            let next = par::map_pairs(exec, prev, |pair| match pair {
                [l, r] => node_hash(l, r),
                [single] => *single,
                _ => unreachable!("chunks(2) yields one or two items"),
            });
            levels.push(next);
        }
        Ok(StatementTree { leaves, levels })
    }

    pub fn root(&self) -> Digest32 {
        self.levels.last().expect("tree has a root level")[0]
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Number of hashing levels above the leaves: `ceil(log2(n))`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn leaves(&self) -> &[Digest32] {
        &self.leaves
    }

    pub fn levels(&self) -> &[Vec<Digest32>] {
        &self.levels
    }

    /// Authentication path for the leaf at `index`.
    ///
    /// Levels where the leaf's ancestor was promoted contribute no sibling,
    /// so leaves on the right edge of an unbalanced tree get short branches.
    pub fn branch(&self, index: usize) -> Result<MerkleBranch, MerkleError> {
        if index >= self.leaves.len() {
            return Err(MerkleError::IndexOutOfRange { index, len: self.leaves.len() });
        }
        let mut siblings = Vec::with_capacity(self.depth());
        let mut pos = index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = pos ^ 1;
            if sib < level.len() {
                siblings.push(level[sib]);
            }
            pos >>= 1;
        }
        Ok(MerkleBranch { leaf_index: index as u64, siblings })
    }
}

pub fn statement_root(leaves: &[Digest32]) -> Result<Digest32, MerkleError> {
    Ok(StatementTree::build(leaves.to_vec())?.root())
}

/// Check that `branch` leads from the statement `leaf` to `root`.
///
/// The tree size is not part of the branch. It is not needed: at level `j`
/// the leaf's ancestor has a left sibling iff bit `j` of the index is set,
/// and a right sibling iff the subtree that ends with it stops short of the
/// tree's right edge. That second condition is monotone in `j`, so the
/// right siblings are exactly the lowest `siblings - popcount(index)`
/// zero-bit levels. Every other zero-bit level was a promotion.
pub fn verify_statement_branch(leaf: &Digest32, branch: &MerkleBranch, root: &Digest32) -> bool {
    let left_count = branch.leaf_index.count_ones() as usize;
    let Some(mut rights) = branch.siblings.len().checked_sub(left_count) else {
        return false;
    };
    let mut siblings = branch.siblings.iter();
    let mut node = leaf_hash(leaf);
    let mut idx = branch.leaf_index;
    while idx != 0 || rights != 0 {
        if idx & 1 == 1 {
            let Some(sib) = siblings.next() else { return false };
            node = node_hash(sib, &node);
        } else if rights > 0 {
            let Some(sib) = siblings.next() else { return false };
            node = node_hash(&node, sib);
            rights -= 1;
        }
        idx >>= 1;
    }
    siblings.next().is_none() && node == *root
}
