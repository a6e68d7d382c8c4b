//! Binary transparency anchored to a Bitcoin-format blockchain.
//!
//! An *authority* batches the SHA-256 digests of the binaries it publishes
//! into a Merkle tree and commits the root in the `OP_RETURN` output of a
//! transaction spent from a well-known address. Each binary then ships with
//! an [`InclusionProof`] that an *auditor* verifies offline against the block
//! headers it has synced. *Monitors* scan the chain for every commitment and
//! check that the data behind it was published; *archivists* mirror that data
//! and report the highest block they fully cover.
//!
//! The crate is organised by role:
//!
//! - [`hashmerkle`]: digests, the statement tree and the Bitcoin transaction tree
//! - [`btcwire`]: bit-exact headers, transactions, scripts and addresses
//! - [`simchain`]: a deterministic in-process chain with fork/eclipse helpers
//! - [`authority`], [`auditor`], [`monitor`], [`archivist`]: the protocol roles
//! - [`costmodel`]: the mining and split-view attack cost calculator
//! - [`debfeed`]: Debian `Packages` index ingestion
//! - [`scenarios`]: scripted split-view and withholding runs
//!
//! Data-parallel loops (tree levels, proof batches, block scans) go through
//! [`par`], which uses rayon when the `parallel` feature is enabled.

pub mod archivist;
pub mod auditor;
pub mod authority;
pub mod btcwire;
pub mod costmodel;
pub mod debfeed;
pub mod hashmerkle;
pub mod monitor;
pub mod par;
pub mod scenarios;
pub mod proof;
pub mod simchain;

pub use hashmerkle::{Digest32, MerkleBranch, StatementTree};
pub use par::Execution;
pub use proof::InclusionProof;
