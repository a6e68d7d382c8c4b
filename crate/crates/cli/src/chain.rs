//! `--chain` / `--blocks` locations: a saved chain directory or a
//! `tcp://host:port` sim server.

use std::path::PathBuf;

use anyhow::{Context, Result};
use contour::btcwire::{BlockHeader, RawTransaction};
use contour::hashmerkle::Digest32;
use contour::simchain::{net::RemoteChain, Block, BlockSource, Chain, HeaderSource, SimError, TxSubmitter};

pub enum ChainHandle {
    Local { dir: PathBuf, chain: Box<Chain> },
    Remote(RemoteChain),
}

impl ChainHandle {
    pub fn open(location: &str) -> Result<Self> {
        if let Some(addr) = location.strip_prefix("tcp://") {
            let remote = RemoteChain::connect(addr).with_context(|| format!("connecting to {addr}"))?;
            return Ok(ChainHandle::Remote(remote));
        }
        let dir = PathBuf::from(location);
        let chain = Chain::load(&dir).with_context(|| format!("loading chain from {}", dir.display()))?;
        Ok(ChainHandle::Local { dir, chain: Box::new(chain) })
    }

    /// Persist local changes (mempool additions).
    pub fn save(&self) -> Result<()> {
        if let ChainHandle::Local { dir, chain } = self {
            chain.save(dir).with_context(|| format!("saving chain to {}", dir.display()))?;
        }
        Ok(())
    }
}

impl HeaderSource for ChainHandle {
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        match self {
            ChainHandle::Local { chain, .. } => chain.headers_after(from),
            ChainHandle::Remote(r) => r.headers_after(from),
        }
    }
}

impl BlockSource for ChainHandle {
    fn tip_height(&self) -> Result<u64, SimError> {
        match self {
            ChainHandle::Local { chain, .. } => chain.tip_height(),
            ChainHandle::Remote(r) => r.tip_height(),
        }
    }

    fn block_at(&self, height: u64) -> Result<Block, SimError> {
        match self {
            ChainHandle::Local { chain, .. } => chain.block_at(height),
            ChainHandle::Remote(r) => r.block_at(height),
        }
    }
}

impl TxSubmitter for ChainHandle {
    fn submit_tx(&mut self, tx: &RawTransaction) -> Result<Digest32, SimError> {
        match self {
            ChainHandle::Local { chain, .. } => chain.submit_tx(tx),
            ChainHandle::Remote(r) => r.submit_tx(tx),
        }
    }
}
