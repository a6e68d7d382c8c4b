//! On-disk chain layout: `chain.json` (config), `blocks/<height>.blk`
//! (serialized blocks) and `mempool.bin` (pending transactions).

use std::fs;
use std::path::{Path, PathBuf};

use super::{Block, BlockSource, Chain, HeaderSource, SimChainConfig, SimError};
use crate::btcwire::{write_varint, BlockHeader, RawTransaction, Reader};
use crate::hashmerkle::Digest32;

const CONFIG_FILE: &str = "chain.json";
const BLOCKS_DIR: &str = "blocks";
const MEMPOOL_FILE: &str = "mempool.bin";

fn block_path(dir: &Path, height: u64) -> PathBuf {
    dir.join(format!("{height:08}.blk"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

impl Chain {
    /// Write the chain to `dir`. Blocks already on disk are left alone, so
    /// repeated saves only append.
    pub fn save(&self, dir: &Path) -> Result<(), SimError> {
        let blocks = dir.join(BLOCKS_DIR);
        fs::create_dir_all(&blocks)?;
        let config = serde_json::to_vec_pretty(self.config()).expect("config serializes");
        write_atomic(&dir.join(CONFIG_FILE), &config)?;
        for (height, block) in self.blocks().iter().enumerate() {
            let path = block_path(&blocks, height as u64);
            if !path.exists() {
                write_atomic(&path, &block.to_bytes())?;
            }
        }
        // drop stale blocks from a longer previous save (e.g. after a reorg in a test)
        let mut extra = self.height() + 1;
        while block_path(&blocks, extra).exists() {
            fs::remove_file(block_path(&blocks, extra))?;
            extra += 1;
        }
        let mut pool = Vec::new();
        write_varint(&mut pool, self.mempool().len() as u64);
        for tx in self.mempool() {
            tx.write(&mut pool);
        }
        write_atomic(&dir.join(MEMPOOL_FILE), &pool)?;
        Ok(())
    }

    /// Load and fully re-validate a chain saved by [`Chain::save`].
    pub fn load(dir: &Path) -> Result<Chain, SimError> {
        let text = fs::read(dir.join(CONFIG_FILE))?;
        let config: SimChainConfig =
            serde_json::from_slice(&text).map_err(|e| SimError::Config(e.to_string()))?;
        let source = BlockDir::open(dir.join(BLOCKS_DIR))?;
        let tip = source.tip_height()?;
        let blocks = (0..=tip).map(|h| source.block_at(h)).collect::<Result<Vec<_>, _>>()?;
        let mut chain = Chain::from_blocks(config, blocks)?;
        let pool_path = dir.join(MEMPOOL_FILE);
        if pool_path.exists() {
            let bytes = fs::read(pool_path)?;
            let mut r = Reader::new(&bytes);
            let n = r.length(1_000_000)?;
            for _ in 0..n {
                let tx = RawTransaction::read(&mut r)?;
                chain.requeue(tx)?;
            }
            r.finish()?;
        }
        Ok(chain)
    }
}

/// A directory of `<height:08>.blk` files, read on demand. This is the
/// monitor's stand-in for a full node's block store.
#[derive(Clone, Debug)]
pub struct BlockDir {
    dir: PathBuf,
    tip: u64,
}

impl BlockDir {
    /// Accepts either a chain directory or its `blocks/` subdirectory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SimError> {
        let mut dir = dir.into();
        if dir.join(BLOCKS_DIR).is_dir() {
            dir = dir.join(BLOCKS_DIR);
        }
        if !block_path(&dir, 0).exists() {
            return Err(SimError::Config(format!("{} has no block 0", dir.display())));
        }
        let mut tip = 0;
        while block_path(&dir, tip + 1).exists() {
            tip += 1;
        }
        Ok(BlockDir { dir, tip })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }
}

impl BlockSource for BlockDir {
    fn tip_height(&self) -> Result<u64, SimError> {
        Ok(self.tip)
    }

    fn block_at(&self, height: u64) -> Result<Block, SimError> {
        let path = block_path(&self.dir, height);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SimError::Range { height, tip: self.tip })
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Block::from_bytes(&bytes)?)
    }
}

impl HeaderSource for BlockDir {
    fn headers_after(&self, from: &Digest32) -> Result<Vec<BlockHeader>, SimError> {
        let mut headers = Vec::new();
        let mut found = false;
        for h in 0..=self.tip {
            let block = self.block_at(h)?;
            if found {
                headers.push(block.header);
            } else if block.hash() == *from {
                found = true;
            }
        }
        if found {
            Ok(headers)
        } else {
            Err(SimError::NotFound(*from))
        }
    }
}
