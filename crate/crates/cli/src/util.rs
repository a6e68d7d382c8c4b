use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use contour::auditor::ArchState;
use contour::hashmerkle::Digest32;
use contour::simchain::{net::RemoteChain, BlockDir, BlockSource, HeaderSource};

pub fn digest_arg(s: &str) -> Result<Digest32, String> {
    Digest32::from_hex(s).map_err(|e| e.to_string())
}

/// `<block hash hex>:<height>`.
pub fn checkpoint_arg(s: &str) -> Result<ArchState, String> {
    let (hash, height) = s.split_once(':').ok_or("expected <hash>:<height>")?;
    Ok(ArchState {
        block_hash: digest_arg(hash)?,
        height: height.parse().map_err(|_| format!("bad height {height:?}"))?,
    })
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub trait Feed: BlockSource + HeaderSource + Sync {}
impl<T: BlockSource + HeaderSource + Sync> Feed for T {}

/// Read-only block feed: a block directory or `tcp://host:port`.
pub fn open_feed(location: &str) -> Result<Box<dyn Feed>> {
    if let Some(addr) = location.strip_prefix("tcp://") {
        return Ok(Box::new(RemoteChain::connect(addr).with_context(|| format!("connecting to {addr}"))?));
    }
    Ok(Box::new(BlockDir::open(location).with_context(|| format!("opening blocks at {location}"))?))
}

/// Print `text` or, with `--json`, `value`.
pub fn emit(json: bool, value: serde_json::Value, text: impl AsRef<str>) {
    if json {
        println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
    } else {
        let text = text.as_ref();
        print!("{text}");
        if !text.ends_with('\n') {
            println!();
        }
    }
}
