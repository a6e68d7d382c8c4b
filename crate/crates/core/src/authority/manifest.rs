//! `<root-hex>.manifest`: one `<64-hex digest> <filename>\n` line per
//! statement, in leaf order.

use std::fs;
use std::path::{Path, PathBuf};

use super::{AuthorityError, Batch, BatchEntry, BatchStatus};
use crate::hashmerkle::{statement_root, Digest32};

/// When a committed batch's manifest may be published.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Disclosure {
    #[default]
    Immediate,
    /// Hold the manifest back until the commitment is `k` blocks deep.
    AfterConfirmations(u64),
}

pub fn manifest_file_name(root: &Digest32) -> String {
    format!("{}.manifest", root.to_hex())
}

pub fn render_manifest(entries: &[BatchEntry]) -> String {
    let mut out = String::with_capacity(entries.len() * 100);
    for e in entries {
        out.push_str(&e.digest.to_hex());
        out.push(' ');
        out.push_str(&e.filename);
        out.push('\n');
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<BatchEntry>, AuthorityError> {
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(AuthorityError::InvalidManifest { line: text.lines().count(), reason: "missing final newline".into() });
    }
    text.split_terminator('\n')
        .enumerate()
        .map(|(i, line)| {
            let bad = |reason: &str| AuthorityError::InvalidManifest { line: i + 1, reason: reason.into() };
            let (hex, filename) = line.split_once(' ').ok_or_else(|| bad("expected `<digest> <filename>`"))?;
            if hex.len() != 64 {
                return Err(bad("digest must be 64 hex characters"));
            }
            let digest = Digest32::from_hex(hex).map_err(|e| bad(&e.to_string()))?;
            if filename.is_empty() || filename.contains('\r') {
                return Err(bad("empty or malformed filename"));
            }
            Ok(BatchEntry { digest, filename: filename.to_string() })
        })
        .collect()
}

/// Root of the statement tree over the manifest's digests in file order.
pub fn manifest_root(entries: &[BatchEntry]) -> Result<Digest32, AuthorityError> {
    let digests: Vec<Digest32> = entries.iter().map(|e| e.digest).collect();
    Ok(statement_root(&digests)?)
}

/// Write the batch manifest into `dir`. Returns `None` when `disclosure`
/// holds it back at the current confirmation `depth`.
pub fn write_manifest(
    batch: &Batch,
    dir: &Path,
    disclosure: Disclosure,
    depth: u64,
) -> Result<Option<PathBuf>, AuthorityError> {
    if batch.status() == BatchStatus::Open {
        return Err(AuthorityError::NotCommitted);
    }
    if let Disclosure::AfterConfirmations(k) = disclosure {
        let confirmed = batch.confirmed_at().is_some();
        if !confirmed || depth < k {
            return Ok(None);
        }
    }
    let path = dir.join(manifest_file_name(&batch.root()?));
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("manifest.tmp");
    fs::write(&tmp, render_manifest(batch.entries()))?;
    fs::rename(&tmp, &path)?;
    Ok(Some(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<BatchEntry>, AuthorityError> {
    parse_manifest(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authority::Wallet;
    use crate::hashmerkle::sha256;
    use crate::simchain::{Chain, SimChainConfig};

    fn committed(names: &[&str]) -> (Batch, Chain) {
        let mut chain = Chain::new(SimChainConfig::default()).unwrap();
        let key = chain.scenario_key(1);
        let f = chain.faucet(&key.address(), 100_000);
        chain.advance(1, 600);
        let mut wallet = Wallet::new(key, Some(f));
        let mut b = Batch::new();
        for n in names {
            b.add_statement(sha256(n.as_bytes()), *n).unwrap();
        }
        b.commit(&mut chain, &mut wallet, 500).unwrap();
        (b, chain)
    }

    #[test]
    fn two_entries_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let (b, _) = committed(&["pool/a.deb", "pool/b c.deb"]);
        let path = write_manifest(&b, dir.path(), Disclosure::Immediate, 0).unwrap().unwrap();
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), manifest_file_name(&b.root().unwrap()));
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let entries = read_manifest(&path).unwrap();
        assert_eq!(entries, b.entries());
        assert_eq!(manifest_root(&entries).unwrap(), b.root().unwrap());
    }

    #[test]
    fn leaf_order_is_insertion_order() {
        let names = ["z", "m", "a", "q"];
        let (b, _) = committed(&names);
        let parsed = parse_manifest(&render_manifest(b.entries())).unwrap();
        let got: Vec<&str> = parsed.iter().map(|e| e.filename.as_str()).collect();
        assert_eq!(got, names);
        let mut sorted = parsed.clone();
        sorted.sort_by(|x, y| x.filename.cmp(&y.filename));
        assert_ne!(manifest_root(&sorted).unwrap(), b.root().unwrap());
    }

    #[test]
    fn delayed_disclosure_withholds() {
        let dir = tempfile::tempdir().unwrap();
        let (mut b, mut chain) = committed(&["x"]);
        let blk = chain.advance(1, 600).remove(0);
        b.mark_confirmed(blk.hash(), chain.height()).unwrap();
        assert!(write_manifest(&b, dir.path(), Disclosure::AfterConfirmations(6), 3).unwrap().is_none());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        assert!(write_manifest(&b, dir.path(), Disclosure::AfterConfirmations(6), 6).unwrap().is_some());
        assert!(matches!(write_manifest(&Batch::new(), dir.path(), Disclosure::Immediate, 0), Err(AuthorityError::NotCommitted)));
    }

    #[test]
    fn parse_errors_carry_line() {
        let good = format!("{} a\n", "00".repeat(32));
        assert!(parse_manifest(&good).is_ok());
        assert!(parse_manifest("").unwrap().is_empty());
        let bad = format!("{good}nothex b\n");
        assert!(matches!(parse_manifest(&bad), Err(AuthorityError::InvalidManifest { line: 2, .. })));
        assert!(parse_manifest(good.trim_end()).is_err());
    }
}
