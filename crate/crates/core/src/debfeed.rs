//! Debian `Packages` index ingestion.
//!
//! Stanzas are RFC 822-style field blocks separated by blank lines. Each
//! stanza becomes one statement: the package file's SHA-256 and its
//! repository-relative filename.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authority::BatchEntry;
use crate::hashmerkle::Digest32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DebfeedError {
    #[error("stanza {index} (line {line}): {reason}")]
    MalformedStanza { index: usize, line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PackageEntry {
    pub package_name: String,
    pub filename: String,
    pub sha256: Digest32,
    pub size_bytes: u64,
}

impl PackageEntry {
    pub fn to_batch_entry(&self) -> BatchEntry {
        BatchEntry { digest: self.sha256, filename: self.filename.clone() }
    }
}

struct Stanza {
    index: usize,
    first_line: usize,
    fields: HashMap<String, String>,
}

fn finish(stanza: Stanza) -> Result<PackageEntry, DebfeedError> {
    let bad = |reason: String| DebfeedError::MalformedStanza { index: stanza.index, line: stanza.first_line, reason };
    let get = |name: &str| {
        stanza
            .fields
            .get(&name.to_ascii_lowercase())
            .map(|v| v.trim())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| bad(format!("missing {name} field")))
    };
    let package_name = get("Package")?.to_string();
    let filename = get("Filename")?.to_string();
    let digest_text = get("SHA256")?;
    if digest_text.len() != 64 {
        return Err(bad(format!("SHA256 must be 64 hex characters, got {}", digest_text.len())));
    }
    let sha256 = Digest32::from_hex(digest_text).map_err(|e| bad(format!("SHA256: {e}")))?;
    let size_bytes = get("Size")?.parse().map_err(|_| bad("Size is not a non-negative integer".into()))?;
    Ok(PackageEntry { package_name, filename, sha256, size_bytes })
}

/// Parse a `Packages` file. Unknown fields are ignored; stanza order is kept.
pub fn parse_packages(input: &[u8]) -> Result<Vec<PackageEntry>, DebfeedError> {
    let text = String::from_utf8_lossy(input);
    let mut entries = Vec::new();
    let mut current: Option<Stanza> = None;
    let mut last_field: Option<String> = None;
    let mut index = 0;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(stanza) = current.take() {
                entries.push(finish(stanza)?);
                index += 1;
            }
            last_field = None;
            continue;
        }
        let stanza = current.get_or_insert_with(|| Stanza { index, first_line: line_no, fields: HashMap::new() });
        let bad = |reason: &str| DebfeedError::MalformedStanza { index, line: line_no, reason: reason.to_string() };
        if line.starts_with([' ', '\t']) {
            let field = last_field.as_ref().ok_or_else(|| bad("continuation line before any field"))?;
            let value = stanza.fields.get_mut(field).expect("last field recorded");
            value.push('\n');
            value.push_str(line.trim());
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (name, value) = line.split_once(':').ok_or_else(|| bad("line is neither a field nor a continuation"))?;
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(bad("invalid field name"));
        }
        let key = name.to_ascii_lowercase();
        if stanza.fields.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(bad(&format!("duplicate field {name}")));
        }
        last_field = Some(key);
    }
    if let Some(stanza) = current {
        entries.push(finish(stanza)?);
    }
    Ok(entries)
}

/// Entries of `current` whose `(filename, sha256)` pair is not in
/// `previous`, in `current` order. Removed packages produce nothing.
pub fn diff_batches(previous: &[PackageEntry], current: &[PackageEntry]) -> Vec<PackageEntry> {
    let seen: HashSet<(&str, Digest32)> = previous.iter().map(|e| (e.filename.as_str(), e.sha256)).collect();
    current.iter().filter(|e| !seen.contains(&(e.filename.as_str(), e.sha256))).cloned().collect()
}

/// Drop later repeats of a digest so the result can feed one batch.
pub fn dedup_digests(entries: &[PackageEntry]) -> Vec<PackageEntry> {
    let mut seen = HashSet::new();
    entries.iter().filter(|e| seen.insert(e.sha256)).cloned().collect()
}
