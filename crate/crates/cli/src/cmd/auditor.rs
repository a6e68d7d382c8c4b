use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use contour::auditor::{
    check_arch_state, check_inclusion, fetch_arch_state, staleness_alarm, ArchState, AuditError, AuditorPolicy, Coverage,
    HeaderStore, Staleness, DEFAULT_MAX_BLOCK_INTERVAL,
};
use contour::authority::DEFAULT_CONFIRMATIONS;
use contour::btcwire::AuthorityAddress;
use contour::hashmerkle::{sha256, Digest32};
use contour::InclusionProof;
use serde_json::json;

use crate::util::{checkpoint_arg, digest_arg, emit, open_feed, unix_now};
use crate::{Ctx, Outcome};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fetch and verify new headers into the local store.
    Sync(Sync),
    /// Check an inclusion proof against the header store.
    Verify(Verify),
    /// Ask an archivist whether it holds the batch behind a proof.
    Archcheck(Archcheck),
}

#[derive(Args, Debug)]
pub struct Sync {
    /// Block directory or `tcp://host:port`.
    #[arg(long)]
    chain: String,
    #[arg(long)]
    store: PathBuf,
    /// Trusted `<hash>:<height>`; required when the store is new.
    #[arg(long, value_parser = checkpoint_arg)]
    checkpoint: Option<ArchState>,
    /// Arrival time to record, Unix seconds (default: now).
    #[arg(long)]
    now: Option<u64>,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("subject").required(true).args(["digest", "file"])))]
pub struct Verify {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    proof: PathBuf,
    #[arg(long, value_parser = digest_arg)]
    digest: Option<Digest32>,
    /// Hash this file to get the digest.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    authority_addr: AuthorityAddress,
    #[arg(long, default_value_t = DEFAULT_CONFIRMATIONS)]
    confirmations: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_BLOCK_INTERVAL)]
    max_block_interval_secs: u64,
    #[arg(long)]
    now: Option<u64>,
}

#[derive(Args, Debug)]
pub struct Archcheck {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    proof: PathBuf,
    #[arg(long)]
    archivist_url: String,
}

pub fn run(ctx: &Ctx, cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Sync(a) => sync(ctx, a),
        Command::Verify(a) => verify(ctx, a),
        Command::Archcheck(a) => archcheck(ctx, a),
    }
}

fn sync(ctx: &Ctx, a: Sync) -> Result<Outcome> {
    let now = a.now.unwrap_or_else(unix_now);
    let mut store = if a.store.exists() {
        HeaderStore::load(&a.store)?
    } else {
        let cp = a.checkpoint.context("new header store needs --checkpoint <hash>:<height>")?;
        HeaderStore::from_checkpoint_at(cp.block_hash, cp.height, now)
    };
    let feed = open_feed(&a.chain)?;
    let report = store.sync(&*feed, now)?;
    store.save(&a.store)?;
    let tip = store.tip();
    emit(
        ctx.json,
        json!({
            "added": report.added,
            "downloaded_bytes": report.downloaded_bytes,
            "tip_height": tip.height,
            "tip_hash": tip.hash.to_hex(),
            "stored_bytes": store.stored_bytes(),
        }),
        format!("added {} headers, tip {} at height {}", report.added, tip.hash.to_hex(), tip.height),
    );
    Ok(Outcome::Ok)
}

fn load_proof(path: &PathBuf) -> Result<Result<InclusionProof, String>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InclusionProof::from_bytes(&bytes).map_err(|e| e.to_string()))
}

fn verify(ctx: &Ctx, a: Verify) -> Result<Outcome> {
    let store = HeaderStore::load(&a.store)?;
    let policy = AuditorPolicy {
        k_confirmations: a.confirmations,
        max_block_interval: a.max_block_interval_secs,
        authority_address: a.authority_addr,
    };
    policy.validate()?;
    let digest = match (&a.digest, &a.file) {
        (Some(d), _) => *d,
        (None, Some(f)) => sha256(&fs::read(f).with_context(|| format!("reading {}", f.display()))?),
        (None, None) => unreachable!("clap requires --digest or --file"),
    };
    let verdict = match load_proof(&a.proof)? {
        Ok(proof) => check_inclusion(&store, &policy, &digest, &proof).map_err(|r| r.to_string()),
        Err(e) => Err(format!("malformed proof: {e}")),
    };
    if let Err(reason) = verdict {
        emit(ctx.json, json!({ "verdict": "reject", "reason": reason }), format!("REJECT {reason}"));
        return Ok(Outcome::Reject);
    }
    let staleness = staleness_alarm(&store, &policy, a.now.unwrap_or_else(unix_now));
    let (outcome, text) = match staleness {
        Staleness::Ok { .. } => (Outcome::Ok, "ACCEPT".to_string()),
        Staleness::EclipseSuspected { gap } => {
            (Outcome::Stale, format!("ACCEPT but no new header for {gap} s: possible eclipse, sync from another peer"))
        }
    };
    emit(ctx.json, json!({ "verdict": "accept", "digest": digest.to_hex(), "staleness": staleness }), text);
    Ok(outcome)
}

fn archcheck(ctx: &Ctx, a: Archcheck) -> Result<Outcome> {
    let store = HeaderStore::load(&a.store)?;
    let proof = load_proof(&a.proof)?.map_err(anyhow::Error::msg).context("malformed proof")?;
    let state = fetch_arch_state(&a.archivist_url)?;
    let (outcome, verdict) = match check_arch_state(&store, &state, &proof) {
        Ok(Coverage::Covered) => (Outcome::Ok, "covered"),
        Ok(Coverage::NotCovered) => (Outcome::Reject, "not covered"),
        Err(AuditError::UntrustedArchState { .. }) => (Outcome::Reject, "untrusted archivist state"),
        Err(e) => return Err(e.into()),
    };
    emit(
        ctx.json,
        json!({ "verdict": verdict, "archivist_height": state.height, "archivist_hash": state.block_hash.to_hex() }),
        format!("{verdict} (archivist at height {})", state.height),
    );
    Ok(outcome)
}
