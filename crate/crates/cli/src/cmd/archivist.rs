use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use anyhow::Result;
use clap::{Args, Subcommand};
use contour::archivist::{Archive, ArchiveServer, RoundReport};
use contour::auditor::ArchState;
use contour::btcwire::AuthorityAddress;
use contour::monitor::open_source;
use contour::Execution;
use serde_json::json;

use super::monitor::LayoutArg;
use crate::util::{checkpoint_arg, emit, open_feed};
use crate::{Ctx, Outcome};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mirror new batches each round and serve them over HTTP.
    Serve(Serve),
}

#[derive(Args, Debug)]
pub struct Serve {
    /// Listen address for the HTTP server.
    #[arg(long, default_value = "127.0.0.1:8480")]
    addr: String,
    #[arg(long)]
    authority_addr: AuthorityAddress,
    /// Where the authority publishes manifests and files.
    #[arg(long)]
    data_url: String,
    #[arg(long, value_enum, default_value = "authority")]
    layout: LayoutArg,
    #[arg(long)]
    root_dir: PathBuf,
    /// Block directory or `tcp://host:port`.
    #[arg(long)]
    blocks: String,
    /// Starting point for a new archive (default: block 0 of `--blocks`).
    #[arg(long, value_parser = checkpoint_arg)]
    checkpoint: Option<ArchState>,
    #[arg(long, default_value_t = 60)]
    poll_secs: u64,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Run a single round, print it and exit without serving.
    #[arg(long)]
    once: bool,
}

pub fn run(ctx: &Ctx, cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Serve(a) => serve(ctx, a),
    }
}

fn round(archive: &RwLock<Archive>, a: &Serve) -> Result<RoundReport> {
    let feed = open_feed(&a.blocks)?;
    let data = open_source(&a.data_url, a.layout.into());
    let mut guard = archive.write().unwrap_or_else(|p| p.into_inner());
    Ok(guard.run_round(&*feed, &a.authority_addr, &*data, Execution::default())?)
}

fn print_round(ctx: &Ctx, r: &RoundReport) {
    let rejected: Vec<_> = r.rejected.iter().map(|(root, why)| json!({ "root": root.to_hex(), "reason": why })).collect();
    let mut text = format!("scanned to {}, stored {}, covered up to {}\n", r.scanned_to, r.stored, r.covered_height);
    for (root, why) in &r.rejected {
        text.push_str(&format!("REJECTED {} {why:?}\n", root.to_hex()));
    }
    emit(
        ctx.json,
        json!({ "scanned_to": r.scanned_to, "stored": r.stored, "covered_height": r.covered_height, "rejected": rejected }),
        text,
    );
}

fn serve(ctx: &Ctx, a: Serve) -> Result<Outcome> {
    let checkpoint = match a.checkpoint {
        Some(c) => c,
        None => ArchState { block_hash: open_feed(&a.blocks)?.block_at(0)?.hash(), height: 0 },
    };
    let archive = Arc::new(RwLock::new(Archive::open(&a.root_dir, checkpoint)?));
    let first = round(&archive, &a)?;
    print_round(ctx, &first);
    if a.once {
        return Ok(if first.rejected.is_empty() { Outcome::Ok } else { Outcome::Reject });
    }
    let server = ArchiveServer::start(&a.addr, Arc::clone(&archive), a.threads)?;
    log::warn!("serving on {}", server.url());
    loop {
        std::thread::sleep(Duration::from_secs(a.poll_secs.max(1)));
        match round(&archive, &a) {
            Ok(r) => log::info!("round: stored {}, covered {}, {} rejected", r.stored, r.covered_height, r.rejected.len()),
            Err(e) => log::error!("round failed: {e:#}"),
        }
    }
}
