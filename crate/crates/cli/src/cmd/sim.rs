use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use contour::scenarios::{split_view, withholding};
use contour::simchain::{net, Chain, SimChainConfig};
use serde_json::json;

use super::authority::load_wallet;
use crate::util::{emit, write_file};
use crate::{Ctx, Outcome};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a new chain directory.
    Init(Init),
    /// Grant coins to a wallet from the faucet (mined in the next block).
    Fund(Fund),
    /// Mine blocks.
    Mine(Mine),
    /// Serve headers, blocks and transaction submission over TCP.
    Serve(Serve),
    /// Run a scripted attack scenario.
    #[command(subcommand)]
    Run(Scenario),
}

#[derive(Args, Debug)]
pub struct Init {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Blocks to mine after genesis.
    #[arg(long, default_value_t = 1)]
    blocks: u64,
    #[arg(long, value_parser = parse_bits, default_value = "0x1f0fffff")]
    target_bits: u32,
    #[arg(long, default_value_t = SimChainConfig::default().genesis_time)]
    genesis_time: u32,
    #[arg(long, default_value_t = SimChainConfig::default().block_interval)]
    block_interval: u32,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
pub struct Fund {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    wallet: PathBuf,
    /// Satoshis.
    #[arg(long, default_value_t = 100_000_000)]
    value: u64,
}

#[derive(Args, Debug)]
pub struct Mine {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Seconds between blocks (default: the chain's configured interval).
    #[arg(long)]
    interval: Option<u32>,
}

#[derive(Args, Debug)]
pub struct Serve {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8433")]
    listen: String,
    /// Mine a block this often and save the chain.
    #[arg(long)]
    mine_every_secs: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Scenario {
    /// An authority mines a private branch to fool one eclipsed auditor.
    SplitView {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        k: u64,
        /// Seconds per adversary block.
        #[arg(long, default_value_t = 120_960)]
        adversary_interval: u32,
    },
    /// An authority commits a batch but never publishes its manifest.
    Withholding {
        #[arg(long, default_value_t = 2)]
        seed: u64,
        #[arg(long)]
        work_dir: PathBuf,
    },
}

fn parse_bits(s: &str) -> Result<u32, String> {
    let hex = s.trim_start_matches("0x");
    u32::from_str_radix(hex, 16).map_err(|e| e.to_string())
}

pub fn run(ctx: &Ctx, cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Init(a) => init(ctx, a),
        Command::Fund(a) => fund(ctx, a),
        Command::Mine(a) => mine(ctx, a),
        Command::Serve(a) => serve(a),
        Command::Run(s) => scenario(ctx, s),
    }
}

fn load(dir: &Path) -> Result<Chain> {
    Chain::load(dir).with_context(|| format!("loading chain from {}", dir.display()))
}

fn init(ctx: &Ctx, a: Init) -> Result<Outcome> {
    if a.dir.join("chain.json").exists() && !a.force {
        bail!("{} already holds a chain; pass --force to replace it", a.dir.display());
    }
    let config = SimChainConfig {
        target_bits: a.target_bits,
        block_interval: a.block_interval,
        genesis_time: a.genesis_time,
        rng_seed: a.seed,
    };
    let mut chain = Chain::new(config)?;
    chain.advance_default(a.blocks);
    chain.save(&a.dir)?;
    let genesis = chain.genesis_hash().to_hex();
    emit(
        ctx.json,
        json!({ "genesis": genesis, "height": chain.height() }),
        format!("genesis {genesis}\ncheckpoint {genesis}:0\nheight {}", chain.height()),
    );
    Ok(Outcome::Ok)
}

fn fund(ctx: &Ctx, a: Fund) -> Result<Outcome> {
    let mut chain = load(&a.chain)?;
    let mut wallet = load_wallet(&a.wallet)?;
    if wallet.funding.is_some() {
        log::warn!("replacing the wallet's current funding output");
    }
    let funding = chain.faucet(&wallet.address(), a.value);
    wallet.funding = Some(funding);
    chain.save(&a.chain)?;
    write_file(&a.wallet, wallet.to_json())?;
    let txid = funding.outpoint.txid.to_reversed_hex();
    emit(ctx.json, json!({ "txid": txid, "value": a.value }), format!("funded {} sat in {txid}", a.value));
    Ok(Outcome::Ok)
}

fn mine(ctx: &Ctx, a: Mine) -> Result<Outcome> {
    let mut chain = load(&a.chain)?;
    let interval = a.interval.unwrap_or(chain.config().block_interval);
    let blocks = chain.advance(a.count, interval);
    chain.save(&a.chain)?;
    let txs: usize = blocks.iter().map(|b| b.transactions.len()).sum();
    let tip = chain.tip_hash().to_hex();
    emit(
        ctx.json,
        json!({ "height": chain.height(), "tip": tip, "transactions": txs }),
        format!("height {} tip {tip} ({txs} transactions mined)", chain.height()),
    );
    Ok(Outcome::Ok)
}

fn serve(a: Serve) -> Result<Outcome> {
    let chain = Arc::new(Mutex::new(load(&a.chain)?));
    let listener = TcpListener::bind(&a.listen).with_context(|| format!("binding {}", a.listen))?;
    log::warn!("serving chain on {}", listener.local_addr()?);
    if let Some(secs) = a.mine_every_secs {
        let chain = Arc::clone(&chain);
        let dir = a.chain.clone();
        std::thread::spawn(move || loop {
            std::thread::sleep(Duration::from_secs(secs.max(1)));
            let mut c = chain.lock().unwrap_or_else(|p| p.into_inner());
            c.advance_default(1);
            if let Err(e) = c.save(&dir) {
                log::error!("saving chain: {e}");
            }
        });
    }
    net::serve(listener, chain)?;
    Ok(Outcome::Ok)
}

fn scenario(ctx: &Ctx, s: Scenario) -> Result<Outcome> {
    match s {
        Scenario::SplitView { seed, k, adversary_interval } => {
            let o = split_view(seed, k, adversary_interval)?;
            let verdict = |v: &Result<(), contour::auditor::Reject>| match v {
                Ok(()) => "accept".to_string(),
                Err(r) => format!("reject ({r})"),
            };
            let text = format!(
                "fork at height {}, adversary mined {} blocks at {} s each\n\
                 honest auditor:   {}\n\
                 eclipsed auditor: {}, staleness {:?}\n\
                 staleness alarm fired {} s into the eclipse",
                o.fork_height,
                o.adversary_blocks,
                o.adversary_block_interval,
                verdict(&o.honest_verdict),
                verdict(&o.eclipsed_verdict),
                o.eclipsed_staleness,
                o.alarm_after_secs,
            );
            emit(ctx.json, serde_json::to_value(&o)?, text);
        }
        Scenario::Withholding { seed, work_dir } => {
            let o = withholding(seed, &work_dir)?;
            let text = format!(
                "{}archivist covered tip: height {}\nwithheld batch at height {}: {:?}\npublished batch at height {}: {:?}",
                o.report.to_text(),
                o.covered_tip.height,
                o.withheld_height,
                o.withheld_coverage,
                o.published_height,
                o.published_coverage,
            );
            emit(ctx.json, serde_json::to_value(&o)?, text);
        }
    }
    Ok(Outcome::Ok)
}
