use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use contour::authority::{parse_manifest, write_manifest, AuthorityError, Batch, Disclosure, Wallet, DEFAULT_CONFIRMATIONS};
use contour::btcwire::AuthorityKey;
use contour::hashmerkle::{sha256, Digest32};
use contour::simchain::{Block, BlockSource};
use contour::Execution;
use serde_json::json;

use crate::chain::ChainHandle;
use crate::util::{digest_arg, emit, read_text, write_file};
use crate::{Ctx, Outcome};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a wallet file with a fresh authority key.
    Keygen(Keygen),
    /// Commit a batch of statements in one transaction.
    Commit(Commit),
    /// Write inclusion proofs for a confirmed batch.
    Prove(Prove),
    /// Publish the batch manifest.
    Manifest(Manifest),
}

#[derive(Args, Debug)]
pub struct Keygen {
    #[arg(long)]
    out: PathBuf,
    /// Derive the key from this string instead of the OS RNG (tests only).
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
pub struct Commit {
    /// Chain directory or `tcp://host:port`.
    #[arg(long)]
    chain: String,
    #[arg(long)]
    wallet: PathBuf,
    /// Lines of `<sha256 hex> <filename>`.
    #[arg(long)]
    from_batch_file: PathBuf,
    /// Fee in satoshis.
    #[arg(long, default_value_t = 10_000)]
    fee: u64,
    /// Where to save the committed batch.
    #[arg(long)]
    batch_out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["digest", "index", "all"])))]
pub struct Prove {
    #[arg(long)]
    chain: String,
    #[arg(long)]
    batch: PathBuf,
    #[arg(long, value_parser = digest_arg)]
    digest: Option<Digest32>,
    #[arg(long)]
    index: Option<usize>,
    /// Every statement; `--out` names a directory of `<index>.proof` files.
    #[arg(long)]
    all: bool,
    #[arg(long, default_value_t = DEFAULT_CONFIRMATIONS)]
    confirmations: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Manifest {
    #[arg(long)]
    batch: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Needed with `--delay-until-confirmations`.
    #[arg(long)]
    chain: Option<String>,
    /// Hold the manifest until the commitment is this deep.
    #[arg(long)]
    delay_until_confirmations: Option<u64>,
}

pub fn run(ctx: &Ctx, cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Keygen(a) => keygen(ctx, a),
        Command::Commit(a) => commit(ctx, a),
        Command::Prove(a) => prove(ctx, a),
        Command::Manifest(a) => manifest(ctx, a),
    }
}

pub fn load_wallet(path: &Path) -> Result<Wallet> {
    Wallet::from_json(&read_text(path)?).with_context(|| format!("parsing wallet {}", path.display()))
}

fn load_batch(path: &Path) -> Result<Batch> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing batch {}", path.display()))
}

fn save_batch(path: &Path, batch: &Batch) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(batch)?)
}

fn keygen(ctx: &Ctx, a: Keygen) -> Result<Outcome> {
    if a.out.exists() && !a.force {
        bail!("{} exists; pass --force to overwrite", a.out.display());
    }
    let key = match &a.seed {
        Some(seed) => AuthorityKey::from_secret_bytes(sha256(seed.as_bytes()).as_bytes())?,
        None => AuthorityKey::generate(&mut rand::rngs::OsRng),
    };
    let wallet = Wallet::new(key, None);
    write_file(&a.out, wallet.to_json())?;
    let addr = wallet.address().to_string();
    emit(ctx.json, json!({ "address": addr }), &addr);
    Ok(Outcome::Ok)
}

fn commit(ctx: &Ctx, a: Commit) -> Result<Outcome> {
    let mut text = read_text(&a.from_batch_file)?;
    if !text.is_empty() && !text.ends_with('\n') {
        text.push('\n');
    }
    let entries = parse_manifest(&text).with_context(|| format!("parsing {}", a.from_batch_file.display()))?;
    let mut batch = Batch::from_entries(entries)?;
    let mut wallet = load_wallet(&a.wallet)?;
    let mut chain = ChainHandle::open(&a.chain)?;
    let c = batch.commit(&mut chain, &mut wallet, a.fee)?;
    chain.save()?;
    write_file(&a.wallet, wallet.to_json())?;
    save_batch(&a.batch_out, &batch)?;
    let (txid, root) = (c.txid.to_reversed_hex(), c.root.to_hex());
    emit(
        ctx.json,
        json!({ "txid": txid, "root": root, "statements": batch.len(), "tx_bytes": c.raw_bytes().len() }),
        format!("txid {txid}\nroot {root}\nstatements {}", batch.len()),
    );
    Ok(Outcome::Ok)
}

/// The confirming block and its depth below the tip.
fn confirmed_block(batch: &mut Batch, chain: &ChainHandle) -> Result<(Block, u64, u64)> {
    let block = batch.locate(chain, 0)?.context("commitment is not in any block yet")?;
    let (_, height) = batch.confirmed_at().expect("located batch is confirmed");
    Ok((block, height, chain.tip_height()?))
}

fn prove(ctx: &Ctx, a: Prove) -> Result<Outcome> {
    let mut batch = load_batch(&a.batch)?;
    let chain = ChainHandle::open(&a.chain)?;
    let (block, height, tip) = confirmed_block(&mut batch, &chain)?;
    save_batch(&a.batch, &batch)?;
    if a.all {
        let depth = tip - height;
        if depth < a.confirmations {
            return Err(AuthorityError::NotYetConfirmed { depth, required: a.confirmations }.into());
        }
        let proofs = batch.prove_all(&block, Execution::default())?;
        for (i, p) in proofs.iter().enumerate() {
            write_file(&a.out.join(format!("{i}.proof")), p.to_bytes())?;
        }
        emit(
            ctx.json,
            json!({ "proofs": proofs.len(), "dir": a.out }),
            format!("wrote {} proofs to {}", proofs.len(), a.out.display()),
        );
        return Ok(Outcome::Ok);
    }
    let index = match (a.index, a.digest) {
        (Some(i), _) => i,
        (None, Some(d)) => batch.index_of(&d).with_context(|| format!("{d} is not in the batch"))?,
        (None, None) => unreachable!("clap requires one of --digest, --index, --all"),
    };
    let proof = batch.prove_confirmed(&block, height, tip, index, a.confirmations)?;
    let bytes = proof.to_bytes();
    write_file(&a.out, &bytes)?;
    emit(
        ctx.json,
        json!({ "index": index, "digest": batch.entries()[index].digest.to_hex(), "bytes": bytes.len(), "height": height }),
        format!("proof for statement {index} ({} bytes) at height {height}", bytes.len()),
    );
    Ok(Outcome::Ok)
}

fn manifest(ctx: &Ctx, a: Manifest) -> Result<Outcome> {
    let mut batch = load_batch(&a.batch)?;
    let (disclosure, depth) = match a.delay_until_confirmations {
        None => (Disclosure::Immediate, 0),
        Some(k) => {
            let location = a.chain.as_deref().context("--delay-until-confirmations needs --chain")?;
            let chain = ChainHandle::open(location)?;
            let depth = match batch.locate(&chain, 0)? {
                Some(_) => chain.tip_height()? - batch.confirmed_at().expect("located").1,
                None => 0,
            };
            save_batch(&a.batch, &batch)?;
            (Disclosure::AfterConfirmations(k), depth)
        }
    };
    match write_manifest(&batch, &a.out_dir, disclosure, depth)? {
        Some(path) => emit(ctx.json, json!({ "written": path }), format!("wrote {}", path.display())),
        None => emit(
            ctx.json,
            json!({ "written": null, "depth": depth }),
            format!("held back: commitment is {depth} blocks deep"),
        ),
    }
    Ok(Outcome::Ok)
}
