use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use contour::authority::render_manifest;
use contour::debfeed::{dedup_digests, diff_batches, parse_packages, PackageEntry};
use serde_json::json;

use crate::util::{emit, write_file};
use crate::{Ctx, Outcome};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One statement per package in a `Packages` file.
    Parse(Parse),
    /// Statements for packages new or changed since the previous index.
    Diff(Diff),
}

#[derive(Args, Debug)]
pub struct Parse {
    #[arg(long)]
    packages: PathBuf,
    /// Write a batch file for `authority commit --from-batch-file`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Diff {
    #[arg(long)]
    prev: PathBuf,
    #[arg(long)]
    cur: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Parse(a) => {
            let entries = read_packages(&a.packages)?;
            finish(ctx, &entries, a.out.as_deref())
        }
        Command::Diff(a) => {
            let prev = read_packages(&a.prev)?;
            let cur = read_packages(&a.cur)?;
            finish(ctx, &diff_batches(&prev, &cur), a.out.as_deref())
        }
    }
}

fn read_packages(path: &Path) -> Result<Vec<PackageEntry>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_packages(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn finish(ctx: &Ctx, entries: &[PackageEntry], out: Option<&Path>) -> Result<Outcome> {
    let unique = dedup_digests(entries);
    let batch: Vec<_> = unique.iter().map(PackageEntry::to_batch_entry).collect();
    if let Some(out) = out {
        write_file(out, render_manifest(&batch))?;
    }
    let text = if ctx.json || out.is_some() {
        format!("{} packages, {} statements", entries.len(), batch.len())
    } else {
        render_manifest(&batch)
    };
    emit(ctx.json, json!({ "packages": entries.len(), "statements": batch.len(), "entries": entries }), text);
    Ok(Outcome::Ok)
}
