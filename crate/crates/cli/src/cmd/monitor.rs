use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use contour::btcwire::AuthorityAddress;
use contour::monitor::{check_all, fetch_verified_manifest, get_commits, open_source, report, Availability, Layout, Report};
use contour::Execution;
use serde_json::json;

use crate::util::{emit, open_feed, read_text, write_file};
use crate::{Ctx, Outcome};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List commitments by an authority and check their data is published.
    Scan(Scan),
    /// Find updates a client missed, from a saved scan report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LayoutArg {
    Authority,
    Archivist,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Authority => Layout::Authority,
            LayoutArg::Archivist => Layout::Archivist,
        }
    }
}

#[derive(Args, Debug)]
pub struct Scan {
    #[arg(long)]
    addr: AuthorityAddress,
    /// Block directory or `tcp://host:port`.
    #[arg(long)]
    blocks: String,
    /// Directory or `http(s)://` URL holding manifests and files.
    #[arg(long)]
    data_url: String,
    #[arg(long, value_enum, default_value = "authority")]
    layout: LayoutArg,
    #[arg(long, default_value_t = 0)]
    from: u64,
    /// Default: the current tip.
    #[arg(long)]
    to: Option<u64>,
    /// Save the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON written by `monitor scan --out`.
    #[arg(long)]
    report: PathBuf,
    /// `<package>:<h1>,<h2>,...`: heights at which a client saw updates.
    #[arg(long, required = true)]
    observed: Vec<String>,
}

pub fn run(ctx: &Ctx, cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Scan(a) => scan(ctx, a),
        Command::Report(a) => gaps(ctx, a),
    }
}

fn scan(ctx: &Ctx, a: Scan) -> Result<Outcome> {
    let feed = open_feed(&a.blocks)?;
    let to = match a.to {
        Some(t) => t,
        None => feed.tip_height()?,
    };
    let data = open_source(&a.data_url, a.layout.into());
    let records = get_commits(&*feed, &a.addr, a.from, to, Execution::default())?;
    let checked = check_all(&records, &*data, Execution::default());
    let mut manifests = BTreeMap::new();
    for r in checked.iter().filter(|r| r.availability == Some(Availability::Available)) {
        if let Ok(Some(entries)) = fetch_verified_manifest(&*data, &r.root) {
            manifests.insert(r.root, entries);
        }
    }
    let rep = report(&checked, &manifests);
    if let Some(out) = &a.out {
        write_file(out, serde_json::to_string_pretty(&rep)?)?;
    }
    emit(ctx.json, serde_json::to_value(&rep)?, rep.to_text());
    Ok(if rep.alerts.is_empty() { Outcome::Ok } else { Outcome::Reject })
}

fn parse_observed(s: &str) -> Result<(String, Vec<u64>)> {
    let (key, heights) = s.split_once(':').with_context(|| format!("expected <package>:<heights>, got {s:?}"))?;
    let heights = heights
        .split(',')
        .map(|h| h.trim().parse().with_context(|| format!("bad height {h:?}")))
        .collect::<Result<Vec<u64>>>()?;
    if heights.len() < 2 {
        bail!("{key}: need at least two observed heights");
    }
    Ok((key.to_string(), heights))
}

fn gaps(ctx: &Ctx, a: ReportArgs) -> Result<Outcome> {
    let rep: Report = serde_json::from_str(&read_text(&a.report)?).context("parsing report")?;
    let mut found = Vec::new();
    for spec in &a.observed {
        let (key, heights) = parse_observed(spec)?;
        if let Some(gap) = rep.gaps(&key, &heights) {
            found.push(gap);
        }
    }
    let text: String = if found.is_empty() {
        "no missed updates\n".into()
    } else {
        found
            .iter()
            .map(|g| format!("MISSED {} between {} and {}: {:?}\n", g.key, g.seen_before, g.seen_after, g.missed))
            .collect()
    };
    emit(ctx.json, json!({ "gaps": found }), text);
    Ok(if found.is_empty() { Outcome::Ok } else { Outcome::Reject })
}
