//! `contour`: one binary for every role.
//!
//! Exit codes: 0 success, 1 operational error, 2 a proof or data check was
//! rejected, 3 a proof was accepted but the header feed looks stale.

mod chain;
mod cmd;
mod config;
mod util;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "contour", version, about = "Binary transparency anchored to a Bitcoin-format chain")]
pub struct Cli {
    /// TOML file with `[shared]` and per-role defaults; flags override it.
    #[arg(long, global = true, value_name = "TOML")]
    config: Option<std::path::PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    role: Role,
}

#[derive(Subcommand, Debug)]
enum Role {
    /// Batch statements, commit roots and hand out proofs.
    #[command(subcommand)]
    Authority(cmd::authority::Command),
    /// Keep a header store and verify inclusion proofs.
    #[command(subcommand)]
    Auditor(cmd::auditor::Command),
    /// Scan the chain for commitments and check data availability.
    #[command(subcommand)]
    Monitor(cmd::monitor::Command),
    /// Mirror committed data and serve it over HTTP.
    #[command(subcommand)]
    Archivist(cmd::archivist::Command),
    /// Estimate mining costs of split-view and majority attacks.
    Cost(cmd::cost::Args),
    /// Run and drive the simulated chain.
    #[command(subcommand)]
    Sim(cmd::sim::Command),
    /// Turn Debian `Packages` indexes into statement batches.
    #[command(subcommand)]
    Debfeed(cmd::debfeed::Command),
}

/// What a successful command concluded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Reject,
    Stale,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::Reject => 2,
            Outcome::Stale => 3,
        }
    }
}

/// Options every command sees.
pub struct Ctx {
    pub json: bool,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let ctx = Ctx { json: cli.json };
    match cli.role {
        Role::Authority(c) => cmd::authority::run(&ctx, c),
        Role::Auditor(c) => cmd::auditor::run(&ctx, c),
        Role::Monitor(c) => cmd::monitor::run(&ctx, c),
        Role::Archivist(c) => cmd::archivist::run(&ctx, c),
        Role::Cost(a) => cmd::cost::run(&ctx, a),
        Role::Sim(c) => cmd::sim::run(&ctx, c),
        Role::Debfeed(c) => cmd::debfeed::run(&ctx, c),
    }
}

fn parse() -> Result<Cli, ExitCode> {
    let command = Cli::command();
    let argv = match config::merge(&command, std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Err(ExitCode::from(1));
        }
    };
    let matches = command.try_get_matches_from(argv).map_err(|e| {
        let _ = e.print();
        ExitCode::from(if e.use_stderr() { 1 } else { 0 })
    })?;
    Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(c) => c,
        Err(code) => return code,
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaves(cmd: &clap::Command, prefix: &str, out: &mut Vec<String>) {
        let subs: Vec<_> = cmd.get_subcommands().filter(|c| c.get_name() != "help").collect();
        if subs.is_empty() {
            out.push(prefix.trim().to_string());
        }
        for s in subs {
            leaves(s, &format!("{prefix} {}", s.get_name()), out);
        }
    }

    #[test]
    fn command_table() {
        Cli::command().debug_assert();
        let mut found = Vec::new();
        leaves(&Cli::command(), "", &mut found);
        found.sort();
        let mut expected = vec![
            "archivist serve",
            "auditor archcheck",
            "auditor sync",
            "auditor verify",
            "authority commit",
            "authority keygen",
            "authority manifest",
            "authority prove",
            "cost",
            "debfeed diff",
            "debfeed parse",
            "monitor report",
            "monitor scan",
            "sim fund",
            "sim init",
            "sim mine",
            "sim run split-view",
            "sim run withholding",
            "sim serve",
        ];
        expected.sort();
        assert_eq!(found, expected);
        for leaf in &found {
            let mut cmd = Cli::command();
            for part in leaf.split(' ') {
                cmd = cmd.find_subcommand(part).unwrap().clone();
            }
            assert!(cmd.get_about().is_some(), "{leaf} has no help text");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Outcome::Ok.code(), 0);
        assert_eq!(Outcome::Reject.code(), 2);
        assert_eq!(Outcome::Stale.code(), 3);
    }
}
