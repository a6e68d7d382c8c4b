//! TOML config merged under the command line.
//!
//! Keys in `[shared]` and in the table named after the role (`[auditor]`,
//! `[monitor]`, ...) become `--key value` flags, but only for flags the
//! chosen subcommand accepts and the user did not pass. Flags always win.
//!
//! ```toml
//! [shared]
//! authority-addr = "1BoatSLRHtKNngkdXEeobR76b53LETtpyT"
//! [auditor]
//! confirmations = 6
//! ```

use std::ffi::OsString;

use anyhow::{bail, Context, Result};
use clap::Command;

fn find_config(argv: &[OsString]) -> Result<Option<String>> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            let path = it.next().context("--config needs a path")?;
            return Ok(Some(path.to_string_lossy().into_owned()));
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Ok(Some(path.to_string()));
        }
    }
    Ok(None)
}

/// The subcommand chain selected by `argv`, e.g. `["auditor", "verify"]`.
fn selected<'a>(mut cmd: &'a Command, argv: &[OsString]) -> Vec<&'a Command> {
    let mut path = Vec::new();
    for arg in argv.iter().skip(1) {
        let s = arg.to_string_lossy();
        if s.starts_with('-') {
            continue;
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => {
                path.push(sub);
                cmd = sub;
            }
            None if path.is_empty() => continue,
            None => break,
        }
    }
    path
}

fn scalar(v: &toml::Value) -> Result<Vec<String>> {
    Ok(match v {
        toml::Value::String(s) => vec![s.clone()],
        toml::Value::Integer(i) => vec![i.to_string()],
        toml::Value::Float(f) => vec![f.to_string()],
        toml::Value::Boolean(b) => vec![b.to_string()],
        toml::Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>>>()?.concat(),
        other => bail!("unsupported config value {other}"),
    })
}

/// Return `argv` with config-file defaults appended.
pub fn merge(cmd: &Command, argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&argv)? else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing config {path}"))?;
    let chain = selected(cmd, &argv);
    let (Some(role), Some(leaf)) = (chain.first(), chain.last()) else { return Ok(argv) };
    let given: Vec<String> = argv
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();

    let mut out = argv.clone();
    for section in ["shared", role.get_name()] {
        let Some(toml::Value::Table(entries)) = table.get(section) else { continue };
        for (key, value) in entries {
            let Some(arg) = leaf.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
                continue;
            };
            if given.iter().any(|g| g == key) {
                continue;
            }
            let values = scalar(value)?;
            let is_switch = matches!(arg.get_action(), clap::ArgAction::SetTrue);
            if is_switch {
                if values == ["true"] {
                    out.push(format!("--{key}").into());
                }
                continue;
            }
            for v in values {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}
