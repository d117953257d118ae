//! Flat `key=value` config files. Each key names a long flag of the chosen
//! subcommand; flags given on the command line win.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;
use crate::CliError;

/// Parses config text into `(key, value)` pairs. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("config line {}: expected key=value, got {line:?}", number + 1)))?;
        let key = key.trim().trim_start_matches("--").to_owned();
        if key.is_empty() {
            return Err(CliError::Input(format!("config line {}: empty key", number + 1)));
        }
        pairs.push((key, value.trim().to_owned()));
    }
    Ok(pairs)
}

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut iter = argv.iter().skip(1);
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            return iter.next().cloned();
        }
        if let Some(path) = text.strip_prefix("--config=") {
            return Some(path.into());
        }
    }
    None
}

/// Returns `argv` with config-file flags inserted after the subcommand name,
/// skipping any key the command line already sets.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let pairs = parse_config(&text)?;

    let command = Cli::command();
    let Some((position, sub)) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| command.find_subcommand(a.to_string_lossy().as_ref()).map(|s| (i, s)))
    else {
        return Ok(argv);
    };
    let given: HashSet<String> = argv
        .iter()
        .filter_map(|a| a.to_str()?.strip_prefix("--"))
        .map(|flag| flag.split('=').next().unwrap_or(flag).to_owned())
        .collect();

    let mut injected = Vec::new();
    for (key, value) in pairs {
        if given.contains(&key) || key == "config" {
            continue;
        }
        let takes_value = sub
            .get_arguments()
            .chain(command.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .map(|a| a.get_action().takes_values());
        match takes_value {
            Some(true) => {
                // repeatable flags accept comma-separated lists in the file
                for item in value.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                    injected.push(OsString::from(format!("--{key}={item}")));
                    if key != "gamma" && key != "functional" {
                        break;
                    }
                }
            }
            Some(false) => match value.as_str() {
                "true" | "1" | "yes" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                other => {
                    return Err(CliError::Input(format!(
                        "config key {key}: expected true or false, got {other}"
                    )))
                }
            },
            None => {
                return Err(CliError::Input(format!(
                    "config key {key} is not a flag of this subcommand"
                )))
            }
        }
    }
    let mut merged = argv;
    merged.splice(position + 1..position + 1, injected);
    Ok(merged)
}
