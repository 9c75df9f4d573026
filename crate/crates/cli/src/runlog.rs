//! Append-only CSV log with one row per invocation.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clap::{ArgMatches, Command};

pub const HEADER: [&str; 7] = ["subcommand", "flags", "seed", "start", "end", "status", "artifacts"];

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub subcommand: String,
    pub flags: String,
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub status: String,
    pub artifacts: Vec<PathBuf>,
}

/// Every flag of the invoked subcommand with its effective value, defaults
/// and propagated global flags included, as `--name=value` pairs.
pub fn effective_flags(definition: &Command, sub: &ArgMatches) -> String {
    let mut parts = Vec::new();
    for arg in definition.get_arguments() {
        let Some(long) = arg.get_long() else {
            continue;
        };
        let Ok(Some(raw)) = sub.try_get_raw(arg.get_id().as_str()) else {
            continue;
        };
        let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        parts.push(format!("--{long}={}", values.join(",")));
    }
    parts.join(" ")
}

pub fn append(path: &Path, record: &RunRecord) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("{}: cannot open run log", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(HEADER)?;
    }
    let artifacts: Vec<String> = record.artifacts.iter().map(|p| p.display().to_string()).collect();
    w.write_record([
        record.subcommand.clone(),
        record.flags.clone(),
        record.seed.to_string(),
        record.start.to_rfc3339(),
        record.end.to_rfc3339(),
        record.status.clone(),
        artifacts.join(";"),
    ])?;
    w.flush()
        .with_context(|| format!("{}: cannot write run log", path.display()))?;
    Ok(())
}
