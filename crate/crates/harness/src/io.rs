//! Results persistence: a fixed-schema CSV of one row per (cell, trial) and
//! helpers to read it back for resumption.
//!
//! Byte reproducibility is part of the contract: a row's text is a pure
//! function of the trial outcome (floats through Rust's shortest-roundtrip
//! `Display`), the wall-clock column is written as a constant 0, and files
//! are replaced atomically. Rows from an interrupted run — including a
//! truncated trailing line — parse back or are dropped for recomputation.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use crate::trial::TrialOutcome;

pub const CSV_HEADER: &str = "cell_id,trial,seed,n,N,L,d,kappa,delta,m,lambda,\
detection,false_positives,nontrivial,L_hat,clustering_error,r,mu,wall_ms";

const FIELDS: usize = 19;

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

pub fn record_to_line(out: &TrialOutcome) -> String {
    let c = &out.cell;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},0",
        c.id_hex(),
        out.trial,
        out.seed,
        c.n,
        c.total_points,
        c.num_subspaces,
        c.d,
        c.kappa,
        c.delta,
        c.m,
        c.lambda,
        opt(&out.detection),
        opt(&out.false_positives),
        opt(&out.nontrivial),
        opt(&out.num_clusters_estimate),
        opt(&out.clustering_error),
        opt(&out.r),
        opt(&out.mu),
    )
}

/// A persisted row: the verbatim line plus the fields resumption needs.
#[derive(Clone, Debug)]
pub struct ParsedRow {
    pub cell_id: u64,
    pub trial: usize,
    pub detection: Option<bool>,
    pub nontrivial: Option<bool>,
    pub clustering_error: Option<f64>,
    pub line: String,
}

fn parse_opt<T: std::str::FromStr>(field: &str) -> Result<Option<T>, ()> {
    if field.is_empty() {
        Ok(None)
    } else {
        field.parse::<T>().map(Some).map_err(|_| ())
    }
}

/// Parses one CSV line; `None` for the header, malformed rows, or lines cut
/// short by an interrupt.
pub fn parse_line(line: &str) -> Option<ParsedRow> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != FIELDS {
        return None;
    }
    if parts[0].len() != 16 {
        return None;
    }
    let cell_id = u64::from_str_radix(parts[0], 16).ok()?;
    let trial = parts[1].parse::<usize>().ok()?;
    // Config-echo fields and wall_ms must parse; a failure means truncation.
    parts[2].parse::<u64>().ok()?;
    for field in &parts[3..9] {
        field.parse::<f64>().ok()?;
    }
    parts[9].parse::<usize>().ok()?;
    parts[10].parse::<f64>().ok()?;
    parts[18].parse::<u64>().ok()?;
    let detection = parse_opt::<bool>(parts[11]).ok()?;
    parse_opt::<usize>(parts[12]).ok()?;
    let nontrivial = parse_opt::<bool>(parts[13]).ok()?;
    parse_opt::<usize>(parts[14]).ok()?;
    let clustering_error = parse_opt::<f64>(parts[15]).ok()?;
    parse_opt::<f64>(parts[16]).ok()?;
    parse_opt::<f64>(parts[17]).ok()?;
    Some(ParsedRow {
        cell_id,
        trial,
        detection,
        nontrivial,
        clustering_error,
        line: line.to_string(),
    })
}

/// Reads whatever valid rows an existing results file holds, keyed by
/// (cell id, trial). Missing file means an empty cache.
pub fn read_cache(path: &Path) -> io::Result<HashMap<(u64, usize), ParsedRow>> {
    let mut cache = HashMap::new();
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(cache),
        Err(e) => return Err(e),
    };
    for line in text.lines() {
        if let Some(row) = parse_line(line) {
            cache.insert((row.cell_id, row.trial), row);
        }
    }
    Ok(cache)
}

/// Write-then-rename so readers never observe a half-written file.
pub fn atomic_write(path: &Path, content: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)
}
