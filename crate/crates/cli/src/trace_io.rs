//! Trace files: `user,item,timestamp` CSV and MovieLens `.dat` ratings.
//!
//! Raw traces have their items remapped to dense ids in first-appearance
//! order and are stably sorted by timestamp. Canonical traces, written by
//! [`write_canonical`] and marked by a leading `# N=<n> T=<t>` line, already
//! hold dense ids in block order and are read back verbatim.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use cache_regret_core::trace::TraceEvent;
use cache_regret_core::{FileId, RequestBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    MovielensDat,
}

impl FromStr for TraceFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "movielens_dat" => Ok(TraceFormat::MovielensDat),
            other => bail!("unknown trace format `{other}` (expected csv or movielens_dat)"),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::Csv => "csv",
            TraceFormat::MovielensDat => "movielens_dat",
        })
    }
}

/// Catalog-size and horizon metadata of a canonical trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanonicalMeta {
    pub n_files: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrace {
    pub n_files: usize,
    pub events: Vec<TraceEvent>,
    /// Original item label of every dense id.
    pub items: Vec<String>,
    pub canonical: Option<CanonicalMeta>,
}

pub fn load_trace(path: &Path, format: TraceFormat) -> Result<LoadedTrace> {
    let file = File::open(path).with_context(|| format!("cannot open trace {}", path.display()))?;
    parse_trace(BufReader::new(file), format).with_context(|| format!("in {}", path.display()))
}

fn parse_meta(line: &str) -> Option<CanonicalMeta> {
    let mut n = None;
    let mut t = None;
    for field in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = field.strip_prefix("N=") {
            n = v.parse().ok();
        } else if let Some(v) = field.strip_prefix("T=") {
            t = v.parse().ok();
        }
    }
    Some(CanonicalMeta {
        n_files: n?,
        horizon: t?,
    })
}

pub fn parse_trace(reader: impl BufRead, format: TraceFormat) -> Result<LoadedTrace> {
    let mut raw: Vec<(String, String, i64)> = Vec::new();
    let mut canonical = None;
    let mut header_seen = false;
    for (index, line) in reader.lines().enumerate() {
        let lineno = index + 1;
        let line = line.with_context(|| format!("line {lineno}: read failure"))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if raw.is_empty() && canonical.is_none() {
                canonical = parse_meta(line);
            }
            continue;
        }
        let record = match format {
            TraceFormat::Csv => {
                if !header_seen {
                    header_seen = true;
                    if line.trim() != "user,item,timestamp" {
                        bail!("line {lineno}: expected header `user,item,timestamp`, found `{line}`");
                    }
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.len() != 3 {
                    bail!("line {lineno}: expected 3 columns, found {}", cols.len());
                }
                (cols[0], cols[1], cols[2])
            }
            TraceFormat::MovielensDat => {
                let cols: Vec<&str> = line.split("::").map(str::trim).collect();
                if cols.len() != 4 {
                    bail!("line {lineno}: expected `user::item::rating::timestamp`, found `{line}`");
                }
                (cols[0], cols[1], cols[3])
            }
        };
        let (user, item, ts) = record;
        if user.is_empty() || item.is_empty() {
            bail!("line {lineno}: empty user or item field");
        }
        let ts: i64 = ts
            .parse()
            .map_err(|_| anyhow!("line {lineno}: timestamp `{ts}` is not an integer"))?;
        raw.push((user.to_string(), item.to_string(), ts));
    }
    if raw.is_empty() {
        bail!("trace holds no events");
    }

    if let Some(meta) = canonical {
        let mut events = Vec::with_capacity(raw.len());
        for (k, (user, item, timestamp)) in raw.into_iter().enumerate() {
            let file: FileId = item
                .parse()
                .ok()
                .filter(|&f: &FileId| (f as usize) < meta.n_files)
                .ok_or_else(|| anyhow!("event {}: item `{item}` is not an id below N={}", k + 1, meta.n_files))?;
            events.push(TraceEvent {
                timestamp,
                user_raw: user,
                file,
            });
        }
        return Ok(LoadedTrace {
            n_files: meta.n_files,
            events,
            items: (0..meta.n_files).map(|f| f.to_string()).collect(),
            canonical: Some(meta),
        });
    }

    let mut ids = std::collections::HashMap::new();
    let mut items = Vec::new();
    let mut events: Vec<TraceEvent> = raw
        .into_iter()
        .map(|(user, item, timestamp)| {
            let next = items.len() as FileId;
            let file = *ids.entry(item.clone()).or_insert_with(|| {
                items.push(item);
                next
            });
            TraceEvent {
                timestamp,
                user_raw: user,
                file,
            }
        })
        .collect();
    events.sort_by_key(|e| e.timestamp);
    Ok(LoadedTrace {
        n_files: items.len(),
        events,
        items,
        canonical: None,
    })
}

/// Writes one-hot `batches` as a canonical trace: the metadata line, the
/// CSV header, then each user's stream in turn with the slot as timestamp.
pub fn write_canonical(mut out: impl Write, batches: &[RequestBatch], n_files: usize) -> io::Result<()> {
    let n_users = batches.first().map_or(0, RequestBatch::n_users);
    writeln!(out, "# N={n_files} T={}", batches.len())?;
    writeln!(out, "user,item,timestamp")?;
    for user in 0..n_users {
        for (t, batch) in batches.iter().enumerate() {
            for &f in batch.user(user) {
                writeln!(out, "{user},{f},{}", t + 1)?;
            }
        }
    }
    out.flush()
}

pub fn export_trace(path: &Path, batches: &[RequestBatch], n_files: usize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_canonical(BufWriter::new(file), batches, n_files)
        .with_context(|| format!("writing {}", path.display()))
}
