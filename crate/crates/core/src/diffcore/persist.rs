//! Text persistence for parameter stores.
//!
//! Format (version 1):
//!
//! ```text
//! #magpose-params v1
//! param <name> <rows> <cols>
//! <rows*cols whitespace-separated values, row-major>
//! ...
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the identical float, so a store survives a save/load cycle bit-exactly.
//! Model files embed the same `param` blocks after a `[params]` marker.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kv::{self, KvDoc};
use crate::real::Real;

use super::params::ParamStore;

pub const PARAMS_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;
const PARAMS_MARKER: &str = "[params]";

fn write_blocks<T: Real>(store: &ParamStore<T>, out: &mut String) {
    for p in store.iter() {
        let (rows, cols) = p.shape();
        let _ = writeln!(out, "param {} {rows} {cols}", p.name());
        let line = p
            .value()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{line}");
    }
}

fn read_blocks<'a, T: Real>(lines: impl Iterator<Item = &'a str>) -> Result<ParamStore<T>> {
    let mut store = ParamStore::new();
    let mut lines = lines.filter(|l| !l.trim().is_empty());
    while let Some(head) = lines.next() {
        let parts: Vec<_> = head.split_whitespace().collect();
        let [tag, name, rows, cols] = parts[..] else {
            return Err(Error::Format(format!("bad param header: {head}")));
        };
        if tag != "param" {
            return Err(Error::Format(format!("expected param header, got {head}")));
        }
        let rows: usize = rows
            .parse()
            .map_err(|_| Error::Format(format!("bad rows in {head}")))?;
        let cols: usize = cols
            .parse()
            .map_err(|_| Error::Format(format!("bad cols in {head}")))?;
        let body = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing values for {name}")))?;
        let values = body
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|_| Error::Format(format!("bad value in {name}")))?;
        store.add(name, rows, cols, values)?;
    }
    Ok(store)
}

/// Serializes parameter values (optimizer state is not persisted).
pub fn write_params<T: Real>(store: &ParamStore<T>) -> String {
    let mut out = kv::header("params", PARAMS_VERSION);
    out.push('\n');
    write_blocks(store, &mut out);
    out
}

pub fn read_params<T: Real>(text: &str) -> Result<ParamStore<T>> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    kv::check_header(first, "params", PARAMS_VERSION)?;
    read_blocks(lines)
}

/// Model artifact: version line, `key = value` metadata, then parameters.
pub fn write_model<T: Real>(meta: &KvDoc, store: &ParamStore<T>) -> String {
    let mut out = kv::header("model", MODEL_VERSION);
    out.push('\n');
    out.push_str(&meta.render());
    out.push_str(PARAMS_MARKER);
    out.push('\n');
    write_blocks(store, &mut out);
    out
}

pub fn read_model<T: Real>(text: &str) -> Result<(KvDoc, ParamStore<T>)> {
    let first = text.lines().next().unwrap_or_default();
    kv::check_header(first, "model", MODEL_VERSION)?;
    let (head, body) = text
        .split_once(&format!("\n{PARAMS_MARKER}\n"))
        .ok_or_else(|| Error::Format("model file has no [params] section".into()))?;
    let meta = KvDoc::parse(head)?;
    let store = read_blocks(body.lines())?;
    Ok((meta, store))
}
