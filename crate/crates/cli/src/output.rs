//! Versioned JSON documents, score tables and curve files.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use oodeval::metrics::CurvePoint;
use oodeval::tensorio::format_sig9;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level fields shared by every JSON output.
pub fn envelope(command: &str, no_timestamp: bool) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("version".into(), SCHEMA_VERSION.into());
    m.insert("command".into(), command.into());
    if !no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        m.insert("timestamp".into(), secs.into());
    }
    m
}

/// Adds every field of `value` (which must serialize to an object).
pub fn extend(doc: &mut Map<String, Value>, value: &impl Serialize) -> anyhow::Result<()> {
    match serde_json::to_value(value)? {
        Value::Object(fields) => doc.extend(fields),
        other => anyhow::bail!("expected a JSON object, got {other}"),
    }
    Ok(())
}

pub fn write_json(path: &Path, doc: &Map<String, Value>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_curve(path: &Path, header: [&str; 3], points: &[CurvePoint]) -> anyhow::Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for p in points {
        let t = if p.threshold.is_finite() { format_sig9(p.threshold) } else { "inf".into() };
        text.push_str(&format!("{t},{},{}\n", format_sig9(p.x), format_sig9(p.y)));
    }
    write_file(path, text.as_bytes())
}
