//! `id,score` and `id,label` tables.

use std::fs::File;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IdValue<V> {
    pub id: String,
    pub value: V,
}

#[derive(Deserialize)]
struct ScoreRow {
    id: String,
    score: f64,
}

#[derive(Deserialize)]
struct LabelRow {
    id: String,
    label: u8,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {:?}", path.display(), other)),
    }
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<IdValue<f64>>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<ScoreRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if !row.score.is_finite() {
            return Err(Error::Validation(format!("non-finite score for id `{}`", row.id)));
        }
        out.push(IdValue {
            id: row.id,
            value: row.score,
        });
    }
    Ok(out)
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<IdValue<u8>>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if row.label > 1 {
            return Err(Error::Validation(format!(
                "label for id `{}` must be 0 or 1, got {}",
                row.id, row.label
            )));
        }
        out.push(IdValue {
            id: row.id,
            value: row.label,
        });
    }
    Ok(out)
}

pub fn write_scores_csv<'a, I>(path: impl AsRef<Path>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["id", "score"]).map_err(|e| csv_err(path, e))?;
    for (id, score) in rows {
        w.write_record([id, &format_sig9(score)])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros removed,
/// exponent notation outside `1e-4 <= |v| < 1e9`.
pub fn format_sig9(v: f64) -> String {
    const PREC: i32 = 9;
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PREC - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
