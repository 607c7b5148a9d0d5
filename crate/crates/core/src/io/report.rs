//! JSON and CSV serialization of reports.
//!
//! Every JSON document is an object whose first two keys are
//! `schema_version` and `kind`, followed by the report's own fields in
//! declaration order. Tables are written as CSV with a header row taken
//! from the row type's field names.

use std::fmt;
use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::Result;
use crate::funnel::{envelope_pi, FunnelDataset};

use super::{fmt_num, round_sig, Precision};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportKind {
    Theory,
    Summary,
    Coverage,
    Funnel,
    Hurst,
    Baseline,
    Bundle,
    Index,
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportKind::Theory => "theory",
            ReportKind::Summary => "summary",
            ReportKind::Coverage => "coverage",
            ReportKind::Funnel => "funnel",
            ReportKind::Hurst => "hurst",
            ReportKind::Baseline => "baseline",
            ReportKind::Bundle => "bundle",
            ReportKind::Index => "index",
        })
    }
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            Number::from_f64(round_sig(x, 6))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect())
        }
        other => other,
    }
}

/// Pretty-printed, newline-terminated JSON document for `report`.
pub fn write_json<T: Serialize>(
    kind: ReportKind,
    report: &T,
    precision: Precision,
) -> Result<String> {
    let mut body = serde_json::to_value(report)?;
    if precision == Precision::Sig6 {
        body = round_value(body);
    }
    let mut doc = Map::new();
    doc.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    doc.insert("kind".into(), Value::from(kind.to_string()));
    match body {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("data".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(doc))?;
    s.push('\n');
    Ok(s)
}

fn cell(v: &Value, precision: Precision) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => (*b as u8).to_string(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (_, Some(i)) => i.to_string(),
            _ => fmt_num(n.as_f64().unwrap_or(f64::NAN), precision),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Write flat rows as CSV. Booleans are written as `1`/`0`.
pub fn write_table<T: Serialize, W: Write>(
    rows: &[T],
    sink: W,
    precision: Precision,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header_written = false;
    for row in rows {
        let Value::Object(fields) = serde_json::to_value(row)? else {
            continue;
        };
        if !header_written {
            w.write_record(fields.keys())?;
            header_written = true;
        }
        w.write_record(fields.values().map(|v| cell(v, precision)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?)
}

/// `N,pi,condition,inside_flag` per record; the flag refers to the `V = 1`
/// envelope.
pub fn write_funnel_csv<W: Write>(
    data: &FunnelDataset,
    sink: W,
    precision: Precision,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["N", "pi", "condition", "inside_flag"])?;
    for (r, &inside) in data.records.iter().zip(&data.random_coverage.inside) {
        w.write_record([
            r.n_bits.to_string(),
            fmt_num(r.pi(), precision),
            r.condition.to_string(),
            (inside as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Both envelope pairs sampled at `points` log-spaced sizes.
pub fn write_envelopes_csv<W: Write>(
    data: &FunnelDataset,
    points: usize,
    sink: W,
    precision: Precision,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "N",
        "lower_random",
        "upper_random",
        "lower_fitted",
        "upper_fitted",
    ])?;
    for p in crate::funnel::envelope_polyline(&data.random_envelope, points) {
        let (lf, uf) = envelope_pi(&data.fitted_envelope, p.n);
        w.write_record([
            p.n.to_string(),
            fmt_num(p.lower, precision),
            fmt_num(p.upper, precision),
            fmt_num(lf, precision),
            fmt_num(uf, precision),
        ])?;
    }
    w.flush()?;
    Ok(())
}
