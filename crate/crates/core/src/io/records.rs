//! Study-record CSV.
//!
//! Columns, matched by header name in any order:
//!
//! | column      | required | content                                     |
//! |-------------|----------|---------------------------------------------|
//! | `study_id`  | yes      | unique identifier                           |
//! | `condition` | yes      | `treatment`, `control` or `calibration`     |
//! | `pub_year`  | yes      | integer year                                |
//! | `pub_month` | no       | 1–12, or empty                              |
//! | `n_bits`    | yes      | trials per study, ≥ 1                       |
//! | `kappa`     | no       | alternatives per trial, ≥ 2 (default 2)     |
//! | `p_obs`     | one of   | raw hit proportion                          |
//! | `pi`        | one of   | effect size                                 |
//! | `z`         | one of   | z-score                                     |
//!
//! Exactly one of `p_obs`, `pi`, `z` must be non-empty in each row. A
//! z-score is converted with the chance-level hit proportion in its
//! standard error. A decimal comma inside a quoted field is accepted.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{self, Condition, StudyRecord};
use crate::error::{Error, Result, RowError};

use super::{fmt_num, Precision};

/// Column order used when writing.
pub const RECORD_COLUMNS: [&str; 7] = [
    "study_id",
    "condition",
    "pub_year",
    "pub_month",
    "n_bits",
    "kappa",
    "p_obs",
];

struct Columns {
    study_id: usize,
    condition: usize,
    pub_year: usize,
    pub_month: Option<usize>,
    n_bits: usize,
    kappa: Option<usize>,
    outcomes: Vec<(Outcome, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    PObs,
    Pi,
    Z,
}

impl Outcome {
    fn name(self) -> &'static str {
        match self {
            Outcome::PObs => "p_obs",
            Outcome::Pi => "pi",
            Outcome::Z => "z",
        }
    }
}

fn locate(headers: &csv::StringRecord) -> Result<Columns> {
    let index: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            (
                h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase(),
                i,
            )
        })
        .collect();
    let mut missing = Vec::new();
    let mut need = |name: &str| -> usize {
        index.get(name).copied().unwrap_or_else(|| {
            missing.push(RowError {
                row: 1,
                column: name.to_string(),
                message: "required column missing from header".into(),
            });
            0
        })
    };
    let study_id = need("study_id");
    let condition = need("condition");
    let pub_year = need("pub_year");
    let n_bits = need("n_bits");
    let outcomes: Vec<(Outcome, usize)> = [Outcome::PObs, Outcome::Pi, Outcome::Z]
        .into_iter()
        .filter_map(|o| index.get(o.name()).map(|&i| (o, i)))
        .collect();
    if outcomes.is_empty() {
        missing.push(RowError {
            row: 1,
            column: "p_obs|pi|z".into(),
            message: "no outcome column in header".into(),
        });
    }
    if !missing.is_empty() {
        return Err(Error::Rows(missing));
    }
    Ok(Columns {
        study_id,
        condition,
        pub_year,
        pub_month: index.get("pub_month").copied(),
        n_bits,
        kappa: index.get("kappa").copied(),
        outcomes,
    })
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().replace(',', ".");
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite number"))
}

fn parse_int<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim()
        .parse::<T>()
        .map_err(|_| format!("`{s}` is not a valid integer"))
}

/// Parse one data row; on failure every bad field of the row is reported.
fn parse_row(
    rec: &csv::StringRecord,
    cols: &Columns,
    row: usize,
) -> std::result::Result<StudyRecord, Vec<RowError>> {
    let mut errs = Vec::new();
    let field = |i: usize| rec.get(i).unwrap_or("");
    let mut fail = |column: &str, message: String| {
        errs.push(RowError {
            row,
            column: column.to_string(),
            message,
        })
    };

    let study_id = field(cols.study_id).trim().to_string();
    if study_id.is_empty() {
        fail("study_id", "empty identifier".into());
    }
    let condition = field(cols.condition)
        .parse::<Condition>()
        .map_err(|m| fail("condition", m))
        .ok();
    let pub_year = parse_int::<i32>(field(cols.pub_year))
        .map_err(|m| fail("pub_year", m))
        .ok();
    let pub_month = match cols.pub_month.map(field).map(str::trim) {
        None | Some("") => Some(None),
        Some(s) => match parse_int::<u8>(s) {
            Ok(m) if (1..=12).contains(&m) => Some(Some(m)),
            Ok(m) => {
                fail("pub_month", format!("{m} is not a month (1-12)"));
                None
            }
            Err(m) => {
                fail("pub_month", m);
                None
            }
        },
    };
    let n_bits = match parse_int::<u64>(field(cols.n_bits)) {
        Ok(0) => {
            fail("n_bits", "must be at least 1".into());
            None
        }
        Ok(n) => Some(n),
        Err(m) => {
            fail("n_bits", m);
            None
        }
    };
    let kappa = match cols.kappa.map(field).map(str::trim) {
        None | Some("") => Some(2),
        Some(s) => match parse_int::<u32>(s) {
            Ok(k) if k >= 2 => Some(k),
            Ok(k) => {
                fail("kappa", format!("{k} is below 2"));
                None
            }
            Err(m) => {
                fail("kappa", m);
                None
            }
        },
    };

    let filled: Vec<(Outcome, &str)> = cols
        .outcomes
        .iter()
        .map(|&(o, i)| (o, field(i).trim()))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let outcome = match filled.as_slice() {
        [one] => Some(*one),
        [] => {
            fail("p_obs|pi|z", "no outcome value in row".into());
            None
        }
        many => {
            let names: Vec<&str> = many.iter().map(|(o, _)| o.name()).collect();
            fail(
                &names.join("|"),
                format!(
                    "conflicting outcome columns {}: exactly one may be set",
                    names.join(", ")
                ),
            );
            None
        }
    };

    let p_obs = match (outcome, n_bits, kappa) {
        (Some((kind, raw)), Some(n), Some(k)) => {
            let converted = parse_f64(raw).and_then(|v| {
                let r = match kind {
                    Outcome::PObs => Ok(v),
                    Outcome::Pi => domain::p_obs_from_pi(v, k),
                    Outcome::Z => {
                        domain::pi_from_z(v, n, 0.5).and_then(|pi| domain::p_obs_from_pi(pi, k))
                    }
                };
                r.map_err(|e| e.to_string())
            });
            match converted {
                Ok(p) if (0.0..=1.0).contains(&p) => Some(p),
                Ok(p) => {
                    fail(kind.name(), format!("{p} is outside [0, 1]"));
                    None
                }
                Err(m) => {
                    fail(kind.name(), m);
                    None
                }
            }
        }
        _ => None,
    };

    match (condition, pub_year, pub_month, n_bits, kappa, p_obs) {
        (
            Some(condition),
            Some(pub_year),
            Some(pub_month),
            Some(n_bits),
            Some(kappa),
            Some(p_obs),
        ) if errs.is_empty() => Ok(StudyRecord {
            study_id,
            n_bits,
            p_obs,
            kappa,
            condition,
            pub_year,
            pub_month,
        }),
        _ => Err(errs),
    }
}

/// Parse a study-record CSV. All malformed fields are collected and
/// reported together with their line numbers.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<StudyRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Empty("no header row"));
    }
    let cols = locate(&headers)?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        match parse_row(&rec, &cols, row) {
            Ok(r) => {
                if let Some(&first) = seen.get(&r.study_id) {
                    errors.push(RowError {
                        row,
                        column: "study_id".into(),
                        message: format!(
                            "duplicate study_id `{}` (first seen at row {first})",
                            r.study_id
                        ),
                    });
                } else {
                    seen.insert(r.study_id.clone(), row);
                    out.push(r);
                }
            }
            Err(mut e) => errors.append(&mut e),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    if out.is_empty() {
        return Err(Error::Empty("no data rows"));
    }
    Ok(out)
}

pub fn read_records_path(path: &Path) -> Result<Vec<StudyRecord>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_records(file)
}

/// Write records in [`RECORD_COLUMNS`] order. Use [`Precision::Full`] when
/// the file must read back to identical records.
pub fn write_records<W: Write>(
    records: &[StudyRecord],
    sink: W,
    precision: Precision,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.study_id.clone(),
            r.condition.to_string(),
            r.pub_year.to_string(),
            r.pub_month.map(|m| m.to_string()).unwrap_or_default(),
            r.n_bits.to_string(),
            r.kappa.to_string(),
            fmt_num(r.p_obs, precision),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Vec<StudyRecord>> {
        read_records(s.as_bytes())
    }

    const HEADER: &str = "study_id,condition,pub_year,pub_month,n_bits,kappa,p_obs,pi,z\n";

    #[test]
    fn binary_passthrough() {
        let r = read(&format!("{HEADER}a,treatment,1990,3,10000,2,0.52,,\n")).unwrap();
        assert_eq!(r[0].pi(), 0.52);
        assert_eq!(r[0].pub_month, Some(3));
    }

    #[test]
    fn z_column_converts() {
        let r = read(&format!("{HEADER}a,control,1990,,10000,2,,,2.0\n")).unwrap();
        assert!((r[0].pi() - 0.51).abs() < 1e-5);
        assert_eq!(r[0].pub_month, None);
        assert_eq!(r[0].condition, Condition::Control);
    }

    #[test]
    fn pi_column_with_kappa() {
        let r = read(&format!("{HEADER}a,treatment,1990,,100,4,,0.5,\n")).unwrap();
        assert!((r[0].p_obs - 0.25).abs() < 1e-15);
        assert!((r[0].pi() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conflicting_outcomes_rejected() {
        let err = read(&format!("{HEADER}a,treatment,1990,,100,2,0.5,,1.0\n")).unwrap_err();
        match err {
            Error::Rows(rows) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].row, 2);
                assert_eq!(rows[0].column, "p_obs|z");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_bad_field_is_reported() {
        let csv = format!(
            "{HEADER}a,treatment,1990,,100,2,0.5,,\nb,sham,19x0,13,0,1,,,\nc,control,1991,,10,2,1.5,,\n"
        );
        let Err(Error::Rows(rows)) = read(&csv) else {
            panic!("expected row errors")
        };
        let cols: Vec<(usize, &str)> = rows.iter().map(|e| (e.row, e.column.as_str())).collect();
        assert_eq!(
            cols,
            [
                (3, "condition"),
                (3, "pub_year"),
                (3, "pub_month"),
                (3, "n_bits"),
                (3, "kappa"),
                (3, "p_obs|pi|z"),
                (4, "p_obs"),
            ]
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let csv = format!("{HEADER}a,treatment,1990,,100,2,0.5,,\na,treatment,1991,,100,2,0.5,,\n");
        let Err(Error::Rows(rows)) = read(&csv) else {
            panic!("expected row errors")
        };
        assert_eq!(rows[0].row, 3);
        assert!(rows[0].message.contains("duplicate"));
    }

    #[test]
    fn empty_and_headerless_inputs() {
        assert!(matches!(read(""), Err(Error::Empty(_))));
        assert!(matches!(read(HEADER), Err(Error::Empty(_))));
        assert!(matches!(read("study_id,n_bits\n"), Err(Error::Rows(_))));
    }

    #[test]
    fn decimal_comma_and_column_order() {
        let csv = "p_obs,n_bits,study_id,pub_year,condition\n\"0,52\",100,x,2001,Treatment\n";
        let r = read(csv).unwrap();
        assert_eq!(r[0].p_obs, 0.52);
        assert_eq!(r[0].kappa, 2);
    }

    #[test]
    fn writes_documented_header() {
        let recs = vec![StudyRecord::binary("a", 10, 0.3).unwrap()];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf, Precision::Full).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "study_id,condition,pub_year,pub_month,n_bits,kappa,p_obs\na,treatment,0,,10,2,0.3\n"
        );
        assert_eq!(read(&s).unwrap(), recs);
    }
}
