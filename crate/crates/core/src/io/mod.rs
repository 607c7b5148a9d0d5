//! Reading and writing records, reports and charts.

mod records;
mod report;
pub mod svg;
mod synth;

pub use records::{read_records, read_records_path, write_records, RECORD_COLUMNS};
pub use report::{
    read_table, write_envelopes_csv, write_funnel_csv, write_json, write_table, ReportKind,
    SCHEMA_VERSION,
};
pub use synth::{synthesize, Censoring, SynthSpec};

use serde::{Deserialize, Serialize};

/// How floating-point values are written.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Six significant digits.
    #[default]
    Sig6,
    /// Shortest representation that parses back to the same `f64`.
    Full,
}

pub fn fmt_num(x: f64, precision: Precision) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    match precision {
        Precision::Full => format!("{x}"),
        Precision::Sig6 => format!("{}", round_sig(x, 6)),
    }
}

pub(crate) fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_num(0.509_997_960_3, Precision::Sig6), "0.509998");
        assert_eq!(fmt_num(1.0, Precision::Sig6), "1");
        assert_eq!(fmt_num(46_908.36, Precision::Sig6), "46908.4");
        assert_eq!(fmt_num(3.9e-6, Precision::Sig6), "0.0000039");
        assert_eq!(fmt_num(0.1 + 0.2, Precision::Full), "0.30000000000000004");
        assert_eq!(fmt_num(f64::NAN, Precision::Sig6), "NaN");
    }
}
