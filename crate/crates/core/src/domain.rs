//! Study records and the effect-size / standard-error / z-score algebra.
//!
//! A study of `N` binary trials with `κ` equally likely alternatives and an
//! observed hit proportion `P` is mapped to an effect size
//!
//! ```text
//! π = P(κ−1) / (1 + P(κ−2))
//! ```
//!
//! so that the chance rate `1/κ` always lands on `π = 0.5`. The standard
//! error used throughout is `π(1−π) / √(N·P(1−P))`, which collapses to the
//! binomial `√(P(1−P)/N)` when `κ = 2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Treatment,
    Control,
    Calibration,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Treatment => "treatment",
            Condition::Control => "control",
            Condition::Calibration => "calibration",
        })
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "treatment" => Ok(Condition::Treatment),
            "control" => Ok(Condition::Control),
            "calibration" => Ok(Condition::Calibration),
            other => Err(format!(
                "unknown condition `{other}` (expected treatment, control or calibration)"
            )),
        }
    }
}

/// One experiment's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    /// Number of binary trials `N`.
    pub n_bits: u64,
    /// Raw hit proportion.
    pub p_obs: f64,
    /// Number of alternative choices per trial.
    pub kappa: u32,
    pub condition: Condition,
    pub pub_year: i32,
    pub pub_month: Option<u8>,
}

impl StudyRecord {
    /// A binary (`κ = 2`) treatment study with no publication date.
    pub fn binary(study_id: impl Into<String>, n_bits: u64, p_obs: f64) -> Result<Self> {
        let rec = StudyRecord {
            study_id: study_id.into(),
            n_bits,
            p_obs,
            kappa: 2,
            condition: Condition::Treatment,
            pub_year: 0,
            pub_month: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bits < 1 {
            return Err(Error::arg(
                "n_bits",
                self.n_bits as f64,
                "must be at least 1",
            ));
        }
        check_proportion("p_obs", self.p_obs)?;
        if self.kappa < 2 {
            return Err(Error::arg("kappa", self.kappa as f64, "must be at least 2"));
        }
        if let Some(m) = self.pub_month {
            if !(1..=12).contains(&m) {
                return Err(Error::arg("pub_month", m as f64, "must be in 1..=12"));
            }
        }
        Ok(())
    }

    /// Effect size π of this record.
    pub fn pi(&self) -> f64 {
        effect_size(self.p_obs, self.kappa).expect("validated record")
    }

    /// π, its standard error and z-score. Fails when the record sits at
    /// `p_obs ∈ {0, 1}`, where the standard error is undefined.
    pub fn effect(&self) -> Result<EffectSummary> {
        let pi = self.pi();
        let se = standard_error(pi, self.p_obs, self.n_bits)?;
        Ok(EffectSummary {
            pi,
            se,
            z: z_score(pi, se)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub pi: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatabaseSummary {
    pub count: usize,
    /// Unweighted mean effect size.
    pub mean_pi: f64,
    /// Standard error of `mean_pi` (sample standard deviation / √count).
    pub mean_se: f64,
    /// Large-study convergence value, when enough large studies exist.
    pub wp_estimate: Option<f64>,
    /// Size-weighted mean effect size, reported alongside the unweighted one.
    pub weighted_mean_pi: f64,
}

/// Result of combining two database summaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedSummary {
    /// `mean_pi` is the plain average of the two input means; `count` and
    /// `mean_se` describe the pooled population.
    pub combined: DatabaseSummary,
    /// Count-weighted mean of the two input means.
    pub pooled_mean_pi: f64,
}

fn check_proportion(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::arg(name, p, "must lie in [0, 1]"))
    }
}

pub fn effect_size(p_obs: f64, kappa: u32) -> Result<f64> {
    check_proportion("p_obs", p_obs)?;
    if kappa < 2 {
        return Err(Error::arg("kappa", kappa as f64, "must be at least 2"));
    }
    if kappa == 2 {
        return Ok(p_obs);
    }
    let k = kappa as f64;
    Ok(p_obs * (k - 1.0) / (1.0 + p_obs * (k - 2.0)))
}

/// Inverse of [`effect_size`]: the hit proportion producing `pi`.
pub fn p_obs_from_pi(pi: f64, kappa: u32) -> Result<f64> {
    check_proportion("pi", pi)?;
    if kappa < 2 {
        return Err(Error::arg("kappa", kappa as f64, "must be at least 2"));
    }
    let k = kappa as f64;
    Ok(pi / (k - 1.0 - pi * (k - 2.0)))
}

pub fn standard_error(pi: f64, p_obs: f64, n_bits: u64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::arg(
            "pi",
            pi,
            "standard error undefined outside (0, 1)",
        ));
    }
    if !(p_obs > 0.0 && p_obs < 1.0) {
        return Err(Error::arg(
            "p_obs",
            p_obs,
            "standard error undefined outside (0, 1)",
        ));
    }
    if n_bits < 1 {
        return Err(Error::arg("n_bits", 0.0, "must be at least 1"));
    }
    Ok(pi * (1.0 - pi) / (n_bits as f64 * p_obs * (1.0 - p_obs)).sqrt())
}

pub fn z_score(pi: f64, se: f64) -> Result<f64> {
    if !(se > 0.0) {
        return Err(Error::arg("se", se, "must be positive"));
    }
    Ok((pi - 0.5) / se)
}

/// The π whose z-score is `z` for a study of `n_bits` trials, with the
/// standard error evaluated at hit proportion `p_obs_assumed`.
///
/// With `a = z / √(N·P(1−P))` the defining relation is the quadratic
/// `a·π² + (1−a)·π − ½ = 0`; its root in (0, 1) is written in the
/// cancellation-free form `1 / (1 − a + √(1+a²))`.
pub fn pi_from_z(z: f64, n_bits: u64, p_obs_assumed: f64) -> Result<f64> {
    if n_bits < 1 {
        return Err(Error::arg("n_bits", 0.0, "must be at least 1"));
    }
    if !(p_obs_assumed > 0.0 && p_obs_assumed < 1.0) {
        return Err(Error::arg(
            "p_obs_assumed",
            p_obs_assumed,
            "must lie in (0, 1)",
        ));
    }
    if !z.is_finite() {
        return Err(Error::arg("z", z, "must be finite"));
    }
    let a = z / (n_bits as f64 * p_obs_assumed * (1.0 - p_obs_assumed)).sqrt();
    let pi = 1.0 / (1.0 - a + a.hypot(1.0));
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::arg(
            "z",
            z,
            "implied effect size falls outside (0, 1)",
        ));
    }
    Ok(pi)
}

pub fn summarize(records: &[StudyRecord]) -> Result<DatabaseSummary> {
    if records.is_empty() {
        return Err(Error::Empty("summarize needs at least one record"));
    }
    let pis: Vec<f64> = records.iter().map(StudyRecord::pi).collect();
    let count = pis.len();
    let mean_pi = pis.iter().sum::<f64>() / count as f64;
    let mean_se = if count > 1 {
        let var = pis.iter().map(|p| (p - mean_pi).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        records[0].effect()?.se
    };
    let total_bits: f64 = records.iter().map(|r| r.n_bits as f64).sum();
    let weighted_mean_pi = records
        .iter()
        .zip(&pis)
        .map(|(r, p)| r.n_bits as f64 * p)
        .sum::<f64>()
        / total_bits;
    let wp_estimate = crate::funnel::wp_estimate(records, crate::funnel::DEFAULT_LARGE_N_QUANTILE)
        .ok()
        .map(|w| w.wp);
    Ok(DatabaseSummary {
        count,
        mean_pi,
        mean_se,
        wp_estimate,
        weighted_mean_pi,
    })
}

/// Combine two databases. The combined mean follows the simple two-mean
/// average; the standard error treats both as samples of one population,
/// so the between-database spread enters the pooled variance.
pub fn merge_and_average(a: &DatabaseSummary, b: &DatabaseSummary) -> Result<MergedSummary> {
    if a.count == 0 || b.count == 0 {
        return Err(Error::Empty(
            "merge_and_average needs two non-empty summaries",
        ));
    }
    let (na, nb) = (a.count as f64, b.count as f64);
    let n = na + nb;
    let var_a = a.mean_se.powi(2) * na;
    let var_b = b.mean_se.powi(2) * nb;
    let ss =
        (na - 1.0) * var_a + (nb - 1.0) * var_b + na * nb / n * (a.mean_pi - b.mean_pi).powi(2);
    let pooled_var = ss / (n - 1.0);
    let pooled_mean_pi = (na * a.mean_pi + nb * b.mean_pi) / n;
    let wp_estimate = match (a.wp_estimate, b.wp_estimate) {
        (Some(x), Some(y)) => Some((x + y) / 2.0),
        (x, y) => x.or(y),
    };
    Ok(MergedSummary {
        combined: DatabaseSummary {
            count: a.count + b.count,
            mean_pi: (a.mean_pi + b.mean_pi) / 2.0,
            mean_se: (pooled_var / n).sqrt(),
            wp_estimate,
            weighted_mean_pi: (na * a.weighted_mean_pi + nb * b.weighted_mean_pi) / n,
        },
        pooled_mean_pi,
    })
}
