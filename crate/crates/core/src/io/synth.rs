//! Synthetic study databases.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Condition, StudyRecord};
use crate::error::{Error, Result};
use crate::markov::{self, MarkovParams};
use crate::rng;

/// Drop small studies whose effect size falls in a band, modelling
/// selective non-reporting.
///
/// A record is dropped when `n_bits < n_below` and `lo < π < hi`. A band
/// edge at 0 or 1 is inclusive, so `{lo: 0, hi: 0.5}` removes every small
/// study below chance while keeping those exactly at 0.5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Censoring {
    pub lo: f64,
    pub hi: f64,
    pub n_below: u64,
}

impl Censoring {
    pub fn below(pivot: f64, n_below: u64) -> Self {
        Censoring {
            lo: 0.0,
            hi: pivot,
            n_below,
        }
    }

    pub fn above(pivot: f64, n_below: u64) -> Self {
        Censoring {
            lo: pivot,
            hi: 1.0,
            n_below,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lo) || !(0.0..=1.0).contains(&self.hi) || self.lo >= self.hi
        {
            return Err(Error::arg(
                "censoring band",
                self.lo,
                "must be a non-empty sub-interval of [0, 1]",
            ));
        }
        Ok(())
    }

    pub fn drops(&self, record: &StudyRecord) -> bool {
        if record.n_bits >= self.n_below {
            return false;
        }
        let pi = record.pi();
        let above_lo = pi > self.lo || (self.lo == 0.0 && pi == 0.0);
        let below_hi = pi < self.hi || (self.hi == 1.0 && pi == 1.0);
        above_lo && below_hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_studies: usize,
    /// Study sizes are drawn log-uniformly on `[n_min, n_max]`.
    pub n_min: u64,
    pub n_max: u64,
    pub markov_params: MarkovParams,
    #[serde(default)]
    pub censoring: Option<Censoring>,
    pub seed: u64,
    #[serde(default = "default_condition")]
    pub condition: Condition,
    /// Publication dates run monthly-evenly over `[first_year, last_year]`.
    #[serde(default = "default_first_year")]
    pub first_year: i32,
    #[serde(default = "default_last_year")]
    pub last_year: i32,
    #[serde(default = "default_prefix")]
    pub id_prefix: String,
}

fn default_condition() -> Condition {
    Condition::Treatment
}
fn default_first_year() -> i32 {
    1969
}
fn default_last_year() -> i32 {
    2004
}
fn default_prefix() -> String {
    "S".into()
}

impl SynthSpec {
    /// Sizes from 10² to 10⁶ bits, dated 1969–2004, no censoring.
    pub fn new(n_studies: usize, markov_params: MarkovParams, seed: u64) -> Self {
        SynthSpec {
            n_studies,
            n_min: 100,
            n_max: 1_000_000,
            markov_params,
            censoring: None,
            seed,
            condition: default_condition(),
            first_year: default_first_year(),
            last_year: default_last_year(),
            id_prefix: default_prefix(),
        }
    }

    pub fn with_censoring(mut self, censoring: Censoring) -> Self {
        self.censoring = Some(censoring);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_studies == 0 {
            return Err(Error::arg("n_studies", 0.0, "must be at least 1"));
        }
        if self.n_min < 1 || self.n_max < self.n_min {
            return Err(Error::arg(
                "n_min",
                self.n_min as f64,
                "size bounds must satisfy 1 <= n_min <= n_max",
            ));
        }
        if self.last_year < self.first_year {
            return Err(Error::arg(
                "last_year",
                self.last_year as f64,
                "must not precede first_year",
            ));
        }
        if let Some(c) = &self.censoring {
            c.validate()?;
        }
        MarkovParams::new(self.markov_params.p11, self.markov_params.p00)?;
        Ok(())
    }
}

/// Draw a database. Study `i` gets a log-uniform size from a shared size
/// stream and its bits from stream `base + 1 + i`, where `base` is the
/// scrambled seed. Censoring is applied after simulation, so the surviving
/// records are identical to those of the uncensored database.
pub fn synthesize(spec: &SynthSpec) -> Result<Vec<StudyRecord>> {
    spec.validate()?;
    let base = rng::scramble(spec.seed);
    let mut size_rng = rng::seeded(base);
    let (lo, hi) = ((spec.n_min as f64).ln(), (spec.n_max as f64).ln());
    let sizes: Vec<u64> = (0..spec.n_studies)
        .map(|_| {
            let u: f64 = size_rng.random();
            ((lo + u * (hi - lo)).exp().round() as u64).clamp(spec.n_min, spec.n_max)
        })
        .collect();
    let months = ((spec.last_year - spec.first_year + 1) * 12) as usize;
    let width = spec.n_studies.to_string().len().max(4);
    let records: Vec<StudyRecord> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let ones = markov::count_ones(&spec.markov_params, n, base.wrapping_add(1 + i as u64))
                .expect("validated");
            let t = i * months / spec.n_studies;
            StudyRecord {
                study_id: format!("{}{:0width$}", spec.id_prefix, i),
                n_bits: n,
                p_obs: ones as f64 / n as f64,
                kappa: 2,
                condition: spec.condition,
                pub_year: spec.first_year + (t / 12) as i32,
                pub_month: Some((t % 12) as u8 + 1),
            }
        })
        .collect();
    let kept: Vec<StudyRecord> = match &spec.censoring {
        Some(c) => records.into_iter().filter(|r| !c.drops(r)).collect(),
        None => records,
    };
    if kept.is_empty() {
        return Err(Error::AllCensored);
    }
    Ok(kept)
}
