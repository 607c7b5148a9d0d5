//! Rescaled-range (R/S) analysis.
//!
//! A series is cut into non-overlapping windows of each size `n` in a
//! schedule; in every window the cumulative departure from the window mean
//! is formed, its range divided by the window standard deviation, and the
//! ratios averaged per size. The Hurst exponent is the OLS slope of
//! `log2(R/S)` against `log2(n)`.
//!
//! No small-sample correction is applied. Short i.i.d. series therefore
//! give exponents noticeably above 0.5 (about 0.58 at length 380), and
//! comparisons should be made against [`iid_baseline`] at the same length
//! rather than against 0.5.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::StudyRecord;
use crate::error::{Error, Result};
use crate::rng;

/// Publication-date key used to order study records into a series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderKey {
    pub year: i32,
    pub month: Option<u8>,
    pub id: String,
}

impl OrderKey {
    // undated months sort after every dated month of the same year
    fn sort_tuple(&self) -> (i32, u8, &str) {
        (self.year, self.month.unwrap_or(u8::MAX), &self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesSample {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering_key: Option<Vec<OrderKey>>,
}

impl SeriesSample {
    pub fn new(values: Vec<f64>) -> Self {
        SeriesSample {
            values,
            ordering_key: None,
        }
    }

    /// Effect sizes ordered by publication year, then month (undated last),
    /// then study id.
    pub fn from_records(records: &[StudyRecord]) -> Self {
        let mut keyed: Vec<(OrderKey, f64)> = records
            .iter()
            .map(|r| {
                (
                    OrderKey {
                        year: r.pub_year,
                        month: r.pub_month,
                        id: r.study_id.clone(),
                    },
                    r.pi(),
                )
            })
            .collect();
        keyed.sort_by(|a, b| a.0.sort_tuple().cmp(&b.0.sort_tuple()));
        let (keys, values) = keyed.into_iter().unzip();
        SeriesSample {
            values,
            ordering_key: Some(keys),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Divisor used for the standard deviation inside R/S.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdConvention {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n − 1`.
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSchedule {
    /// `min, 2·min, 4·min, …` up to half the series length.
    Doubling {
        min: usize,
    },
    Explicit(Vec<usize>),
}

impl Default for WindowSchedule {
    fn default() -> Self {
        WindowSchedule::Doubling { min: 8 }
    }
}

impl WindowSchedule {
    /// Window sizes usable on a series of `len` values.
    pub fn sizes(&self, len: usize) -> Vec<usize> {
        match self {
            WindowSchedule::Doubling { min } => {
                let mut out = Vec::new();
                let mut n = (*min).max(2);
                while n <= len / 2 {
                    out.push(n);
                    n *= 2;
                }
                out
            }
            WindowSchedule::Explicit(sizes) => {
                let mut out: Vec<usize> = sizes
                    .iter()
                    .copied()
                    .filter(|&n| n >= 2 && 2 * n <= len)
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            }
        }
    }

    fn smallest(&self) -> usize {
        match self {
            WindowSchedule::Doubling { min } => (*min).max(2),
            WindowSchedule::Explicit(sizes) => sizes.iter().copied().min().unwrap_or(2).max(2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HurstOptions {
    pub windows: WindowSchedule,
    pub sd: SdConvention,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsPoint {
    pub window_n: usize,
    pub rs_mean: f64,
    /// Windows averaged (zero-variance windows are excluded).
    pub windows_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstReport {
    pub h: f64,
    pub h_se: f64,
    pub c_h: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub length: usize,
    pub points: Vec<RsPoint>,
}

/// Cumulative departure from the mean, `X(t) = Σ_{i≤t} (x_i − x̄)`.
pub fn rescale(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            len: values.len(),
            need: 2,
        });
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x - mean;
            Some(*acc)
        })
        .collect())
}

pub fn rs_statistic(window: &[f64]) -> Result<f64> {
    rs_statistic_with(window, SdConvention::Population)
}

pub fn rs_statistic_with(window: &[f64], sd: SdConvention) -> Result<f64> {
    let x = rescale(window)?;
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let ss: f64 = window.iter().map(|v| (v - mean).powi(2)).sum();
    let divisor = match sd {
        SdConvention::Population => n,
        SdConvention::Sample => n - 1.0,
    };
    let s = (ss / divisor).sqrt();
    // relative cut-off: a constant window leaves only rounding noise
    let scale = window.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(s > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("zero-variance window"));
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok((hi - lo) / s)
}

/// Correlation between past and future increments, `2^(2H−1) − 1`.
pub fn c_h(h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::arg("h", h, "must lie in (0, 1)"));
    }
    Ok(c_h_unchecked(h))
}

fn c_h_unchecked(h: f64) -> f64 {
    (2.0 * h - 1.0).exp2() - 1.0
}

pub fn hurst(series: &SeriesSample, options: &HurstOptions) -> Result<HurstReport> {
    hurst_values(&series.values, options)
}

pub fn hurst_values(values: &[f64], options: &HurstOptions) -> Result<HurstReport> {
    let len = values.len();
    let sizes = options.windows.sizes(len);
    if sizes.len() < 3 {
        let need = options.windows.smallest() * 8;
        return Err(Error::TooShort { len, need });
    }
    let points: Vec<RsPoint> = sizes
        .iter()
        .filter_map(|&n| {
            let (sum, used) = values
                .chunks_exact(n)
                .filter_map(|w| rs_statistic_with(w, options.sd).ok())
                .fold((0.0, 0usize), |(s, c), rs| (s + rs, c + 1));
            (used > 0).then(|| RsPoint {
                window_n: n,
                rs_mean: sum / used as f64,
                windows_used: used,
            })
        })
        .filter(|p| p.rs_mean > 0.0)
        .collect();
    if points.len() < 3 {
        return Err(Error::Degenerate(
            "fewer than 3 window sizes with non-zero variance",
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.window_n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rs_mean.log2()).collect();
    let fit = ols(&xs, &ys);
    Ok(HurstReport {
        h: fit.slope,
        h_se: fit.slope_se,
        c_h: c_h_unchecked(fit.slope),
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        length: len,
        points,
    })
}

pub(crate) struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> LineFit {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_se = if xs.len() > 2 {
        (ssr / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        slope_se,
        r_squared,
    }
}

/// Mean and spread of Hurst exponents over a family of series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstBaseline {
    pub length: usize,
    pub mean_h: f64,
    /// Standard deviation of the individual exponents.
    pub sd_h: f64,
    /// Standard error of `mean_h`.
    pub se: f64,
    pub mean_c_h: f64,
    pub hs: Vec<f64>,
}

impl HurstBaseline {
    fn from_hs(length: usize, hs: Vec<f64>) -> Self {
        let k = hs.len() as f64;
        let mean_h = hs.iter().sum::<f64>() / k;
        let sd_h = if hs.len() > 1 {
            (hs.iter().map(|h| (h - mean_h).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let mean_c_h = hs.iter().map(|&h| c_h_unchecked(h)).sum::<f64>() / k;
        HurstBaseline {
            length,
            mean_h,
            sd_h,
            se: sd_h / k.sqrt(),
            mean_c_h,
            hs,
        }
    }
}

/// Hurst exponents of `n_shuffles` random permutations of the series.
/// Shuffle `i` is a Fisher–Yates pass driven by stream `seed + i`.
pub fn randomized_baseline(
    series: &SeriesSample,
    n_shuffles: usize,
    seed: u64,
    options: &HurstOptions,
) -> Result<HurstBaseline> {
    if n_shuffles < 2 {
        return Err(Error::arg(
            "n_shuffles",
            n_shuffles as f64,
            "must be at least 2",
        ));
    }
    // surface too-short / degenerate input once, before shuffling
    hurst(series, options)?;
    let hs = (0..n_shuffles as u64)
        .into_par_iter()
        .map(|i| {
            let mut values = series.values.clone();
            values.shuffle(&mut rng::derived(seed, i));
            hurst_values(&values, options).map(|r| r.h)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(HurstBaseline::from_hs(series.len(), hs))
}

/// Hurst exponents of `n_series` i.i.d. standard Gaussian series of the
/// given length; series `i` uses stream `seed + i`.
pub fn iid_baseline(
    length: usize,
    n_series: usize,
    seed: u64,
    options: &HurstOptions,
) -> Result<HurstBaseline> {
    if n_series < 1 {
        return Err(Error::arg("n_series", 0.0, "must be at least 1"));
    }
    let hs = (0..n_series as u64)
        .into_par_iter()
        .map(|i| hurst_values(&gaussian_noise(length, seed.wrapping_add(i)), options).map(|r| r.h))
        .collect::<Result<Vec<f64>>>()?;
    Ok(HurstBaseline::from_hs(length, hs))
}

/// [`iid_baseline`] at each length, for Hurst-versus-length curves.
pub fn baseline_curve(
    lengths: &[usize],
    n_series: usize,
    seed: u64,
    options: &HurstOptions,
) -> Result<Vec<HurstBaseline>> {
    lengths
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            iid_baseline(
                len,
                n_series,
                seed.wrapping_add((i * n_series) as u64),
                options,
            )
        })
        .collect()
}

pub fn gaussian_noise(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::seeded(seed);
    (0..length)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}
