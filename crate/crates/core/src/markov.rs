//! Two-state Markov bit sources.
//!
//! A source is fixed by its self-transition probabilities `p11` (stay at 1)
//! and `p00` (stay at 0). Its stationary proportion of ones, the variance
//! broadening of study means relative to a memoryless source, and the
//! geometric decay of bit correlations all have closed forms, collected in
//! [`MarkovTheory`].

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hurst::SeriesSample;
use crate::rng::{self, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovParams {
    pub p11: f64,
    pub p00: f64,
}

impl MarkovParams {
    pub fn new(p11: f64, p00: f64) -> Result<Self> {
        for (name, p) in [("p11", p11), ("p00", p00)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(name, p, "must lie in [0, 1]"));
            }
        }
        if p11 + p00 >= 2.0 {
            return Err(Error::AbsorbingChain(p11 + p00));
        }
        Ok(MarkovParams { p11, p00 })
    }

    /// Equal persistence for hits and misses.
    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    /// The memoryless fair source.
    pub fn fair() -> Self {
        MarkovParams { p11: 0.5, p00: 0.5 }
    }

    pub fn p10(&self) -> f64 {
        1.0 - self.p11
    }

    pub fn p01(&self) -> f64 {
        1.0 - self.p00
    }

    pub fn theory(&self) -> MarkovTheory {
        let s = self.p11 + self.p00;
        MarkovTheory {
            wp: (1.0 - self.p00) / (2.0 - s),
            v_factor: (s / (2.0 - s)).sqrt(),
            c1: s - 1.0,
        }
    }
}

/// Closed-form stationary statistics of a [`MarkovParams`] source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovTheory {
    /// Stationary proportion of ones.
    pub wp: f64,
    /// Broadening of the standard deviation of a study mean relative to a
    /// memoryless source with the same `wp`.
    pub v_factor: f64,
    /// Lag-1 correlation, `p11 + p00 − 1` (equal to `2p − 1` when symmetric).
    pub c1: f64,
}

impl MarkovTheory {
    /// Binomial standard deviation of a study mean of `n` bits, before
    /// broadening.
    pub fn sigma0(&self, n: u64) -> f64 {
        (self.wp * (1.0 - self.wp) / n as f64).sqrt()
    }
}

pub fn theory(params: &MarkovParams) -> Result<MarkovTheory> {
    // re-validate: the fields are public
    MarkovParams::new(params.p11, params.p00).map(|p| p.theory())
}

/// Symmetric self-transition probability producing variance factor `v`.
pub fn self_transition_from_v(v_factor: f64) -> Result<f64> {
    if !(v_factor > 0.0) || !v_factor.is_finite() {
        return Err(Error::arg("v_factor", v_factor, "must be positive"));
    }
    let v2 = v_factor * v_factor;
    Ok(v2 / (v2 + 1.0))
}

/// Correlation between bits `k` steps apart in a symmetric chain.
pub fn correlation_at_distance(p: f64, k: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg("p", p, "must lie in [0, 1]"));
    }
    if k < 1 {
        return Err(Error::arg("k", 0.0, "must be at least 1"));
    }
    Ok((2.0 * p - 1.0).powi(k as i32))
}

/// The chain's state machine over a seeded stream. One `u64` is consumed per
/// bit: the first decides the initial state against `wp`, each later one
/// decides whether to stay.
struct Walker {
    rng: SeededRng,
    stay1: u64,
    stay0: u64,
    state: bool,
}

impl Walker {
    fn new(params: &MarkovParams, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let wp = params.theory().wp;
        let state = rng.next_u64() < rng::threshold(wp);
        Walker {
            rng,
            stay1: rng::threshold(params.p11),
            stay0: rng::threshold(params.p00),
            state,
        }
    }

    #[inline]
    fn step(&mut self) {
        let stay = if self.state { self.stay1 } else { self.stay0 };
        if self.rng.next_u64() >= stay {
            self.state = !self.state;
        }
    }
}

/// A generated bit stream together with what produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct BitSequence {
    /// One entry per bit, each 0 or 1.
    pub bits: Vec<u8>,
    pub seed: u64,
    pub params: MarkovParams,
}

impl BitSequence {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.ones() as f64 / self.bits.len() as f64
    }

    /// Bits as `f64` values, for the series analyses.
    pub fn to_series(&self) -> SeriesSample {
        SeriesSample::new(self.bits.iter().map(|&b| b as f64).collect())
    }

    /// One `0`/`1` character per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.bits.len() * 2);
        for &b in &self.bits {
            s.push(if b == 1 { '1' } else { '0' });
            s.push('\n');
        }
        s
    }

    /// Eight bits per byte, first bit in the most significant position; the
    /// final byte is zero-padded.
    pub fn to_packed(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))
            })
            .collect()
    }

    /// Inverse of [`to_packed`](Self::to_packed) for a known bit count.
    pub fn unpack(bytes: &[u8], n_bits: usize) -> Vec<u8> {
        (0..n_bits)
            .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
            .collect()
    }
}

pub fn generate(params: &MarkovParams, n_bits: usize, seed: u64) -> Result<BitSequence> {
    let params = MarkovParams::new(params.p11, params.p00)?;
    if n_bits == 0 {
        return Err(Error::arg("n_bits", 0.0, "must be at least 1"));
    }
    let mut walker = Walker::new(&params, seed);
    let mut bits = Vec::with_capacity(n_bits);
    bits.push(walker.state as u8);
    for _ in 1..n_bits {
        walker.step();
        bits.push(walker.state as u8);
    }
    Ok(BitSequence { bits, seed, params })
}

/// Number of ones in the sequence [`generate`] would produce, without
/// storing it.
pub fn count_ones(params: &MarkovParams, n_bits: u64, seed: u64) -> Result<u64> {
    let params = MarkovParams::new(params.p11, params.p00)?;
    if n_bits == 0 {
        return Err(Error::arg("n_bits", 0.0, "must be at least 1"));
    }
    let mut walker = Walker::new(&params, seed);
    let mut ones = walker.state as u64;
    for _ in 1..n_bits {
        walker.step();
        ones += walker.state as u64;
    }
    Ok(ones)
}

fn check_lag(len: usize, k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::arg("k", 0.0, "lag must be at least 1"));
    }
    if len < k + 2 {
        return Err(Error::TooShort { len, need: k + 2 });
    }
    Ok(())
}

/// Lag-`k` Pearson correlation between `bits[..n−k]` and `bits[k..]`.
pub fn empirical_correlation(bits: &BitSequence, k: usize) -> Result<f64> {
    check_lag(bits.len(), k)?;
    let m = bits.len() - k;
    let (head, tail) = (&bits.bits[..m], &bits.bits[k..]);
    // integer sums keep this exact for 0/1 data
    let (mut sx, mut sy, mut sxy) = (0u64, 0u64, 0u64);
    for (&x, &y) in head.iter().zip(tail) {
        sx += x as u64;
        sy += y as u64;
        sxy += (x & y) as u64;
    }
    let m = m as f64;
    let (sx, sy, sxy) = (sx as f64, sy as f64, sxy as f64);
    let cov = sxy / m - (sx / m) * (sy / m);
    // for 0/1 data Σx² = Σx
    let vx = sx / m - (sx / m).powi(2);
    let vy = sy / m - (sy / m).powi(2);
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::Degenerate(
            "constant bit sequence has no correlation",
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Mean of `s_n · s_{n+k}` over the spin form `s = 2b − 1`. For a symmetric
/// stationary chain this also converges to `(2p−1)^k`.
pub fn product_correlation(bits: &BitSequence, k: usize) -> Result<f64> {
    check_lag(bits.len(), k)?;
    let m = bits.len() - k;
    let agree = bits.bits[..m]
        .iter()
        .zip(&bits.bits[k..])
        .filter(|(a, b)| a == b)
        .count();
    Ok((2.0 * agree as f64 - m as f64) / m as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunnelPoint {
    #[serde(rename = "N")]
    pub n: u64,
    pub replication: u32,
    pub proportion: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunnelAverage {
    #[serde(rename = "N")]
    pub n: u64,
    pub mean_proportion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunnelSimulation {
    pub params: MarkovParams,
    /// Every replication, ordered by size then replication.
    pub points: Vec<FunnelPoint>,
    /// Per-size average over replications.
    pub averages: Vec<FunnelAverage>,
}

/// Simulate `replications` studies at each size. Replication `r` of the
/// `i`-th size uses stream `seed + i·replications + r`.
pub fn funnel_simulation(
    params: &MarkovParams,
    sizes: &[u64],
    replications: u32,
    seed: u64,
) -> Result<FunnelSimulation> {
    let params = MarkovParams::new(params.p11, params.p00)?;
    if replications < 1 {
        return Err(Error::arg("replications", 0.0, "must be at least 1"));
    }
    if let Some(&bad) = sizes.iter().find(|&&n| n < 1) {
        return Err(Error::arg("size", bad as f64, "must be at least 1"));
    }
    let reps = replications as u64;
    let points: Vec<FunnelPoint> = (0..sizes.len() as u64 * reps)
        .into_par_iter()
        .map(|task| {
            let n = sizes[(task / reps) as usize];
            let ones = count_ones(&params, n, seed.wrapping_add(task)).expect("validated");
            FunnelPoint {
                n,
                replication: (task % reps) as u32,
                proportion: ones as f64 / n as f64,
            }
        })
        .collect();
    let averages = points
        .chunks(replications as usize)
        .map(|c| FunnelAverage {
            n: c[0].n,
            mean_proportion: c.iter().map(|p| p.proportion).sum::<f64>() / c.len() as f64,
        })
        .collect();
    Ok(FunnelSimulation {
        params,
        points,
        averages,
    })
}

/// `count` sizes spaced evenly in log10 between `min` and `max`, rounded.
pub fn log_spaced_sizes(min: u64, max: u64, count: usize) -> Vec<u64> {
    if count <= 1 {
        return vec![min];
    }
    let (lo, hi) = ((min as f64).log10(), (max as f64).log10());
    (0..count)
        .map(|i| {
            let e = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            10f64.powf(e).round().max(1.0) as u64
        })
        .collect()
}

/// Means of consecutive non-overlapping batches; a trailing partial batch
/// is dropped.
pub fn batch_means(bits: &BitSequence, batch_size: usize) -> Result<SeriesSample> {
    if batch_size < 1 {
        return Err(Error::arg("batch_size", 0.0, "must be at least 1"));
    }
    if batch_size > bits.len() {
        return Err(Error::TooShort {
            len: bits.len(),
            need: batch_size,
        });
    }
    let values = bits
        .bits
        .chunks_exact(batch_size)
        .map(|c| c.iter().map(|&b| b as u64).sum::<u64>() as f64 / batch_size as f64)
        .collect();
    Ok(SeriesSample::new(values))
}
