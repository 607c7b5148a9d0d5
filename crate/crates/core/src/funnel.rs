//! Funnel-plot envelopes and diagnostics.
//!
//! For a centre `℘`, significance multiplier `z₀` and variance factor `V`
//! the envelope at study size `N` is
//!
//! ```text
//! π = ℘ ± z₀ · V · √(℘(1−℘)/N)
//! ```
//!
//! which is the ordinary binomial confidence band when `V = 1`. Solving for
//! `N` gives the size at which a given `π` touches the envelope.

use serde::{Deserialize, Serialize};

use crate::domain::{self, DatabaseSummary, StudyRecord};
use crate::error::{Error, Result};

pub const DEFAULT_Z0: f64 = 1.96;
pub const DEFAULT_TARGET_COVERAGE: f64 = 0.95;
/// Fraction of the largest studies used to read off `℘`.
pub const DEFAULT_LARGE_N_QUANTILE: f64 = 0.10;
pub const MIN_LARGE_STUDIES: usize = 5;
pub const MIN_FIT_RECORDS: usize = 20;
pub const V_SEARCH_MIN: f64 = 0.05;
pub const V_SEARCH_MAX: f64 = 20.0;
pub const V_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub z0: f64,
    pub v_factor: f64,
    pub wp: f64,
    /// Smallest and largest study size for drawn curves.
    pub n_range: (u64, u64),
}

impl EnvelopeSpec {
    pub fn new(z0: f64, v_factor: f64, wp: f64) -> Result<Self> {
        if !(z0 > 0.0) || !z0.is_finite() {
            return Err(Error::arg("z0", z0, "must be positive"));
        }
        if !(v_factor > 0.0) || !v_factor.is_finite() {
            return Err(Error::arg("v_factor", v_factor, "must be positive"));
        }
        if !(0.0..=1.0).contains(&wp) {
            return Err(Error::arg("wp", wp, "must lie in [0, 1]"));
        }
        Ok(EnvelopeSpec {
            z0,
            v_factor,
            wp,
            n_range: (100, 10_000_000),
        })
    }

    /// The 95% band of a memoryless fair source.
    pub fn random() -> Self {
        Self::new(DEFAULT_Z0, 1.0, 0.5).expect("valid constants")
    }

    pub fn with_n_range(mut self, min: u64, max: u64) -> Self {
        self.n_range = (min.max(1), max.max(min.max(1)));
        self
    }

    fn half_width(&self, n: u64) -> f64 {
        self.z0 * self.v_factor * (self.wp * (1.0 - self.wp) / n as f64).sqrt()
    }
}

/// Lower and upper envelope at size `n`, clamped to `[0, 1]`.
pub fn envelope_pi(spec: &EnvelopeSpec, n: u64) -> (f64, f64) {
    let hw = spec.half_width(n.max(1));
    ((spec.wp - hw).max(0.0), (spec.wp + hw).min(1.0))
}

/// Study size at which effect size `pi` lies on the envelope.
pub fn envelope_n(spec: &EnvelopeSpec, pi: f64) -> Result<f64> {
    let d = pi - spec.wp;
    if d == 0.0 {
        return Err(Error::arg(
            "pi",
            pi,
            "equals the centre; envelope size is infinite",
        ));
    }
    Ok((spec.z0 * spec.v_factor).powi(2) * spec.wp * (1.0 - spec.wp) / (d * d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    #[serde(rename = "N")]
    pub n: u64,
    pub lower: f64,
    pub upper: f64,
}

/// The envelope sampled at `points` log-spaced sizes over `spec.n_range`.
pub fn envelope_polyline(spec: &EnvelopeSpec, points: usize) -> Vec<EnvelopePoint> {
    let (lo, hi) = spec.n_range;
    let mut out: Vec<EnvelopePoint> = crate::markov::log_spaced_sizes(lo, hi, points.max(2))
        .into_iter()
        .map(|n| {
            let (lower, upper) = envelope_pi(spec, n);
            EnvelopePoint { n, lower, upper }
        })
        .collect();
    out.dedup_by_key(|p| p.n);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_total: usize,
    pub n_inside: usize,
    pub n_on_or_outside: usize,
    pub fraction_inside: f64,
    /// One flag per record, in input order.
    pub inside: Vec<bool>,
}

fn strictly_inside(spec: &EnvelopeSpec, r: &StudyRecord) -> bool {
    let (lo, hi) = envelope_pi(spec, r.n_bits);
    let pi = r.pi();
    pi == spec.wp || (lo < pi && pi < hi)
}

/// Classify records as strictly inside, or on/outside, the envelope.
pub fn coverage(records: &[StudyRecord], spec: &EnvelopeSpec) -> Result<CoverageReport> {
    if records.is_empty() {
        return Err(Error::Empty("coverage needs at least one record"));
    }
    let inside: Vec<bool> = records.iter().map(|r| strictly_inside(spec, r)).collect();
    let n_inside = inside.iter().filter(|&&b| b).count();
    Ok(CoverageReport {
        n_total: records.len(),
        n_inside,
        n_on_or_outside: records.len() - n_inside,
        fraction_inside: n_inside as f64 / records.len() as f64,
        inside,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceFit {
    pub v_factor: f64,
    pub fraction_inside: f64,
    /// The search stopped at its lower bound: the records show (almost) no
    /// scatter about the centre.
    pub at_lower_bound: bool,
}

/// Smallest `V` whose envelope about `wp` strictly contains at least
/// `target_coverage` of the records, by bisection on
/// `[V_SEARCH_MIN, V_SEARCH_MAX]` to `V_TOLERANCE`.
pub fn fit_variance_factor(
    records: &[StudyRecord],
    z0: f64,
    target_coverage: f64,
    wp: f64,
) -> Result<VarianceFit> {
    if records.len() < MIN_FIT_RECORDS {
        return Err(Error::TooShort {
            len: records.len(),
            need: MIN_FIT_RECORDS,
        });
    }
    if !(target_coverage > 0.0 && target_coverage < 1.0) {
        return Err(Error::arg(
            "target_coverage",
            target_coverage,
            "must lie in (0, 1)",
        ));
    }
    let frac = |v: f64| -> Result<f64> {
        let spec = EnvelopeSpec::new(z0, v, wp)?;
        Ok(coverage(records, &spec)?.fraction_inside)
    };
    let at_min = frac(V_SEARCH_MIN)?;
    if at_min >= target_coverage {
        return Ok(VarianceFit {
            v_factor: V_SEARCH_MIN,
            fraction_inside: at_min,
            at_lower_bound: true,
        });
    }
    let at_max = frac(V_SEARCH_MAX)?;
    if at_max < target_coverage {
        return Err(Error::FitFailed {
            reached: at_max,
            target: target_coverage,
            v_max: V_SEARCH_MAX,
        });
    }
    // coverage is non-decreasing in V: lo fails, hi passes
    let (mut lo, mut hi, mut hi_frac) = (V_SEARCH_MIN, V_SEARCH_MAX, at_max);
    while hi - lo > V_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let f = frac(mid)?;
        if f >= target_coverage {
            hi = mid;
            hi_frac = f;
        } else {
            lo = mid;
        }
    }
    Ok(VarianceFit {
        v_factor: hi,
        fraction_inside: hi_frac,
        at_lower_bound: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WpEstimate {
    pub wp: f64,
    /// Binomial standard error of the size-weighted mean.
    pub se: f64,
    pub n_used: usize,
    /// Smallest study size included.
    pub n_threshold: u64,
}

/// Size-weighted mean effect size over the largest `large_n_quantile`
/// fraction of studies: where the funnel converges.
pub fn wp_estimate(records: &[StudyRecord], large_n_quantile: f64) -> Result<WpEstimate> {
    if !(large_n_quantile > 0.0 && large_n_quantile <= 1.0) {
        return Err(Error::arg(
            "large_n_quantile",
            large_n_quantile,
            "must lie in (0, 1]",
        ));
    }
    let k = (large_n_quantile * records.len() as f64).ceil() as usize;
    if k < MIN_LARGE_STUDIES {
        return Err(Error::TooShort {
            len: k,
            need: MIN_LARGE_STUDIES,
        });
    }
    let mut by_size: Vec<&StudyRecord> = records.iter().collect();
    by_size.sort_by_key(|r| std::cmp::Reverse(r.n_bits));
    let top = &by_size[..k];
    let total: f64 = top.iter().map(|r| r.n_bits as f64).sum();
    let wp = top.iter().map(|r| r.n_bits as f64 * r.pi()).sum::<f64>() / total;
    let var: f64 = top
        .iter()
        .map(|r| {
            let p = r.pi();
            r.n_bits as f64 * p * (1.0 - p)
        })
        .sum();
    Ok(WpEstimate {
        wp,
        se: var.sqrt() / total,
        n_used: k,
        n_threshold: top[k - 1].n_bits,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Quadrant counts about `(℘, n_threshold)`. Records exactly at `℘` are
/// counted in the `center_*` cells so that the symmetric cells stay
/// unbiased for lattice-valued proportions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub wp: f64,
    pub n_threshold: u64,
    pub n_total: usize,
    pub small_above: usize,
    pub small_below: usize,
    pub small_center: usize,
    pub large_above: usize,
    pub large_below: usize,
    pub large_center: usize,
    /// `(above − below)/(above + below)` over small studies; 0 when there
    /// are none off-centre.
    pub small_imbalance: f64,
    /// Histogram of small-study effect sizes in bins of width 0.05.
    pub small_bins: Vec<Band>,
    /// Runs of empty bins between the lowest and highest populated bins.
    pub void_bands: Vec<Band>,
}

pub const ASYMMETRY_BIN_WIDTH: f64 = 0.05;

pub fn asymmetry(records: &[StudyRecord], wp: f64, n_threshold: u64) -> Result<AsymmetryReport> {
    if records.is_empty() {
        return Err(Error::Empty("asymmetry needs at least one record"));
    }
    let mut cells = [[0usize; 3]; 2];
    let n_bins = (1.0 / ASYMMETRY_BIN_WIDTH).round() as usize;
    let mut hist = vec![0usize; n_bins];
    for r in records {
        let pi = r.pi();
        let small = (r.n_bits < n_threshold) as usize;
        let side = if pi > wp {
            0
        } else if pi < wp {
            1
        } else {
            2
        };
        cells[small][side] += 1;
        if small == 1 {
            let b = ((pi / ASYMMETRY_BIN_WIDTH) as usize).min(n_bins - 1);
            hist[b] += 1;
        }
    }
    let [large, small] = cells;
    let off = small[0] + small[1];
    let small_imbalance = if off == 0 {
        0.0
    } else {
        (small[0] as f64 - small[1] as f64) / off as f64
    };
    let band = |i: usize, count| Band {
        lo: i as f64 * ASYMMETRY_BIN_WIDTH,
        hi: (i + 1) as f64 * ASYMMETRY_BIN_WIDTH,
        count,
    };
    let small_bins: Vec<Band> = hist.iter().enumerate().map(|(i, &c)| band(i, c)).collect();
    let mut void_bands = Vec::new();
    if let (Some(first), Some(last)) = (
        hist.iter().position(|&c| c > 0),
        hist.iter().rposition(|&c| c > 0),
    ) {
        let mut run: Option<usize> = None;
        for (i, &count) in hist.iter().enumerate().take(last + 1).skip(first) {
            match (count == 0, run) {
                (true, None) => run = Some(i),
                (false, Some(start)) => {
                    void_bands.push(Band {
                        lo: band(start, 0).lo,
                        hi: band(i - 1, 0).hi,
                        count: 0,
                    });
                    run = None;
                }
                _ => {}
            }
        }
    }
    Ok(AsymmetryReport {
        wp,
        n_threshold,
        n_total: records.len(),
        small_above: small[0],
        small_below: small[1],
        small_center: small[2],
        large_above: large[0],
        large_below: large[1],
        large_center: large[2],
        small_imbalance,
        small_bins,
        void_bands,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunnelConfig {
    pub z0: f64,
    pub target_coverage: f64,
    pub large_n_quantile: f64,
    /// Small/large split for the asymmetry report.
    pub n_threshold: u64,
    /// Fixed funnel centre; estimated from the largest studies when absent.
    pub center: Option<f64>,
}

impl Default for FunnelConfig {
    fn default() -> Self {
        FunnelConfig {
            z0: DEFAULT_Z0,
            target_coverage: DEFAULT_TARGET_COVERAGE,
            large_n_quantile: DEFAULT_LARGE_N_QUANTILE,
            n_threshold: 100_000,
            center: None,
        }
    }
}

/// A record collection together with its funnel diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunnelDataset {
    #[serde(skip)]
    pub records: Vec<StudyRecord>,
    pub summary: DatabaseSummary,
    pub wp: f64,
    pub wp_estimate: Option<WpEstimate>,
    pub random_envelope: EnvelopeSpec,
    pub random_coverage: CoverageReport,
    pub fit: VarianceFit,
    pub fitted_envelope: EnvelopeSpec,
    pub fitted_coverage: CoverageReport,
    pub asymmetry: AsymmetryReport,
}

impl FunnelDataset {
    pub fn analyze(records: Vec<StudyRecord>, config: &FunnelConfig) -> Result<Self> {
        let summary = domain::summarize(&records)?;
        let estimate = wp_estimate(&records, config.large_n_quantile);
        let (wp, wp_est) = match (config.center, estimate) {
            (Some(c), est) => (c, est.ok()),
            (None, Ok(est)) => (est.wp, Some(est)),
            (None, Err(e)) => return Err(e),
        };
        let (n_min, n_max) = records.iter().fold((u64::MAX, 0), |(lo, hi), r| {
            (lo.min(r.n_bits), hi.max(r.n_bits))
        });
        let random_envelope =
            EnvelopeSpec::new(config.z0, 1.0, wp)?.with_n_range(n_min, n_max.saturating_mul(10));
        let random_coverage = coverage(&records, &random_envelope)?;
        let fit = fit_variance_factor(&records, config.z0, config.target_coverage, wp)?;
        let fitted_envelope = EnvelopeSpec::new(config.z0, fit.v_factor, wp)?
            .with_n_range(n_min, n_max.saturating_mul(10));
        let fitted_coverage = coverage(&records, &fitted_envelope)?;
        let asymmetry = asymmetry(&records, wp, config.n_threshold)?;
        Ok(FunnelDataset {
            records,
            summary,
            wp,
            wp_estimate: wp_est,
            random_envelope,
            random_coverage,
            fit,
            fitted_envelope,
            fitted_coverage,
            asymmetry,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn rec(i: usize, n: u64, p: f64) -> StudyRecord {
        StudyRecord::binary(format!("s{i}"), n, p).unwrap()
    }

    #[test]
    fn envelope_pi_examples() {
        let s = EnvelopeSpec::random();
        let (lo, hi) = envelope_pi(&s, 10_000);
        close(lo, 0.5 - 0.0098, 1e-15);
        close(hi, 0.5 + 0.0098, 1e-15);
        let (lo, hi) = envelope_pi(&s, u64::MAX);
        close(lo, 0.5, 1e-9);
        close(hi, 0.5, 1e-9);
        let s = EnvelopeSpec::new(1.96, 2.21, 0.5).unwrap();
        let (_, hi) = envelope_pi(&s, 10_000);
        close(hi - 0.5, 0.021_658, 1e-6);
        close(1.96 * 2.21, 4.33, 0.005);
    }

    #[test]
    fn envelope_clamps() {
        let s = EnvelopeSpec::new(1.96, 3.0, 0.5).unwrap();
        assert_eq!(envelope_pi(&s, 1), (0.0, 1.0));
    }

    #[test]
    fn envelope_n_examples() {
        let s = EnvelopeSpec::random();
        close(envelope_n(&s, 0.51).unwrap(), 9604.0, 1e-6);
        close(envelope_n(&s, 0.49).unwrap(), 9604.0, 1e-6);
        assert!(envelope_n(&s, 0.5).is_err());
        let s = EnvelopeSpec::new(1.96, 2.21, 0.5).unwrap();
        let n = envelope_n(&s, 0.51).unwrap();
        close(n, 2.21f64.powi(2) * 9604.0, 1e-6);
        close(n, 46_908.0, 5.0);
    }

    #[test]
    fn spec_validation() {
        assert!(EnvelopeSpec::new(0.0, 1.0, 0.5).is_err());
        assert!(EnvelopeSpec::new(1.96, -1.0, 0.5).is_err());
        assert!(EnvelopeSpec::new(1.96, 1.0, 1.5).is_err());
    }

    #[test]
    fn polyline_is_symmetric() {
        let s = EnvelopeSpec::new(1.96, 1.5, 0.6)
            .unwrap()
            .with_n_range(100, 1_000_000);
        let line = envelope_polyline(&s, 9);
        assert_eq!(line.first().unwrap().n, 100);
        assert_eq!(line.last().unwrap().n, 1_000_000);
        for p in line {
            close(p.upper - 0.6, 0.6 - p.lower, 1e-12);
        }
    }

    #[test]
    fn coverage_center_and_boundary() {
        let s = EnvelopeSpec::random();
        let c = coverage(&[rec(0, 1, 0.5)], &s).unwrap();
        assert_eq!(c.n_inside, 1);
        // 0.5 ± 0.98/√N: at N = 9604 the point 0.51 sits on the curve
        let on = StudyRecord::binary("on", 9604, 0.5 + 0.98 / 98.0).unwrap();
        let c = coverage(&[on], &s).unwrap();
        assert_eq!(c.n_on_or_outside, 1);
        assert!(coverage(&[], &s).is_err());
    }

    #[test]
    fn fit_edge_cases() {
        let flat: Vec<_> = (0..30).map(|i| rec(i, 1000, 0.5)).collect();
        let fit = fit_variance_factor(&flat, 1.96, 0.95, 0.5).unwrap();
        assert!(fit.at_lower_bound);
        assert_eq!(fit.v_factor, V_SEARCH_MIN);

        let few: Vec<_> = (0..10).map(|i| rec(i, 1000, 0.52)).collect();
        assert!(fit_variance_factor(&few, 1.96, 0.95, 0.5).is_err());

        let wild: Vec<_> = (0..30).map(|i| rec(i, 1_000_000, 0.9)).collect();
        assert!(matches!(
            fit_variance_factor(&wild, 1.96, 0.95, 0.5),
            Err(Error::FitFailed { .. })
        ));
        assert!(fit_variance_factor(&flat, 1.96, 1.0, 0.5).is_err());
    }

    #[test]
    fn wp_estimate_uses_largest_studies() {
        let mut recs: Vec<_> = (0..45).map(|i| rec(i, 100 + i as u64, 0.7)).collect();
        recs.extend((0..5).map(|i| rec(100 + i, 1_000_000, 0.5)));
        let w = wp_estimate(&recs, 0.1).unwrap();
        assert_eq!(w.wp, 0.5);
        assert_eq!(w.n_used, 5);
        assert_eq!(w.n_threshold, 1_000_000);
        assert!(wp_estimate(&recs[..40], 0.1).is_err());
    }

    #[test]
    fn asymmetry_one_sided() {
        let recs: Vec<_> = (0..20)
            .map(|i| rec(i, 1000, 0.55 + 0.01 * (i % 5) as f64))
            .chain((0..4).map(|i| rec(100 + i, 1_000_000, 0.5)))
            .collect();
        let a = asymmetry(&recs, 0.5, 100_000).unwrap();
        assert_eq!(a.small_imbalance, 1.0);
        assert_eq!(a.small_above, 20);
        assert_eq!(a.large_center, 4);
        let sum = a.small_above
            + a.small_below
            + a.small_center
            + a.large_above
            + a.large_below
            + a.large_center;
        assert_eq!(sum, a.n_total);
        assert!(a.void_bands.is_empty());
    }

    #[test]
    fn asymmetry_void_band() {
        let recs = vec![rec(0, 100, 0.31), rec(1, 100, 0.52), rec(2, 100, 0.62)];
        let a = asymmetry(&recs, 0.5, 1000).unwrap();
        // bins 0.35–0.50 and 0.55–0.60 are empty
        assert_eq!(a.void_bands.len(), 2);
        close(a.void_bands[0].lo, 0.35, 1e-12);
        close(a.void_bands[0].hi, 0.5, 1e-12);
        close(a.void_bands[1].lo, 0.55, 1e-12);
        assert_eq!(a.small_bins.len(), 20);
    }
}
