//! Exact fractional Gaussian noise by circulant embedding (Davies–Harte).
//!
//! Used as a long-memory oracle for checking the R/S estimator: the
//! generated series has autocovariance
//! `γ(k) = ½(|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})` at every lag.

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hurst::SeriesSample;
use crate::rng;

pub fn autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Eigenvalues of the circulant matrix embedding the first `half + 1`
/// autocovariances in a cycle of length `2·half`.
fn circulant_eigenvalues(h: f64, half: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let m = 2 * half;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex::new(autocovariance(h, lag), 0.0)
        })
        .collect();
    planner.plan_fft_forward(m).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

pub fn generate_fgn(h_true: f64, length: usize, seed: u64) -> Result<SeriesSample> {
    if !(h_true > 0.0 && h_true < 1.0) {
        return Err(Error::arg("h_true", h_true, "must lie in (0, 1)"));
    }
    if length < 2 || !length.is_power_of_two() {
        return Err(Error::arg(
            "length",
            length as f64,
            "must be a power of two, at least 2",
        ));
    }
    let mut planner = FftPlanner::new();
    // fGn embeddings are non-negative for all H in theory; allow one
    // enlargement before giving up on rounding trouble
    let mut half = length;
    let mut eig = circulant_eigenvalues(h_true, half, &mut planner);
    let tol = |e: &[f64]| -1e-10 * e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = |e: &[f64]| e.iter().copied().fold(f64::INFINITY, f64::min);
    if min(&eig) < tol(&eig) {
        half *= 2;
        eig = circulant_eigenvalues(h_true, half, &mut planner);
        if min(&eig) < tol(&eig) {
            return Err(Error::Embedding(min(&eig)));
        }
    }
    let m = 2 * half;
    let mut rng = rng::seeded(seed);
    let mut w: Vec<Complex<f64>> = eig
        .iter()
        .map(|&lambda| {
            let scale = (lambda.max(0.0) / m as f64).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(scale * re, scale * im)
        })
        .collect();
    planner.plan_fft_forward(m).process(&mut w);
    Ok(SeriesSample::new(
        w.into_iter().take(length).map(|c| c.re).collect(),
    ))
}
