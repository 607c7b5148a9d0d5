//! Self-contained SVG 1.1 charts.
//!
//! Output depends only on the input data and options (coordinates are
//! printed to two decimals), so identical inputs give byte-identical
//! documents.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::funnel::{envelope_pi, EnvelopeSpec, FunnelDataset};
use crate::hurst::{HurstBaseline, HurstReport};

const RANDOM_COLOR: &str = "#1f5fbf";
const FITTED_COLOR: &str = "#c0392b";
type Polyline = Vec<(f64, f64)>;

const POINT_COLOR: &str = "#222222";

#[derive(Clone, Debug, PartialEq)]
pub struct ChartOptions {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
    /// Overlay a quadratic fit (in log10 length) on Hurst-versus-length
    /// charts.
    pub quadratic_fit: bool,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            width: 640.0,
            height: 480.0,
            title: None,
            quadratic_fit: true,
        }
    }
}

/// A Hurst exponent to mark on a Hurst-versus-length chart.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledH {
    pub label: String,
    pub length: usize,
    pub h: f64,
    pub se: f64,
}

pub enum Chart<'a> {
    Funnel(&'a FunnelDataset),
    RsLogLog(&'a HurstReport),
    HurstVsLength {
        baselines: &'a [HurstBaseline],
        observed: &'a [LabeledH],
    },
}

pub fn render_svg(chart: &Chart<'_>, options: &ChartOptions) -> Result<String> {
    match chart {
        Chart::Funnel(d) => render_funnel(d, options),
        Chart::RsLogLog(r) => render_rs_loglog(r, options),
        Chart::HurstVsLength {
            baselines,
            observed,
        } => render_hurst_vs_length(baselines, observed, options),
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag * (1.0 - 1e-9);
    let k = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        // avoid "-0.00"
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    format!("{v:.decimals$}")
}

/// Plot area and data-to-pixel mapping.
struct Frame {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(opts: &ChartOptions, x: (f64, f64), y: (f64, f64)) -> Self {
        let (left, right, top, bottom) = (70.0, 20.0, 40.0, 55.0);
        let pad = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame {
            left,
            top,
            w: opts.width - left - right,
            h: opts.height - top - bottom,
            x: pad(x),
            y: pad(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.h - (y - self.y.0) / (self.y.1 - self.y.0) * self.h
    }

    fn point(&self, x: f64, y: f64) -> String {
        format!("{:.2},{:.2}", self.px(x), self.py(y))
    }
}

struct Svg {
    out: String,
}

impl Svg {
    fn begin(opts: &ChartOptions, metadata: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = opts.width,
            h = opts.height
        );
        let _ = writeln!(out, "<metadata>{}</metadata>", esc(metadata));
        let _ = writeln!(
            out,
            r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
            opts.width, opts.height
        );
        if let Some(t) = &opts.title {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
                opts.width / 2.0,
                esc(t)
            );
        }
        Svg { out }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn axes(&mut self, f: &Frame, x_label: &str, y_label: &str, y_fmt: impl Fn(f64) -> String) {
        self.line(format!(
            r#"<defs><clipPath id="plot"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
            f.left, f.top, f.w, f.h
        ));
        self.line(format!(
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            f.left, f.top, f.w, f.h
        ));
        let xstep = nice_step(f.x.1 - f.x.0, 6);
        for t in ticks(f.x.0, f.x.1, 6) {
            let x = f.px(t);
            let yb = f.top + f.h;
            self.line(format!(
                r##"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##,
                yb + 5.0
            ));
            self.line(format!(
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                yb + 18.0,
                tick_label(t, xstep)
            ));
        }
        for t in ticks(f.y.0, f.y.1, 6) {
            let y = f.py(t);
            self.line(format!(
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#444"/>"##,
                f.left - 5.0,
                f.left
            ));
            self.line(format!(
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                f.left - 8.0,
                y + 4.0,
                esc(&y_fmt(t))
            ));
        }
        self.line(format!(
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.left + f.w / 2.0,
            f.top + f.h + 42.0,
            esc(x_label)
        ));
        self.line(format!(
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            f.top + f.h / 2.0,
            f.top + f.h / 2.0,
            esc(y_label)
        ));
    }

    fn polyline(&mut self, f: &Frame, pts: &[(f64, f64)], style: &str) {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| f.point(x, y)).collect();
        self.line(format!(
            r#"<polyline clip-path="url(#plot)" fill="none" {style} points="{}"/>"#,
            coords.join(" ")
        ));
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn envelope_curves(spec: &EnvelopeSpec, y: (f64, f64)) -> (Polyline, Polyline) {
    let steps = 120;
    (0..=steps)
        .map(|i| {
            let e = y.0 + (y.1 - y.0) * i as f64 / steps as f64;
            let n = 10f64.powf(e).round().max(1.0) as u64;
            let (lo, hi) = envelope_pi(spec, n);
            ((lo, e), (hi, e))
        })
        .unzip()
}

/// Effect size across, log10 N up; dashed line at ℘, dash-dotted at the
/// mean effect size, both envelope pairs.
pub fn render_funnel(data: &FunnelDataset, opts: &ChartOptions) -> Result<String> {
    if data.records.is_empty() {
        return Err(Error::Empty("funnel chart needs records"));
    }
    let logs: Vec<f64> = data
        .records
        .iter()
        .map(|r| (r.n_bits as f64).log10())
        .collect();
    let pis: Vec<f64> = data.records.iter().map(|r| r.pi()).collect();
    let ymin = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let ymax = logs
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .max(ymin + 1.0);
    let pmin = pis.iter().copied().fold(f64::INFINITY, f64::min);
    let pmax = pis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (pmax - data.wp).abs().max((data.wp - pmin).abs()).max(0.01) * 1.1;
    let x = ((data.wp - spread).max(0.0), (data.wp + spread).min(1.0));
    let f = Frame::new(opts, x, (ymin, ymax));

    let meta = format!(
        r#"{{"chart":"funnel","n_total":{},"n_inside_random":{},"fraction_inside_random":{:.4},"v_fitted":{:.4},"n_inside_fitted":{},"wp":{:.6},"mean_pi":{:.6}}}"#,
        data.random_coverage.n_total,
        data.random_coverage.n_inside,
        data.random_coverage.fraction_inside,
        data.fit.v_factor,
        data.fitted_coverage.n_inside,
        data.wp,
        data.summary.mean_pi
    );
    let mut svg = Svg::begin(opts, &meta);
    svg.axes(&f, "effect size π", "log10 N (bits)", |v| {
        format!("{v:.0}")
    });

    for (spec, color, dash) in [
        (
            &data.random_envelope,
            RANDOM_COLOR,
            r#" stroke-dasharray="6,4""#,
        ),
        (&data.fitted_envelope, FITTED_COLOR, ""),
    ] {
        let (lo, hi) = envelope_curves(spec, f.y);
        let style = format!(r#"stroke="{color}" stroke-width="1.5"{dash}"#);
        svg.polyline(&f, &lo, &style);
        svg.polyline(&f, &hi, &style);
    }
    svg.polyline(
        &f,
        &[(data.wp, f.y.0), (data.wp, f.y.1)],
        r##"stroke="#000" stroke-dasharray="5,4""##,
    );
    svg.polyline(
        &f,
        &[(data.summary.mean_pi, f.y.0), (data.summary.mean_pi, f.y.1)],
        r##"stroke="#000" stroke-dasharray="8,3,2,3""##,
    );
    svg.line(r#"<g clip-path="url(#plot)">"#);
    for ((&pi, &ly), &inside) in pis.iter().zip(&logs).zip(&data.random_coverage.inside) {
        let fill = if inside { "none" } else { POINT_COLOR };
        svg.line(format!(
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}" stroke="{POINT_COLOR}"/>"#,
            f.px(pi),
            f.py(ly)
        ));
    }
    svg.line("</g>");
    let lx = f.left + 10.0;
    let mut ly = f.top + 16.0;
    for (text, color, dash) in [
        (
            "V = 1".to_string(),
            RANDOM_COLOR,
            r#" stroke-dasharray="6,4""#,
        ),
        (format!("V = {:.2}", data.fit.v_factor), FITTED_COLOR, ""),
    ] {
        svg.line(format!(
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            lx + 24.0
        ));
        svg.line(format!(
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            esc(&text)
        ));
        ly += 16.0;
    }
    Ok(svg.finish())
}

/// log2 R/S against log2 n with the regression line.
pub fn render_rs_loglog(report: &HurstReport, opts: &ChartOptions) -> Result<String> {
    if report.points.is_empty() {
        return Err(Error::Empty("R/S chart needs points"));
    }
    let xs: Vec<f64> = report
        .points
        .iter()
        .map(|p| (p.window_n as f64).log2())
        .collect();
    let ys: Vec<f64> = report.points.iter().map(|p| p.rs_mean.log2()).collect();
    let bounds = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.08).max(0.1);
        (lo - pad, hi + pad)
    };
    let f = Frame::new(opts, bounds(&xs), bounds(&ys));
    let meta = format!(
        r#"{{"chart":"rs_loglog","h":{:.6},"h_se":{:.6},"c_h":{:.6},"points":{}}}"#,
        report.h,
        report.h_se,
        report.c_h,
        report.points.len()
    );
    let mut svg = Svg::begin(opts, &meta);
    svg.axes(&f, "log2 n", "log2 R/S", |v| format!("{v:.1}"));
    let fit = |x: f64| report.intercept + report.h * x;
    svg.polyline(
        &f,
        &[(f.x.0, fit(f.x.0)), (f.x.1, fit(f.x.1))],
        &format!(r#"stroke="{FITTED_COLOR}" stroke-width="1.5""#),
    );
    for (&x, &y) in xs.iter().zip(&ys) {
        svg.line(format!(
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{POINT_COLOR}"/>"#,
            f.px(x),
            f.py(y)
        ));
    }
    svg.line(format!(
        r#"<text x="{:.2}" y="{:.2}">H = {:.3} ± {:.3}, C_H = {:.3}</text>"#,
        f.left + 10.0,
        f.top + 18.0,
        report.h,
        report.h_se,
        report.c_h
    ));
    Ok(svg.finish())
}

/// Least-squares `a + b·x + c·x²`.
pub(crate) fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Option<[f64; 3]> {
    if xs.len() < 3 {
        return None;
    }
    // normal equations
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut p = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                t[k] += p * y;
            }
            p *= x;
        }
    }
    let mut m = [
        [s[0], s[1], s[2], t[0]],
        [s[1], s[2], s[3], t[1]],
        [s[2], s[3], s[4], t[2]],
    ];
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let k = m[row][col] / m[col][col];
                let pivot = m[col];
                for (x, p) in m[row].iter_mut().zip(pivot).skip(col) {
                    *x -= k * p;
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Baseline mean H (± se) against log10 length, with observed exponents
/// marked.
pub fn render_hurst_vs_length(
    baselines: &[HurstBaseline],
    observed: &[LabeledH],
    opts: &ChartOptions,
) -> Result<String> {
    if baselines.is_empty() && observed.is_empty() {
        return Err(Error::Empty("Hurst-versus-length chart needs data"));
    }
    let pts: Vec<(f64, f64, f64)> = baselines
        .iter()
        .map(|b| ((b.length as f64).log10(), b.mean_h, b.se))
        .chain(
            observed
                .iter()
                .map(|o| ((o.length as f64).log10(), o.h, o.se)),
        )
        .collect();
    let xlo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xhi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ylo = pts.iter().map(|p| p.1 - p.2).fold(f64::INFINITY, f64::min);
    let yhi = pts
        .iter()
        .map(|p| p.1 + p.2)
        .fold(f64::NEG_INFINITY, f64::max);
    let xpad = ((xhi - xlo) * 0.08).max(0.1);
    let ypad = ((yhi - ylo) * 0.1).max(0.02);
    let f = Frame::new(opts, (xlo - xpad, xhi + xpad), (ylo - ypad, yhi + ypad));
    let meta = format!(
        r#"{{"chart":"hurst_vs_length","baselines":{},"observed":{}}}"#,
        baselines.len(),
        observed.len()
    );
    let mut svg = Svg::begin(opts, &meta);
    svg.axes(&f, "log10 series length", "Hurst exponent H", |v| {
        format!("{v:.2}")
    });
    if opts.quadratic_fit {
        let xs: Vec<f64> = baselines
            .iter()
            .map(|b| (b.length as f64).log10())
            .collect();
        let ys: Vec<f64> = baselines.iter().map(|b| b.mean_h).collect();
        if let Some([a, b, c]) = quadratic_fit(&xs, &ys) {
            let curve: Vec<(f64, f64)> = (0..=60)
                .map(|i| {
                    let x = f.x.0 + (f.x.1 - f.x.0) * i as f64 / 60.0;
                    (x, a + b * x + c * x * x)
                })
                .collect();
            svg.polyline(&f, &curve, r##"stroke="#666" stroke-dasharray="2,3""##);
        }
    }
    let mut draw = |x: f64, h: f64, se: f64, filled: bool| {
        let (cx, cy) = (f.px(x), f.py(h));
        svg.line(format!(
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{POINT_COLOR}"/>"#,
            f.py(h - se),
            f.py(h + se)
        ));
        let (fill, stroke) = if filled {
            (FITTED_COLOR, FITTED_COLOR)
        } else {
            ("white", POINT_COLOR)
        };
        svg.line(format!(
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="{fill}" stroke="{stroke}"/>"#
        ));
    };
    for b in baselines {
        draw((b.length as f64).log10(), b.mean_h, b.se, false);
    }
    for o in observed {
        draw((o.length as f64).log10(), o.h, o.se, true);
    }
    for o in observed {
        svg.line(format!(
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            f.px((o.length as f64).log10()) + 7.0,
            f.py(o.h) - 6.0,
            esc(&o.label)
        ));
    }
    Ok(svg.finish())
}
