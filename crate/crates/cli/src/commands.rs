use std::path::{Path, PathBuf};

use bitbias_core::funnel::{EnvelopeSpec, FunnelConfig, FunnelDataset};
use bitbias_core::hurst::{
    self, HurstBaseline, HurstOptions, HurstReport, SdConvention, WindowSchedule,
};
use bitbias_core::io::svg::{self, ChartOptions};
use bitbias_core::io::{self, Censoring, ReportKind, SynthSpec};
use bitbias_core::markov::{self, MarkovParams, MarkovTheory};
use bitbias_core::{Condition, SeriesSample};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::out::{self, Failure};
use crate::{CmdResult, Ctx, SeedArg};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Probability that a 1 is followed by a 1.
    #[arg(long)]
    p11: f64,
    /// Probability that a 0 is followed by a 0.
    #[arg(long)]
    p00: f64,
    /// Sequence length.
    #[arg(long, default_value_t = 1_000_000)]
    n_bits: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Output file. A JSON sidecar with the closed-form statistics is
    /// written next to it as `<out>.theory.json`.
    #[arg(long)]
    out: PathBuf,
    /// Write 8 bits per byte (first bit in the most significant position)
    /// instead of one `0`/`1` per line.
    #[arg(long)]
    packed: bool,
    /// Simulate a funnel of study means instead of one sequence; `--out`
    /// receives CSV columns N,replication,proportion.
    #[arg(long)]
    funnel: bool,
    /// Smallest study size in the funnel.
    #[arg(long, default_value_t = 100)]
    min_n: u64,
    /// Largest study size in the funnel.
    #[arg(long, default_value_t = 1_000_000)]
    max_n: u64,
    /// Number of log-spaced study sizes in the funnel.
    #[arg(long, default_value_t = 25)]
    points: usize,
    /// Studies simulated per size.
    #[arg(long, default_value_t = 30)]
    replications: u32,
}

#[derive(Serialize)]
struct TheorySidecar {
    p11: f64,
    p00: f64,
    seed: u64,
    n_bits: usize,
    wp: f64,
    v_factor: f64,
    c1: f64,
    sigma0: f64,
    empirical_mean: f64,
    empirical_c1: Option<f64>,
    format: &'static str,
}

#[derive(Serialize)]
struct FunnelSidecar {
    p11: f64,
    p00: f64,
    seed: u64,
    replications: u32,
    sizes: Vec<u64>,
    theory: MarkovTheory,
    /// Fractions of replication means strictly inside the envelopes about
    /// the stationary mean.
    fraction_inside_v1: f64,
    fraction_inside_theory_v: f64,
    averages: Vec<markov::FunnelAverage>,
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".theory.json");
    PathBuf::from(s)
}

pub fn simulate(a: &SimulateArgs, ctx: &Ctx) -> CmdResult {
    let params = MarkovParams::new(a.p11, a.p00)?;
    let theory = params.theory();
    let seed = a.seed.resolve();
    if a.funnel {
        let sizes = markov::log_spaced_sizes(a.min_n.max(1), a.max_n.max(a.min_n), a.points);
        let sim = markov::funnel_simulation(&params, &sizes, a.replications, seed)?;
        out::write_csv(&a.out, |buf| {
            io::write_table(&sim.points, buf, ctx.precision)
        })?;
        let frac = |v: f64| -> CmdResult<f64> {
            let spec = EnvelopeSpec::new(1.96, v, theory.wp)?;
            let inside = sim
                .points
                .iter()
                .filter(|p| {
                    let (lo, hi) = bitbias_core::envelope_pi(&spec, p.n);
                    p.proportion == theory.wp || (lo < p.proportion && p.proportion < hi)
                })
                .count();
            Ok(inside as f64 / sim.points.len() as f64)
        };
        let side = FunnelSidecar {
            p11: a.p11,
            p00: a.p00,
            seed,
            replications: a.replications,
            sizes,
            theory,
            fraction_inside_v1: frac(1.0)?,
            fraction_inside_theory_v: frac(theory.v_factor)?,
            averages: sim.averages,
        };
        let json = out::write_json(
            &sidecar_path(&a.out),
            ReportKind::Theory,
            &side,
            ctx.precision,
        )?;
        if ctx.json {
            print!("{json}");
        } else {
            println!(
                "funnel: {} points, inside V=1: {:.3}, inside V={:.3}: {:.3}",
                sim.points.len(),
                side.fraction_inside_v1,
                theory.v_factor,
                side.fraction_inside_theory_v
            );
        }
        return Ok(());
    }

    let seq = markov::generate(&params, a.n_bits, seed)?;
    if a.packed {
        out::write_bytes(&a.out, &seq.to_packed())?;
    } else {
        out::write_bytes(&a.out, seq.to_text().as_bytes())?;
    }
    let side = TheorySidecar {
        p11: a.p11,
        p00: a.p00,
        seed,
        n_bits: a.n_bits,
        wp: theory.wp,
        v_factor: theory.v_factor,
        c1: theory.c1,
        sigma0: theory.sigma0(a.n_bits as u64),
        empirical_mean: seq.mean(),
        empirical_c1: markov::empirical_correlation(&seq, 1).ok(),
        format: if a.packed {
            "packed-msb-first"
        } else {
            "text-lines"
        },
    };
    let json = out::write_json(
        &sidecar_path(&a.out),
        ReportKind::Theory,
        &side,
        ctx.precision,
    )?;
    if ctx.json {
        print!("{json}");
    } else {
        println!(
            "wp = {:.4}  V = {:.4}  C1 = {:.4}  (empirical mean {:.4})",
            theory.wp, theory.v_factor, theory.c1, side.empirical_mean
        );
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ConditionArg {
    Treatment,
    Control,
    Calibration,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Treatment => Condition::Treatment,
            ConditionArg::Control => Condition::Control,
            ConditionArg::Calibration => Condition::Calibration,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON synthesis spec; command-line flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 380)]
    n_studies: usize,
    /// Symmetric self-transition probability (sets both --p11 and --p00).
    #[arg(long, conflicts_with_all = ["p11", "p00"])]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    p11: f64,
    #[arg(long, default_value_t = 0.5)]
    p00: f64,
    #[arg(long, default_value_t = 100)]
    n_min: u64,
    #[arg(long, default_value_t = 1_000_000)]
    n_max: u64,
    /// Drop small studies with effect size below this value.
    #[arg(long, conflicts_with = "censor_above")]
    censor_below: Option<f64>,
    /// Drop small studies with effect size above this value.
    #[arg(long)]
    censor_above: Option<f64>,
    /// Studies smaller than this are subject to censoring.
    #[arg(long, default_value_t = 100_000)]
    censor_n: u64,
    #[arg(long, value_enum, default_value_t = ConditionArg::Treatment)]
    condition: ConditionArg,
    #[command(flatten)]
    seed: SeedArg,
    /// Record CSV to write ("-" for stdout).
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(a: &SynthArgs, ctx: &Ctx) -> CmdResult {
    let spec: SynthSpec = match &a.spec {
        Some(path) => {
            let bytes = out::read_input(path)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => {
            let (p11, p00) = a.p.map(|p| (p, p)).unwrap_or((a.p11, a.p00));
            let mut s = SynthSpec::new(a.n_studies, MarkovParams::new(p11, p00)?, a.seed.resolve());
            s.n_min = a.n_min;
            s.n_max = a.n_max;
            s.condition = a.condition.into();
            s.censoring = match (a.censor_below, a.censor_above) {
                (Some(p), _) => Some(Censoring::below(p, a.censor_n)),
                (_, Some(p)) => Some(Censoring::above(p, a.censor_n)),
                _ => None,
            };
            s
        }
    };
    let records = io::synthesize(&spec)?;
    let mut buf = Vec::new();
    io::write_records(&records, &mut buf, ctx.precision)?;
    if crate::is_stdin(&a.out) {
        use std::io::Write;
        std::io::stdout()
            .write_all(&buf)
            .map_err(|e| out::io_err(&a.out, e))?;
    } else {
        out::write_bytes(&a.out, &buf)?;
        if !ctx.json {
            println!("{} records written to {}", records.len(), a.out.display());
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FunnelArgs {
    /// Record CSV ("-" for stdin).
    input: PathBuf,
    /// Significance multiplier of the envelopes.
    #[arg(long, default_value_t = 1.96)]
    z0: f64,
    /// Coverage the fitted envelope must reach.
    #[arg(long, default_value_t = 0.95)]
    coverage: f64,
    /// Fraction of largest studies used to estimate the funnel centre.
    #[arg(long, default_value_t = 0.10)]
    quantile: f64,
    /// Small/large study split for the asymmetry report (1e5 suits
    /// treatment data, 1e4 control data).
    #[arg(long, default_value_t = 100_000)]
    n_threshold: u64,
    /// Fix the funnel centre instead of estimating it.
    #[arg(long)]
    center: Option<f64>,
    /// Chart title.
    #[arg(long)]
    title: Option<String>,
    /// Directory for funnel.csv, envelopes.csv, funnel.svg and funnel.json.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn funnel(a: &FunnelArgs, ctx: &Ctx) -> CmdResult {
    let records = out::load_records(&a.input)?;
    let config = FunnelConfig {
        z0: a.z0,
        target_coverage: a.coverage,
        large_n_quantile: a.quantile,
        n_threshold: a.n_threshold,
        center: a.center,
    };
    let data = FunnelDataset::analyze(records, &config)?;
    out::ensure_dir(&a.out_dir)?;
    let json = write_funnel_outputs(&data, &a.out_dir, "funnel", a.title.clone(), ctx)?;
    if ctx.json {
        print!("{json}");
    } else {
        print_funnel(&data);
    }
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>_envelopes.csv`, `<stem>.svg`, `<stem>.json`
/// and returns the JSON document.
pub fn write_funnel_outputs(
    data: &FunnelDataset,
    dir: &Path,
    stem: &str,
    title: Option<String>,
    ctx: &Ctx,
) -> CmdResult<String> {
    let p = ctx.precision;
    out::write_csv(&dir.join(format!("{stem}.csv")), |b| {
        io::write_funnel_csv(data, b, p)
    })?;
    out::write_csv(&dir.join(format!("{stem}_envelopes.csv")), |b| {
        io::write_envelopes_csv(data, 61, b, p)
    })?;
    let opts = ChartOptions {
        title,
        ..ChartOptions::default()
    };
    let chart = svg::render_funnel(data, &opts)?;
    out::write_bytes(&dir.join(format!("{stem}.svg")), chart.as_bytes())?;
    out::write_json(
        &dir.join(format!("{stem}.json")),
        ReportKind::Funnel,
        data,
        p,
    )
}

fn print_funnel(d: &FunnelDataset) {
    println!(
        "studies: {}  mean pi: {:.4} (se {:.4})  centre: {:.4}",
        d.summary.count, d.summary.mean_pi, d.summary.mean_se, d.wp
    );
    println!(
        "inside V=1 envelope: {}/{} ({:.3})",
        d.random_coverage.n_inside, d.random_coverage.n_total, d.random_coverage.fraction_inside
    );
    let p = markov::self_transition_from_v(d.fit.v_factor).unwrap_or(f64::NAN);
    println!(
        "fitted V: {:.3}{}  -> p = {:.3}, C1 = {:.3}",
        d.fit.v_factor,
        if d.fit.at_lower_bound {
            " (at search bound)"
        } else {
            ""
        },
        p,
        2.0 * p - 1.0
    );
    println!(
        "small-study imbalance: {:+.3} ({} above / {} below centre)",
        d.asymmetry.small_imbalance, d.asymmetry.small_above, d.asymmetry.small_below
    );
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SdArg {
    Population,
    Sample,
}

/// R/S settings shared by `hurst` and `report`.
#[derive(Debug, Args, Clone)]
pub struct RsArgs {
    /// Smallest window; sizes double up to half the series length.
    #[arg(long, default_value_t = 8)]
    min_window: usize,
    /// Explicit comma-separated window sizes (overrides --min-window).
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Standard-deviation divisor inside R/S.
    #[arg(long, value_enum, default_value_t = SdArg::Population)]
    sd: SdArg,
    /// Number of shuffled copies for the randomization control.
    #[arg(long, default_value_t = 10)]
    shuffles: usize,
    /// Number of i.i.d. Gaussian series of the same length for the
    /// reference baseline (0 to skip).
    #[arg(long, default_value_t = 10)]
    baseline_series: usize,
}

impl RsArgs {
    pub fn baseline_count(&self) -> usize {
        self.baseline_series
    }

    pub fn options(&self) -> HurstOptions {
        HurstOptions {
            windows: match &self.windows {
                Some(w) => WindowSchedule::Explicit(w.clone()),
                None => WindowSchedule::Doubling {
                    min: self.min_window,
                },
            },
            sd: match self.sd {
                SdArg::Population => SdConvention::Population,
                SdArg::Sample => SdConvention::Sample,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct HurstArgs {
    /// Record CSV; effect sizes are ordered by publication date.
    #[arg(long, conflicts_with = "series", required_unless_present = "series")]
    records: Option<PathBuf>,
    /// Numeric series, one value per line ("-" for stdin).
    #[arg(long)]
    series: Option<PathBuf>,
    /// Replace the series by means of consecutive batches of this size.
    #[arg(long)]
    batch_size: Option<usize>,
    #[command(flatten)]
    rs: RsArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Directory for hurst.json, hurst_rs.csv and hurst_rs.svg.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
pub struct HurstBundle {
    pub report: HurstReport,
    pub shuffled: HurstBaseline,
    pub iid: Option<HurstBaseline>,
    pub seed: u64,
}

/// R/S analysis with shuffle and i.i.d. baselines. Shuffles use streams
/// `seed + i`; the i.i.d. baseline uses `scramble(seed) + i`.
pub fn analyze_series(series: &SeriesSample, rs: &RsArgs, seed: u64) -> CmdResult<HurstBundle> {
    let opts = rs.options();
    let report = hurst::hurst(series, &opts)?;
    let shuffled = hurst::randomized_baseline(series, rs.shuffles, seed, &opts)?;
    let iid = if rs.baseline_series > 0 {
        Some(hurst::iid_baseline(
            series.len(),
            rs.baseline_series,
            bitbias_core::rng::scramble(seed),
            &opts,
        )?)
    } else {
        None
    };
    Ok(HurstBundle {
        report,
        shuffled,
        iid,
        seed,
    })
}

pub fn write_hurst_outputs(
    b: &HurstBundle,
    dir: &Path,
    stem: &str,
    title: Option<String>,
    ctx: &Ctx,
) -> CmdResult<String> {
    out::write_csv(&dir.join(format!("{stem}_rs.csv")), |buf| {
        io::write_table(&b.report.points, buf, ctx.precision)
    })?;
    let opts = ChartOptions {
        title,
        ..ChartOptions::default()
    };
    let chart = svg::render_rs_loglog(&b.report, &opts)?;
    out::write_bytes(&dir.join(format!("{stem}_rs.svg")), chart.as_bytes())?;
    out::write_json(
        &dir.join(format!("{stem}.json")),
        ReportKind::Hurst,
        b,
        ctx.precision,
    )
}

pub fn hurst(a: &HurstArgs, ctx: &Ctx) -> CmdResult {
    let mut series = match (&a.records, &a.series) {
        (Some(path), _) => SeriesSample::from_records(&out::load_records(path)?),
        (_, Some(path)) => SeriesSample::new(out::load_series(path)?),
        _ => return Err(Failure::input("one of --records or --series is required")),
    };
    if let Some(size) = a.batch_size {
        if size == 0 || size > series.len() {
            return Err(Failure::input(format!(
                "batch size {size} does not fit a series of length {}",
                series.len()
            )));
        }
        series = SeriesSample::new(
            series
                .values
                .chunks_exact(size)
                .map(|c| c.iter().sum::<f64>() / size as f64)
                .collect(),
        );
    }
    let seed = a.seed.resolve();
    let bundle = analyze_series(&series, &a.rs, seed)?;
    out::ensure_dir(&a.out_dir)?;
    let json = write_hurst_outputs(&bundle, &a.out_dir, "hurst", None, ctx)?;
    if ctx.json {
        print!("{json}");
    } else {
        let r = &bundle.report;
        println!(
            "length {}  H = {:.3} (se {:.3})  C_H = {:.3}  R^2 = {:.3}",
            r.length, r.h, r.h_se, r.c_h, r.r_squared
        );
        println!(
            "shuffled ({}x): H = {:.3} (se {:.3})",
            bundle.shuffled.hs.len(),
            bundle.shuffled.mean_h,
            bundle.shuffled.se
        );
        if let Some(iid) = &bundle.iid {
            println!(
                "i.i.d. Gaussian ({}x): H = {:.3} (se {:.3})",
                iid.hs.len(),
                iid.mean_h,
                iid.se
            );
        }
    }
    Ok(())
}
