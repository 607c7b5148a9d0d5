//! `bitbias report`: the full analysis suite on synthetic or user data.
//!
//! Each section runs independently; failures are collected into the index
//! and turn the exit status nonzero once every section has had its turn.

use std::path::{Path, PathBuf};

use bitbias_core::funnel::{FunnelConfig, FunnelDataset};
use bitbias_core::hurst::{self, HurstBaseline};
use bitbias_core::io::svg::{self, ChartOptions, LabeledH};
use bitbias_core::io::{self, Censoring, ReportKind, SynthSpec};
use bitbias_core::markov::{self, MarkovParams, MarkovTheory};
use bitbias_core::rng::scramble;
use bitbias_core::{domain, Condition, DatabaseSummary, MergedSummary, SeriesSample, StudyRecord};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::commands::{self, HurstBundle, RsArgs};
use crate::out::{self, Failure};
use crate::{CmdResult, Ctx, SeedArg};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report spec (see crates/cli/demo/report.json); defaults apply to
    /// missing fields.
    #[arg(long, conflicts_with = "records")]
    spec: Option<PathBuf>,
    /// Record CSV to analyse instead of the synthetic databases; rows are
    /// split by condition into treatment and control.
    #[arg(long)]
    records: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    rs: RsArgs,
    /// Bundle directory.
    #[arg(long)]
    out_dir: PathBuf,
}

/// One synthetic database.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DbSpec {
    pub n_studies: usize,
    pub p11: f64,
    pub p00: f64,
    pub n_min: u64,
    pub n_max: u64,
    #[serde(default)]
    pub censoring: Option<Censoring>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PanelSizes {
    pub min_n: u64,
    pub max_n: u64,
    pub points: usize,
    pub replications: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchSpec {
    pub p: f64,
    pub n_bits: usize,
    pub batch_size: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSpec {
    /// Used when --seed is absent.
    pub seed: Option<u64>,
    pub z0: f64,
    pub coverage: f64,
    pub treatment: DbSpec,
    pub control: DbSpec,
    /// Markov-biased database for the variance-factor fit.
    pub markov: DbSpec,
    /// Length of the sequence used for the empirical lag-1 correlation.
    pub correlation_bits: usize,
    /// (p11, p00) of each simulated funnel panel.
    pub panels: Vec<[f64; 2]>,
    pub panel_sizes: PanelSizes,
    /// Series lengths of the i.i.d. Hurst-versus-length curve.
    pub hurst_lengths: Vec<usize>,
    pub batch: BatchSpec,
}

impl Default for ReportSpec {
    fn default() -> Self {
        let db = |n_studies, p, censoring| DbSpec {
            n_studies,
            p11: p,
            p00: p,
            n_min: 100,
            n_max: 1_000_000,
            censoring,
        };
        ReportSpec {
            seed: None,
            z0: 1.96,
            coverage: 0.95,
            treatment: db(380, 0.5, Some(Censoring::below(0.5, 100_000))),
            control: db(137, 0.5, Some(Censoring::above(0.5, 10_000))),
            markov: db(380, 0.83, None),
            correlation_bits: 1_000_000,
            panels: vec![[0.12, 0.12], [0.5, 0.5], [0.88, 0.88], [0.88, 0.5]],
            panel_sizes: PanelSizes {
                min_n: 100,
                max_n: 1_000_000,
                points: 25,
                replications: 30,
            },
            hurst_lengths: vec![64, 137, 256, 380, 512, 1024, 2048, 4096],
            batch: BatchSpec {
                p: 0.83,
                n_bits: 1_000_000,
                batch_size: 100,
            },
        }
    }
}

#[derive(Serialize)]
struct Databases {
    treatment: DatabaseSummary,
    control: DatabaseSummary,
    merged: MergedSummary,
}

#[derive(Serialize)]
struct VarianceFitRow {
    studies: usize,
    fitted_v: f64,
    fraction_inside: f64,
    at_lower_bound: bool,
    /// Symmetric self-transition probability implied by the fitted V.
    p: f64,
    c1: f64,
    /// Lag-1 correlation measured on a simulated sequence (synthetic data
    /// only).
    empirical_c1: Option<f64>,
}

#[derive(Serialize)]
struct Panel {
    p11: f64,
    p00: f64,
    theory: MarkovTheory,
    fraction_inside_v1: f64,
    fraction_inside_fitted: f64,
    fitted_v: f64,
}

#[derive(Serialize)]
struct HurstRow {
    label: String,
    length: usize,
    h: f64,
    h_se: f64,
    c_h: f64,
    shuffled_mean_h: f64,
    shuffled_se: f64,
    iid_mean_h: Option<f64>,
    iid_se: Option<f64>,
}

#[derive(Serialize)]
struct BatchMeans {
    p: f64,
    n_bits: usize,
    batch_size: usize,
    length: usize,
    h: f64,
    h_se: f64,
    iid_mean_h: f64,
    iid_sd_h: f64,
    /// Whether `h` lies within the i.i.d. mean ± 2 sd.
    within_iid_band: bool,
}

#[derive(Serialize, Default)]
struct Summary {
    seed: u64,
    source: &'static str,
    databases: Option<Databases>,
    variance_fit: Option<VarianceFitRow>,
    panels: Option<Vec<Panel>>,
    hurst: Option<Vec<HurstRow>>,
    hurst_curve: Option<Vec<HurstBaseline>>,
    batch_means: Option<BatchMeans>,
}

#[derive(Serialize)]
struct SectionStatus {
    name: &'static str,
    ok: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct Index {
    files: Vec<String>,
    sections: Vec<SectionStatus>,
}

struct Bundle<'a> {
    dir: &'a Path,
    ctx: &'a Ctx,
    files: Vec<String>,
}

impl Bundle<'_> {
    fn note(&mut self, names: &[String]) {
        self.files.extend(names.iter().cloned());
    }

    fn funnel(&mut self, data: &FunnelDataset, stem: &str, title: &str) -> CmdResult {
        commands::write_funnel_outputs(data, self.dir, stem, Some(title.into()), self.ctx)?;
        self.note(&[
            format!("{stem}.csv"),
            format!("{stem}_envelopes.csv"),
            format!("{stem}.svg"),
            format!("{stem}.json"),
        ]);
        Ok(())
    }

    fn hurst(&mut self, b: &HurstBundle, stem: &str, title: &str) -> CmdResult {
        commands::write_hurst_outputs(b, self.dir, stem, Some(title.into()), self.ctx)?;
        self.note(&[
            format!("{stem}.json"),
            format!("{stem}_rs.csv"),
            format!("{stem}_rs.svg"),
        ]);
        Ok(())
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> CmdResult {
        out::write_bytes(&self.dir.join(name), bytes)?;
        self.files.push(name.into());
        Ok(())
    }
}

/// Independent stream for section `k`.
fn section_seed(base: u64, k: u64) -> u64 {
    scramble(base.wrapping_add(k))
}

fn synth_db(
    db: &DbSpec,
    condition: Condition,
    prefix: &str,
    seed: u64,
) -> CmdResult<Vec<StudyRecord>> {
    let mut s = SynthSpec::new(db.n_studies, MarkovParams::new(db.p11, db.p00)?, seed);
    s.n_min = db.n_min;
    s.n_max = db.n_max;
    s.censoring = db.censoring;
    s.condition = condition;
    s.id_prefix = prefix.into();
    Ok(io::synthesize(&s)?)
}

pub fn run(a: &ReportArgs, ctx: &Ctx) -> CmdResult {
    let spec: ReportSpec = match &a.spec {
        Some(path) => serde_json::from_slice(&out::read_input(path)?)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => ReportSpec::default(),
    };
    let user = match &a.records {
        Some(path) => Some(out::load_records(path)?),
        None => None,
    };
    let seed = match (a.seed.seed, spec.seed) {
        (Some(s), _) | (None, Some(s)) => s,
        _ => a.seed.resolve(),
    };
    out::ensure_dir(&a.out_dir)?;

    let mut bundle = Bundle {
        dir: &a.out_dir,
        ctx,
        files: Vec::new(),
    };
    let mut summary = Summary {
        seed,
        source: if user.is_some() {
            "records"
        } else {
            "synthetic"
        },
        ..Summary::default()
    };
    let mut sections = Vec::new();
    let mut io_failed = false;
    let mut record = |name: &'static str, r: CmdResult, sections: &mut Vec<SectionStatus>| {
        if let Err(Failure::Io(_)) = &r {
            io_failed = true;
        }
        sections.push(SectionStatus {
            name,
            ok: r.is_ok(),
            error: r.err().map(|e| e.to_string()),
        });
    };
    let config = |n_threshold| FunnelConfig {
        z0: spec.z0,
        target_coverage: spec.coverage,
        n_threshold,
        ..FunnelConfig::default()
    };

    // databases
    let (treatment, control) = match &user {
        Some(records) => {
            let split = |c: Condition| -> CmdResult<Vec<StudyRecord>> {
                let v: Vec<_> = records
                    .iter()
                    .filter(|r| r.condition == c)
                    .cloned()
                    .collect();
                if v.is_empty() {
                    Err(Failure::input(format!("no {c} records")))
                } else {
                    Ok(v)
                }
            };
            (split(Condition::Treatment), split(Condition::Control))
        }
        None => (
            synth_db(
                &spec.treatment,
                Condition::Treatment,
                "T",
                section_seed(seed, 1),
            ),
            synth_db(
                &spec.control,
                Condition::Control,
                "C",
                section_seed(seed, 2),
            ),
        ),
    };

    // censored treatment and control databases, merged
    let r = (|| -> CmdResult {
        let t = treatment.as_ref().map_err(clone_failure)?;
        let c = control.as_ref().map_err(clone_failure)?;
        let ts = domain::summarize(t)?;
        let cs = domain::summarize(c)?;
        let merged = domain::merge_and_average(&ts, &cs)?;
        if user.is_none() {
            let mut buf = Vec::new();
            io::write_records(
                &[t.as_slice(), c.as_slice()].concat(),
                &mut buf,
                ctx.precision,
            )?;
            bundle.bytes("records.csv", &buf)?;
        }
        let treatment_funnel = FunnelDataset::analyze(t.clone(), &config(100_000))?;
        bundle.funnel(&treatment_funnel, "funnel_treatment", "Treatment funnel")?;
        let control_funnel = FunnelDataset::analyze(c.clone(), &config(10_000))?;
        bundle.funnel(&control_funnel, "funnel_control", "Control funnel")?;
        summary.databases = Some(Databases {
            treatment: ts,
            control: cs,
            merged,
        });
        Ok(())
    })();
    record("databases", r, &mut sections);

    // variance factor of a Markov-biased database
    let r = (|| -> CmdResult {
        let records = match &user {
            Some(_) => treatment.as_ref().map_err(clone_failure)?.clone(),
            None => synth_db(
                &spec.markov,
                Condition::Treatment,
                "M",
                section_seed(seed, 3),
            )?,
        };
        let data = FunnelDataset::analyze(records, &config(100_000))?;
        bundle.funnel(&data, "funnel_markov", "Markov-biased funnel")?;
        let p = markov::self_transition_from_v(data.fit.v_factor)?;
        let empirical_c1 = if user.is_none() {
            let params = MarkovParams::new(spec.markov.p11, spec.markov.p00)?;
            let bits = markov::generate(&params, spec.correlation_bits, section_seed(seed, 4))?;
            Some(markov::empirical_correlation(&bits, 1)?)
        } else {
            None
        };
        summary.variance_fit = Some(VarianceFitRow {
            studies: data.summary.count,
            fitted_v: data.fit.v_factor,
            fraction_inside: data.fit.fraction_inside,
            at_lower_bound: data.fit.at_lower_bound,
            p,
            c1: 2.0 * p - 1.0,
            empirical_c1,
        });
        Ok(())
    })();
    record("variance_fit", r, &mut sections);

    // simulated funnels
    let r = (|| -> CmdResult {
        let sizes = markov::log_spaced_sizes(
            spec.panel_sizes.min_n,
            spec.panel_sizes.max_n,
            spec.panel_sizes.points,
        );
        let mut panels = Vec::new();
        for (i, &[p11, p00]) in spec.panels.iter().enumerate() {
            let params = MarkovParams::new(p11, p00)?;
            let theory = params.theory();
            let sim = markov::funnel_simulation(
                &params,
                &sizes,
                spec.panel_sizes.replications,
                section_seed(seed, 10 + i as u64),
            )?;
            let records = sim
                .points
                .iter()
                .enumerate()
                .map(|(j, p)| StudyRecord::binary(format!("P{j:05}"), p.n, p.proportion))
                .collect::<bitbias_core::Result<Vec<_>>>()?;
            let cfg = FunnelConfig {
                center: Some(theory.wp),
                ..config(100_000)
            };
            let data = FunnelDataset::analyze(records, &cfg)?;
            let letter = (b'a' + i as u8) as char;
            bundle.funnel(
                &data,
                &format!("panel_{letter}"),
                &format!("p11 = {p11}, p00 = {p00}"),
            )?;
            panels.push(Panel {
                p11,
                p00,
                theory,
                fraction_inside_v1: data.random_coverage.fraction_inside,
                fraction_inside_fitted: data.fitted_coverage.fraction_inside,
                fitted_v: data.fit.v_factor,
            });
        }
        summary.panels = Some(panels);
        Ok(())
    })();
    record("panels", r, &mut sections);

    // rescaled range
    let mut observed = Vec::new();
    let r = (|| -> CmdResult {
        let mut rows = Vec::new();
        let inputs = [("treatment", &treatment, 5u64), ("control", &control, 6)];
        for (label, db, k) in inputs {
            let records = db.as_ref().map_err(clone_failure)?;
            let series = SeriesSample::from_records(records);
            let b = commands::analyze_series(&series, &a.rs, section_seed(seed, k))?;
            bundle.hurst(&b, &format!("hurst_{label}"), &format!("R/S, {label}"))?;
            observed.push(LabeledH {
                label: label.into(),
                length: b.report.length,
                h: b.report.h,
                se: b.report.h_se,
            });
            rows.push(HurstRow {
                label: label.into(),
                length: b.report.length,
                h: b.report.h,
                h_se: b.report.h_se,
                c_h: b.report.c_h,
                shuffled_mean_h: b.shuffled.mean_h,
                shuffled_se: b.shuffled.se,
                iid_mean_h: b.iid.as_ref().map(|i| i.mean_h),
                iid_se: b.iid.as_ref().map(|i| i.se),
            });
        }
        summary.hurst = Some(rows);
        Ok(())
    })();
    record("hurst", r, &mut sections);

    let r = (|| -> CmdResult {
        let n = a.rs.baseline_count().max(2);
        let curve = hurst::baseline_curve(
            &spec.hurst_lengths,
            n,
            section_seed(seed, 7),
            &a.rs.options(),
        )?;
        let chart = svg::render_hurst_vs_length(
            &curve,
            &observed,
            &ChartOptions {
                title: Some("Hurst exponent versus length".into()),
                ..ChartOptions::default()
            },
        )?;
        bundle.bytes("hurst_vs_length.svg", chart.as_bytes())?;
        summary.hurst_curve = Some(curve);
        Ok(())
    })();
    record("hurst_curve", r, &mut sections);

    // batch means of a Markov sequence
    let r = (|| -> CmdResult {
        let b = &spec.batch;
        let bits = markov::generate(
            &MarkovParams::symmetric(b.p)?,
            b.n_bits,
            section_seed(seed, 8),
        )?;
        let means = markov::batch_means(&bits, b.batch_size)?;
        let opts = a.rs.options();
        let report = hurst::hurst(&means, &opts)?;
        let iid = hurst::iid_baseline(
            means.len(),
            a.rs.baseline_count().max(2),
            section_seed(seed, 9),
            &opts,
        )?;
        summary.batch_means = Some(BatchMeans {
            p: b.p,
            n_bits: b.n_bits,
            batch_size: b.batch_size,
            length: means.len(),
            h: report.h,
            h_se: report.h_se,
            iid_mean_h: iid.mean_h,
            iid_sd_h: iid.sd_h,
            within_iid_band: (report.h - iid.mean_h).abs() <= 2.0 * iid.sd_h,
        });
        Ok(())
    })();
    record("batch_means", r, &mut sections);

    let json = out::write_json(
        &a.out_dir.join("summary.json"),
        ReportKind::Bundle,
        &summary,
        ctx.precision,
    )?;
    bundle.files.push("summary.json".into());
    bundle.files.push("index.json".into());
    bundle.files.sort();
    let failed: Vec<String> = sections
        .iter()
        .filter(|s| !s.ok)
        .map(|s| format!("{}: {}", s.name, s.error.as_deref().unwrap_or("")))
        .collect();
    let index = Index {
        files: bundle.files,
        sections,
    };
    out::write_json(
        &a.out_dir.join("index.json"),
        ReportKind::Index,
        &index,
        ctx.precision,
    )?;

    if ctx.json {
        print!("{json}");
    } else {
        println!(
            "wrote {} files to {}",
            index.files.len(),
            a.out_dir.display()
        );
    }
    if failed.is_empty() {
        Ok(())
    } else if io_failed {
        Err(Failure::Io(format!(
            "failed sections: {}",
            failed.join("; ")
        )))
    } else {
        Err(Failure::input(format!(
            "failed sections: {}",
            failed.join("; ")
        )))
    }
}

fn clone_failure(f: &Failure) -> Failure {
    match f {
        Failure::Input(m) => Failure::Input(m.clone()),
        Failure::Io(m) => Failure::Io(m.clone()),
    }
}
