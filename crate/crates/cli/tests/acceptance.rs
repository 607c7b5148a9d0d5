//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when
//! any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};

use bitbias_core::domain::p_obs_from_pi;
use bitbias_core::funnel::{envelope_n, envelope_pi, EnvelopeSpec, FunnelConfig, FunnelDataset};
use bitbias_core::hurst::{iid_baseline, HurstOptions};
use bitbias_core::io::{synthesize, Censoring, SynthSpec};
use bitbias_core::rng::seeded;
use bitbias_core::{
    batch_means, c_h, coverage, effect_size, empirical_correlation, generate, generate_fgn, hurst,
    merge_and_average, pi_from_z, randomized_baseline, rescale, rs_statistic,
    self_transition_from_v, standard_error, summarize, wp_estimate, z_score, MarkovParams,
    SeriesSample,
};
use rand::Rng;

const SEED: u64 = 1;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn panels() -> Outcome {
    let cases = [
        ((0.12, 0.12), None, 0.37),
        ((0.5, 0.5), None, 1.0),
        ((0.88, 0.88), None, 2.71),
        ((0.88, 0.5), Some(0.807), 1.49),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((p11, p00), wp, v) in cases {
        let t = MarkovParams::new(p11, p00).unwrap().theory();
        pass &= within(t.v_factor, v, 0.005);
        if let Some(wp) = wp {
            pass &= within(t.wp, wp, 0.005);
        }
        parts.push(format!("({p11},{p00}) wp={:.4} V={:.4}", t.wp, t.v_factor));
    }
    outcome(pass, parts.join("; "))
}

fn variance_fit() -> Outcome {
    let params = MarkovParams::symmetric(0.83).unwrap();
    let records = synthesize(&SynthSpec::new(380, params, SEED)).unwrap();
    let data = FunnelDataset::analyze(records, &FunnelConfig::default()).unwrap();
    let v = data.fit.v_factor;
    let p = self_transition_from_v(v).unwrap();
    let bits = generate(&params, 1_000_000, SEED).unwrap();
    let c1 = empirical_correlation(&bits, 1).unwrap();
    outcome(
        within(v, 2.21, 0.15) && within(p, 0.83, 0.02) && within(c1, 0.66, 0.01),
        format!("V={v:.4} (2.21±0.15) p={p:.4} (0.83±0.02) C1={c1:.4} (0.66±0.01)"),
    )
}

fn chance_coverage() -> Outcome {
    let spec = EnvelopeSpec::random();
    let fractions: Vec<f64> = (0..100u64)
        .map(|i| {
            let db = synthesize(&SynthSpec::new(380, MarkovParams::fair(), SEED + i)).unwrap();
            coverage(&db, &spec).unwrap().fraction_inside
        })
        .collect();
    let m = fractions.iter().sum::<f64>() / fractions.len() as f64;
    outcome(
        within(m, 0.95, 0.01),
        format!("mean inside-fraction {m:.4} (0.95±0.01)"),
    )
}

fn iid_hurst() -> Outcome {
    let opts = HurstOptions::default();
    let h380 = iid_baseline(380, 10, SEED, &opts).unwrap().mean_h;
    let h137 = iid_baseline(137, 10, SEED, &opts).unwrap().mean_h;
    outcome(
        within(h380, 0.56, 0.05) && within(h137, 0.64, 0.09),
        format!("H(380)={h380:.4} (0.56±0.05) H(137)={h137:.4} (0.64±0.09)"),
    )
}

fn spot_values() -> Outcome {
    let a = c_h(0.70).unwrap();
    let b = c_h(0.68).unwrap();
    let z = c_h(0.5).unwrap();
    outcome(
        within(a, 0.3195, 5e-5) && within(b, 0.2834, 5e-5) && z == 0.0,
        format!("C_H(0.70)={a:.6} C_H(0.68)={b:.6} C_H(0.5)={z}"),
    )
}

fn shuffle_control() -> Outcome {
    let opts = HurstOptions::default();
    let full = generate_fgn(0.8, 512, SEED).unwrap().values;
    let series = SeriesSample::new(full[..380].to_vec());
    let h = hurst(&series, &opts).unwrap().h;
    let shuffled = randomized_baseline(&series, 10, SEED, &opts).unwrap();
    let iid = iid_baseline(380, 10, SEED + 1, &opts).unwrap();
    let combined = (shuffled.se.powi(2) + iid.se.powi(2)).sqrt();
    let gap = (shuffled.mean_h - iid.mean_h).abs();
    // the i.i.d. band at length 380 is 0.56 ± 0.05
    let upper = 0.61f64.max(iid.mean_h + 2.0 * combined);
    outcome(
        gap <= 2.0 * combined && h > upper,
        format!(
            "H={h:.4} (> {upper:.4}) shuffled={:.4} iid={:.4} gap={gap:.4} (<= {:.4})",
            shuffled.mean_h,
            iid.mean_h,
            2.0 * combined
        ),
    )
}

fn batch_decay() -> Outcome {
    let opts = HurstOptions::default();
    let bits = generate(&MarkovParams::symmetric(0.83).unwrap(), 1_000_000, SEED).unwrap();
    let means = batch_means(&bits, 100).unwrap();
    let h = hurst(&means, &opts).unwrap().h;
    let iid = iid_baseline(means.len(), 10, SEED + 1, &opts).unwrap();
    let (lo, hi) = (iid.mean_h - 2.0 * iid.sd_h, iid.mean_h + 2.0 * iid.sd_h);
    outcome(
        (lo..=hi).contains(&h),
        format!(
            "H={h:.4} over {} means, i.i.d. band [{lo:.4}, {hi:.4}]",
            means.len()
        ),
    )
}

fn censoring() -> Outcome {
    let fair = MarkovParams::fair();
    let t =
        synthesize(&SynthSpec::new(380, fair, SEED).with_censoring(Censoring::below(0.5, 100_000)))
            .unwrap();
    let c = synthesize(
        &SynthSpec::new(137, fair, SEED + 1).with_censoring(Censoring::above(0.5, 10_000)),
    )
    .unwrap();
    let ts = summarize(&t).unwrap();
    let cs = summarize(&c).unwrap();
    let wp = wp_estimate(&t, 0.10).unwrap();
    let merged = merge_and_average(&ts, &cs).unwrap();
    let m = &merged.combined;
    let pass = ts.mean_pi > 0.5
        && within(wp.wp, 0.5, 3.0 * wp.se)
        && cs.mean_pi < 0.5
        && within(m.mean_pi, 0.5, 3.0 * m.mean_se);
    outcome(
        pass,
        format!(
            "treatment {:.4} (wp {:.5}±{:.5}) control {:.4} merged {:.5}±{:.5}",
            ts.mean_pi, wp.wp, wp.se, cs.mean_pi, m.mean_pi, m.mean_se
        ),
    )
}

fn properties() -> Outcome {
    let mut rng = seeded(SEED);
    let mut failures = Vec::new();
    for _ in 0..2000 {
        let spec = EnvelopeSpec::new(
            rng.random_range(1.0..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..0.7),
        )
        .unwrap();
        let n: u64 = rng.random_range(100..100_000_000);
        let (lo, hi) = envelope_pi(&spec, n);
        for edge in [lo, hi] {
            if edge > 0.0 && edge < 1.0 {
                let back = envelope_n(&spec, edge).unwrap();
                if (back - n as f64).abs() / n as f64 > 1e-9 {
                    failures.push(format!("envelope N={n} -> {back}"));
                }
            }
        }

        let p: f64 = rng.random_range(0.001..0.999);
        let kappa = rng.random_range(2..10);
        let back = p_obs_from_pi(effect_size(p, kappa).unwrap(), kappa).unwrap();
        if (back - p).abs() > 1e-9 {
            failures.push(format!("effect size p={p}"));
        }
        let pi: f64 = rng.random_range(0.2..0.8);
        let se = standard_error(pi, pi, n).unwrap();
        let again = pi_from_z(z_score(pi, se).unwrap(), n, pi).unwrap();
        if (again - pi).abs() > 1e-9 {
            failures.push(format!("z round trip pi={pi}"));
        }

        let len = rng.random_range(8..200);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let r = rescale(&values).unwrap();
        if r.last().unwrap().abs() > 1e-9 * len as f64 * 10.0 {
            failures.push("rescale terminal value".into());
        }
        let (a, b) = (
            rng.random_range(0.01..100.0),
            rng.random_range(-100.0..100.0),
        );
        let moved: Vec<f64> = values.iter().map(|x| a * x + b).collect();
        let (r0, r1) = (
            rs_statistic(&values).unwrap(),
            rs_statistic(&moved).unwrap(),
        );
        if (r0 - r1).abs() > 1e-8 * r0.max(1.0) {
            failures.push(format!("R/S affine {r0} vs {r1}"));
        }
    }
    let reruns = match determinism() {
        Ok(n) => format!("{n} subcommand runs byte-identical"),
        Err(e) => {
            failures.push(e.clone());
            e
        }
    };
    let detail = if failures.is_empty() {
        format!("2000 random cases clean; {reruns}")
    } else {
        format!("{} failures, first: {}", failures.len(), failures[0])
    };
    outcome(failures.is_empty(), detail)
}

fn run(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bitbias"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

/// Runs every subcommand twice in fresh directories and compares outputs.
fn determinism() -> Result<usize, String> {
    let demo = concat!(env!("CARGO_MANIFEST_DIR"), "/demo/report.json");
    let script: Vec<Vec<&str>> = vec![
        vec![
            "simulate", "--p11", "0.83", "--p00", "0.83", "--n-bits", "50000", "--seed", "5",
            "--out", "bits.txt",
        ],
        vec![
            "simulate", "--p11", "0.88", "--p00", "0.5", "--n-bits", "50000", "--seed", "5",
            "--packed", "--out", "bits.bin",
        ],
        vec![
            "simulate",
            "--p11",
            "0.88",
            "--p00",
            "0.88",
            "--funnel",
            "--max-n",
            "100000",
            "--seed",
            "5",
            "--out",
            "funnel_sim.csv",
        ],
        vec!["synth", "--p", "0.83", "--seed", "5", "--out", "db.csv"],
        vec![
            "synth",
            "--censor-below",
            "0.5",
            "--seed",
            "6",
            "--out",
            "chance.csv",
        ],
        vec!["funnel", "db.csv", "--out-dir", "funnel"],
        vec![
            "hurst",
            "--records",
            "chance.csv",
            "--seed",
            "5",
            "--out-dir",
            "hurst",
        ],
        vec![
            "hurst",
            "--series",
            "bits.txt",
            "--batch-size",
            "100",
            "--seed",
            "5",
            "--out-dir",
            "batch",
        ],
        vec![
            "report",
            "--spec",
            demo,
            "--seed",
            "5",
            "--out-dir",
            "report",
        ],
    ];
    let mut snaps = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
        for args in &script {
            run(dir.path(), args)?;
        }
        snaps.push(snapshot(dir.path()));
    }
    if snaps[0] != snaps[1] {
        let diff = snaps[0]
            .iter()
            .zip(&snaps[1])
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.0.clone())
            .unwrap_or_else(|| "file list".into());
        return Err(format!("rerun differs at {diff}"));
    }
    Ok(script.len())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("closed-form panel values", panels),
        ("variance-factor pipeline", variance_fit),
        ("chance coverage of the V=1 envelope", chance_coverage),
        ("i.i.d. Hurst baselines", iid_hurst),
        ("C_H spot values", spot_values),
        ("shuffle control on persistent noise", shuffle_control),
        ("batch-means decay", batch_decay),
        ("censoring direction and merge", censoring),
        ("property suites and determinism", properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
