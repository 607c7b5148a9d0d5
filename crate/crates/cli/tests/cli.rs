use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

fn bitbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitbias"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = bitbias(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_theory_sidecar() {
    let dir = TempDir::new().unwrap();
    let bits = dir.path().join("bits.txt");
    ok(&[
        "simulate",
        "--p11",
        "0.83",
        "--p00",
        "0.83",
        "--n-bits",
        "20000",
        "--seed",
        "1",
        "--out",
        p(&bits),
    ]);
    let side = json(&dir.path().join("bits.txt.theory.json"));
    assert_eq!(side["kind"], "theory");
    assert!((side["v_factor"].as_f64().unwrap() - 2.21).abs() < 0.005);
    assert!((side["c1"].as_f64().unwrap() - 0.66).abs() < 1e-9);
    let text = fs::read_to_string(&bits).unwrap();
    assert_eq!(text.lines().count(), 20000);
    assert!(text.lines().all(|l| l == "0" || l == "1"));

    ok(&[
        "simulate",
        "--p11",
        "0.5",
        "--p00",
        "0.5",
        "--n-bits",
        "10",
        "--seed",
        "1",
        "--out",
        p(&bits),
    ]);
    let side = json(&dir.path().join("bits.txt.theory.json"));
    assert_eq!(side["v_factor"].as_f64().unwrap(), 1.0);
}

#[test]
fn simulate_packed_layout() {
    let dir = TempDir::new().unwrap();
    let text = dir.path().join("a.txt");
    let packed = dir.path().join("a.bin");
    ok(&[
        "simulate",
        "--p11",
        "0.7",
        "--p00",
        "0.6",
        "--n-bits",
        "1001",
        "--seed",
        "9",
        "--out",
        p(&text),
    ]);
    ok(&[
        "simulate",
        "--p11",
        "0.7",
        "--p00",
        "0.6",
        "--n-bits",
        "1001",
        "--seed",
        "9",
        "--packed",
        "--out",
        p(&packed),
    ]);
    let bits: Vec<u8> = fs::read_to_string(&text)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let bytes = fs::read(&packed).unwrap();
    assert_eq!(bytes.len(), 126);
    for (i, &b) in bits.iter().enumerate() {
        assert_eq!((bytes[i / 8] >> (7 - i % 8)) & 1, b, "bit {i}");
    }
    // padding bits are zero
    assert_eq!(bytes[125] & 0b0111_1111, 0);
}

#[test]
fn simulate_funnel_mode() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("f.csv");
    ok(&[
        "simulate",
        "--p11",
        "0.88",
        "--p00",
        "0.88",
        "--funnel",
        "--min-n",
        "100",
        "--max-n",
        "10000",
        "--points",
        "5",
        "--replications",
        "4",
        "--seed",
        "2",
        "--out",
        p(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "N,replication,proportion");
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let r = bitbias(&[
        "simulate",
        "--p11",
        "1",
        "--p00",
        "1",
        "--seed",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let r = bitbias(&[
        "simulate",
        "--p11",
        "1.5",
        "--p00",
        "0.5",
        "--seed",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn missing_seed_is_printed() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let r = ok(&[
        "simulate",
        "--p11",
        "0.5",
        "--p00",
        "0.5",
        "--n-bits",
        "10",
        "--out",
        p(&out),
    ]);
    let err = String::from_utf8_lossy(&r.stderr);
    let seed: u64 = err
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .expect("seed line")
        .parse()
        .unwrap();
    let first = fs::read(&out).unwrap();
    ok(&[
        "simulate",
        "--p11",
        "0.5",
        "--p00",
        "0.5",
        "--n-bits",
        "10",
        "--seed",
        &seed.to_string(),
        "--out",
        p(&out),
    ]);
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn synth_to_stdout_matches_file() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("db.csv");
    ok(&[
        "synth",
        "--n-studies",
        "50",
        "--p",
        "0.6",
        "--seed",
        "4",
        "--out",
        p(&file),
    ]);
    let piped = ok(&[
        "synth",
        "--n-studies",
        "50",
        "--p",
        "0.6",
        "--seed",
        "4",
        "--out",
        "-",
    ]);
    assert_eq!(piped.stdout, fs::read(&file).unwrap());
    let text = String::from_utf8(piped.stdout).unwrap();
    assert!(text.starts_with("study_id,condition,pub_year,pub_month,n_bits,kappa,p_obs\n"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn funnel_recovers_markov_broadening() {
    let dir = TempDir::new().unwrap();
    let db = dir.path().join("db.csv");
    let out = dir.path().join("out");
    ok(&["synth", "--p", "0.83", "--seed", "3", "--out", p(&db)]);
    let r = ok(&["--format", "json", "funnel", p(&db), "--out-dir", p(&out)]);
    let diag: Value = serde_json::from_slice(&r.stdout).unwrap();
    let v = diag["fit"]["v_factor"].as_f64().unwrap();
    assert!((v - 2.21).abs() < 0.35, "{v}");
    for f in [
        "funnel.csv",
        "funnel_envelopes.csv",
        "funnel.svg",
        "funnel.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("funnel.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "N,pi,condition,inside_flag");
}

#[test]
fn funnel_on_chance_data() {
    let dir = TempDir::new().unwrap();
    let db = dir.path().join("db.csv");
    let out = dir.path().join("out");
    ok(&["synth", "--seed", "8", "--out", p(&db)]);
    ok(&["funnel", p(&db), "--out-dir", p(&out)]);
    let d = json(&out.join("funnel.json"));
    let mean = d["summary"]["mean_pi"].as_f64().unwrap();
    let se = d["summary"]["mean_se"].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 3.0 * se, "{mean} ± {se}");
    let v = d["fit"]["v_factor"].as_f64().unwrap();
    assert!((v - 1.0).abs() < 0.2, "{v}");
}

#[test]
fn funnel_reads_stdin() {
    let dir = TempDir::new().unwrap();
    let db = ok(&["synth", "--n-studies", "60", "--seed", "5", "--out", "-"]).stdout;
    let out = dir.path().join("out");
    let mut child = Command::new(env!("CARGO_BIN_EXE_bitbias"))
        .args(["funnel", "-", "--out-dir", p(&out)])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(&db).unwrap();
    assert!(child.wait().unwrap().success());
    assert!(out.join("funnel.json").exists());
}

#[test]
fn bad_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let r = bitbias(&["funnel", p(&empty), "--out-dir", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("empty"));

    let header_only = dir.path().join("h.csv");
    fs::write(&header_only, "study_id,condition,pub_year,n_bits,p_obs\n").unwrap();
    assert_eq!(
        bitbias(&["funnel", p(&header_only), "--out-dir", p(&out)])
            .status
            .code(),
        Some(2)
    );

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "study_id,condition,pub_year,n_bits,p_obs\na,treatment,1990,100,1.4\n",
    )
    .unwrap();
    let r = bitbias(&["funnel", p(&bad), "--out-dir", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("row 2, column `p_obs`"));

    let missing = dir.path().join("nope.csv");
    assert_eq!(
        bitbias(&["funnel", p(&missing), "--out-dir", p(&out)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn hurst_on_series_and_records() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("s.txt");
    let values = bitbias_core::hurst::gaussian_noise(380, 77);
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    fs::write(&series, text).unwrap();
    let out = dir.path().join("h");
    ok(&[
        "hurst",
        "--series",
        p(&series),
        "--seed",
        "1",
        "--out-dir",
        p(&out),
    ]);
    let d = json(&out.join("hurst.json"));
    let h = d["report"]["h"].as_f64().unwrap();
    assert!((0.4..0.75).contains(&h), "{h}");
    assert_eq!(d["shuffled"]["hs"].as_array().unwrap().len(), 10);
    assert!(out.join("hurst_rs.svg").exists());
    assert!(out.join("hurst_rs.csv").exists());

    let db = dir.path().join("db.csv");
    ok(&[
        "synth",
        "--n-studies",
        "137",
        "--seed",
        "2",
        "--out",
        p(&db),
    ]);
    ok(&[
        "hurst",
        "--records",
        p(&db),
        "--shuffles",
        "4",
        "--seed",
        "1",
        "--out-dir",
        p(&out),
    ]);
    let d = json(&out.join("hurst.json"));
    assert_eq!(d["report"]["length"], 137);
    assert_eq!(d["shuffled"]["hs"].as_array().unwrap().len(), 4);
}

#[test]
fn hurst_on_persistent_series() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("fgn.txt");
    let values = bitbias_core::generate_fgn(0.8, 4096, 12).unwrap().values;
    fs::write(
        &series,
        values.iter().map(|v| format!("{v}\n")).collect::<String>(),
    )
    .unwrap();
    let out = dir.path().join("h");
    let r = ok(&[
        "--format",
        "json",
        "hurst",
        "--series",
        p(&series),
        "--seed",
        "1",
        "--out-dir",
        p(&out),
    ]);
    let d: Value = serde_json::from_slice(&r.stdout).unwrap();
    let h = d["report"]["h"].as_f64().unwrap();
    assert!((0.72..=0.88).contains(&h), "{h}");
}

#[test]
fn hurst_rejects_short_series() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("s.txt");
    fs::write(&series, "1\n2\n3\n4\n5\n").unwrap();
    let r = bitbias(&[
        "hurst",
        "--series",
        p(&series),
        "--seed",
        "1",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn report_bundle_and_index() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bundle");
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/demo/report.json");
    ok(&["report", "--spec", spec, "--out-dir", p(&out)]);
    let index = json(&out.join("index.json"));
    let files: Vec<&str> = index["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    for f in &files {
        assert!(out.join(f).exists(), "{f}");
    }
    let on_disk = fs::read_dir(&out).unwrap().count();
    assert_eq!(on_disk, files.len());
    assert!(index["sections"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["ok"] == true));
    let summary = json(&out.join("summary.json"));
    let t1 = &summary["databases"];
    assert!(t1["treatment"]["mean_pi"].as_f64().unwrap() > 0.5);
    assert!(t1["control"]["mean_pi"].as_f64().unwrap() < 0.5);
    assert_eq!(summary["panels"].as_array().unwrap().len(), 4);
}

#[test]
fn report_on_user_records() {
    let dir = TempDir::new().unwrap();
    let t = ok(&["synth", "--n-studies", "120", "--seed", "1", "--out", "-"]).stdout;
    let c = ok(&[
        "synth",
        "--n-studies",
        "80",
        "--condition",
        "control",
        "--seed",
        "2",
        "--out",
        "-",
    ])
    .stdout;
    let c = String::from_utf8(c).unwrap().replace("S0", "C0");
    let mut all = String::from_utf8(t).unwrap();
    all.extend(c.lines().skip(1).map(|l| format!("{l}\n")));
    let db = dir.path().join("db.csv");
    fs::write(&db, all).unwrap();
    let out = dir.path().join("bundle");
    ok(&[
        "report",
        "--records",
        p(&db),
        "--seed",
        "3",
        "--out-dir",
        p(&out),
    ]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["source"], "records");
    assert_eq!(summary["databases"]["merged"]["combined"]["count"], 200);
}

#[test]
fn report_unwritable_dir_exits_3() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let r = bitbias(&[
        "report",
        "--seed",
        "1",
        "--out-dir",
        p(&blocker.join("sub")),
    ]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn report_partial_failure_is_nonzero() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    // a tiny batch experiment cannot support R/S; the other sections still run
    fs::write(
        &spec,
        r#"{"seed": 1, "batch": {"p": 0.83, "n_bits": 500, "batch_size": 100}}"#,
    )
    .unwrap();
    let out = dir.path().join("bundle");
    let r = bitbias(&["report", "--spec", p(&spec), "--out-dir", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let index = json(&out.join("index.json"));
    let sections = index["sections"].as_array().unwrap();
    let failed: Vec<_> = sections.iter().filter(|s| s["ok"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["name"], "batch_means");
    assert!(out.join("funnel_treatment.svg").exists());
}
