use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rssi-doa"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn rssi-doa")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn col(table: &[Vec<String>], name: &str) -> usize {
    table[0].iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn error_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stderr).lines().filter(|l| l.starts_with("error: kind=")).map(str::to_string).collect()
}

fn circ_deg(a: f64, b: f64) -> f64 {
    (a - b + 540.0).rem_euclid(360.0) - 180.0
}

// four elements, gain 10 cos(psi - 90 m)
fn write_cos_patterns(dir: &Path) -> PathBuf {
    let mut text = String::from("sensor_id,k,re,im\n");
    for m in 0..4 {
        let phi = (90.0 * m as f64).to_radians();
        let (c, sn) = (5.0 * phi.cos(), 5.0 * phi.sin());
        text.push_str(&format!("s{m},-1,{c},{sn}\ns{m},0,0,0\ns{m},1,{c},{}\n", -sn));
    }
    let p = dir.join("patterns.csv");
    fs::write(&p, text).unwrap();
    p
}

fn write_observations(dir: &Path, psi_deg: f64, alpha: f64) -> PathBuf {
    let mut text = String::from("epoch_id,sensor_id,detected,rssi_dbm\n");
    for m in 0..4 {
        let y = alpha + 10.0 * (psi_deg - 90.0 * m as f64).to_radians().cos();
        text.push_str(&format!("1,s{m},1,{y}\n"));
    }
    for m in 0..4 {
        text.push_str(&format!("2,s{m},0,\n"));
    }
    let p = dir.join("obs.csv");
    fs::write(&p, text).unwrap();
    p
}

fn synth_walk(dir: &Path, seconds: &str) {
    ok(&["synth-walk", "--seed", "11", "--duration", seconds, "--out-dir", s(dir)]);
}

#[test]
fn exit_codes_and_error_lines() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_lines(&out).iter().any(|l| l.starts_with("error: kind=usage")));

    let out = run(&["simulate", "--runs", "0", "--out-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["sweep-threshold", "--gammas", "-120", "--patterns", "p", "--log", "l", "--truth", "t"]);
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("nope.csv");
    let out = run(&["fit-pattern", "--calibration", s(&missing), "--out-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    let lines = error_lines(&out);
    assert_eq!(lines.len(), 1, "{lines:?}");
    assert!(lines[0].starts_with("error: kind=io path=") && lines[0].contains(" msg=\""), "{}", lines[0]);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "sensor_id,angle_deg,mean_dbm,var_db2,n_samples\na,0,-50,1,10\na,x,-50,1,10\n").unwrap();
    let out = run(&["fit-pattern", "--calibration", s(&bad), "--out-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    let lines = error_lines(&out);
    assert!(lines[0].starts_with("error: kind=parse") && lines[0].contains(" line=3 "), "{}", lines[0]);

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_is_reproducible_and_replayable() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let args = |d: &Path| {
        vec![
            "--seed".to_string(),
            "4".into(),
            "simulate".into(),
            "--runs".into(),
            "1".into(),
            "--psi-true-step".into(),
            "30".into(),
            "--psi-step".into(),
            "5".into(),
            "--alpha-step".into(),
            "1".into(),
            "--out-dir".into(),
            d.display().to_string(),
        ]
    };
    let argv: Vec<String> = args(&a);
    ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    let argv: Vec<String> = args(&b);
    let mut with_threads = argv.iter().map(String::as_str).collect::<Vec<_>>();
    with_threads.extend(["--threads", "1"]);
    ok(&with_threads);
    for f in ["results.csv", "aggregate.csv", "per_psi.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // 4 powers x 2 methods
    assert_eq!(rows(&a.join("aggregate.csv")).len(), 9);
    // 12 bearings x 4 powers x 2 methods
    assert_eq!(rows(&a.join("results.csv")).len(), 1 + 12 * 4 * 2);

    ok(&["--manifest", s(&a.join("manifest.json")), "--out-dir", s(&c)]);
    for f in ["results.csv", "aggregate.csv", "per_psi.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap(), "{f}");
    }

    let m: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "simulate");
    assert_eq!(m["seed"], 4);
    let digests = m["outputs"].as_array().unwrap();
    assert_eq!(digests.len(), 3);

    let d = tmp.path().join("d");
    let out = run(&[
        "--seed",
        "5",
        "simulate",
        "--runs",
        "1",
        "--psi-true-step",
        "30",
        "--psi-step",
        "5",
        "--alpha-step",
        "1",
        "--out-dir",
        s(&d),
    ]);
    assert!(out.status.success());
    assert_ne!(fs::read(a.join("results.csv")).unwrap(), fs::read(d.join("results.csv")).unwrap());
}

#[test]
fn estimate_exports_surfaces_and_flags_empty_epochs() {
    let tmp = TempDir::new().unwrap();
    let patterns = write_cos_patterns(tmp.path());
    let obs = write_observations(tmp.path(), 30.0, -60.0);
    let out = tmp.path().join("est");
    ok(&[
        "--sigma",
        "0.5",
        "estimate",
        "--patterns",
        s(&patterns),
        "--observations",
        s(&obs),
        "--export-grid",
        "--out-dir",
        s(&out),
    ]);

    let grid = fs::read_to_string(out.join("grid_1_baseline.csv")).unwrap();
    assert_eq!(grid.lines().count(), 360 * 501 + 1);
    assert_eq!(fs::read_to_string(out.join("profile_1_proposed.csv")).unwrap().lines().count(), 361);

    let t = rows(&out.join("estimates.csv"));
    let (id, method, psi, alpha, deg) =
        (col(&t, "epoch_id"), col(&t, "method"), col(&t, "psi_deg"), col(&t, "alpha_dbm"), col(&t, "degenerate"));
    let find = |e: &str, m: &str| t.iter().skip(1).find(|r| r[id] == e && r[method] == m).unwrap().clone();
    let base = find("1", "baseline");
    // noiseless detections: least squares hits the truth on the grid
    assert!(circ_deg(base[psi].parse().unwrap(), 30.0).abs() < 1e-9);
    assert!((base[alpha].parse::<f64>().unwrap() + 60.0).abs() < 1e-9);
    assert_eq!(base[deg], "0");
    let prop = find("1", "proposed");
    assert!(circ_deg(prop[psi].parse().unwrap(), 30.0).abs() <= 1.0);
    assert_eq!(find("2", "baseline")[deg], "1");

    // a threshold far below every value: both costs share an argmin
    let low = tmp.path().join("low");
    ok(&[
        "--gamma",
        "-1000000",
        "estimate",
        "--patterns",
        s(&patterns),
        "--observations",
        s(&obs),
        "--out-dir",
        s(&low),
    ]);
    let t = rows(&low.join("estimates.csv"));
    let p = t.iter().find(|r| r[id] == "1" && r[method] == "proposed").unwrap();
    let b = t.iter().find(|r| r[id] == "1" && r[method] == "baseline").unwrap();
    assert_eq!((&p[psi], &p[alpha]), (&b[psi], &b[alpha]));
}

#[test]
fn fit_pattern_round_trip_and_residual() {
    let tmp = TempDir::new().unwrap();
    // order-2 content plus a 9th harmonic the order-7 fit cannot represent
    let ripple = 0.3;
    let mut text = String::from("sensor_id,angle_deg,mean_dbm,var_db2,n_samples\n");
    for k in 0..72 {
        let deg = -180.0 + 5.0 * k as f64;
        let th = deg.to_radians();
        let y = -50.0 + 6.0 * th.cos() - 2.0 * (2.0 * th).sin() + ripple * (9.0 * th).cos();
        text.push_str(&format!("rx,{deg},{y},4,20\n"));
    }
    let cal = tmp.path().join("cal.csv");
    fs::write(&cal, text).unwrap();
    let out = tmp.path().join("fit");
    ok(&["fit-pattern", "--calibration", s(&cal), "--out-dir", s(&out)]);

    let r = rows(&out.join("residuals.csv"));
    let rms: f64 = r[1][col(&r, "rms_db")].parse().unwrap();
    // the ripple is orthogonal to harmonics 0..7 on 72 even samples
    assert!((rms - ripple / 2f64.sqrt()).abs() < 1e-9, "{rms}");

    let p = rows(&out.join("patterns.csv"));
    assert_eq!(p.len(), 1 + 15);
    let coeff = |k: i32| {
        let row = p.iter().find(|r| r[1] == k.to_string()).unwrap();
        (row[2].parse::<f64>().unwrap(), row[3].parse::<f64>().unwrap())
    };
    let (c0, _) = coeff(0);
    let (c1, _) = coeff(1);
    let (_, s2) = coeff(2);
    assert!((c0 + 50.0).abs() < 1e-9 && (c1 - 3.0).abs() < 1e-9 && (s2 - 1.0).abs() < 1e-9);

    // too few angles for the order: a per-sensor error line and exit 1
    let few = tmp.path().join("few.csv");
    fs::write(&few, "sensor_id,angle_deg,mean_dbm,var_db2,n_samples\nrx,0,-50,1,5\nrx,90,-52,1,5\n").unwrap();
    let o = run(&["fit-pattern", "--calibration", s(&few), "--out-dir", s(&tmp.path().join("few"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(error_lines(&o).iter().any(|l| l.contains("sensor=\"rx\"")));
}

#[test]
fn track_with_and_without_truth() {
    let tmp = TempDir::new().unwrap();
    let walk = tmp.path().join("walk");
    synth_walk(&walk, "20");
    let common = |out: &Path| {
        vec![
            "track".to_string(),
            "--patterns".into(),
            walk.join("patterns.csv").display().to_string(),
            "--log".into(),
            walk.join("rssi_log.csv").display().to_string(),
            "--particles".into(),
            "300".into(),
            "--psi-step".into(),
            "2".into(),
            "--alpha-step".into(),
            "0.5".into(),
            "--out-dir".into(),
            out.display().to_string(),
        ]
    };
    let bare = tmp.path().join("bare");
    let argv = common(&bare);
    ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    let t = rows(&bare.join("track.csv"));
    assert_eq!(t[0], ["timestamp", "psi_pf_deg", "psi_ml_deg", "alpha_hat_dbm", "n_missed", "track_loss"]);
    assert_eq!(t.len(), 1 + 20);
    assert!(!bare.join("pd_timeline.csv").exists());

    let full = tmp.path().join("full");
    let mut argv = common(&full);
    argv.extend(["--truth".to_string(), walk.join("truth.csv").display().to_string()]);
    ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    let t = rows(&full.join("track.csv"));
    assert_eq!(&t[0][6..], ["truth_deg", "err_pf_deg", "err_ml_deg"]);
    assert!(full.join("pd_timeline.csv").exists() && full.join("track_summary.csv").exists());
    // same seed, same filter output
    let pf = col(&t, "psi_pf_deg");
    let b = rows(&bare.join("track.csv"));
    assert!(t.iter().zip(&b).skip(1).all(|(x, y)| x[pf] == y[pf]));
}

#[test]
fn threshold_sweep_reports_monotone_miss_rate() {
    let tmp = TempDir::new().unwrap();
    let walk = tmp.path().join("walk");
    synth_walk(&walk, "20");
    let out = tmp.path().join("sweep");
    ok(&[
        "sweep-threshold",
        "--patterns",
        s(&walk.join("patterns.csv")),
        "--log",
        s(&walk.join("rssi_log.csv")),
        "--truth",
        s(&walk.join("truth.csv")),
        "--gammas",
        "-95,-85,-75",
        "--particles",
        "200",
        "--psi-step",
        "2",
        "--alpha-step",
        "0.5",
        "--out-dir",
        s(&out),
    ]);
    let t = rows(&out.join("threshold_summary.csv"));
    assert_eq!(t.len(), 4);
    let md = col(&t, "pct_missed");
    let v: Vec<f64> = t[1..].iter().map(|r| r[md].parse().unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] >= w[0]), "{v:?}");
    for r in &t[1..] {
        let (lo, mid, hi) = (
            r[col(&t, "proposed_ci_lo")].parse::<f64>().unwrap(),
            r[col(&t, "proposed_rmse_deg")].parse::<f64>().unwrap(),
            r[col(&t, "proposed_ci_hi")].parse::<f64>().unwrap(),
        );
        assert!(lo <= mid && mid <= hi);
    }
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["command"]["sweep-threshold"]["pf_seeds"], 10);
}
