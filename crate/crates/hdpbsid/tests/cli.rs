use std::path::Path;
use std::process::{Command, Output};

use hdpbsid::formats::{read_model_json, write_signal_csv};
use hdpbsid_core::hermite::SampledSignal;
use hdpbsid_core::lti::{eigenvalues, simulate_noise_free, sine_sweep, uniform_grid, StateSpaceModel, SweepSpec};
use nalgebra::DMatrix;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdpbsid"))
        .args(args)
        .output()
        .expect("spawn hdpbsid")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn plant() -> StateSpaceModel {
    StateSpaceModel::new(
        DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 0.0, -4.0]),
        DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 2.0, 1.0]),
        DMatrix::zeros(2, 1),
        None,
    )
    .unwrap()
}

const PLANT_JSON: &str = r#"{"A": [[-2, 1], [0, -4]], "B": [[0.5], [1]], "C": [[1, 4], [2, 1]], "D": [[0], [0]]}"#;

fn sweep_data(dir: &Path) -> (SampledSignal, SampledSignal) {
    let t = uniform_grid(10.0, 2000);
    let u = sine_sweep(&SweepSpec::new(10.0, 0.0, 8.0).unwrap(), &t).unwrap();
    let y = simulate_noise_free(&plant(), &u).unwrap();
    write_signal_csv(&dir.join("u.csv"), &u).unwrap();
    write_signal_csv(&dir.join("y.csv"), &y).unwrap();
    (u, y)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const IDENT_CFG: &str = r#"{"ident": {"n_max": 250, "beta": 3, "gamma": 20, "p": 10, "f": 10, "order": 2}}"#;

#[test]
fn identify_writes_results() {
    let dir = TempDir::new().unwrap();
    sweep_data(dir.path());
    let cfg = write(dir.path(), "cfg.json", IDENT_CFG);
    let out = dir.path().join("out");
    let o = bin(&[
        "identify", "--config", &cfg,
        "--u", s(&dir.path().join("u.csv")),
        "--y", s(&dir.path().join("y.csv")),
        "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model = read_model_json(&out.join("model.json")).unwrap();
    let mut eig = eigenvalues(&model);
    eig.sort_by(|a, b| a.re.total_cmp(&b.re));
    assert!((eig[0].re + 4.0).abs() < 3e-2 && (eig[1].re + 2.0).abs() < 3e-2, "{eig:?}");
    let sv = std::fs::read_to_string(out.join("singular_values.csv")).unwrap();
    assert!(sv.starts_with("index,singular_value\n"));
    assert_eq!(sv.lines().count(), 1 + 10 * 2);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["order"], 2);
    assert_eq!(diag["innovation_identifiable"], serde_json::Value::Bool(true));
}

#[test]
fn combined_data_file_splits_on_inputs() {
    let dir = TempDir::new().unwrap();
    let (u, y) = sweep_data(dir.path());
    let mut values = DMatrix::zeros(3, u.len());
    values.rows_mut(0, 1).copy_from(u.values());
    values.rows_mut(1, 2).copy_from(y.values());
    let both = SampledSignal::new(u.times().to_vec(), values).unwrap();
    write_signal_csv(&dir.path().join("uy.csv"), &both).unwrap();
    let cfg = write(dir.path(), "cfg.json", IDENT_CFG);
    let out = dir.path().join("a");
    let o = bin(&["identify", "--config", &cfg, "--data", s(&dir.path().join("uy.csv")), "--inputs", "1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_model_json(&out.join("model.json")).unwrap().n_u(), 1);
    let o = bin(&["identify", "--config", &cfg, "--data", s(&dir.path().join("uy.csv")), "--inputs", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_csv_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", IDENT_CFG);
    let empty = write(dir.path(), "e.csv", "");
    let o = bin(&["identify", "--config", &cfg, "--u", &empty, "--y", &empty]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn mismatched_windows_exit_with_two() {
    let dir = TempDir::new().unwrap();
    sweep_data(dir.path());
    let short = uniform_grid(9.0, 1800);
    let y = SampledSignal::from_fn(short, |t| t.sin()).unwrap();
    write_signal_csv(&dir.path().join("y9.csv"), &y).unwrap();
    let cfg = write(dir.path(), "cfg.json", IDENT_CFG);
    let o = bin(&["identify", "--config", &cfg, "--u", s(&dir.path().join("u.csv")), "--y", s(&dir.path().join("y9.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("first and last"));
}

#[test]
fn malformed_inputs_report_lines() {
    let dir = TempDir::new().unwrap();
    let bad_cfg = write(dir.path(), "bad.json", "{\n  \"ident\": {\n    \"n_max\": 250,\n    \"beta\": ,\n  }\n}\n");
    let csv = write(dir.path(), "d.csv", "t,ch0,ch1\n0,1,2\n1,2,oops\n");
    let o = bin(&["identify", "--config", &bad_cfg, "--data", &csv]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    let cfg = write(dir.path(), "cfg.json", IDENT_CFG);
    let o = bin(&["identify", "--config", &cfg, "--data", &csv]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = bin(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stage_failures_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let t = uniform_grid(10.0, 2000);
    let u = sine_sweep(&SweepSpec::new(10.0, 0.0, 8.0).unwrap(), &t).unwrap();
    let y = SampledSignal::new(t, DMatrix::zeros(2, 2000)).unwrap();
    write_signal_csv(&dir.path().join("u.csv"), &u).unwrap();
    write_signal_csv(&dir.path().join("y.csv"), &y).unwrap();
    let cfg = write(dir.path(), "cfg.json", IDENT_CFG);
    let o = bin(&["identify", "--config", &cfg, "--u", s(&dir.path().join("u.csv")), "--y", s(&dir.path().join("y.csv")), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage"));
}

fn campaign_cfg(dir: &Path, noise: &str, trials: usize) -> String {
    write(dir, "plant.json", PLANT_JSON);
    let text = format!(
        r#"{{
  "model": "plant.json",
  "sweep": {{"duration": 10, "f_start": 0, "f_end": 8}},
  "samples": 600,
  "noise": {noise},
  "ident": {{"n_max": 120, "beta": 3, "gamma": 20, "order": 2}},
  "trials": {trials},
  "seed": 5
}}"#
    );
    write(dir, "mc.json", &text)
}

#[test]
fn montecarlo_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = campaign_cfg(dir.path(), "[40, 20]", 4);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bin(&["montecarlo", "--config", &cfg, "--out", s(&a), "--jobs", "1"]).status.success());
    assert!(bin(&["montecarlo", "--config", &cfg, "--out", s(&b), "--jobs", "3"]).status.success());
    for level in ["snr_40db", "snr_20db"] {
        for f in ["stats.csv", "eigs.csv", "bode_grid.csv"] {
            let x = std::fs::read(a.join(level).join(f)).unwrap();
            let y = std::fs::read(b.join(level).join(f)).unwrap();
            assert!(x == y, "{level}/{f} differs");
        }
    }
    let stats = std::fs::read_to_string(a.join("snr_40db/stats.csv")).unwrap();
    assert!(stats.starts_with("eigenvalue_index,bias,std,failures,"));
    assert_eq!(stats.lines().count(), 3);
    // 200 frequencies x 2 outputs x (truth + 4 trials)
    let bode = std::fs::read_to_string(a.join("snr_40db/bode_grid.csv")).unwrap();
    assert_eq!(bode.lines().count(), 1 + 200 * 2 * 5);
    let c = dir.path().join("c");
    assert!(bin(&["montecarlo", "--config", &cfg, "--out", s(&c), "--seed", "6"]).status.success());
    assert_ne!(
        std::fs::read(a.join("snr_40db/stats.csv")).unwrap(),
        std::fs::read(c.join("snr_40db/stats.csv")).unwrap()
    );
}

#[test]
fn single_noise_free_trial_flags_std() {
    let dir = TempDir::new().unwrap();
    let cfg = campaign_cfg(dir.path(), r#"["none"]"#, 1);
    let out = dir.path().join("o");
    let o = bin(&["montecarlo", "--config", &cfg, "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("noise_free/stats.csv")).unwrap();
    let eigs = std::fs::read_to_string(out.join("noise_free/eigs.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[2].parse::<f64>().unwrap(), &0.0);
        assert_eq!(&rec[4], "false");
        // bias is the single trial's error for this eigenvalue
        let bias: f64 = rec[1].parse().unwrap();
        let k = &rec[0];
        let err: f64 = eigs
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|f| f[3] == k)
            .unwrap()[6]
            .parse()
            .unwrap();
        assert!((bias - err).abs() < 1e-12);
    }
}

#[test]
fn reconstruct_check_reports_errors() {
    let dir = TempDir::new().unwrap();
    sweep_data(dir.path());
    let o = bin(&["reconstruct-check", "--data", s(&dir.path().join("u.csv")), "--n-max", "10,30,50,250", "--out", s(dir.path())]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let errs: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(errs.len(), 4);
    assert!(errs[0] >= errs[2] && errs[2] >= errs[3], "{errs:?}");
    assert!(errs[1] > 0.5, "{errs:?}");
    assert_eq!(std::fs::read_to_string(dir.path().join("reconstruct_check.csv")).unwrap(), text);

    let zero = SampledSignal::new(uniform_grid(1.0, 20), DMatrix::zeros(1, 20)).unwrap();
    write_signal_csv(&dir.path().join("z.csv"), &zero).unwrap();
    let o = bin(&["reconstruct-check", "--data", s(&dir.path().join("z.csv")), "--n-max", "5,15"]);
    for l in String::from_utf8(o.stdout).unwrap().lines().skip(1) {
        assert_eq!(l.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn bandlimited_sweep_option_changes_the_input() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "plant.json", PLANT_JSON);
    let cfg = hdpbsid::config::ExperimentConfig::parse(
        &format!(
            r#"{{"model": {PLANT_JSON}, "sweep": {{"duration": 10, "f_start": 0, "f_end": 8}}, "samples": 400,
                "bandlimit_eta": 60, "ident": {{"n_max": 60, "beta": 3, "gamma": 20}}}}"#
        ),
        &dir.path().join("x.json"),
    )
    .unwrap();
    let c = hdpbsid::campaign::Campaign::from_config(&cfg, Path::new("x.json")).unwrap();
    let raw = sine_sweep(&SweepSpec::new(10.0, 0.0, 8.0).unwrap(), c.input.times()).unwrap();
    assert!((c.input.values() - raw.values()).amax() > 1e-2);
    let truth = eigenvalues(&c.truth);
    assert!(truth.iter().any(|z| (z - nalgebra::Complex::new(-4.0, 0.0)).norm() < 1e-12));
}
