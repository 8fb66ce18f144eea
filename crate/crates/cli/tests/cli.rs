use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rayleigh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rayleigh")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn neutral_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rayleigh(&["neutral", "--profile", "sine", "--beta", "2", "--n", "2000", "--out-dir", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&dir.path().join("neutral.json"));
    let a = meta["results"]["alpha_sq"].as_f64().unwrap();
    assert!((a - (4.0 - std::f64::consts::PI.powi(2) / 4.0)).abs() < 1e-5);
    assert_eq!(meta["config"]["n"], 2000);
    assert_eq!(meta["config"]["profile"]["family"], "sine");
    assert!(meta["version"].is_string());
    let csv = std::fs::read_to_string(dir.path().join("neutral.csv")).unwrap();
    assert!(csv.starts_with("y,phi\n"));
    assert_eq!(csv.lines().count(), 2001);
}

#[test]
fn neutral_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let stable = rayleigh(&["neutral", "--profile", "sine", "--beta", "1", "--out-dir", d]);
    assert_eq!(code(&stable), 2);
    assert!(String::from_utf8_lossy(&stable.stderr).contains("no unstable neutral mode"));
    assert_eq!(code(&rayleigh(&["neutral", "--out-dir", d])), 1);
    assert_eq!(code(&rayleigh(&["neutral", "--profile", "parabola"])), 1);
    assert_eq!(code(&rayleigh(&["frobnicate"])), 1);
    assert_eq!(code(&rayleigh(&["neutral", "--profile", "rescaled", "--out-dir", d])), 1);
}

#[test]
fn config_file_keys_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out_dir = dir.path().join("out");
    std::fs::write(&cfg, format!(r#"{{"profile": {{"family": "sine", "beta": 1.6}}, "n": 400, "out_dir": {:?}}}"#, out_dir)).unwrap();
    let out = rayleigh(&["neutral", "--config", cfg.to_str().unwrap(), "--n", "800"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let meta = json(&out_dir.join("neutral.json"));
    assert_eq!(meta["config"]["n"], 800);
    assert_eq!(meta["config"]["profile"]["beta"], 1.6);

    std::fs::write(&cfg, r#"{"profile": {"family": "sine"}, "tolerence": 1e-3}"#).unwrap();
    let bad = rayleigh(&["neutral", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("tolerence"));
}

#[test]
fn lambda_for_two_betas_and_bad_tau() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for beta in [2.0f64, 1.6] {
        let out = rayleigh(&["lambda", "--profile", "sine", "--beta", &beta.to_string(), "--out-dir", d]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let imag = json(&dir.path().join("lambda.json"))["results"]["imag"].as_f64().unwrap();
        let target = std::f64::consts::PI * beta;
        assert!((imag - target).abs() <= 0.01 * target, "beta {beta}: {imag}");
    }
    let csv = std::fs::read_to_string(dir.path().join("lambda.csv")).unwrap();
    assert!(csv.starts_with("tau,re_gamma,im_gamma\n"));
    assert_eq!(code(&rayleigh(&["lambda", "--profile", "sine", "--tau-decades", "1", "--out-dir", d])), 1);
    assert_eq!(code(&rayleigh(&["lambda", "--profile", "sine", "--tau-decades", "9", "--out-dir", d])), 1);
}

#[test]
fn dispersion_parallel_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["dispersion", "--profile", "sine", "--n", "4096", "--eps-min", "1e-2", "--eps-max", "5e-2", "--eps-count", "4", "--no-warm-start"];
    let seq = dir.path().join("seq");
    let par = dir.path().join("par");
    let mut a: Vec<&str> = base.to_vec();
    a.extend(["--out-dir", seq.to_str().unwrap()]);
    assert_eq!(code(&rayleigh(&a)), 0);
    let mut b: Vec<&str> = base.to_vec();
    b.extend(["--out-dir", par.to_str().unwrap(), "--parallel"]);
    assert_eq!(code(&rayleigh(&b)), 0);
    let s = std::fs::read(seq.join("dispersion.csv")).unwrap();
    assert_eq!(s, std::fs::read(par.join("dispersion.csv")).unwrap());
    let text = String::from_utf8(s).unwrap();
    assert!(text.starts_with("eps,re_c,im_c,g_residual,winding,pencil_re_c,pencil_im_c,growth_rate,iterations,status\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")));
    let meta = json(&seq.join("dispersion.json"));
    assert_eq!(meta["results"]["all_certified"], true);
    assert!(meta["results"]["lambda"]["im"].as_f64().unwrap() > 6.2);
}

#[test]
fn uncertified_rows_are_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rayleigh(&["dispersion", "--profile", "sine", "--n", "1000", "--eps-min", "1e-3", "--eps-max", "2e-3", "--eps-count", "2", "--out-dir", d]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let meta = json(&dir.path().join("dispersion.json"));
    assert_eq!(meta["results"]["all_certified"], false);
    assert_eq!(meta["results"]["flagged_eps"].as_array().unwrap().len(), 2);
    assert_eq!(code(&rayleigh(&["dispersion", "--profile", "sheet", "--out-dir", d])), 1);
}

#[test]
fn sheet_and_glue_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rayleigh(&["sheet", "--k-list", "8", "--out-dir", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sheet_scan.csv")).unwrap();
    assert!(csv.starts_with("k,alpha_tilde,alpha_ratio,eps,im_c_channel,im_c_glued,growth_rate,psi_h1,phiout_z,residual,status\n"));
    let meta = json(&dir.path().join("sheet_scan.json"));
    assert_eq!(meta["results"]["coupling"]["check"], "PASS");
    assert_eq!(meta["results"]["L"], 32.0);

    let small = rayleigh(&["sheet", "--k-list", "2", "--out-dir", d]);
    assert_eq!(code(&small), 0);
    let csv = std::fs::read_to_string(dir.path().join("sheet_scan.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains("failed"));

    let glue = rayleigh(&["glue", "--k", "8", "--out-dir", d]);
    assert_eq!(code(&glue), 0, "{}", String::from_utf8_lossy(&glue.stderr));
    let meta = json(&dir.path().join("glue.json"));
    assert_eq!(meta["results"]["winding"], 1);
    assert!(meta["results"]["c"]["im"].as_f64().unwrap() > 0.0);
    assert_eq!(code(&rayleigh(&["glue", "--profile", "sine", "--out-dir", d])), 1);
}

#[test]
fn validate_exit_codes_and_determinism() {
    let a = rayleigh(&["validate", "--quick"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    let b = rayleigh(&["validate", "--quick"]);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 20);

    let faulty = rayleigh(&["validate", "--quick", "--inject-lambda-sign-flip"]);
    assert_eq!(code(&faulty), 3);
    let table = String::from_utf8(faulty.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("FAIL") && l.contains("instability sign") && l.contains("Im lambda")));
}
