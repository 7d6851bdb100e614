use std::path::Path;
use std::process::{Command, Output};

fn mfmd(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfmd"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("MFMD_THREADS")
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn epsilons_over_all_presets() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmd(&["epsilons", "--threads", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("epsilons.csv")).unwrap();
    assert!(csv.starts_with("# command = epsilons\n"));
    assert!(csv.contains("\ncase,beta,c,delta,q1,eps1_sq,eps2_sq,gamma_lambda\n"));
    let rows = data_rows(&csv);
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["A", "B", "C", "D", "E"]);
    for (row, want) in rows.iter().zip([0.0002, 0.43, 0.46, 0.30, 0.16]) {
        let q1: f64 = row[4].parse().unwrap();
        assert!((q1 - want).abs() <= 0.005, "case {}: q1 = {q1}", row[0]);
    }
}

#[test]
fn correlation_run_reports_running_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfmd(&["correlation", "--case", "E", "--M", "100", "--K", "600", "--tau-max", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let corr = std::fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
    assert!(corr.contains("\ntau,S_qm,S_mf,S_es,S_gs\n"));
    assert_eq!(data_rows(&corr).len(), 21);
    let errs = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(errs.contains("# green_kubo_qm = "));
    let last = data_rows(&errs).pop().unwrap();
    assert_eq!(last[0].parse::<f64>().unwrap(), 1.0);
    let mf: f64 = last[1].parse().unwrap();
    assert!((mf - 0.1270).abs() < 0.01, "{mf}");
}

#[test]
fn identical_configuration_gives_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["gibbs", "--case", "E", "--masses", "1000", "--n-paths", "3000", "--n-steps", "32", "--seed", "5", "--threads", "2"];
    assert!(mfmd(&args, a.path()).status.success());
    assert!(mfmd(&args, b.path()).status.success());
    let x = std::fs::read(a.path().join("gibbs.csv")).unwrap();
    let y = std::fs::read(b.path().join("gibbs.csv")).unwrap();
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.contains("# threads = 2\n"));
    let rows = data_rows(&text);
    let entries: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(entries, ["11", "12", "21", "22"]);
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "command = convergence\ncase = E\nmasses = 100,200,400\ngrid.K = 300\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mfmd"))
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(dir.path())
        .env("MFMD_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.contains("# grid.K = 300\n"));
    assert!(csv.contains("# threads = 3\n"));
    assert!(csv.contains("\nM,l1_error\n"));
    let slope_line = csv.lines().last().unwrap();
    let slope: f64 = slope_line.strip_prefix("# slope=").unwrap().parse().unwrap();
    assert!(slope < -0.8 && slope > -1.2, "{slope}");
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let neg = mfmd(&["correlation", "--case", "E", "--beta", "-1"], dir.path());
    assert_eq!(neg.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&neg.stderr).contains("beta"));

    let missing = mfmd(&[], dir.path());
    assert_eq!(missing.status.code(), Some(1));

    let bad_file = dir.path().join("bad.cfg");
    std::fs::write(&bad_file, "command = density\ngrid.K = many\ncase = D\n").unwrap();
    let o = mfmd(&["--config", bad_file.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    // the ground-state weight is far from negligible at x = +-1
    let small = mfmd(&["density", "--case", "D", "--x-min", "-1", "--x-max", "1", "--K", "100"], dir.path());
    assert_eq!(small.status.code(), Some(3), "{}", String::from_utf8_lossy(&small.stderr));

    let help = mfmd(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("--scalar-variants"));
}
