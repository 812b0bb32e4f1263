use std::path::Path;
use std::process::{Command, Output};

fn spinbath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbath"))
        .args(args)
        .env_remove("SPINBATH_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

const THREE_QUBIT_TOML: &str = "\
name = \"pair\"
center_gamma_hz = 0.0

[[groups]]
count = 2
j_center_hz = 3.0
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn analytic_csv_shape_and_determinism() {
    let args = ["analytic", "--preset", "tes", "--tmax", "0.01"];
    let first = spinbath(&args);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t_s,re,im");
    assert_eq!(lines[1], "0,1,0");
    assert_eq!(lines.len(), 12);
    assert_eq!(spinbath(&args).stdout, first.stdout);
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fid.csv");
    let out = spinbath(&["analytic", "--preset", "tes-virtual-13c", "--tmax", "0.05", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let piped = spinbath(&["analytic", "--preset", "tes-virtual-13c", "--tmax", "0.05"]);
    assert_eq!(std::fs::read(&path).unwrap(), piped.stdout);
}

#[test]
fn config_file_drives_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "pair.toml", THREE_QUBIT_TOML);
    let out = spinbath(&["oracle", "--config", &config, "--tmax", "0.1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let last = text.lines().last().unwrap();
    let re: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    let want = (std::f64::consts::TAU * 3.0 * 0.1 / 2.0).cos().powi(2);
    assert!((re - want).abs() < 1e-8, "{re} vs {want}");
}

#[test]
fn compare_passes_and_fails_on_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "pair.toml", THREE_QUBIT_TOML);
    let pass = spinbath(&["compare", "--config", &config, "--tmax", "0.5"]);
    assert_eq!(code(&pass), 0, "{}", stdout(&pass));
    assert!(stdout(&pass).contains("result = pass"));
    let fail = spinbath(&["compare", "--preset", "tes", "--b", "analytic", "--b-preset", "tes-virtual-13c", "--tmax", "3"]);
    assert_eq!(code(&fail), 1);
    let report = stdout(&fail);
    assert!(report.contains("result = fail"));
    assert!(report.contains("recursion_metric[0.5, 3] a = 0.99077"), "{report}");
}

#[test]
fn compare_is_the_same_with_threads() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "pair.toml", THREE_QUBIT_TOML);
    let args = ["compare", "--config", &config, "--tmax", "0.2"];
    let serial = spinbath(&args);
    let parallel = Command::new(env!("CARGO_BIN_EXE_spinbath"))
        .args(args)
        .env("SPINBATH_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&parallel), 0);
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn report_round_trips_the_system() {
    let out = spinbath(&["report", "--preset", "tes"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("analytic_first_zero_s = 0.078"));
    assert!(text.contains("total_qubits = 21"));
    let system = text.split("# summary").next().unwrap().trim_start_matches("# system\n");
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "tes.toml", system);
    let again = spinbath(&["report", "--config", &config]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&spinbath(&[])), 2);
    assert_eq!(code(&spinbath(&["analytic"])), 2);
    assert_eq!(code(&spinbath(&["analytic", "--preset", "tes", "--config", "x.toml"])), 2);
    assert_eq!(code(&spinbath(&["analytic", "--preset", "tes", "--tmax", "soon"])), 2);
}

#[test]
fn invalid_input_exits_3() {
    assert_eq!(code(&spinbath(&["analytic", "--preset", "tms"])), 3);
    assert_eq!(code(&spinbath(&["analytic", "--preset", "benzene"])), 3);
    assert_eq!(code(&spinbath(&["analytic", "--preset", "tes", "--dt", "0"])), 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "name = \"x\"\ncenter_gamma_hz = 0.0\n[[groups]]\nj_center_hz = 1.0\n");
    let out = spinbath(&["analytic", "--config", &bad]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("groups[0].count"), "{}", stderr(&out));
    let broken = write(dir.path(), "broken.toml", "name = \n");
    let out = spinbath(&["analytic", "--config", &broken]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));
}

#[test]
fn missing_file_exits_4() {
    assert_eq!(code(&spinbath(&["analytic", "--config", "/nonexistent/system.toml"])), 4);
}

#[test]
fn oversized_oracle_exits_6() {
    assert_eq!(code(&spinbath(&["oracle", "--preset", "tes", "--tmax", "0.01"])), 6);
}

#[test]
fn nonrwa_without_parts_exits_7() {
    assert_eq!(code(&spinbath(&["nonrwa", "--preset", "tes-virtual-13c", "--tmax", "0.01"])), 7);
}
