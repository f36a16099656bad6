use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pens(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pens")).args(args).current_dir(cwd).output().expect("spawn pens")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn assert_single_line_error(o: &Output) {
    assert!(!o.status.success());
    let err = stderr(o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
}

const SMALL: &str = "N=16\nL=25.132741228718345\nt_end=0.2\nsample_every=0.05\n";

#[test]
fn dry_run_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.cfg"), "").unwrap();
    let o = pens(&["run", "empty.cfg", "--dry-run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for line in ["d=2", "N=64", "dt_max=0.05", "cfl_safety=0.4", "preset=coupled-small", "epsilon=0.01", "m=2.5", "s=1.25"] {
        assert!(text.lines().any(|l| l == line), "missing {line} in\n{text}");
    }
    let again = pens(&["run", "--dry-run"], dir.path());
    assert_eq!(stdout(&again), text);
}

#[test]
fn run_is_deterministic_and_diagnosable() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    let a = pens(&["run", "small.cfg", "--out-dir", "a"], dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    let b = pens(&["run", "small.cfg", "--out-dir", "b"], dir.path());
    assert!(b.status.success());
    let csv_a = fs::read(dir.path().join("a/series.csv")).unwrap();
    assert_eq!(csv_a, fs::read(dir.path().join("b/series.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("t,D,D_int,E,"));
    assert_eq!(text.lines().count(), 1 + 5);

    let d = pens(&["diagnose", "a/final.snap"], dir.path());
    assert!(d.status.success(), "{}", stderr(&d));
    let table = stdout(&d);
    assert!(table.lines().next().unwrap().starts_with("t\t0.2"));
    assert!(table.lines().any(|l| l.starts_with("l2_v\t")));
}

#[test]
fn zero_velocity_run_has_zero_energy_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z.cfg"), format!("{SMALL}preset=zero-velocity\nchannels=E,l2_v\n")).unwrap();
    let o = pens(&["run", "z.cfg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,E,l2_v"));
    assert!(lines.all(|l| l.split(',').skip(1).all(|v| v == "0.0")));
}

#[test]
fn fit_decay_emits_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,l2_v\n");
    for i in 0..40 {
        let t = 1.0 + i as f64;
        csv.push_str(&format!("{t},{}\n", t.powf(-0.5)));
    }
    fs::write(dir.path().join("s.csv"), csv).unwrap();
    let o = pens(&["fit-decay", "s.csv", "--window", "2,40", "--channels", "l2_v"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ch = &v["channels"][0];
    assert_eq!(ch["channel"], "l2_v");
    assert!((ch["exponent"].as_f64().unwrap() + 0.5).abs() < 1e-12);
    assert_eq!(ch["expected"].as_f64().unwrap(), -0.5);
    assert_eq!(ch["pass"], true);
    for key in ["window", "residual"] {
        assert!(ch.get(key).is_some());
    }
}

#[test]
fn envelope_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = pens(&["envelope", "--d", "2", "--k", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["exponent"].as_f64().unwrap() + 1.0).abs() < 0.01);
}

#[test]
fn compare_mild_small_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    let o = pens(&["compare-mild", "small.cfg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["final_relative_v"].as_f64().unwrap() < 1e-4);
}

#[test]
fn failures_are_single_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "m=2.5\ns=2.6\n").unwrap();
    let o = pens(&["run", "bad.cfg", "--dry-run"], dir.path());
    assert_single_line_error(&o);
    assert!(stderr(&o).contains("line 2") && stderr(&o).contains("s must lie in (m-2, m-1]"));

    fs::write(dir.path().join("junk.snap"), b"NOPE0000000000000000000000000000").unwrap();
    let o = pens(&["diagnose", "junk.snap"], dir.path());
    assert_single_line_error(&o);
    assert!(stderr(&o).contains("PENS"));

    assert_single_line_error(&pens(&["diagnose", "missing.snap"], dir.path()));
    assert_single_line_error(&pens(&["envelope", "--profile", "boxcar"], dir.path()));
    assert_single_line_error(&pens(&["run", "--bogus"], dir.path()));
}
