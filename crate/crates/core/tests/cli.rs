use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sehasel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sehasel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const DC: &str = "[scenario]\nkind = DC_DECAY\nduration = 2\n";

#[test]
fn simulate_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "dc.cfg", DC);
    let out_dir = dir.path().join("out");
    let out = sehasel(&[
        "simulate",
        &config,
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("drop_fraction: "));

    let trace = fs::read_to_string(out_dir.join("dc_decay.csv")).unwrap();
    assert!(trace.starts_with("t,u_i,u_o,mag_cmd,x_b,x_a,target,load_force,disturbance\n"));
    assert_eq!(trace.lines().count(), 2002);
    let report = fs::read_to_string(out_dir.join("dc_decay.report.txt")).unwrap();
    assert_eq!(report, stdout);
}

#[test]
fn fit_recovers_decay_from_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "dc.cfg", DC);
    let out_dir = dir.path().join("out");
    assert!(
        sehasel(&["simulate", &config, "--out-dir", out_dir.to_str().unwrap()])
            .status
            .success()
    );
    let trace = out_dir.join("dc_decay.csv");
    let out = sehasel(&[
        "fit",
        trace.to_str().unwrap(),
        "--column",
        "u_o",
        "--magnitude",
        "6000",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let p: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("p_hat: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((p + 0.5).abs() < 1e-6, "{p}");
    assert!(text.contains("identifiable_c1: false"));
}

#[test]
fn seed_changes_noisy_trace_only_when_different() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[scenario]\nkind = TRACK\nduration = 0.5\n[plant]\nsensor_noise_sd = 1e-5\n";
    let config = write(dir.path(), "track.cfg", cfg);
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        assert!(sehasel(&[
            "simulate",
            &config,
            "--seed",
            seed,
            "--out-dir",
            out.to_str().unwrap()
        ])
        .status
        .success());
        fs::read(out.join("track.csv")).unwrap()
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn envelope_and_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "dc.cfg", DC);
    let out = sehasel(&["envelope", &config, "--frequency", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("k1: 5.31209373e-1"), "{text}");

    let out = sehasel(&["calibrate-p", "0.065", "80", &config]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("p: -"));
}

#[test]
fn sweep_requires_sweep_kind() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "dc.cfg", DC);
    let out = sehasel(&["sweep", &config]);
    assert_eq!(out.status.code(), Some(1));

    let hyst = write(
        dir.path(),
        "h.cfg",
        "[scenario]\nkind = HYSTERESIS_SWEEP\nduration = 1\n[sweep]\nsteps = 10\n",
    );
    let out = sehasel(&["sweep", &hyst]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("max_output_strain: "));
}

#[test]
fn validation_errors_exit_one_and_list_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.cfg",
        "[scenario]\nkind = TRACK\nduration = -1\n[plant]\nspring_k = 0\nwobble = 3\n",
    );
    let out = sehasel(&["simulate", &config]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    for needle in ["scenario.duration", "plant.wobble"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
    assert_eq!(sehasel(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        sehasel(&["calibrate-p", "1.5", "10", &config]).status.code(),
        Some(1)
    );
}

#[test]
fn unreachable_calibration_fails_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "dc.cfg", DC);
    let out = sehasel(&["calibrate-p", "0.99", "0.001", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("at most"));
}
