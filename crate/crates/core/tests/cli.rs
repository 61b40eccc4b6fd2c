use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfwm::config::ExperimentConfig;

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference_42C.json")
}

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> String {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

const REFERENCE_FLAGS: [&str; 16] = [
    "--singles-stokes-hz",
    "8000",
    "--singles-antistokes-hz",
    "10000",
    "--coincidence-hz",
    "18.5",
    "--eta-stokes",
    "0.21",
    "--eta-antistokes",
    "0.22",
    "--background-stokes-hz",
    "200",
    "--background-antistokes-hz",
    "2200",
    "--window-ns",
    "2.916",
];

#[test]
fn budget_inversion_json() {
    let mut args = vec![
        "budget",
        "--format",
        "json",
        "--g2-cross",
        "124",
        "--g2-ss",
        "1.6",
        "--g2-asas",
        "1.74",
    ];
    args.extend(REFERENCE_FLAGS);
    let o = bench(&args);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mode"], "solved");
    assert!((v["pair_rate_hz"].as_f64().unwrap() - 395.384).abs() < 1e-3);
    assert!((v["coincidence_hz"].as_f64().unwrap() - 18.5).abs() < 1e-9);
    assert!((v["cs_factor"].as_f64().unwrap() - 5523.0).abs() < 1.0);
    assert!((v["g2_heralded"].as_f64().unwrap() - 0.02806).abs() < 1e-5);
}

#[test]
fn budget_forward_from_config() {
    let cfg = config_path();
    let o = bench(&["budget", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("mode: forward\n"));
    assert!(text.contains("g2_peak: 84.33"), "{text}");
}

#[test]
fn budget_csv_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("budget.csv");
    let mut args = vec!["budget", "--format", "csv", "--out", out.to_str().unwrap()];
    args.extend(REFERENCE_FLAGS);
    let o = bench(&args);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn exit_codes() {
    let mut zero_c: Vec<&str> = vec!["budget"];
    zero_c.extend(REFERENCE_FLAGS);
    zero_c[6] = "0";
    let o = bench(&zero_c);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let mut bad_eta: Vec<&str> = vec!["budget"];
    bad_eta.extend(REFERENCE_FLAGS);
    bad_eta[8] = "1.5";
    assert_eq!(code(&bench(&bad_eta)), 2);

    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&ExperimentConfig::reference().to_json()).unwrap();
    v["budget"]["pair_rate_hz_typo"] = serde_json::json!(1.0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    assert_eq!(
        code(&bench(&["budget", "--config", bad.to_str().unwrap()])),
        2
    );

    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&bench(&["budget", "--config", missing.to_str().unwrap()])),
        4
    );

    let mut cfg = ExperimentConfig::reference();
    cfg.simulation.max_events = Some(10);
    let capped = write_config(dir.path(), "capped.json", &cfg);
    let out = dir.path().join("s.bin");
    assert_eq!(
        code(&bench(&[
            "simulate",
            "--config",
            &capped,
            "--out",
            out.to_str().unwrap()
        ])),
        3
    );
}

#[test]
fn simulate_then_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let cfg = cfg.to_str().unwrap();
    let stream = dir.path().join("s.bin");
    let hist = dir.path().join("h.csv");
    let o = bench(&[
        "simulate",
        "--config",
        cfg,
        "--duration-s",
        "20",
        "--seed",
        "3",
        "--out",
        stream.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sim: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let records = sim["records"].as_u64().unwrap();
    assert_eq!(std::fs::metadata(&stream).unwrap().len(), 16 + 9 * records);

    let o = bench(&[
        "correlate",
        "--stream",
        stream.to_str().unwrap(),
        "--config",
        cfg,
        "--duration-s",
        "20",
        "--auto",
        "--out",
        hist.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g2 = r["g2_peak"].as_f64().unwrap();
    assert!(g2 > 40.0 && g2 < 200.0, "{g2}");
    assert!(r["note"].is_null());
    // 20 s holds only a few hundred pairs; the width is a rough estimate.
    let bw = r["bandwidth_mhz"].as_f64().unwrap();
    assert!(bw > 150.0 && bw < 1500.0, "{bw}");
    // The 486 ps autocorrelation zero bins hold well under one count here.
    assert!(r["g2_ss"].is_number() && r["g2_asas"].is_number());
    let tail = r["g2_tail"].as_f64().unwrap();
    assert!(
        (tail - 1.0).abs() < 3.0 * r["g2_tail_stderr"].as_f64().unwrap(),
        "{tail}"
    );

    let csv = std::fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("tau_seconds,counts,g2,stderr\n"));
    assert_eq!(csv.lines().count(), 1 + 500);
}

#[test]
fn correlate_uncorrelated_streams_notes_flat_g2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference();
    cfg.budget.pair_rate_hz = Some(0.0);
    cfg.simulation.duration_s = 5.0;
    let path = write_config(dir.path(), "flat.json", &cfg);
    let stream = dir.path().join("flat.bin");
    assert_eq!(
        code(&bench(&[
            "simulate",
            "--config",
            &path,
            "--out",
            stream.to_str().unwrap()
        ])),
        0
    );
    let o = bench(&[
        "correlate",
        "--stream",
        stream.to_str().unwrap(),
        "--config",
        &path,
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r["g2_peak"].is_null());
    assert!(r["note"].as_str().unwrap().contains("no correlation peak"));
}

#[test]
fn two_file_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for (p, seed) in [(&a, "1"), (&b, "2")] {
        let o = bench(&[
            "simulate",
            "--config",
            cfg,
            "--duration-s",
            "2",
            "--seed",
            seed,
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    let o = bench(&[
        "correlate",
        "--stream",
        a.to_str().unwrap(),
        "--stream2",
        b.to_str().unwrap(),
        "--duration-s",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r["g2_peak"].is_null());
}

#[test]
fn truncated_stream_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let stream = dir.path().join("s.bin");
    let o = bench(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--duration-s",
        "0.01",
        "--out",
        stream.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let mut bytes = std::fs::read(&stream).unwrap();
    let whole = (bytes.len() - 16) / 9;
    assert!(whole > 2);
    bytes.truncate(bytes.len() - 5);
    std::fs::write(&stream, &bytes).unwrap();
    let o = bench(&["correlate", "--stream", stream.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    let offset = 16 + 9 * (whole - 1);
    assert!(err.contains(&format!("offset {offset}")), "{err}");
}

#[test]
fn tiny_simulation_is_a_valid_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference();
    cfg.budget.noise_stokes_hz = 10.0;
    cfg.budget.noise_antistokes_hz = 10.0;
    cfg.budget.competing_stokes_hz = None;
    cfg.budget.competing_antistokes_hz = None;
    cfg.budget.background_stokes_hz = 1.0;
    cfg.budget.background_antistokes_hz = 1.0;
    let path = write_config(dir.path(), "quiet.json", &cfg);
    let stream = dir.path().join("q.bin");
    let o = bench(&[
        "simulate",
        "--config",
        &path,
        "--duration-s",
        "0.001",
        "--out",
        stream.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let len = std::fs::metadata(&stream).unwrap().len();
    assert!(len >= 16 && (len - 16).is_multiple_of(9));
}

#[test]
fn sweep_rows_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let out = dir.path().join("sweep.csv");
    let args = [
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "displacement",
        "--start",
        "-3",
        "--stop",
        "7",
        "--steps",
        "11",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ];
    let first = bench(&args);
    assert_eq!(code(&first), 0);
    let text = stdout(&first);
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with(
        "displacement_mm,M_S_hz,M_AS_hz,coincidence_hz,g2_peak,g2_corrected,bandwidth_mhz,flag\n"
    ));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    assert_eq!(stdout(&bench(&args)), text);

    let o = bench(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "power",
        "--start",
        "5",
        "--stop",
        "1",
        "--steps",
        "3",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_flags_infeasible_rows() {
    let cfg = config_path();
    let o = bench(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--axis",
        "temperature",
        "--start",
        "-50",
        "--stop",
        "60",
        "--steps",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(
        rows[1].starts_with("-50,,,,,,,\"infeasible: "),
        "{}",
        rows[1]
    );
}

#[test]
fn every_subcommand_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let cfg = cfg.to_str().unwrap();
    let run_twice = |args: &[&str]| {
        let (a, b) = (bench(args), bench(args));
        assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    };
    run_twice(&["budget", "--config", cfg, "--format", "json"]);

    let (s1, s2) = (dir.path().join("1.bin"), dir.path().join("2.bin"));
    for s in [&s1, &s2] {
        run_twice(&[
            "simulate",
            "--config",
            cfg,
            "--duration-s",
            "1",
            "--seed",
            "9",
            "--out",
            s.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());

    run_twice(&[
        "correlate",
        "--stream",
        s1.to_str().unwrap(),
        "--config",
        cfg,
        "--duration-s",
        "1",
        "--auto",
        "--format",
        "csv",
    ]);
}
